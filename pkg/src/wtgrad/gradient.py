"""Wasserstein temporal gradient estimation.

The estimator is the difference quotient ``(Q_{t+D} o F_t - id) / D`` of two
local Fréchet regression fits. In quantile coordinates at the fit for ``t``
this is simply ``(Q_{t+D}(u_j) - Q_t(u_j)) / D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (QuantileRep, TangentVector, _check_grids, cdf_from_quantile,
                   linearize_cdf, quantile_from_cdf)
from .errors import LengthMismatch, OutOfSupport, TimeOutOfRange, WtgError
from .frechet import KernelSpec, TimeIndexedData, local_frechet_curve


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    t: float
    delta: float
    ref: QuantileRep
    vector: TangentVector

    def physical(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x, tau)`` pairs with ``x = Q_ref(u_j)``."""
        return self.ref.values, self.vector.qcoord_values


def _check_times(ts: np.ndarray, lo: float, hi: float) -> None:
    bad = (ts < lo) | (ts > hi)
    if bad.any():
        raise TimeOutOfRange(f"time {ts[bad][0]:.6g} outside observed range [{lo:.6g}, {hi:.6g}]")


def wtg_curve(data: TimeIndexedData, ts, delta: float, h: float,
              kernel: KernelSpec = KernelSpec(), b: float | None = None,
              scheme: str = "forward", check_range: bool = True,
              time_range: tuple[float, float] | None = None) -> list[GradientEstimate]:
    """Gradient estimates at each time in ``ts``.

    ``scheme="central"`` uses ``(Q_{t+D} - Q_{t-D}) / (2D)`` instead of the
    forward quotient. With ``check_range`` off, fits may extrapolate past the
    observed times as long as the kernel window stays non-degenerate.
    """
    if not delta > 0:
        raise WtgError(f"delta must be positive, got {delta}")
    if scheme not in ("forward", "central"):
        raise WtgError(f"unknown difference scheme {scheme!r}")
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if check_range:
        lo, hi = time_range or data.time_range
        _check_times(ts, lo, hi)
        _check_times(ts + delta, lo, hi)
        if scheme == "central":
            _check_times(ts - delta, lo, hi)

    if scheme == "forward":
        fits = local_frechet_curve(data, np.r_[ts, ts + delta], h, kernel)
        base, ahead, behind, denom = fits[:ts.size], fits[ts.size:], fits[:ts.size], delta
    else:
        fits = local_frechet_curve(data, np.r_[ts, ts + delta, ts - delta], h, kernel)
        n = ts.size
        base, ahead, behind, denom = fits[:n], fits[n:2 * n], fits[2 * n:], 2.0 * delta

    if b is not None:
        grid = data.grid
        relin = lambda q: quantile_from_cdf(linearize_cdf(q, b), grid, q.support)  # noqa: E731
        base = [relin(q) for q in base]
        ahead = [relin(q) for q in ahead]
        behind = base if scheme == "forward" else [relin(q) for q in behind]

    out = []
    for t, ref, hi_fit, lo_fit in zip(ts, base, ahead, behind):
        vec = TangentVector(ref.grid, (hi_fit.values - lo_fit.values) / denom)
        out.append(GradientEstimate(float(t), float(delta), ref, vec))
    return out


def wtg_estimate(data: TimeIndexedData, t: float, delta: float, h: float,
                 kernel: KernelSpec = KernelSpec(), b: float | None = None,
                 **kwargs) -> GradientEstimate:
    """Difference-quotient gradient estimate at a single time."""
    return wtg_curve(data, [t], delta, h, kernel, b, **kwargs)[0]


def eval_gradient_at_x(g: GradientEstimate, x):
    """Physical gradient ``tau(x)``: read the quantile-coordinate vector at ``F_ref(x)``."""
    s = g.ref.support
    x = np.asarray(x, dtype=float)
    if not np.all(s.contains(x)):
        raise OutOfSupport(f"x outside [{s.lo}, {s.hi}]")
    u = cdf_from_quantile(g.ref).evaluate(x)
    out = np.interp(u, g.ref.grid.nodes, g.vector.qcoord_values)
    return float(out) if out.ndim == 0 else out


def discrepancy(est: GradientEstimate | TangentVector, truth_ref: QuantileRep,
                truth_vec: TangentVector) -> float:
    """Squared transported error ``||P tau_hat - tau||^2`` at the true base point."""
    v = est.vector if isinstance(est, GradientEstimate) else est
    _check_grids(v.grid, truth_ref.grid, truth_vec.grid)
    d = v.qcoord_values - truth_vec.qcoord_values
    return float(np.mean(d * d))


def delta_stability_scan(data: TimeIndexedData, t: float, deltas: Sequence[float], h: float,
                         kernel: KernelSpec = KernelSpec(),
                         **kwargs) -> list[tuple[float, float]]:
    """Squared change between gradient estimates at consecutive increments.

    Entry ``k`` pairs ``deltas[k]`` with the discrepancy between the
    estimates at ``deltas[k]`` and ``deltas[k + 1]``; the last increment has
    no successor and is omitted. All estimates share the base fit at ``t``.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 2:
        raise WtgError("a stability scan needs at least two increments")
    if np.any(np.diff(deltas) <= 0):
        raise WtgError("increments must be strictly increasing")
    ests = [wtg_estimate(data, t, d, h, kernel, **kwargs) for d in deltas]
    return [(float(deltas[k]), discrepancy(ests[k].vector, ests[k].ref, ests[k + 1].vector))
            for k in range(deltas.size - 1)]


def default_deltas(data: TimeIndexedData) -> np.ndarray:
    lo, hi = data.time_range
    step = (hi - lo) / (len(data) - 1)
    return step * np.array([1e-3, 1e-2, 1e-1, 1.0])


def choose_delta(data: TimeIndexedData, ts, h: float, deltas: Sequence[float] | None = None,
                 kernel: KernelSpec = KernelSpec(), tolerance: float = 0.1) -> float:
    """Smallest increment whose mean instability over ``ts`` is within 10% of the minimum.

    Times where some increment would step outside the observed range are
    skipped; if none remain, the smallest increment is returned.
    """
    deltas = np.sort(np.asarray(default_deltas(data) if deltas is None else deltas, dtype=float))
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    lo, hi = data.time_range
    usable = ts[(ts >= lo) & (ts + deltas[-1] <= hi)]
    if usable.size == 0 or deltas.size < 2:
        return float(deltas[0])
    inst = np.mean([[v for _, v in delta_stability_scan(data, t, deltas, h, kernel)]
                    for t in usable], axis=0)
    # rounding-level instabilities (exact or static flows) all count as minimal
    floor = 1e-12 * (data.support.width / max(hi - lo, np.finfo(float).tiny)) ** 2
    ok = inst <= inst.min() * (1.0 + tolerance) + floor
    return float(deltas[:-1][ok][0])


RANK_LABELS = ("falling", "stationary", "rising")


def rank_dynamics(traj_times, traj_values, gradients: Sequence[GradientEstimate],
                  eps: float | None = None) -> list[str]:
    """Classify rank movement of a trajectory ``g(t)`` against the flow.

    ``g'(t) > tau_t(g(t))`` means ``g`` climbs in rank ("rising"), ``<`` means
    "falling"; differences within ``eps`` (default ``1e-6 * diam(D)``) are
    "stationary". ``g'`` comes from central differences (one-sided at the ends).
    """
    T = np.asarray(traj_times, dtype=float)
    G = np.asarray(traj_values, dtype=float)
    if T.shape != G.shape or T.size != len(gradients):
        raise LengthMismatch(f"{T.size} times, {G.size} values, {len(gradients)} gradients")
    if T.size < 2:
        raise WtgError("need at least two trajectory points to differentiate")
    if not all(math.isclose(t, g.t, rel_tol=0, abs_tol=1e-12) for t, g in zip(T, gradients)):
        raise LengthMismatch("trajectory times do not match gradient times")
    if eps is None:
        eps = 1e-6 * gradients[0].ref.support.width
    dg = np.gradient(G, T)
    tau = np.array([eval_gradient_at_x(g, x) for g, x in zip(gradients, G)])
    diff = dg - tau
    return [RANK_LABELS[int(np.sign(d)) + 1] if abs(d) > eps else "stationary" for d in diff]


def rank_dynamics_table(traj_times, traj_values, gradients: Sequence[GradientEstimate],
                        eps: float | None = None) -> list[dict]:
    labels = rank_dynamics(traj_times, traj_values, gradients, eps)
    dg = np.gradient(np.asarray(traj_values, float), np.asarray(traj_times, float))
    return [dict(t=float(t), value=float(v), dvalue=float(d),
                 tau=float(eval_gradient_at_x(g, v)), status=s)
            for t, v, d, g, s in zip(traj_times, traj_values, dg, gradients, labels)]
