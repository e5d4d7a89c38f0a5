"""Quantile-grid representation of 1-D distributions and Wasserstein geometry.

A distribution on a compact interval is stored through its quantile function
sampled at the midpoints ``u_j = (2j - 1) / (2m)`` of a uniform partition of
(0, 1). Integrals over ``u`` use the midpoint rule, so the 2-Wasserstein
distance, tangent inner products and discrepancies all reduce to plain means
over the grid.

Tangent vectors are kept in quantile coordinates: entry ``j`` holds
``g(Q_ref(u_j))`` for the physical tangent function ``g``. Parallel transport
between base points is then the identity on the stored values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (EmptySample, GridMismatch, InvalidIncrement, OutOfSupport,
                     ValueOutsideSupport, WtgError)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SupportInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise WtgError("support endpoints must be finite")
        if not self.lo < self.hi:
            raise WtgError(f"support needs lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True)
class QuantileGrid:
    """Midpoint grid ``u_j = (2j - 1) / (2m)``, ``j = 1..m``."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise WtgError(f"grid size must be a positive integer, got {self.m}")

    @cached_property
    def nodes(self) -> np.ndarray:
        return _frozen((2.0 * np.arange(1, self.m + 1) - 1.0) / (2.0 * self.m))


@dataclass(frozen=True, eq=False)
class QuantileRep:
    grid: QuantileGrid
    values: np.ndarray
    support: SupportInterval

    def __post_init__(self):
        values = _frozen(self.values)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.m,):
            raise WtgError(f"expected {self.grid.m} quantile values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise WtgError("quantile values must be finite")
        if np.any(np.diff(values) < 0):
            raise WtgError("quantile values must be nondecreasing")
        if values[0] < self.support.lo or values[-1] > self.support.hi:
            raise ValueOutsideSupport(
                f"quantile values [{values[0]}, {values[-1]}] leave the support "
                f"[{self.support.lo}, {self.support.hi}]")

    def __eq__(self, other):
        if not isinstance(other, QuantileRep):
            return NotImplemented
        return (self.grid == other.grid and self.support == other.support
                and np.array_equal(self.values, other.values))

    @classmethod
    def from_function(cls, quantile: Callable[[np.ndarray], np.ndarray],
                      grid: QuantileGrid, support: SupportInterval) -> QuantileRep:
        return cls(grid, np.clip(quantile(grid.nodes), support.lo, support.hi), support)

    @classmethod
    def uniform(cls, lo: float, hi: float, grid: QuantileGrid,
                support: SupportInterval | None = None) -> QuantileRep:
        support = support or SupportInterval(lo, hi)
        return cls(grid, lo + (hi - lo) * grid.nodes, support)

    @cached_property
    def _extended(self) -> tuple[np.ndarray, np.ndarray]:
        # nodes padded with u = 0 and u = 1; end values continue the nearest
        # segment for half a cell, kept inside the support
        u, q = self.grid.nodes, self.values
        if q.size == 1:
            q0 = q1 = q[0]
        else:
            q0 = max(self.support.lo, q[0] - 0.5 * (q[1] - q[0]))
            q1 = min(self.support.hi, q[-1] + 0.5 * (q[-1] - q[-2]))
        return np.r_[0.0, u, 1.0], np.r_[q0, q, q1]

    def evaluate(self, u) -> np.ndarray:
        """Piecewise-linear quantile function at arbitrary ``u`` in [0, 1]."""
        uu, qq = self._extended
        return np.interp(u, uu, qq)

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True, eq=False)
class CdfRep:
    """Piecewise-linear CDF: 0 left of the first knot, 1 right of the last."""

    knots: np.ndarray
    cdf_values: np.ndarray
    support: SupportInterval | None = None

    def __post_init__(self):
        knots, vals = _frozen(self.knots), _frozen(self.cdf_values)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "cdf_values", vals)
        if knots.ndim != 1 or knots.shape != vals.shape or knots.size == 0:
            raise WtgError("knots and cdf values must be non-empty 1-D arrays of equal length")
        if np.any(np.diff(knots) <= 0):
            raise WtgError("CDF knots must be strictly increasing")
        if np.any(np.diff(vals) < 0) or vals[0] < 0 or vals[-1] != 1.0:
            raise WtgError("CDF values must be nondecreasing from >= 0 up to exactly 1")

    def evaluate(self, x) -> np.ndarray:
        return np.interp(x, self.knots, self.cdf_values, left=0.0, right=1.0)


@dataclass(frozen=True, eq=False)
class TangentVector:
    grid: QuantileGrid
    qcoord_values: np.ndarray
    # low-order part of an exact difference, set by log_map only; lets
    # exp_map undo log_map without rounding loss
    residual: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = _frozen(self.qcoord_values)
        object.__setattr__(self, "qcoord_values", vals)
        if vals.shape != (self.grid.m,):
            raise WtgError(f"expected {self.grid.m} tangent values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise WtgError("tangent values must be finite")
        if self.residual is not None:
            object.__setattr__(self, "residual", _frozen(self.residual))

    @classmethod
    def zeros(cls, grid: QuantileGrid) -> TangentVector:
        return cls(grid, np.zeros(grid.m))

    def __add__(self, other: TangentVector) -> TangentVector:
        _check_grids(self.grid, other.grid)
        return TangentVector(self.grid, self.qcoord_values + other.qcoord_values)

    def __sub__(self, other: TangentVector) -> TangentVector:
        _check_grids(self.grid, other.grid)
        return TangentVector(self.grid, self.qcoord_values - other.qcoord_values)

    def __mul__(self, c: float) -> TangentVector:
        return TangentVector(self.grid, c * self.qcoord_values)

    __rmul__ = __mul__


def _check_grids(*grids: QuantileGrid) -> None:
    if any(g != grids[0] for g in grids[1:]):
        raise GridMismatch(f"grids differ: {[g.m for g in grids]}")


def _check_pair(q1: QuantileRep, q2: QuantileRep) -> None:
    _check_grids(q1.grid, q2.grid)
    if q1.support != q2.support:
        raise GridMismatch(f"supports differ: {q1.support} vs {q2.support}")


def _mean_square(d: np.ndarray) -> float:
    return float(np.mean(d * d))


def empirical_quantiles(sample, grid: QuantileGrid, support: SupportInterval,
                        clip: bool = False) -> QuantileRep:
    """Order statistic ``X_(ceil(u_j n))`` at every grid node.

    Values outside ``support`` raise :class:`ValueOutsideSupport` unless
    ``clip`` is set, in which case they are moved to the nearest endpoint.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("cannot estimate quantiles from an empty sample")
    if not np.all(np.isfinite(x)):
        raise WtgError("sample contains non-finite values")
    outside = ~support.contains(x)
    if outside.any():
        if not clip:
            raise ValueOutsideSupport(
                f"{int(outside.sum())} sample values outside [{support.lo}, {support.hi}]")
        x = np.clip(x, support.lo, support.hi)
    x = np.sort(x)
    n = x.size
    idx = np.ceil(grid.nodes * n).astype(int) - 1
    return QuantileRep(grid, x[np.clip(idx, 0, n - 1)], support)


def cdf_from_quantile(q: QuantileRep, jump_width: float = 1e-9) -> CdfRep:
    """Right-continuous inverse ``F(x) = sup{u : Q(u) <= x}``.

    Strictly increasing stretches of ``Q`` invert exactly at the nodes. A flat
    stretch (an atom) becomes a steep segment of width at most
    ``jump_width * support.width`` ending at the atom.
    """
    uu, qq = q._extended
    starts = np.flatnonzero(np.r_[True, np.diff(qq) > 0])
    ends = np.r_[starts[1:] - 1, qq.size - 1]
    v = qq[starts]
    main_u = uu[ends]

    # flat runs after the first need a knot just left of the atom carrying
    # the left limit F(v-)
    flat = ends > starts
    flat[0] = False
    gap = np.r_[np.inf, np.diff(v)]
    eta = np.minimum(jump_width * q.support.width, 0.5 * gap)
    pre_x = np.where(flat, v - eta, np.nan)
    pre_u = np.where(flat, uu[starts], np.nan)

    x = np.column_stack([pre_x, v]).ravel()
    u = np.column_stack([pre_u, main_u]).ravel()
    keep = ~np.isnan(x)
    x, u = x[keep], u[keep]
    # rounding can collapse a pre-knot onto a neighbour; keep the larger value
    dup = np.r_[np.diff(x) <= 0, False]
    if dup.any():
        x, u = x[~dup], u[~dup]
    u = np.maximum.accumulate(u)
    u[-1] = 1.0
    return CdfRep(x, u, q.support)


def quantile_from_cdf(c: CdfRep, grid: QuantileGrid,
                      support: SupportInterval | None = None) -> QuantileRep:
    """Left-continuous inverse ``Q(u) = inf{x : F(x) >= u}`` at the grid nodes."""
    support = support or c.support
    if support is None:
        lo, hi = c.knots[0], c.knots[-1]
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        support = SupportInterval(float(lo), float(hi))
    u = grid.nodes
    x, F = c.knots, c.cdf_values
    k = np.searchsorted(F, u, side="left")
    km = np.maximum(k - 1, 0)
    denom = F[k] - F[km]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(denom > 0, (u - F[km]) / denom, 1.0)
    out = np.where(k == 0, x[0], x[km] + frac * (x[k] - x[km]))
    out = np.maximum.accumulate(np.clip(out, support.lo, support.hi))
    return QuantileRep(grid, out, support)


def wasserstein_distance(q1: QuantileRep, q2: QuantileRep) -> float:
    _check_pair(q1, q2)
    return float(np.sqrt(_mean_square(q1.values - q2.values)))


def transport_map_eval(source: QuantileRep, target: QuantileRep, x):
    """Optimal transport map ``Q_target(F_source(x))``."""
    _check_pair(source, target)
    x = np.asarray(x, dtype=float)
    if not np.all(source.support.contains(x)):
        raise OutOfSupport(f"x outside [{source.support.lo}, {source.support.hi}]")
    u = cdf_from_quantile(source).evaluate(x)
    out = target.evaluate(u)
    return float(out) if out.ndim == 0 else out


def _two_diff(b: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Knuth TwoSum on (b, -a): b - a == s + err exactly
    s = b - a
    bb = s - b
    err = (b - (s - bb)) + (-a - bb)
    return s, err


def log_map(ref: QuantileRep, target: QuantileRep) -> TangentVector:
    """``T_{ref -> target} - id`` in quantile coordinates."""
    _check_pair(ref, target)
    d, err = _two_diff(target.values, ref.values)
    return TangentVector(ref.grid, d, residual=err if np.any(err) else None)


def exp_map(ref: QuantileRep, v: TangentVector) -> QuantileRep:
    """Pushforward ``(g + id) # ref``.

    The candidate ``ref + v`` is clipped to the support; if it is not
    monotone, sorting it gives the quantile function of the pushforward.
    """
    _check_grids(ref.grid, v.grid)
    a, d = ref.values, v.qcoord_values
    cand = a + d
    if v.residual is not None:
        # compensated sum: recovers target exactly after log_map
        bb = cand - a
        r = (a - (cand - bb)) + (d - bb)
        cand = cand + (r + v.residual)
    cand = np.clip(cand, ref.support.lo, ref.support.hi)
    if np.any(np.diff(cand) < 0):
        cand = np.sort(cand)
    return QuantileRep(ref.grid, cand, ref.support)


def parallel_transport(v: TangentVector, source: QuantileRep, target: QuantileRep) -> TangentVector:
    """``g -> g o Q_source o F_target``; a no-op in quantile coordinates."""
    _check_grids(v.grid, source.grid, target.grid)
    return TangentVector(target.grid, v.qcoord_values, v.residual)


def tangent_inner(v1: TangentVector, v2: TangentVector, ref: QuantileRep) -> float:
    _check_grids(v1.grid, v2.grid, ref.grid)
    return float(np.mean(v1.qcoord_values * v2.qcoord_values))


def tangent_norm(v: TangentVector, ref: QuantileRep) -> float:
    _check_grids(v.grid, ref.grid)
    return float(np.sqrt(_mean_square(v.qcoord_values)))


def linearize_cdf(q: QuantileRep, b: float) -> CdfRep:
    """Atomless variant: the CDF sampled on an equidistant knot grid, linear in between.

    The knot count is ``ceil(width / b)``, so the realised increment is at
    most ``b`` and equals it whenever ``b`` divides the support width.
    """
    width = q.support.width
    if not (np.isfinite(b) and 0 < b < width):
        raise InvalidIncrement(f"increment must lie in (0, {width}), got {b}")
    n_cells = int(np.ceil(width / b - 1e-9))
    knots = np.linspace(q.support.lo, q.support.hi, n_cells + 1)
    vals = cdf_from_quantile(q).evaluate(knots)
    vals = np.maximum.accumulate(np.clip(vals, 0.0, 1.0))
    vals[-1] = 1.0
    return CdfRep(knots, vals, q.support)


def pushforward_monotone(q: QuantileRep, fn: Callable[[np.ndarray], np.ndarray],
                         support: SupportInterval | None = None) -> QuantileRep:
    """Quantiles of ``fn # q`` for nondecreasing ``fn``: ``fn o Q`` node-wise."""
    support = support or q.support
    vals = np.clip(fn(q.values), support.lo, support.hi)
    return QuantileRep(q.grid, vals, support)
