"""Local Fréchet regression of distributions on time.

The weighted Wasserstein Fréchet mean with (possibly negative) local-linear
weights is the metric projection of the weighted quantile average onto the
set of nondecreasing vectors with entries inside the support. Under the
midpoint-rule norm that projection is pool-adjacent-violators followed by
clipping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .core import QuantileGrid, QuantileRep, SupportInterval, _check_pair
from .errors import DegenerateWindow, LengthMismatch, NoAdmissibleBandwidth, WtgError

logger = logging.getLogger(__name__)


def _epanechnikov(x):
    return np.where(np.abs(x) < 1.0, 0.75 * (1.0 - x * x), 0.0)


def _biweight(x):
    return np.where(np.abs(x) < 1.0, 0.9375 * (1.0 - x * x) ** 2, 0.0)


def _triangular(x):
    return np.where(np.abs(x) < 1.0, 1.0 - np.abs(x), 0.0)


def _uniform(x):
    return np.where(np.abs(x) < 1.0, 0.5, 0.0)


KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "epanechnikov": _epanechnikov,
    "biweight": _biweight,
    "triangular": _triangular,
    "uniform": _uniform,
}


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric probability density supported on [-1, 1]."""

    kind: str = "epanechnikov"

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise WtgError(f"unknown kernel {self.kind!r}; choose from {sorted(KERNELS)}")

    def __call__(self, x) -> np.ndarray:
        return KERNELS[self.kind](np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class TimeIndexedData:
    times: np.ndarray
    dists: tuple[QuantileRep, ...]

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "dists", tuple(self.dists))
        if times.ndim != 1 or times.size != len(self.dists):
            raise LengthMismatch(f"{times.size} times for {len(self.dists)} distributions")
        if not self.dists:
            raise WtgError("no distributions")
        if not np.all(np.isfinite(times)):
            raise WtgError("times must be finite")
        for d in self.dists[1:]:
            _check_pair(self.dists[0], d)

    def __len__(self) -> int:
        return len(self.dists)

    def __eq__(self, other):
        if not isinstance(other, TimeIndexedData):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.dists, other.dists)))

    @property
    def grid(self) -> QuantileGrid:
        return self.dists[0].grid

    @property
    def support(self) -> SupportInterval:
        return self.dists[0].support

    @property
    def time_range(self) -> tuple[float, float]:
        return float(self.times.min()), float(self.times.max())

    @cached_property
    def quantile_matrix(self) -> np.ndarray:
        """(N, m) matrix of quantile values, row ``i`` for distribution ``i``."""
        Q = np.vstack([d.values for d in self.dists])
        Q.setflags(write=False)
        return Q

    def subset(self, idx) -> TimeIndexedData:
        idx = np.asarray(idx)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
        return TimeIndexedData(self.times[idx], [self.dists[i] for i in idx])


@dataclass(frozen=True, eq=False)
class LocalWeights:
    t: float
    h: float
    weights: np.ndarray


def weight_matrix(times, ts, h: float, kernel: KernelSpec = KernelSpec(),
                  rel_eps: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Local-linear weights for many evaluation times at once.

    Returns ``(W, ok)`` where ``W[k, i]`` is ``s(T_i, ts[k])`` and ``ok[k]`` is
    False where the window at ``ts[k]`` is degenerate (fewer than two distinct
    times with positive kernel mass, or ``sigma0^2`` below ``rel_eps`` times
    ``kappa0 * kappa2``). Degenerate rows are zero.
    """
    if not h > 0:
        raise WtgError(f"bandwidth must be positive, got {h}")
    T = np.asarray(times, dtype=float)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    n = T.size
    d = T[None, :] - ts[:, None]
    k = kernel(d / h) / h
    k0 = k.sum(axis=1) / n
    k1 = (k * d).sum(axis=1) / n
    # centred second moment: sigma0^2 = k0 * c2 without the k0 k2 - k1^2 cancellation
    with np.errstate(divide="ignore", invalid="ignore"):
        dbar = np.where(k0 > 0, k1 / k0, 0.0)
    dc = d - dbar[:, None]
    c2 = (k * dc * dc).sum(axis=1) / n
    k2 = c2 + k1 * dbar
    sigma2 = k0 * c2

    inside = k > 0
    # distinct times in window: at least two differing positive-mass times
    tmin = np.where(inside, T[None, :], np.inf).min(axis=1)
    tmax = np.where(inside, T[None, :], -np.inf).max(axis=1)
    ok = (tmax > tmin) & (sigma2 > rel_eps * k0 * k2)

    with np.errstate(divide="ignore", invalid="ignore"):
        W = k / k0[:, None] * (1.0 - k1[:, None] * dc / c2[:, None])
    W[~ok] = 0.0
    return W, ok


def local_linear_weights(times, t: float, h: float,
                         kernel: KernelSpec = KernelSpec()) -> LocalWeights:
    """``s(T_i, t) = K_h(T_i - t) [k2 - k1 (T_i - t)] / sigma0^2``.

    The weights average to one and have zero first moment about ``t``.
    """
    W, ok = weight_matrix(times, [t], h, kernel)
    if not ok[0]:
        raise DegenerateWindow(f"fewer than two distinct times within bandwidth {h} of t={t}")
    return LocalWeights(float(t), float(h), W[0])


def pava(y) -> np.ndarray:
    """Least-squares nondecreasing fit (pool adjacent violators, unit weights)."""
    y = np.asarray(y, dtype=float)
    if y.size < 2 or np.all(np.diff(y) >= 0):
        return y.copy()
    sums: list[float] = []
    counts: list[int] = []
    for v in y.tolist():
        s, c = v, 1
        while sums and sums[-1] * c > s * counts[-1]:
            s += sums.pop()
            c += counts.pop()
        sums.append(s)
        counts.append(c)
    means = [s / c for s, c in zip(sums, counts)]
    return np.repeat(means, counts)


def project_monotone(y, lo: float, hi: float) -> np.ndarray:
    """L2 projection onto ``{x : x_1 <= ... <= x_m, lo <= x_j <= hi}``."""
    return np.clip(pava(y), lo, hi)


def weighted_average(W: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Rows of ``(W / N) @ Q``.

    Rows whose weights average to one (within 1e-10) are centred on their
    largest-weight distribution, so the average reproduces a distribution
    exactly when every row with nonzero weight equals it, whatever the
    rounding of ``sum(W) / N``.
    """
    W = np.atleast_2d(W)
    n = Q.shape[0]
    out = (W / n) @ Q
    unit = np.abs(W.sum(axis=1) / n - 1.0) <= 1e-10
    refs = np.argmax(np.abs(W), axis=1)
    for r in np.unique(refs[unit]):
        rows = unit & (refs == r)
        out[rows] = Q[r] + (W[rows] / n) @ (Q - Q[r])
    return out


def weighted_frechet_mean(weights: LocalWeights | np.ndarray, data: TimeIndexedData) -> QuantileRep:
    """Projection of ``(1/N) sum_i w_i Q_i`` onto monotone quantile functions on the support.

    For weights averaging to one this minimises ``(1/N) sum_i w_i d_W^2(P_i, p)``.
    """
    w = weights.weights if isinstance(weights, LocalWeights) else np.asarray(weights, dtype=float)
    if w.shape != (len(data),):
        raise LengthMismatch(f"{w.size} weights for {len(data)} distributions")
    s = data.support
    return QuantileRep(data.grid, project_monotone(weighted_average(w, data.quantile_matrix)[0], s.lo, s.hi), s)


def local_frechet_estimate(data: TimeIndexedData, t: float, h: float,
                           kernel: KernelSpec = KernelSpec()) -> QuantileRep:
    return weighted_frechet_mean(local_linear_weights(data.times, t, h, kernel), data)


def local_frechet_curve(data: TimeIndexedData, ts, h: float,
                        kernel: KernelSpec = KernelSpec()) -> list[QuantileRep]:
    """Fitted distributions at several times; raises on the first degenerate window."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    W, ok = weight_matrix(data.times, ts, h, kernel)
    if not ok.all():
        bad = ts[~ok][0]
        raise DegenerateWindow(f"fewer than two distinct times within bandwidth {h} of t={bad}")
    s = data.support
    Qbar = weighted_average(W, data.quantile_matrix)
    return [QuantileRep(data.grid, project_monotone(row, s.lo, s.hi), s) for row in Qbar]


def default_bandwidth_grid(times, n: int = 12) -> np.ndarray:
    """Log-spaced candidates from 1.5 x median gap to half the time range."""
    T = np.sort(np.asarray(times, dtype=float))
    gaps = np.diff(T)
    gaps = gaps[gaps > 0]
    if gaps.size == 0:
        raise WtgError("need at least two distinct times for a bandwidth grid")
    lo, hi = 1.5 * np.median(gaps), 0.5 * (T[-1] - T[0])
    if lo >= hi:
        return np.array([hi])
    return np.geomspace(lo, hi, n)


def cv_folds(n: int, seed: int = 0, n_folds: int = 10, loo_max: int = 30) -> list[np.ndarray]:
    """Leave-one-out for ``n <= loo_max``, otherwise seeded ``n_folds``-fold."""
    if n <= loo_max:
        return [np.array([i]) for i in range(n)]
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, n_folds)]


def cv_scores(data: TimeIndexedData, candidates: Sequence[float],
              kernel: KernelSpec = KernelSpec(), seed: int = 0, n_folds: int = 10,
              loo_max: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Cross-validation objective ``N^-1 sum_i d_W^2(nu_hat_{-i}(T_i), P_i)`` per candidate.

    A held-out point whose window degenerates contributes ``diam(D)^2``.
    Returns ``(scores, n_degenerate)``.
    """
    if len(data) < 3:
        raise WtgError("cross validation needs at least three distributions")
    cands = np.asarray(candidates, dtype=float)
    if cands.size == 0:
        raise WtgError("no candidate bandwidths")
    folds = cv_folds(len(data), seed, n_folds, loo_max)
    s = data.support
    penalty = s.width ** 2
    Q = data.quantile_matrix
    T = data.times
    scores = np.zeros(cands.size)
    n_bad = np.zeros(cands.size, dtype=int)
    for c, h in enumerate(cands):
        total = 0.0
        for fold in folds:
            train = np.ones(len(data), dtype=bool)
            train[fold] = False
            W, ok = weight_matrix(T[train], T[fold], h, kernel)
            Qbar = weighted_average(W, Q[train])
            # accumulate in index order so the sum does not depend on scheduling
            for row, i, good in zip(Qbar, fold, ok):
                if good:
                    fit = project_monotone(row, s.lo, s.hi)
                    total += float(np.mean((fit - Q[i]) ** 2))
                else:
                    total += penalty
                    n_bad[c] += 1
        scores[c] = total / len(data)
        if n_bad[c]:
            logger.info("bandwidth %.4g: %d degenerate held-out windows penalised", h, n_bad[c])
    return scores, n_bad


@dataclass(frozen=True)
class CVResult:
    bandwidth: float
    objective: float
    candidates: np.ndarray
    scores: np.ndarray
    n_degenerate: np.ndarray


def cv_select(data: TimeIndexedData, candidates: Sequence[float] | None = None,
              kernel: KernelSpec = KernelSpec(), seed: int = 0, n_folds: int = 10,
              loo_max: int = 30) -> CVResult:
    """Bandwidth minimising the CV objective; ties go to the smallest candidate.

    Scores within ``1e-12 * diam(D)^2`` of the minimum count as tied, so
    rounding noise in exactly-fitting data cannot decide the choice.
    """
    if candidates is None:
        candidates = default_bandwidth_grid(data.times)
    cands = np.asarray(candidates, dtype=float)
    scores, n_bad = cv_scores(data, cands, kernel, seed, n_folds, loo_max)
    if np.all(n_bad == len(data)):
        raise NoAdmissibleBandwidth("every candidate bandwidth degenerates at every held-out time")
    tied = scores <= scores.min() + 1e-12 * data.support.width ** 2
    best = np.flatnonzero(tied)[np.argmin(cands[tied])]
    return CVResult(float(cands[best]), float(scores[best]), cands, scores, n_bad)


def cv_bandwidth(data: TimeIndexedData, candidates: Sequence[float] | None = None,
                 kernel: KernelSpec = KernelSpec(), seed: int = 0) -> float:
    return cv_select(data, candidates, kernel, seed).bandwidth
