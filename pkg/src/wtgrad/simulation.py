"""Simulation study on a truncated-Gaussian distribution flow.

Target flow: ``nu(t) = N_[0,1](mean_t, sd_t^2)`` with ``mean_t = 0.1 + 0.8 t``
and ``sd_t = 0.6 + 0.2 sin(10 pi t)``. Observed distributions are random
pushforwards of the target through the distortion maps
``D_a(x) = x - sin(a x) / |a|`` with ``a`` uniform on ``{+-10pi, ..., +-14pi}``.
Estimates are scored by the average discrepancy over the time nodes
``t_k = (2k - 1) / 198``, k = 1..99.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import normal
from .core import (QuantileGrid, QuantileRep, SupportInterval, TangentVector,
                   empirical_quantiles, pushforward_monotone)
from .errors import (InvalidProbability, NoAdmissibleBandwidth, NumericalOverflow, OutOfSupport,
                     WtgError, ZeroFrequency)
from .frechet import KernelSpec, TimeIndexedData, cv_select, default_bandwidth_grid, weight_matrix
from .gradient import GradientEstimate, discrepancy, wtg_curve

logger = logging.getLogger(__name__)

UNIT = SupportInterval(0.0, 1.0)
FREQUENCIES = np.pi * np.array([-14, -13, -12, -11, -10, 10, 11, 12, 13, 14], dtype=float)
# midpoints of 99 equal cells of [0, 1]
AD_TIMES = (2.0 * np.arange(1, 100) - 1.0) / 198.0
SUMMARY_QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass(frozen=True)
class TruncatedGaussianParams:
    mu: float
    sigma: float
    interval: SupportInterval = UNIT

    def __post_init__(self):
        if not self.sigma > 0:
            raise WtgError(f"sigma must be positive, got {self.sigma}")

    @property
    def alpha(self) -> float:
        return (self.interval.lo - self.mu) / self.sigma

    @property
    def beta(self) -> float:
        return (self.interval.hi - self.mu) / self.sigma


def _tn_quantile(mu, sigma, u, lo=0.0, hi=1.0):
    # broadcasting over parameters and probabilities
    pa = normal.cdf((lo - mu) / sigma)
    pb = normal.cdf((hi - mu) / sigma)
    return np.clip(mu + sigma * normal.ppf(pa + u * (pb - pa)), lo, hi)


def truncnorm_quantile(p: TruncatedGaussianParams, u):
    """``mu + sigma * Phi^-1(Phi(alpha) + u (Phi(beta) - Phi(alpha)))``."""
    u = np.asarray(u, dtype=float)
    if not np.all((u > 0) & (u < 1)):
        raise InvalidProbability("quantile level must lie in (0, 1)")
    out = _tn_quantile(p.mu, p.sigma, u, p.interval.lo, p.interval.hi)
    return float(out) if out.ndim == 0 else out


def truncnorm_cdf(p: TruncatedGaussianParams, x):
    x = np.clip(np.asarray(x, dtype=float), p.interval.lo, p.interval.hi)
    pa, pb = normal.cdf(p.alpha), normal.cdf(p.beta)
    out = (normal.cdf((x - p.mu) / p.sigma) - pa) / (pb - pa)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


class TruncatedGaussianFlow:
    """Mean and standard deviation paths of the study flow, with time derivatives."""

    def mean(self, t):
        return 0.1 + 0.8 * np.asarray(t, dtype=float)

    def sd(self, t):
        return 0.6 + 0.2 * np.sin(10.0 * np.pi * np.asarray(t, dtype=float))

    def dmean(self, t):
        return 0.8 + 0.0 * np.asarray(t, dtype=float)

    def dsd(self, t):
        return 2.0 * np.pi * np.cos(10.0 * np.pi * np.asarray(t, dtype=float))

    def params(self, t: float) -> TruncatedGaussianParams:
        return TruncatedGaussianParams(float(self.mean(t)), float(self.sd(t)))

    def quantile(self, t, u):
        return _tn_quantile(self.mean(t), self.sd(t), u)

    def distribution(self, t: float, grid: QuantileGrid) -> QuantileRep:
        return QuantileRep(grid, self.quantile(t, grid.nodes), UNIT)


FLOW = TruncatedGaussianFlow()


def flow_params(t: float) -> TruncatedGaussianParams:
    if not 0.0 <= t <= 1.0:
        raise WtgError(f"flow is defined on [0, 1], got t={t}")
    return FLOW.params(t)


def wtg_closed_form(t: float, x, flow: TruncatedGaussianFlow = FLOW, tiny: float = 1e-300):
    """Exact gradient ``(dQ_t/dt)(F_t(x))`` of a truncated-Gaussian flow on [0, 1].

    With ``z = mean/sd`` and ``w = F(x) Phi(beta) + (1 - F(x)) Phi(alpha)``::

        tau(x) = mean' + (x - mean) sd'/sd
                 - sd [F(x) (sd'/sd^2 + z') phi(beta) + (1 - F(x)) z' phi(alpha)]
                   / phi(Phi^-1(w))

    where the bracket carries the derivative of ``beta = (1 - mean)/sd``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all((x >= 0.0) & (x <= 1.0)):
        raise OutOfSupport("the flow lives on [0, 1]")
    mu, sd = float(flow.mean(t)), float(flow.sd(t))
    dmu, dsd = float(flow.dmean(t)), float(flow.dsd(t))
    a, b = -mu / sd, (1.0 - mu) / sd
    Pa, Pb = normal.cdf(a), normal.cdf(b)
    F = np.clip((normal.cdf((x - mu) / sd) - Pa) / (Pb - Pa), 0.0, 1.0)
    dz = (dmu * sd - mu * dsd) / sd ** 2
    num = F * (dsd / sd ** 2 + dz) * normal.pdf(b) + (1.0 - F) * dz * normal.pdf(a)
    w = np.clip(F * Pb + (1.0 - F) * Pa, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    den = normal.pdf(normal.ppf(w))
    if np.any(den < tiny):
        raise NumericalOverflow("normal density at the inverted level underflows")
    out = dmu + (x - mu) * dsd / sd - sd * num / den
    return float(out) if out.ndim == 0 else out


def true_gradient(t: float, grid: QuantileGrid,
                  flow: TruncatedGaussianFlow = FLOW) -> tuple[QuantileRep, TangentVector]:
    """Target distribution at ``t`` and its gradient in quantile coordinates."""
    ref = flow.distribution(t, grid)
    return ref, TangentVector(grid, wtg_closed_form(t, ref.values, flow))


def distortion(a: float, x):
    """``D_a(x) = x - sin(a x) / |a|``, nondecreasing in ``x``."""
    if a == 0:
        raise ZeroFrequency("distortion frequency must be nonzero")
    x = np.asarray(x, dtype=float)
    return x - np.sin(a * x) / abs(a)


@dataclass(frozen=True)
class SimConfig:
    n_dists: int
    n_obs: int
    delta: float
    m: int = 200
    h_candidates: tuple[float, ...] | None = None
    replicates: int = 20
    seed: int = 1

    def __post_init__(self):
        if self.n_dists < 3 or self.n_obs < 1 or self.m < 1 or self.replicates < 1:
            raise WtgError(f"invalid simulation size in {self}")
        if not self.delta > 0:
            raise WtgError(f"delta must be positive, got {self.delta}")
        if self.h_candidates is not None:
            object.__setattr__(self, "h_candidates", tuple(float(h) for h in self.h_candidates))
            if not self.h_candidates or min(self.h_candidates) <= 0:
                raise WtgError("bandwidth candidates must be positive")

    @property
    def grid(self) -> QuantileGrid:
        return QuantileGrid(self.m)


def _stream(seed: int, replicate: int, purpose: int = 0) -> np.random.Generator:
    # counter-based generator keyed by (seed, replicate, purpose)
    key = np.random.SeedSequence([seed, replicate, purpose]).generate_state(2, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class SimDataset:
    data: TimeIndexedData
    truth: tuple[QuantileRep, ...]
    frequencies: np.ndarray
    samples: np.ndarray


def generate_dataset(cfg: SimConfig, replicate: int) -> SimDataset:
    """One replicate of the study data; a pure function of ``(cfg, replicate)``."""
    rng = _stream(cfg.seed, replicate)
    N, n, grid = cfg.n_dists, cfg.n_obs, cfg.grid
    T = rng.uniform(0.0, 1.0, size=N)
    a = rng.choice(FREQUENCIES, size=N)
    U = rng.uniform(0.0, 1.0, size=(N, n))
    while np.any(U == 0.0):
        U[U == 0.0] = rng.uniform(0.0, 1.0, size=int(np.sum(U == 0.0)))

    mu, sd = FLOW.mean(T)[:, None], FLOW.sd(T)[:, None]
    X = np.clip(distortion_rows(a, _tn_quantile(mu, sd, U)), 0.0, 1.0)
    truth = tuple(pushforward_monotone(FLOW.distribution(t, grid), lambda x, ai=ai: distortion(ai, x))
                  for t, ai in zip(T, a))
    dists = [empirical_quantiles(x, grid, UNIT, clip=True) for x in X]
    return SimDataset(TimeIndexedData(T, dists), truth, a, X)


def distortion_rows(a: np.ndarray, X: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)[:, None]
    return X - np.sin(a * X) / np.abs(a)


def average_discrepancy(estimates: Sequence[GradientEstimate | TangentVector],
                        truths: Sequence[tuple[QuantileRep, TangentVector]]) -> float:
    """Mean over nodes of the squared transported gradient error.

    Summation is exactly rounded, so the value does not depend on node order.
    """
    if len(estimates) != len(truths) or not estimates:
        raise WtgError(f"{len(estimates)} estimates for {len(truths)} truth nodes")
    return math.fsum(discrepancy(e, ref, vec) for e, (ref, vec) in zip(estimates, truths)) / len(estimates)


_TRUTH_CACHE: dict[int, list[tuple[QuantileRep, TangentVector]]] = {}


def ad_truths(grid: QuantileGrid) -> list[tuple[QuantileRep, TangentVector]]:
    if grid.m not in _TRUTH_CACHE:
        _TRUTH_CACHE[grid.m] = [true_gradient(t, grid) for t in AD_TIMES]
    return _TRUTH_CACHE[grid.m]


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    ad: float
    bandwidth: float
    error: str | None = None


def run_replicate(cfg: SimConfig, replicate: int, kernel: KernelSpec = KernelSpec()) -> ReplicateResult:
    """Generate, pick ``h`` by cross validation, estimate at the AD nodes, score.

    Candidates whose window degenerates at some AD node (or node + delta) are
    dropped before cross validation.
    """
    try:
        ds = generate_dataset(cfg, replicate)
        cands = cfg.h_candidates or tuple(default_bandwidth_grid(ds.data.times))
        # only bandwidths that can fit at every time the AD needs
        need = np.concatenate([AD_TIMES, AD_TIMES + cfg.delta])
        cands = [h for h in cands if weight_matrix(ds.data.times, need, h, kernel)[1].all()]
        if not cands:
            raise NoAdmissibleBandwidth("no candidate bandwidth covers every AD time")
        fold_seed = int(np.random.SeedSequence([cfg.seed, replicate, 1]).generate_state(1)[0])
        h = cv_select(ds.data, cands, kernel, seed=fold_seed).bandwidth
        # fits at t_k + delta may lie past the last observed time; the
        # local-linear fit extrapolates there
        ests = wtg_curve(ds.data, AD_TIMES, cfg.delta, h, kernel, check_range=False)
        return ReplicateResult(replicate, average_discrepancy(ests, ad_truths(cfg.grid)), h)
    except WtgError as exc:
        logger.warning("replicate %d of %s failed: %s", replicate, cfg, exc)
        return ReplicateResult(replicate, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


@dataclass
class CaseSummary:
    config: SimConfig
    results: list[ReplicateResult] = field(default_factory=list)

    @property
    def ad(self) -> np.ndarray:
        return np.array([r.ad for r in self.results if r.error is None])

    @property
    def n_failed(self) -> int:
        return sum(r.error is not None for r in self.results)

    def quantiles(self) -> dict[float, float]:
        ad = self.ad
        if ad.size == 0:
            return {q: math.nan for q in SUMMARY_QUANTILES}
        return dict(zip(SUMMARY_QUANTILES, np.quantile(ad, SUMMARY_QUANTILES).tolist()))


@dataclass
class ExperimentSummary:
    cases: list[CaseSummary]

    def rows(self) -> list[tuple[int, int, float]]:
        return [(c, r.replicate, r.ad) for c, case in enumerate(self.cases) for r in case.results]

    def to_dict(self) -> dict:
        out = []
        for c, case in enumerate(self.cases):
            cfg = asdict(case.config)
            q = case.quantiles()
            out.append(dict(
                case=c, config=cfg,
                n_ok=int(case.ad.size), n_failed=case.n_failed,
                quantiles={f"{k:g}": v for k, v in q.items()},
                median_bandwidth=float(np.nanmedian([r.bandwidth for r in case.results]))
                if case.ad.size else math.nan,
            ))
        return {"cases": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _task(args):
    cfg, replicate = args
    return run_replicate(cfg, replicate)


def run_experiment(cases: Sequence[SimConfig], replicates: int | None = None,
                   workers: int = 1) -> ExperimentSummary:
    """Run every case for ``replicates`` replicates (default: each case's own count).

    Results are ordered by (case, replicate) whatever the worker count.
    """
    tasks = [(cfg, r) for cfg in cases for r in range(replicates or cfg.replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=1))
    else:
        results = [_task(t) for t in tasks]
    summaries = [CaseSummary(cfg) for cfg in cases]
    it = iter(results)
    for s in summaries:
        s.results = [next(it) for _ in range(replicates or s.config.replicates)]
    return ExperimentSummary(summaries)


def _paper_cases(replicates: int, m: int = 200) -> list[SimConfig]:
    return [SimConfig(N, n, 10.0 ** -k / (N - 1), m=m, replicates=replicates)
            for N in (21, 501) for n in (25, 500) for k in range(4)]


PRESETS: dict[str, list[SimConfig]] = {
    "paper-small": [SimConfig(21, 25, 1 / 20, m=100, replicates=4),
                    SimConfig(21, 25, 1 / 200, m=100, replicates=4)],
    "desk-trend": [SimConfig(21, 25, 1 / 20, replicates=20),
                   SimConfig(101, 200, 1 / 100, replicates=20),
                   SimConfig(201, 500, 1 / 200, replicates=20)],
    "paper-full": _paper_cases(500),
}


def preset(name: str, seed: int | None = None, replicates: int | None = None) -> list[SimConfig]:
    if name not in PRESETS:
        raise WtgError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    out = []
    for cfg in PRESETS[name]:
        kw = asdict(cfg)
        if seed is not None:
            kw["seed"] = seed
        if replicates is not None:
            kw["replicates"] = replicates
        out.append(SimConfig(**kw))
    return out
