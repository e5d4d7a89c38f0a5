"""Reading samples and histograms, run configuration, and output writers.

Input formats (UTF-8, comma separated, header row required):

* samples:    ``time,value``
* histograms: ``time,bin_lo,bin_hi,count``

Outputs are long-format CSV with floats written in shortest round-trip form,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .core import (CdfRep, QuantileGrid, QuantileRep, SupportInterval,
                   empirical_quantiles, quantile_from_cdf)
from .errors import AllZeroCounts, BandwidthTooSmall, ConfigError, EmptyGroup, ParseError
from .frechet import KernelSpec, TimeIndexedData

SAMPLES_HEADER = ("time", "value")
HISTOGRAM_HEADER = ("time", "bin_lo", "bin_hi", "count")


def _open(source) -> IO[str]:
    if hasattr(source, "read"):
        return source
    return open(source, newline="", encoding="utf-8")


def _read_rows(source, header: Sequence[str]) -> list[tuple[int, list[float]]]:
    fh = _open(source)
    try:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise EmptyGroup("input has no header row") from None
        if [c.strip().lower() for c in first] != list(header):
            raise ParseError(f"expected header {','.join(header)}, got {','.join(first)}", 1)
        rows = []
        for raw in reader:
            line = reader.line_num
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(raw)}", line)
            try:
                vals = [float(c) for c in raw]
            except ValueError:
                raise ParseError(f"non-numeric value in {raw!r}", line) from None
            if not all(np.isfinite(vals)):
                raise ParseError(f"non-finite value in {raw!r}", line)
            rows.append((line, vals))
        return rows
    finally:
        if fh is not source:
            fh.close()


@dataclass(frozen=True, eq=False)
class SampleTable:
    times: np.ndarray
    groups: tuple[np.ndarray, ...]
    n_rows: int


def read_samples(source) -> SampleTable:
    rows = _read_rows(source, SAMPLES_HEADER)
    if not rows:
        raise EmptyGroup("sample file has no data rows")
    by_time: dict[float, list[float]] = {}
    for _, (t, v) in rows:
        by_time.setdefault(t, []).append(v)
    times = np.array(sorted(by_time))
    return SampleTable(times, tuple(np.array(by_time[t]) for t in times), len(rows))


def ingest_samples(source, grid: QuantileGrid = QuantileGrid(1000),
                   support: SupportInterval | None = None,
                   clip: bool = False) -> tuple[TimeIndexedData, dict]:
    """Group ``time,value`` rows by time and take empirical quantiles.

    Without ``support`` the interval spanned by all values is used. Returns
    the data (sorted by time) and a manifest with row and group counts.
    """
    table = read_samples(source)
    if support is None:
        lo = min(g.min() for g in table.groups)
        hi = max(g.max() for g in table.groups)
        support = SupportInterval(float(lo), float(hi) if hi > lo else float(lo) + 1.0)
    dists = [empirical_quantiles(g, grid, support, clip=clip) for g in table.groups]
    manifest = {"rows": table.n_rows, "times": int(table.times.size),
                "support": [support.lo, support.hi], "grid_m": grid.m}
    return TimeIndexedData(table.times, dists), manifest


def write_samples(data: TimeIndexedData, target) -> None:
    """Write each distribution's grid quantiles as ``time,value`` rows.

    Re-ingesting with the same grid and support reproduces ``data``.
    """
    rows = ((t, v) for t, d in zip(data.times, data.dists) for v in d.values)
    write_csv(target, SAMPLES_HEADER, rows)


@dataclass(frozen=True, eq=False)
class Histogram:
    time: float
    lo: np.ndarray
    hi: np.ndarray
    count: np.ndarray

    def __post_init__(self):
        if not (self.lo.shape == self.hi.shape == self.count.shape) or self.lo.size == 0:
            raise ParseError(f"histogram at time {self.time} has mismatched or empty bins")
        if np.any(self.hi <= self.lo):
            raise ParseError(f"histogram at time {self.time} has a bin with hi <= lo")
        if np.any(self.lo[1:] < self.hi[:-1]):
            raise ParseError(f"histogram at time {self.time} has overlapping bins")
        if np.any(self.count < 0):
            raise ParseError(f"histogram at time {self.time} has a negative count")

    @property
    def total(self) -> float:
        return float(self.count.sum())

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def density(self) -> np.ndarray:
        """Bin heights ``count / (total * width)``."""
        if not self.total > 0:
            raise AllZeroCounts(f"histogram at time {self.time} has no mass")
        return self.count / (self.total * self.widths)


@dataclass(frozen=True, eq=False)
class HistogramSeries:
    histograms: tuple[Histogram, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([h.time for h in self.histograms])

    @property
    def support(self) -> SupportInterval:
        return SupportInterval(float(min(h.lo[0] for h in self.histograms)),
                               float(max(h.hi[-1] for h in self.histograms)))


def read_histograms(source) -> HistogramSeries:
    rows = _read_rows(source, HISTOGRAM_HEADER)
    if not rows:
        raise EmptyGroup("histogram file has no data rows")
    by_time: dict[float, list[list[float]]] = {}
    for _, (t, lo, hi, c) in rows:
        by_time.setdefault(t, []).append([lo, hi, c])
    hists = []
    for t in sorted(by_time):
        b = np.array(sorted(by_time[t]))
        hists.append(Histogram(t, b[:, 0], b[:, 1], b[:, 2]))
    return HistogramSeries(tuple(hists))


def local_linear_smooth(x, y, at, bandwidth: float, kernel: KernelSpec = KernelSpec()) -> np.ndarray:
    """Local linear regression of ``y`` on ``x`` evaluated at ``at``.

    Where the local design is singular (a single point in the window) the
    local-constant fit is used. Raises :class:`BandwidthTooSmall` if some
    evaluation point sees no data.
    """
    x, y, at = (np.asarray(a, dtype=float) for a in (x, y, at))
    d = x[None, :] - at[:, None]
    k = kernel(d / bandwidth)
    s0, s1, s2 = k.sum(1), (k * d).sum(1), (k * d * d).sum(1)
    t0, t1 = (k * y).sum(1), (k * d * y).sum(1)
    if np.any(s0 <= 0):
        raise BandwidthTooSmall(f"smoothing bandwidth {bandwidth:g} leaves points without data")
    det = s0 * s2 - s1 * s1
    linear = det > 1e-10 * s0 * s2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(linear, (s2 * t0 - s1 * t1) / det, t0 / s0)


def histogram_to_quantile(hist: Histogram, grid: QuantileGrid,
                          support: SupportInterval | None = None,
                          bandwidth: float | None = None, fine_size: int = 2000,
                          kernel: KernelSpec = KernelSpec()) -> QuantileRep:
    """Smooth bin heights into a density, integrate and invert.

    Heights at bin midpoints are smoothed by local linear regression onto a
    fine cell grid over ``support`` (default bandwidth: twice the median bin
    width), clipped at zero and renormalised. Cells outside the histogram's
    own bin range get zero density. The density is then treated as
    constant on each fine cell, so its CDF is piecewise linear.
    """
    support = support or SupportInterval(float(hist.lo[0]), float(hist.hi[-1]))
    heights = hist.density()
    if bandwidth is None:
        bandwidth = 2.0 * float(np.median(hist.widths))
    mids = hist.midpoints
    if mids.size >= 3:
        near = np.abs(mids[None, :] - mids[:, None]) < bandwidth
        if near.sum(1).max() < 3:
            raise BandwidthTooSmall(
                f"bandwidth {bandwidth:g} never covers three bin midpoints")
    edges = np.linspace(support.lo, support.hi, fine_size + 1)
    centres = 0.5 * (edges[:-1] + edges[1:])
    covered = (centres >= hist.lo[0]) & (centres <= hist.hi[-1])
    dens = np.zeros_like(centres)
    dens[covered] = np.maximum(
        local_linear_smooth(mids, heights, centres[covered], bandwidth, kernel), 0.0)
    mass = dens * np.diff(edges)
    total = mass.sum()
    if not total > 0:
        raise AllZeroCounts(f"smoothed density at time {hist.time} vanishes")
    cdf = np.r_[0.0, np.cumsum(mass / total)]
    assert abs(cdf[-1] - 1.0) < 1e-9, "smoothed density lost mass"
    cdf[-1] = 1.0
    cdf = np.minimum(np.maximum.accumulate(cdf), 1.0)
    return quantile_from_cdf(CdfRep(edges, cdf, support), grid, support)


def ingest_histograms(source, grid: QuantileGrid = QuantileGrid(1000),
                      support: SupportInterval | None = None,
                      bandwidth: float | None = None,
                      kernel: KernelSpec = KernelSpec()) -> tuple[TimeIndexedData, dict]:
    """Each time point is smoothed independently; bin layouts may differ across times."""
    series = read_histograms(source)
    support = support or series.support
    dists = [histogram_to_quantile(h, grid, support, bandwidth, kernel=kernel)
             for h in series.histograms]
    manifest = {"times": len(dists), "bins": int(sum(h.lo.size for h in series.histograms)),
                "support": [support.lo, support.hi], "grid_m": grid.m}
    return TimeIndexedData(series.times, dists), manifest


# ----------------------------------------------------------------- config


@dataclass
class RunConfig:
    grid_m: int = 1000
    support: tuple[float, float] | None = None
    kernel: str = "epanechnikov"
    bandwidth: float | None = None
    h_candidates: list[float] | None = None
    delta: float | None = None
    deltas: list[float] | None = None
    linearize_b: float | None = None
    hist_bandwidth: float | None = None
    seed: int = 1
    endpoint_margin: float | None = None
    times: list[float] | None = None
    n_times: int = 51

    def __post_init__(self):
        if self.support is not None:
            self.support = tuple(float(s) for s in self.support)
            if len(self.support) != 2 or not self.support[0] < self.support[1]:
                raise ConfigError(f"support must be LO,HI with LO < HI, got {self.support}")
        if int(self.grid_m) != self.grid_m or self.grid_m < 1:
            raise ConfigError(f"grid_m must be a positive integer, got {self.grid_m}")
        for name in ("bandwidth", "delta", "linearize_b", "hist_bandwidth", "endpoint_margin"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in ("h_candidates", "deltas"):
            v = getattr(self, name)
            if v is not None and (not v or min(v) <= 0):
                raise ConfigError(f"{name} must be a non-empty list of positive values")
        if self.n_times < 1:
            raise ConfigError("n_times must be positive")
        KernelSpec(self.kernel)

    @property
    def grid(self) -> QuantileGrid:
        return QuantileGrid(int(self.grid_m))

    @property
    def support_interval(self) -> SupportInterval | None:
        return SupportInterval(*self.support) if self.support else None

    @classmethod
    def from_file(cls, path) -> RunConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def merged(self, overrides: dict) -> RunConfig:
        d = asdict(self)
        d.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(d)

    def hash(self) -> str:
        return config_hash(asdict(self))


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


# ----------------------------------------------------------------- writers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(target, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    if hasattr(target, "write"):
        target.write(buf.getvalue())
    else:
        Path(target).write_text(buf.getvalue(), encoding="utf-8")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__
    return {"wtgrad": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command: str, config: dict, inputs: Sequence[str] = (),
                   outputs: Sequence[str] = (), extra: dict | None = None) -> Path:
    """``manifest.json``: command, input/output digests, config and its hash, seed, versions."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "inputs": {os.path.basename(p): file_digest(p) for p in inputs},
        "outputs": {os.path.basename(p): file_digest(p) for p in sorted(outputs)},
        "config": config,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "versions": versions(),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path
