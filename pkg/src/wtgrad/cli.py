"""Command line interface.

Every subcommand writes plot-ready long-format CSV plus ``manifest.json`` into
``--out``. Settings come from ``--config FILE`` (JSON) and are overridden by
flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, WtgError
from .frechet import KernelSpec, TimeIndexedData, cv_select, local_frechet_curve
from .gradient import choose_delta, default_deltas, delta_stability_scan, rank_dynamics_table, wtg_curve
from .io import (RunConfig, ingest_histograms, ingest_samples, read_samples, write_csv,
                 write_manifest)
from .simulation import PRESETS, preset, run_experiment

logger = logging.getLogger("wtgrad")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _times(text: str) -> list[float]:
    """``a,b,c`` or ``lo:hi:n``."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("time range must be lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        return np.linspace(lo, hi, n).tolist()
    return _floats(text)


def _add_run_flags(p: argparse.ArgumentParser, data_inputs: bool = True) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override it")
    if data_inputs:
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--samples", help="CSV with header time,value")
        src.add_argument("--histograms", help="CSV with header time,bin_lo,bin_hi,count")
    p.add_argument("--support", type=_floats, help="LO,HI of the common support")
    p.add_argument("--grid-m", type=int, dest="grid_m", help="quantile grid size (default 1000)")
    bw = p.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth", type=float, help="fixed regression bandwidth")
    bw.add_argument("--cv", action="store_true", help="choose the bandwidth by cross validation (default)")
    p.add_argument("--h-candidates", type=_floats, dest="h_candidates",
                   help="comma-separated bandwidth candidates for --cv")
    dl = p.add_mutually_exclusive_group()
    dl.add_argument("--delta", type=float, help="time increment of the difference quotient")
    dl.add_argument("--delta-scan", action="store_true", dest="delta_scan",
                    help="choose the increment by a stability scan (default)")
    p.add_argument("--deltas", type=_floats, help="increments to scan")
    p.add_argument("--kernel", choices=["epanechnikov", "biweight", "triangular", "uniform"])
    p.add_argument("--seed", type=int)
    p.add_argument("--linearize-b", type=float, dest="linearize_b",
                   help="CDF linearisation increment for the atomless variant")
    p.add_argument("--hist-bandwidth", type=float, dest="hist_bandwidth",
                   help="histogram smoothing bandwidth (default 2 x median bin width)")
    p.add_argument("--endpoint-margin", type=float, dest="endpoint_margin",
                   help="flag times closer than this to the data range ends (default: bandwidth)")
    p.add_argument("--times", type=_times, help="evaluation times: a,b,c or lo:hi:n")
    p.add_argument("--n-times", type=int, dest="n_times")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wtgrad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wtgrad {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-flow", help="fitted quantile curves on a time grid")
    _add_run_flags(p)
    p = sub.add_parser("gradient", help="Wasserstein temporal gradients on a time grid")
    _add_run_flags(p)
    p = sub.add_parser("cv-bandwidth", help="cross-validation objective per candidate bandwidth")
    _add_run_flags(p)
    p = sub.add_parser("delta-scan", help="gradient stability across time increments")
    _add_run_flags(p)
    p = sub.add_parser("rank-dynamics", help="rank movement of a trajectory against the flow")
    _add_run_flags(p)
    p.add_argument("--trajectory", required=True, help="CSV with header time,value")
    p = sub.add_parser("ingest-histogram", help="smooth histograms into quantile functions")
    _add_run_flags(p, data_inputs=False)
    p.add_argument("--histograms", required=True, help="CSV with header time,bin_lo,bin_hi,count")

    p = sub.add_parser("simulate", help="run the truncated-Gaussian simulation study")
    p.add_argument("--preset", default="paper-small", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--replicates", type=int, help="override the preset's replicate count")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True)
    return parser


def _config(args) -> RunConfig:
    base = RunConfig.from_file(args.config) if args.config else RunConfig()
    keys = ("support", "grid_m", "bandwidth", "h_candidates", "delta", "deltas", "kernel",
            "seed", "linearize_b", "hist_bandwidth", "endpoint_margin", "times", "n_times")
    overrides = {k: getattr(args, k, None) for k in keys}
    # explicit mode switches drop a fixed value inherited from the file
    if getattr(args, "cv", False):
        overrides["bandwidth"] = None
        base.bandwidth = None
    if getattr(args, "delta_scan", False):
        base.delta = None
    return base.merged(overrides)


def _load(args, cfg: RunConfig) -> tuple[TimeIndexedData, dict, str]:
    if getattr(args, "samples", None):
        data, info = ingest_samples(args.samples, cfg.grid, cfg.support_interval)
        return data, info, args.samples
    data, info = ingest_histograms(args.histograms, cfg.grid, cfg.support_interval,
                                   cfg.hist_bandwidth, KernelSpec(cfg.kernel))
    return data, info, args.histograms


def _bandwidth(data: TimeIndexedData, cfg: RunConfig) -> tuple[float, dict]:
    if cfg.bandwidth is not None:
        return cfg.bandwidth, {"bandwidth_source": "fixed"}
    res = cv_select(data, cfg.h_candidates, KernelSpec(cfg.kernel), seed=cfg.seed)
    return res.bandwidth, {"bandwidth_source": "cv", "cv_objective": res.objective}


def _eval_times(data: TimeIndexedData, cfg: RunConfig, delta: float = 0.0) -> np.ndarray:
    lo, hi = data.time_range
    if cfg.times is not None:
        return np.asarray(cfg.times, dtype=float)
    ts = np.linspace(lo, hi - delta, cfg.n_times)
    return ts


def _delta(data: TimeIndexedData, cfg: RunConfig, h: float) -> tuple[float, dict]:
    if cfg.delta is not None:
        return cfg.delta, {"delta_source": "fixed"}
    deltas = cfg.deltas or default_deltas(data).tolist()
    ts = cfg.times if cfg.times is not None else np.linspace(*data.time_range, cfg.n_times)
    d = choose_delta(data, ts, h, deltas, KernelSpec(cfg.kernel))
    return d, {"delta_source": "scan", "deltas_scanned": list(map(float, deltas))}


def cmd_estimate_flow(args, cfg: RunConfig, out: Path) -> dict:
    data, info, src = _load(args, cfg)
    h, meta = _bandwidth(data, cfg)
    ts = _eval_times(data, cfg)
    fits = local_frechet_curve(data, ts, h, KernelSpec(cfg.kernel))
    u = data.grid.nodes
    rows = ((t, uj, q) for t, f in zip(ts, fits) for uj, q in zip(u, f.values))
    write_csv(out / "flow.csv", ("t", "u", "quantile"), rows)
    return dict(inputs=[src], outputs=["flow.csv"], extra=dict(ingest=info, bandwidth=h, **meta))


def cmd_gradient(args, cfg: RunConfig, out: Path) -> dict:
    data, info, src = _load(args, cfg)
    h, meta = _bandwidth(data, cfg)
    delta, dmeta = _delta(data, cfg, h)
    ts = _eval_times(data, cfg, delta)
    ests = wtg_curve(data, ts, delta, h, KernelSpec(cfg.kernel), cfg.linearize_b)
    lo, hi = data.time_range
    margin = cfg.endpoint_margin if cfg.endpoint_margin is not None else h
    u = data.grid.nodes
    rows = []
    for g in ests:
        flag = (g.t - lo < margin) or (hi - (g.t + delta) < margin)
        x, tau = g.physical()
        rows.extend((g.t, uj, xj, tj, flag) for uj, xj, tj in zip(u, x, tau))
    write_csv(out / "gradient.csv", ("t", "u", "x", "tau", "endpoint_flag"), rows)
    return dict(inputs=[src], outputs=["gradient.csv"],
                extra=dict(ingest=info, bandwidth=h, delta=delta, endpoint_margin=margin,
                           **meta, **dmeta))


def cmd_cv_bandwidth(args, cfg: RunConfig, out: Path) -> dict:
    data, info, src = _load(args, cfg)
    res = cv_select(data, cfg.h_candidates, KernelSpec(cfg.kernel), seed=cfg.seed)
    write_csv(out / "cv.csv", ("h", "objective", "n_degenerate"),
              zip(res.candidates, res.scores, res.n_degenerate))
    print(f"bandwidth {res.bandwidth!r} objective {res.objective!r}")
    return dict(inputs=[src], outputs=["cv.csv"],
                extra=dict(ingest=info, bandwidth=res.bandwidth, cv_objective=res.objective))


def cmd_delta_scan(args, cfg: RunConfig, out: Path) -> dict:
    data, info, src = _load(args, cfg)
    h, meta = _bandwidth(data, cfg)
    deltas = np.sort(np.asarray(cfg.deltas or default_deltas(data), dtype=float))
    lo, hi = data.time_range
    ts = _eval_times(data, cfg, float(deltas[-1]))
    rows = []
    for t in ts:
        for d, inst in delta_stability_scan(data, t, deltas, h, KernelSpec(cfg.kernel)):
            rows.append((t, d, inst))
    write_csv(out / "delta_scan.csv", ("t", "delta", "instability"), rows)
    chosen = choose_delta(data, ts, h, deltas, KernelSpec(cfg.kernel))
    print(f"delta {chosen!r}")
    return dict(inputs=[src], outputs=["delta_scan.csv"],
                extra=dict(ingest=info, bandwidth=h, chosen_delta=chosen, **meta))


def cmd_rank_dynamics(args, cfg: RunConfig, out: Path) -> dict:
    data, info, src = _load(args, cfg)
    traj = read_samples(args.trajectory)
    if any(g.size != 1 for g in traj.groups):
        raise WtgError("trajectory needs exactly one value per time")
    tt = traj.times
    vals = np.array([g[0] for g in traj.groups])
    h, meta = _bandwidth(data, cfg)
    delta, dmeta = _delta(data, cfg, h)
    ests = wtg_curve(data, tt, delta, h, KernelSpec(cfg.kernel), cfg.linearize_b)
    table = rank_dynamics_table(tt, vals, ests)
    write_csv(out / "rank.csv", ("t", "value", "dvalue", "tau", "status"),
              ((r["t"], r["value"], r["dvalue"], r["tau"], r["status"]) for r in table))
    return dict(inputs=[src, args.trajectory], outputs=["rank.csv"],
                extra=dict(ingest=info, bandwidth=h, delta=delta, **meta, **dmeta))


def cmd_ingest_histogram(args, cfg: RunConfig, out: Path) -> dict:
    data, info = ingest_histograms(args.histograms, cfg.grid, cfg.support_interval,
                                   cfg.hist_bandwidth, KernelSpec(cfg.kernel))
    u = data.grid.nodes
    rows = ((t, uj, q) for t, d in zip(data.times, data.dists) for uj, q in zip(u, d.values))
    write_csv(out / "quantiles.csv", ("t", "u", "quantile"), rows)
    return dict(inputs=[args.histograms], outputs=["quantiles.csv"], extra=dict(ingest=info))


def cmd_simulate(args, out: Path) -> dict:
    cases = preset(args.preset, seed=args.seed, replicates=args.replicates)
    summary = run_experiment(cases, workers=args.workers)
    write_csv(out / "simulation.csv", ("case", "replicate", "ad"), summary.rows())
    (out / "summary.json").write_text(summary.to_json() + "\n", encoding="utf-8")
    for c, case in enumerate(summary.cases):
        q = case.quantiles()
        print(f"case {c} N={case.config.n_dists} n={case.config.n_obs} "
              f"delta={case.config.delta:.3g}: median AD {q[0.5]:.4g} "
              f"({case.n_failed} failed)")
    return dict(inputs=[], outputs=["simulation.csv", "summary.json"])


COMMANDS = {
    "estimate-flow": cmd_estimate_flow,
    "gradient": cmd_gradient,
    "cv-bandwidth": cmd_cv_bandwidth,
    "delta-scan": cmd_delta_scan,
    "rank-dynamics": cmd_rank_dynamics,
    "ingest-histogram": cmd_ingest_histogram,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            config = {"preset": args.preset, "seed": args.seed, "replicates": args.replicates,
                      "cases": [asdict(c) for c in preset(args.preset, args.seed, args.replicates)]}
            res = cmd_simulate(args, out)
        else:
            cfg = _config(args)
            config = asdict(cfg)
            res = COMMANDS[args.command](args, cfg, out)
        write_manifest(out, args.command, json.loads(json.dumps(config)),
                       res["inputs"], [str(out / o) for o in res["outputs"]], res.get("extra"))
    except (WtgError, ConfigError, OSError) as exc:
        print(f"wtgrad {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
