"""Command-line interface.

Exit codes: 0 success, 2 malformed input, 3 contract violation, 4 failed
gate. Gates are never implicit: a run only fails on a statistic when the
matching ``--gate-*`` flag is given. Every randomized subcommand requires
``--seed``.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import harness
from .behavior import DmaxBound, build_distance_matrix
from .control import run_control_loop, summary_json
from .errors import ContractError, GateFailure, ParseError
from .estimators import bound_report, graph_snd, ht_estimate, snd_full, snd_uniform
from .graphs import (
    build_bernoulli,
    build_complete,
    build_d_regular,
    build_knn,
    build_uniform_size,
    forwarding_index,
    is_connected,
    spectral_gap,
)
from .io import graph_to_json, format_graph_csv, load_distance_matrix, load_ensemble, load_graph, load_observation_batch

__all__ = ["main", "build_parser"]


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _range(text):
    lo, hi = _floats(text)
    return lo, hi


# ---------------------------------------------------------------------------
# output


def _emit(args, text):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(harness._jsonable(obj), indent=2, sort_keys=True) + "\n"


def _flat_csv(obj):
    flat = {}

    def walk(prefix, x):
        if isinstance(x, dict):
            for k, v in x.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        else:
            flat[prefix] = x

    walk("", harness._jsonable(obj))
    head = ",".join(flat)
    row = ",".join("" if v is None else repr(v) if isinstance(v, float) else str(v) for v in flat.values())
    return head + "\n" + row + "\n"


def _emit_cells(args, cells, cfg):
    if args.deterministic:
        for c in cells:
            c.timing = None
    if args.format == "csv":
        _emit(args, harness.results_to_csv(cells))
    else:
        _emit(args, harness.results_to_json(cells, cfg))
    if args.emit_plot_data:
        Path(args.emit_plot_data).write_text(harness.plot_data_csv(cells))


def _fail(message, cell):
    raise GateFailure(message, cell)


def _cell_name(c):
    return c.experiment + "[" + ",".join(f"{k}={v}" for k, v in c.key.items()) + "]"


# ---------------------------------------------------------------------------
# graph specs


def _graph_from_spec(spec, n, seed, dm=None, weight_mode="unit"):
    """``complete``, ``bernoulli:p``, ``uniform:m``, ``knn:k``, ``dregular:d`` or a file path."""
    kind, _, arg = spec.partition(":")
    if kind == "complete":
        return build_complete(n)
    if kind in ("bernoulli", "uniform", "dregular"):
        if seed is None:
            raise ContractError(f"graph {spec!r} is random: --seed is required")
        if kind == "bernoulli":
            return build_bernoulli(seed, n, float(arg), weight_mode)
        if kind == "uniform":
            return build_uniform_size(seed, n, int(arg))
        return build_d_regular(seed, n, int(arg))
    if kind == "knn":
        if dm is None:
            raise ContractError("knn graphs need a distance matrix (its rows are the points)")
        return build_knn(dm.values, int(arg))
    path = Path(spec)
    if not path.exists():
        raise ParseError(f"graph {spec!r} is neither a builder spec nor an existing file")
    return load_graph(path)


# ---------------------------------------------------------------------------
# subcommands


def cmd_snd(args):
    if args.matrix:
        dm = load_distance_matrix(args.matrix)
    elif args.policy and args.obs:
        dm = build_distance_matrix(load_ensemble(args.policy), load_observation_batch(args.obs))
    else:
        raise ContractError("give --matrix, or --policy together with --obs")
    g = _graph_from_spec(args.graph, dm.n, args.seed, dm, args.weight_mode)
    if args.estimator == "weighted":
        est = graph_snd(dm, g)
    elif args.estimator == "uniform":
        est = snd_uniform(dm, g)
    else:
        est = ht_estimate(dm, g)
    out = {"estimate": est.to_dict(), "value": est.value}
    if args.full:
        out["snd_full"] = snd_full(dm)
    if args.bounds:
        dmax = DmaxBound.of(dm, args.dmax).value
        out["bounds"] = bound_report(dm, g, delta=args.delta, dmax=dmax).to_dict()
    _emit(args, _flat_csv(out) if args.format == "csv" else _json(out))
    return 0


def cmd_graph(args):
    if args.action == "build":
        dm = load_distance_matrix(args.matrix) if args.matrix else None
        g = _graph_from_spec(args.spec, args.n if dm is None else dm.n, args.seed, dm, args.weight_mode)
        _emit(args, graph_to_json(g) if args.format == "json" else format_graph_csv(g))
        return 0
    g = load_graph(args.spec)
    info = {"graph": g.descriptor(), "connected": is_connected(g), "degrees": g.degrees().tolist()}
    if info["connected"] and g.unit_weights:
        fw = forwarding_index(g, "brute_exact" if args.exact else "route_upper")
        info["forwarding"] = fw.to_dict()
    deg = g.degrees()
    if g.unit_weights and g.num_edges and np.all(deg == deg[0]):
        info["spectral"] = spectral_gap(g).to_dict()
    _emit(args, _flat_csv(info) if args.format == "csv" else _json(info))
    return 0


def _source(args):
    spec = args.source
    if spec.startswith("file:"):
        return {"kind": "file", "path": spec[5:]}
    kind, _, rest = spec.partition(":")
    out = {"kind": kind}
    for item in filter(None, rest.split(",")):
        k, _, v = item.partition("=")
        try:
            out[k] = float(v) if "." in v or "e" in v else int(v)
        except ValueError:
            out[k] = v
    return out


def _config(args, kind, **grids):
    grids = {k: v for k, v in grids.items() if v is not None}
    return harness.ExperimentConfig(
        kind=kind,
        master_seed=args.seed,
        source=_source(args),
        jobs=args.jobs,
        timing=getattr(args, "timing", False) and not args.deterministic,
        output=args.out,
        **grids,
    )


def _check_cells(cells, stat, ok, label):
    for c in cells:
        value = c.stats.get(stat)
        if value is None or not ok(value):
            _fail(f"gate {label} failed: {stat}={value}", _cell_name(c))


VERIFY_DEFAULTS = {
    "recovery": {"n": (4,), "draws": 100},
    "unbiasedness": {"n": (8,), "draws": 2000},
    "concentration": {"n": (16,), "draws": 2000},
    "sandwich": {"n": (2, 3, 4, 5, 6), "draws": 50},
    "probabilistic": {"n": (50, 100), "draws": 500},
}


def cmd_verify(args):
    kind = {"sandwich": "distortion_sandwich"}.get(args.kind, args.kind)
    defaults = VERIFY_DEFAULTS.get(args.kind, {})
    if args.n is None:
        args.n = defaults.get("n")
    draws = args.draws if args.draws is not None else defaults.get("draws")
    grids = {"n": args.n, "p": args.p, "m": args.m, "d": args.d, "delta": args.delta}
    if draws is not None:
        grids["draws"] = draws
    if args.checkpoints:
        grids["checkpoints"] = tuple(args.checkpoints.split(","))
    cfg = _config(args, kind, **grids)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cells = harness.run_experiment(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _emit_cells(args, cells, cfg)
    if args.gate_max_rel_error is not None:
        _check_cells(cells, "max_rel_error", lambda v: v <= args.gate_max_rel_error, "--gate-max-rel-error")
    if args.gate_violation_rate is not None:
        for stat in ("violation_rate", "serfling_violation_rate"):
            if any(stat in c.stats for c in cells):
                _check_cells([c for c in cells if stat in c.stats], stat, lambda v: v <= args.gate_violation_rate, "--gate-violation-rate")
    if args.gate_z is not None:
        _check_cells(cells, "z", lambda v: v <= args.gate_z, "--gate-z")
    if args.gate_z_soft is not None:
        threshold, fraction = args.gate_z_soft
        share = np.mean([c.stats["z"] <= threshold for c in cells])
        if share < fraction:
            _fail(f"gate --gate-z-soft failed: only {share:.3f} of cells have z <= {threshold}", "all")
    if args.gate_slope is not None:
        raw, _ = harness.concentration_slope(cells)
        lo, hi = args.gate_slope
        if not lo <= raw <= hi:
            _fail(f"gate --gate-slope failed: p95 slope {raw:.4f} outside [{lo}, {hi}]", "all")
    if args.gate_hold_rate is not None:
        _check_cells(cells, "hold_rate", lambda v: v >= args.gate_hold_rate, "--gate-hold-rate")
    return 0


def cmd_ablate(args):
    cfg = _config(args, "expander_ablation", n=args.n, dmult=args.dmult, seeds=args.seeds, families=tuple(args.families.split(",")))
    cells = harness.run_experiment(cfg)
    _emit_cells(args, cells, cfg)
    reg = [c for c in cells if c.key["family"] == "dregular"]
    if args.gate_band_fraction is not None:
        share = np.mean([c.stats["in_band_1pct"] for c in reg]) if reg else 0.0
        if share < args.gate_band_fraction:
            _fail(f"gate --gate-band-fraction failed: {share:.3f} of d-regular cells in band", "dregular")
    if args.gate_spectral:
        _check_cells(reg, "spectral_bound_holds", bool, "--gate-spectral")
    return 0


def cmd_bench(args):
    if args.kind == "scaling":
        cfg = _config(args, "scaling", n=args.n, p=args.p, draws=args.draws)
        cells = harness.run_experiment(cfg)
    else:
        cfg = _config(args, "graph_build", n=args.n, draws=args.draws)
        cells = harness.run_experiment(cfg)
        if args.deterministic:
            for c in cells:
                c.timing = None
    _emit_cells(args, cells, cfg)
    if args.gate_ratio is not None:
        lo, hi = args.gate_ratio
        _check_cells(cells, "pooled_ratio", lambda v: lo <= v <= hi, "--gate-ratio")
    return 0


def cmd_control(args):
    summary, traces = run_control_loop(
        n=args.n,
        targets=args.targets,
        estimator=args.estimator,
        seeds=args.seeds,
        iterations=args.iterations,
        late_window=args.late_window,
        paired=args.paired,
        dim=args.dim,
        drift_sigma=args.drift_sigma,
        master_seed=args.seed,
        audit=not args.no_audit,
    )
    _emit(args, _flat_csv({k: v for k, v in summary.items() if k != "cells"}) if args.format == "csv" else summary_json(summary))
    if args.trace_dir:
        out = Path(args.trace_dir)
        out.mkdir(parents=True, exist_ok=True)
        for (arm, target, seed), tr in traces.items():
            (out / f"trace_{arm.replace(':', '-')}_{target:g}_{seed}.csv").write_text(tr.to_csv())
    arms = [summary["estimator"]] + ([summary["paired"]] if summary["paired"] else [])
    for arm in arms:
        if args.gate_tracking is not None and summary[f"{arm}.max_tracking_error"] >= args.gate_tracking:
            _fail(f"gate --gate-tracking failed: {summary[f'{arm}.max_tracking_error']:.5f}", arm)
        if args.gate_audit is not None and summary.get(f"{arm}.max_audit_error", 0.0) >= args.gate_audit:
            _fail(f"gate --gate-audit failed: {summary[f'{arm}.max_audit_error']:.5f}", arm)
    if args.gate_paired_sem is not None and summary["paired"]:
        mean, sem = summary["paired_reward_diff_mean"], summary["paired_reward_diff_sem"]
        if abs(mean) > args.gate_paired_sem * sem:
            _fail(f"gate --gate-paired-sem failed: |{mean:.3g}| > {args.gate_paired_sem} x {sem:.3g}", "paired")
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p, seed_required=True):
    p.add_argument("--seed", type=int, required=seed_required, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="report format (default json)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads; results do not depend on it")
    p.add_argument("--deterministic", action="store_true", help="drop wall-clock fields so output bytes are stable")
    p.add_argument("--emit-plot-data", metavar="FILE", help="also write tidy long-format CSV of every statistic")
    p.add_argument(
        "--source",
        default="gaussian",
        help="distance source: gaussian | categorical | metric | uniform | lowrank[:rank=2,rho_cap=2.0] | file:PATH",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="graphsnd", description="Graph-structured behavioral diversity estimates and experiments.")
    parser.add_argument("--config", help="flat JSON file of flag defaults (keys are flag names with underscores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("snd", help="estimate SND of a distance matrix or policy ensemble on a graph")
    p.add_argument("--matrix", help="distance matrix CSV")
    p.add_argument("--policy", help="policy ensemble JSON (with --obs)")
    p.add_argument("--obs", help="observation batch CSV (t,k,x...)")
    p.add_argument("--graph", default="complete", help="complete | bernoulli:p | uniform:m | knn:k | dregular:d | FILE")
    p.add_argument("--estimator", choices=("weighted", "uniform", "ht"), default="weighted", help="edge aggregation (default weighted)")
    p.add_argument("--weight-mode", choices=("unit", "ht"), default="unit", help="Bernoulli edge weights")
    p.add_argument("--seed", type=int, help="required for random graph builders")
    p.add_argument("--full", action="store_true", help="also report full SND")
    p.add_argument("--bounds", action="store_true", help="also report every applicable bound")
    p.add_argument("--delta", type=float, default=0.1, help="failure probability for radii")
    p.add_argument("--dmax", type=float, help="declared upper bound on distances (default: largest entry)")
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(fn=cmd_snd)

    p = sub.add_parser("graph", help="build a graph or describe a graph file")
    p.add_argument("action", choices=("build", "info"))
    p.add_argument("spec", help="builder spec (build) or graph file (info)")
    p.add_argument("--n", type=int, help="vertex count for builders")
    p.add_argument("--matrix", help="distance matrix supplying n (and knn points)")
    p.add_argument("--weight-mode", choices=("unit", "ht"), default="unit")
    p.add_argument("--exact", action="store_true", help="exact forwarding index by brute force (n <= 7)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("verify", help="recovery, unbiasedness, concentration, sandwich and probabilistic checks")
    p.add_argument("kind", choices=("recovery", "unbiasedness", "concentration", "sandwich", "probabilistic"))
    _common(p)
    p.add_argument("--n", type=_ints, default=None, help="comma-separated team sizes")
    p.add_argument("--p", type=_floats, default=None, help="comma-separated edge probabilities")
    p.add_argument("--m", type=_ints, default=None, help="comma-separated sample sizes")
    p.add_argument("--d", type=_ints, default=None, help="comma-separated regular degrees")
    p.add_argument("--draws", type=int, default=None, help="draws per cell")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--checkpoints", help="comma-separated fixture checkpoints (init,trained)")
    p.add_argument("--gate-max-rel-error", type=float, help="fail if any cell's max relative error exceeds this")
    p.add_argument("--gate-violation-rate", type=float, help="fail if any violation rate exceeds this")
    p.add_argument("--gate-z", type=float, help="fail if any |bias|/SE exceeds this")
    p.add_argument("--gate-z-soft", type=_range, metavar="Z,FRACTION", help="fail unless FRACTION of cells have z <= Z")
    p.add_argument("--gate-slope", type=_range, metavar="LO,HI", help="fail unless the p95 log-log slope lies in [LO, HI]")
    p.add_argument("--gate-hold-rate", type=float, help="fail if the sandwich holds in fewer cases than this")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("ablate", help="expander ablation at matched edge budgets")
    p.add_argument("kind", choices=("expander",))
    _common(p)
    p.set_defaults(source="lowrank:rank=2,rho_cap=2.0")
    p.add_argument("--n", type=_ints, default=(50, 100, 200))
    p.add_argument("--dmult", type=_floats, default=(1, 2, 4))
    p.add_argument("--seeds", type=int, default=5, help="graph seeds per cell")
    p.add_argument("--families", default="dregular,bernoulli,uniform,knn")
    p.add_argument("--gate-band-fraction", type=float, help="fail unless this share of d-regular cells has ratio within 1%%")
    p.add_argument("--gate-spectral", action="store_true", help="fail if a d-regular ratio exceeds its spectral bound")
    p.set_defaults(fn=cmd_ablate)

    p = sub.add_parser("bench", help="evaluation-count scaling or graph-construction timing")
    p.add_argument("kind", choices=("scaling", "graphs"))
    _common(p)
    p.add_argument("--n", type=_ints, default=(100,))
    p.add_argument("--p", type=_floats, default=(0.1,))
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--timing", action="store_true", help="record wall-clock ns (advisory)")
    p.add_argument("--gate-ratio", type=_range, metavar="LO,HI", help="fail unless every pooled ratio lies in [LO, HI]")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("control", help="closed-loop set-point control with a sparse estimator")
    p.add_argument("kind", choices=("run",))
    _common(p)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--targets", type=_floats, default=(0.12, 0.14, 0.15))
    p.add_argument("--estimator", default="bernoulli:0.1", help="full | bernoulli:p | uniform:m | knn:k | dregular:d")
    p.add_argument("--paired", default=None, help="second estimator run on identical seeds (e.g. full)")
    p.add_argument("--seeds", type=_ints, default=(0, 1, 2), help="cell seeds")
    p.add_argument("--iterations", type=int, default=167)
    p.add_argument("--late-window", type=int, default=50)
    p.add_argument("--dim", type=int, default=256, help="behavior dimension")
    p.add_argument("--drift-sigma", type=float, default=0.02)
    p.add_argument("--no-audit", action="store_true", help="skip the full-SND audit")
    p.add_argument("--trace-dir", help="write one trace CSV per run here")
    p.add_argument("--gate-tracking", type=float, help="fail if a late-window tracking error reaches this")
    p.add_argument("--gate-audit", type=float, help="fail if a late-window audit error reaches this")
    p.add_argument("--gate-paired-sem", type=float, help="fail unless |mean paired diff| <= this x SEM")
    p.set_defaults(fn=cmd_control)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return parser.parse_args(argv)
    try:
        cfg = json.loads(Path(known.config).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, known.config) from None
    if not isinstance(cfg, dict):
        raise ParseError("config must be a flat JSON object", None, None, known.config)
    args = parser.parse_args(argv)
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in cfg.items():
        if key not in explicit:
            if isinstance(value, list):
                value = tuple(value)
            setattr(args, key, value)
    return args


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if getattr(args, "jobs", 1) < 1:
            raise ContractError("--jobs must be at least 1")
        return args.fn(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except GateFailure as exc:
        print(f"gate failure: {exc}", file=sys.stderr)
        return 4
    except ContractError as exc:
        print(f"contract error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"contract error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
