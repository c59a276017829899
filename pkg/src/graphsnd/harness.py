"""Seeded Monte-Carlo verification experiments.

Each experiment maps an :class:`ExperimentConfig` to a list of
:class:`CellResult`. Draw ``k`` of a cell always uses the child seed
``derive_seed(master_seed, kind, cell_key, k)``, per-draw values are stored
by draw index, and statistics are computed from those arrays in index order,
so results are bit-identical for any ``jobs`` setting.
"""

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .behavior import (
    CountingDistances,
    DistanceMatrix,
    DmaxBound,
    PolicyEnsemble,
    DiagonalGaussianHead,
    build_distance_matrix,
    random_categorical_ensemble,
    random_observation_batch,
    synth_lowrank_matrix,
    synth_metric_matrix,
)
from .errors import ContractError
from .estimators import (
    distortion_bounds,
    graph_snd,
    hoeffding_radius,
    ht_estimate,
    nuclear_norm,
    probabilistic_radius,
    serfling_radius,
    snd_full,
    snd_uniform,
    spectral_discrepancy_bound,
)
from .graphs import (
    Graph,
    build_bernoulli,
    build_complete,
    build_d_regular,
    build_knn,
    build_uniform_size,
    forwarding_index,
    is_connected,
    pair_index,
    spectral_gap,
)
from .seeding import derive_seed, make_rng

__all__ = [
    "ExperimentConfig",
    "CellResult",
    "distance_source",
    "run_recovery",
    "run_unbiasedness",
    "run_concentration",
    "concentration_slope",
    "run_expander_ablation",
    "run_scaling_bench",
    "run_graph_build_bench",
    "run_distortion_sandwich",
    "run_probabilistic",
    "run_experiment",
    "connected_graphs",
    "results_to_csv",
    "results_to_json",
    "plot_data_csv",
]

CHECKPOINT_SPREAD = {"init": 0.05, "trained": 1.0}


@dataclass
class ExperimentConfig:
    """Parameterization of one experiment.

    Grids not used by ``kind`` are ignored. ``source`` selects the distance
    table, e.g. ``{"kind": "gaussian"}``, ``{"kind": "categorical"}``,
    ``{"kind": "lowrank", "rank": 2, "rho_cap": 2.0}`` or
    ``{"kind": "file", "path": "d.csv"}``.
    """

    kind: str
    master_seed: int
    n: tuple = (8,)
    p: tuple = (0.1, 0.25, 0.5, 0.75)
    m: tuple = (6, 12, 24, 48, 72, 96)
    dmult: tuple = (1, 2, 4)
    d: tuple = (6, 7)
    draws: int = 2000
    seeds: int = 5
    delta: float = 0.1
    checkpoints: tuple = ("init", "trained")
    families: tuple = ("dregular", "bernoulli", "uniform", "knn")
    source: dict = field(default_factory=lambda: {"kind": "gaussian"})
    jobs: int = 1
    timing: bool = False
    output: str = None

    def __post_init__(self):
        self.master_seed = int(self.master_seed)
        if not 0 <= self.master_seed < 2**64:
            raise ContractError("master_seed must be an unsigned 64-bit integer")
        if self.draws < 1:
            raise ContractError("draws must be at least 1")
        for name in ("n", "p", "m", "dmult", "d", "checkpoints", "families"):
            value = tuple(getattr(self, name))
            if not value:
                raise ContractError(f"grid {name!r} is empty")
            setattr(self, name, value)
        if self.jobs < 1:
            raise ContractError("jobs must be at least 1")

    def to_dict(self):
        return asdict(self)


@dataclass
class CellResult:
    """Statistics for one grid cell, with its full parameterization."""

    experiment: str
    key: dict
    n_draws: int
    stats: dict
    evaluations: int = 0
    timing: dict = None

    def __post_init__(self):
        rate = self.stats.get("violation_rate")
        if rate is not None and not 0.0 <= rate <= 1.0:
            raise ContractError(f"violation rate {rate} outside [0, 1]")

    def to_dict(self):
        out = {
            "experiment": self.experiment,
            "key": dict(self.key),
            "n_draws": self.n_draws,
            "evaluations": self.evaluations,
            "stats": dict(self.stats),
        }
        if self.timing is not None:
            out["timing"] = dict(self.timing)
        return out

    def row(self):
        out = {"experiment": self.experiment}
        out.update({f"key.{k}": v for k, v in self.key.items()})
        out["n_draws"] = self.n_draws
        out["evaluations"] = self.evaluations
        out.update(self.stats)
        if self.timing is not None:
            out.update({f"timing.{k}": v for k, v in self.timing.items()})
        return out


def _map(fn, count, jobs):
    if jobs <= 1 or count < 2:
        return [fn(k) for k in range(count)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(count)))


def _float(x):
    return None if x is None else float(x)


# ---------------------------------------------------------------------------
# distance sources


def _fixture_ensemble(seed, n, spread, d_obs=4, d_act=2):
    """Shared base head plus agent-specific offsets scaled by ``spread``."""
    rng = make_rng(seed, "fixture_ensemble")
    base_w = rng.standard_normal((d_act, d_obs))
    base_b = rng.standard_normal(d_act)
    base_ls = np.full(d_act, -0.5)
    heads = []
    for _ in range(n):
        heads.append(
            DiagonalGaussianHead(
                mean_weights=base_w + spread * rng.standard_normal((d_act, d_obs)),
                mean_bias=base_b + spread * rng.standard_normal(d_act),
                log_std=base_ls + 0.3 * spread * rng.standard_normal(d_act),
            )
        )
    return PolicyEnsemble(tuple(heads))


def distance_source(source, n, seed, checkpoint="trained"):
    """Build the distance table named by ``source`` for ``n`` agents."""
    kind = source.get("kind", "gaussian")
    T = int(source.get("T", 32))
    if kind == "gaussian":
        spread = float(source.get("spread", CHECKPOINT_SPREAD[checkpoint]))
        ens = _fixture_ensemble(seed, n, spread, source.get("d_obs", 4), source.get("d_act", 2))
        return build_distance_matrix(ens, random_observation_batch(seed, T, n, ens.d_obs))
    if kind == "categorical":
        spread = float(source.get("spread", CHECKPOINT_SPREAD[checkpoint]))
        d_obs = int(source.get("d_obs", 4))
        ens = random_categorical_ensemble(seed, n, d_obs, int(source.get("actions", 5)), spread)
        return build_distance_matrix(ens, random_observation_batch(seed, T, n, d_obs))
    if kind == "metric":
        return synth_metric_matrix(seed, n, int(source.get("embed_dim", 3)), float(source.get("scale", 1.0)))
    if kind == "lowrank":
        return synth_lowrank_matrix(
            seed,
            n,
            int(source.get("rank", 2)),
            float(source.get("dmax", 1.0)),
            float(source.get("heterogeneity", 0.5)),
            source.get("rho_cap", 2.0),
        )
    if kind == "uniform":
        u = make_rng(seed, "uniform_matrix").random((n, n)) * float(source.get("dmax", 1.0))
        d = np.triu(u, 1)
        return DistanceMatrix(d + d.T)
    if kind == "file":
        from .io import load_distance_matrix

        dm = load_distance_matrix(source["path"])
        if dm.n != n:
            raise ContractError(f"{source['path']} has n={dm.n}, experiment wants n={n}")
        return dm
    raise ContractError(f"unknown distance source {kind!r}")


def _source_seed(cfg, *labels):
    return derive_seed(cfg.master_seed, "source", *labels)


# ---------------------------------------------------------------------------
# experiments


def run_recovery(cfg):
    """Complete-graph Graph-SND against full SND, per team size."""
    cells = []
    for n in cfg.n:
        if n < 2:
            raise ContractError("recovery needs n >= 2")
        g = build_complete(n)

        def draw(k, n=n, g=g):
            dm = distance_source(cfg.source, n, derive_seed(cfg.master_seed, "recovery", n, k))
            full = snd_full(dm)
            err = abs(graph_snd(dm, g).value - full)
            return err, (err / full if full > 0 else err)

        out = np.array(_map(draw, cfg.draws, cfg.jobs))
        cells.append(
            CellResult(
                "recovery",
                {"n": n},
                cfg.draws,
                {"max_abs_error": float(out[:, 0].max()), "max_rel_error": float(out[:, 1].max())},
                evaluations=2 * comb(n, 2) * cfg.draws,
            )
        )
    return cells


def run_unbiasedness(cfg):
    """Horvitz-Thompson estimates over Bernoulli draws, per (checkpoint, n, p)."""
    if cfg.draws < 100:
        warnings.warn(
            f"{cfg.draws} draws per cell: standard errors are unreliable below 100",
            RuntimeWarning,
            stacklevel=2,
        )
    cells = []
    for checkpoint in cfg.checkpoints:
        for n in cfg.n:
            dm = distance_source(cfg.source, n, _source_seed(cfg, n), checkpoint)
            truth = snd_full(dm)
            for p in cfg.p:

                def draw(k, n=n, p=p, dm=dm):
                    g = build_bernoulli(
                        derive_seed(cfg.master_seed, "unbiasedness", checkpoint, n, p, k), n, p, "ht"
                    )
                    return ht_estimate(dm, g).value, g.num_edges

                out = np.array(_map(draw, cfg.draws, cfg.jobs))
                est, sizes = out[:, 0], out[:, 1]
                # shift by the first draw so identical draws (p = 1) give an
                # exact mean and zero spread instead of rounding noise
                centered = est - est[0]
                mean = float(est[0] + np.mean(centered))
                std = float(np.std(centered, ddof=1)) if cfg.draws > 1 else 0.0
                se = std / math.sqrt(cfg.draws)
                bias = mean - truth
                if se > 0:
                    z = abs(bias) / se
                else:
                    z = 0.0 if bias == 0 else math.inf
                cells.append(
                    CellResult(
                        "unbiasedness",
                        {"checkpoint": checkpoint, "n": n, "p": p},
                        cfg.draws,
                        {
                            "snd": truth,
                            "mean": mean,
                            "std": std,
                            "se": se,
                            "bias": bias,
                            "z": z,
                            "ci95_low": mean - 1.96 * se,
                            "ci95_high": mean + 1.96 * se,
                            "mean_edges": float(np.mean(sizes)),
                        },
                        evaluations=int(sizes.sum()),
                    )
                )
    return cells


def run_concentration(cfg):
    """Uniform-size edge samples against the Hoeffding and Serfling radii."""
    cells = []
    for n in cfg.n:
        pairs = comb(n, 2)
        dm = distance_source(cfg.source, n, _source_seed(cfg, n))
        truth = snd_full(dm)
        dmax = DmaxBound.of(dm).value
        for m in cfg.m:

            def draw(k, n=n, m=m, dm=dm):
                g = build_uniform_size(derive_seed(cfg.master_seed, "concentration", n, m, k), n, m)
                return abs(snd_uniform(dm, g).value - truth)

            err = np.array(_map(draw, cfg.draws, cfg.jobs))
            t_h = hoeffding_radius(dmax, cfg.delta, m)
            t_s = serfling_radius(dmax, cfg.delta, m, pairs)
            cells.append(
                CellResult(
                    "concentration",
                    {"n": n, "m": m},
                    cfg.draws,
                    {
                        "snd": truth,
                        "d_max": dmax,
                        "delta": cfg.delta,
                        "hoeffding_radius": t_h,
                        "serfling_radius": t_s,
                        "violation_rate": float(np.mean(err > t_h)),
                        "serfling_violation_rate": float(np.mean(err > t_s)),
                        "p95_error": float(np.percentile(err, 95)),
                        "mean_error": float(np.mean(err)),
                        "max_error": float(np.max(err)),
                    },
                    evaluations=m * cfg.draws,
                )
            )
    return cells


def concentration_slope(cells):
    """Log-log least-squares slope of p95 error against ``m``.

    Returns ``(raw, fpc_adjusted)``; the adjusted slope first divides each
    p95 by the finite-population factor ``sqrt(1 - (m-1)/|P|)``. Cells where
    the p95 error is zero (``m = |P|``) are skipped.
    """
    ms, p95, fpc = [], [], []
    for c in cells:
        if c.stats["p95_error"] <= 0:
            continue
        m, n = c.key["m"], c.key["n"]
        ms.append(m)
        p95.append(c.stats["p95_error"])
        fpc.append(math.sqrt(1.0 - (m - 1) / comb(n, 2)))
    if len(ms) < 2:
        raise ContractError("a slope needs at least two cells with nonzero error")
    x = np.log(ms)
    raw = float(np.polyfit(x, np.log(p95), 1)[0])
    adj = float(np.polyfit(x, np.log(np.array(p95) / np.array(fpc)), 1)[0])
    return raw, adj


def _knn_matched(points, target_edges):
    """k-NN graph whose edge count is closest to ``target_edges``."""
    n = points.shape[0]
    best = None
    lo, hi = 1, n - 1
    # union k-NN edge counts are nondecreasing in k
    while lo <= hi:
        k = (lo + hi) // 2
        g = build_knn(points, k)
        if best is None or abs(g.num_edges - target_edges) < abs(best.num_edges - target_edges) or (
            abs(g.num_edges - target_edges) == abs(best.num_edges - target_edges) and k < best.params["k"]
        ):
            best = g
        if g.num_edges < target_edges:
            lo = k + 1
        elif g.num_edges > target_edges:
            hi = k - 1
        else:
            break
    return best


def _matched_degree(n, c):
    d = math.ceil(c * math.log2(n))
    d = min(d, n - 1)
    if (n * d) % 2:
        d = d + 1 if d + 1 < n else d - 1
    return d


def run_expander_ablation(cfg):
    """Graph families at matched edge budgets ``|E| ~ n d / 2``.

    ``d = ceil(c * log2 n)`` for every ``c`` in ``cfg.dmult`` (bumped by one
    when ``n d`` is odd). One distance table per ``n``; ``cfg.seeds`` graph
    seeds per random family. k-NN uses the rows of the distance table as
    points and is deterministic, so it is built once per cell.
    """
    source = cfg.source if cfg.source.get("kind") != "gaussian" else {"kind": "lowrank", "rank": 2, "rho_cap": 2.0}
    cells = []
    for n in cfg.n:
        dm = distance_source(source, n, _source_seed(cfg, n))
        truth = snd_full(dm)
        nuc = nuclear_norm(dm)
        rho = nuc / (n * truth) if truth > 0 else None
        for c in cfg.dmult:
            d = _matched_degree(n, c)
            budget = n * d // 2
            for family in cfg.families:
                if family == "knn":
                    knn = _knn_matched(dm.values, budget)

                    def draw(k, knn=knn):
                        return knn

                elif family == "dregular":

                    def draw(k, n=n, d=d, c=c):
                        return build_d_regular(derive_seed(cfg.master_seed, "ablation", "dregular", n, c, k), n, d)

                elif family == "bernoulli":

                    def draw(k, n=n, d=d, c=c):
                        seed = derive_seed(cfg.master_seed, "ablation", "bernoulli", n, c, k)
                        return build_bernoulli(seed, n, d / (n - 1))

                elif family == "uniform":

                    def draw(k, n=n, c=c):
                        seed = derive_seed(cfg.master_seed, "ablation", "uniform", n, c, k)
                        return build_uniform_size(seed, n, budget)

                else:
                    raise ContractError(f"unknown graph family {family!r}")

                def measure(k, draw=draw, family=family):
                    g = draw(k)
                    row = {"edges": g.num_edges, "ratio": math.nan, "pi": None, "gap": None, "rel": None}
                    if g.empty:
                        return row
                    row["ratio"] = snd_uniform(dm, g).value / truth
                    if is_connected(g):
                        row["pi"] = forwarding_index(g).pi_upper
                    if family == "dregular":
                        sr = spectral_gap(g)
                        row["gap"] = sr.gap
                        row["lambda2"] = sr.lambda2
                        row["rel"] = spectral_discrepancy_bound(dm, sr, nuclear=nuc)[1]
                    return row

                count = 1 if family == "knn" else cfg.seeds
                rows = _map(measure, count, cfg.jobs)
                ratios = np.array([r["ratio"] for r in rows])
                finite = ratios[np.isfinite(ratios)]
                pis = [r["pi"] for r in rows if r["pi"] is not None]
                stats = {
                    "d": d,
                    "edge_budget": budget,
                    "mean_edges": float(np.mean([r["edges"] for r in rows])),
                    "snd": truth,
                    "rho_star": rho,
                    "ratio_min": _float(finite.min()) if finite.size else None,
                    "ratio_median": _float(np.median(finite)) if finite.size else None,
                    "ratio_max": _float(finite.max()) if finite.size else None,
                    "in_band_1pct": bool(finite.size == len(rows) and np.all(np.abs(finite - 1) <= 0.01)),
                    "pi_upper_mean": _float(np.mean(pis)) if pis else None,
                    "pi_upper_max": max(pis) if pis else None,
                    "disconnected": sum(r["pi"] is None for r in rows),
                }
                if family == "dregular":
                    rels = np.array([r["rel"] for r in rows], dtype=float)
                    stats["gap_mean"] = float(np.mean([r["gap"] for r in rows]))
                    stats["lambda2_mean"] = float(np.mean([r["lambda2"] for r in rows]))
                    stats["spectral_rel_bound_min"] = float(rels.min())
                    stats["spectral_bound_holds"] = bool(np.all(np.abs(ratios - 1) <= rels))
                cells.append(
                    CellResult(
                        "expander_ablation",
                        {"family": family, "n": n, "dmult": c},
                        len(rows),
                        stats,
                        evaluations=int(sum(r["edges"] for r in rows)),
                    )
                )
    return cells


def run_scaling_bench(cfg):
    """Pairwise-evaluation counts of Bernoulli Graph-SND against full SND.

    Per draw, one full-SND reference call and one sparse call go through a
    :class:`CountingDistances` wrapper; ``evaluations`` is its final count.
    The pooled ratio is total full evaluations over total sparse ones.
    Wall-clock fields are filled only when ``cfg.timing`` is set.
    """
    cells = []
    for n in cfg.n:
        dm = distance_source(cfg.source, n, _source_seed(cfg, n))
        pairs = comb(n, 2)
        for p in cfg.p:
            counter = CountingDistances(dm)
            full_evals, sparse_evals, ratios = [], [], []
            t_build = t_full = t_sparse = 0
            for k in range(cfg.draws):
                t0 = time.perf_counter_ns()
                g = build_bernoulli(derive_seed(cfg.master_seed, "scaling", n, p, k), n, p)
                t1 = time.perf_counter_ns()
                before = counter.evaluations
                snd_full(counter)
                t2 = time.perf_counter_ns()
                mid = counter.evaluations
                if not g.empty:
                    snd_uniform(counter, g)
                t3 = time.perf_counter_ns()
                full_evals.append(mid - before)
                sparse_evals.append(counter.evaluations - mid)
                if sparse_evals[-1]:
                    ratios.append((mid - before) / sparse_evals[-1])
                t_build += t1 - t0
                t_full += t2 - t1
                t_sparse += t3 - t2
            total_sparse = sum(sparse_evals)
            stats = {
                "pairs": pairs,
                "expected_edges": p * pairs,
                "expected_ratio": pairs / (p * pairs),
                "pooled_ratio": sum(full_evals) / total_sparse if total_sparse else None,
                "ratio_min": min(ratios) if ratios else None,
                "ratio_max": max(ratios) if ratios else None,
                "empty_draws": cfg.draws - len(ratios),
                "full_evaluations": sum(full_evals),
                "sparse_evaluations": total_sparse,
            }
            timing = None
            if cfg.timing:
                timing = {
                    "build_ns_mean": t_build / cfg.draws,
                    "full_ns_mean": t_full / cfg.draws,
                    "sparse_ns_mean": t_sparse / cfg.draws,
                    "wall_ratio": t_full / t_sparse if t_sparse else None,
                }
            cells.append(
                CellResult("scaling", {"n": n, "p": p}, cfg.draws, stats, counter.evaluations, timing)
            )
    return cells


def run_graph_build_bench(cfg):
    """Median construction time per builder at edge budget ``n d / 2``.

    Timing is always collected here; it is the point of the experiment.
    ``d`` defaults to ``ceil(log2 n)``.
    """
    cells = []
    for n in cfg.n:
        d = _matched_degree(n, cfg.dmult[0])
        budget = n * d // 2
        points = make_rng(_source_seed(cfg, n), "points").standard_normal((n, 2))
        builders = {
            "bernoulli": lambda s: build_bernoulli(s, n, d / (n - 1)),
            "uniform": lambda s: build_uniform_size(s, n, budget),
            "dregular": lambda s: build_d_regular(s, n, d),
            "knn": lambda s: build_knn(points, max(1, d // 2)),
        }
        for name, build in builders.items():
            times = []
            for k in range(cfg.draws):
                seed = derive_seed(cfg.master_seed, "build_bench", name, n, k)
                t0 = time.perf_counter_ns()
                build(seed)
                times.append(time.perf_counter_ns() - t0)
            cells.append(
                CellResult(
                    "graph_build",
                    {"builder": name, "n": n},
                    cfg.draws,
                    {"d": d, "edge_budget": budget},
                    timing={"median_ns": float(np.median(times))},
                )
            )
    return cells


def connected_graphs(n):
    """Every connected labeled simple graph on ``n`` vertices, unit weights."""
    i, j = pair_index(n)
    pairs = np.column_stack([i, j])
    total = pairs.shape[0]
    for mask in range(1 << total):
        if bin(mask).count("1") < n - 1:
            continue
        sel = [(mask >> b) & 1 for b in range(total)]
        g = Graph(n, pairs[np.array(sel, dtype=bool)], np.ones(sum(sel)))
        if is_connected(g):
            yield g


def run_distortion_sandwich(cfg):
    """Exhaustive fixed-graph sandwich check on small connected graphs.

    For each ``n`` in ``cfg.n`` every connected labeled graph is paired with
    ``cfg.draws`` random metric-embedded tables. A case holds when
    ``lower <= SND <= upper`` up to a relative rounding slack of 1e-12.
    """
    cells = []
    for n in cfg.n:
        mats = [
            synth_metric_matrix(derive_seed(cfg.master_seed, "sandwich", n, k), n, 3)
            for k in range(cfg.draws)
        ]
        stack = np.stack([m.values for m in mats])
        truth = np.array([snd_full(m) for m in mats])
        pairs = comb(n, 2)
        graphs = cases = held = 0
        worst_low = worst_up = -math.inf
        for g in connected_graphs(n):
            graphs += 1
            pi = forwarding_index(g).pi_upper
            su = stack[:, g.edges[:, 0], g.edges[:, 1]].mean(axis=1)
            low, up = distortion_bounds(su, g.num_edges, pairs, pi)
            slack = 1e-12 * np.maximum(truth, 1e-300)
            ok = (low <= truth + slack) & (truth <= up + slack)
            cases += ok.size
            held += int(ok.sum())
            worst_low = max(worst_low, float(np.max((low - truth) / truth)))
            worst_up = max(worst_up, float(np.max((truth - up) / truth)))
        cells.append(
            CellResult(
                "distortion_sandwich",
                {"n": n},
                cfg.draws,
                {
                    "graphs": graphs,
                    "cases": cases,
                    "held": held,
                    "hold_rate": held / cases if cases else None,
                    "max_rel_lower_excess": worst_low,
                    "max_rel_upper_excess": worst_up,
                },
            )
        )
    return cells


def run_probabilistic(cfg):
    """Random d-regular graphs against the unconditional probabilistic radius."""
    source = cfg.source if cfg.source.get("kind") != "gaussian" else {"kind": "uniform"}
    cells = []
    for n in cfg.n:
        dm = distance_source(source, n, _source_seed(cfg, n))
        truth = snd_full(dm)
        dmax = DmaxBound.of(dm, float(source.get("dmax", dm.max_entry))).value
        for d in cfg.d:
            if (n * d) % 2:
                continue

            def draw(k, n=n, d=d):
                g = build_d_regular(derive_seed(cfg.master_seed, "probabilistic", n, d, k), n, d)
                return abs(snd_uniform(dm, g).value - truth)

            err = np.array(_map(draw, cfg.draws, cfg.jobs))
            radius = probabilistic_radius(dmax, cfg.delta, n, d)
            cells.append(
                CellResult(
                    "probabilistic",
                    {"n": n, "d": d},
                    cfg.draws,
                    {
                        "snd": truth,
                        "d_max": dmax,
                        "radius": radius,
                        "violation_rate": float(np.mean(err > radius)),
                        "max_error": float(err.max()),
                        "p95_error": float(np.percentile(err, 95)),
                    },
                    evaluations=(n * d // 2) * cfg.draws,
                )
            )
    return cells


EXPERIMENTS = {
    "recovery": run_recovery,
    "unbiasedness": run_unbiasedness,
    "concentration": run_concentration,
    "expander_ablation": run_expander_ablation,
    "scaling": run_scaling_bench,
    "graph_build": run_graph_build_bench,
    "distortion_sandwich": run_distortion_sandwich,
    "probabilistic": run_probabilistic,
}


def run_experiment(cfg):
    try:
        fn = EXPERIMENTS[cfg.kind]
    except KeyError:
        raise ContractError(f"unknown experiment kind {cfg.kind!r}") from None
    return fn(cfg)


# ---------------------------------------------------------------------------
# serialization


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x) or math.isinf(x):
            return None
        return x
    return x


def results_to_json(cells, cfg=None):
    payload = {"experiment": cells[0].experiment if cells else None, "cells": [c.to_dict() for c in cells]}
    if cfg is not None:
        payload["config"] = cfg.to_dict()
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def results_to_csv(cells):
    rows = [_jsonable(c.row()) for c in cells]
    columns = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("" if r.get(k) is None else repr(r[k]) if isinstance(r.get(k), float) else r.get(k)) for k in columns})
    return buf.getvalue()


def plot_data_csv(cells):
    """Tidy long format: one row per (cell, statistic)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["experiment", "cell", "statistic", "value"])
    for c in cells:
        key = ";".join(f"{k}={v}" for k, v in c.key.items())
        stats = dict(c.stats)
        stats["n_draws"] = c.n_draws
        if c.timing:
            stats.update({f"timing.{k}": v for k, v in c.timing.items()})
        for name, value in stats.items():
            value = _jsonable(value)
            if isinstance(value, (int, float, bool)) and value is not None:
                writer.writerow([c.experiment, key, name, repr(float(value))])
    return buf.getvalue()
