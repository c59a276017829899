import math
import warnings
from math import comb

import numpy as np
import pytest
from hypothesis import given, strategies as st

from graphsnd.behavior import synth_metric_matrix
from graphsnd.errors import ContractError
from graphsnd.graphs import build_knn
from graphsnd.harness import (
    CellResult,
    ExperimentConfig,
    _knn_matched,
    _matched_degree,
    concentration_slope,
    connected_graphs,
    distance_source,
    plot_data_csv,
    results_to_csv,
    results_to_json,
    run_concentration,
    run_distortion_sandwich,
    run_expander_ablation,
    run_experiment,
    run_probabilistic,
    run_recovery,
    run_scaling_bench,
    run_unbiasedness,
)
from graphsnd.io import save_distance_matrix


def small(kind, **kw):
    base = dict(master_seed=11, draws=150, n=(8,), p=(0.3, 1.0), m=(6, 28), jobs=1)
    base.update(kw)
    return ExperimentConfig(kind, **base)


# -- config validation ----------------------------------------------------------


def test_config_validation():
    with pytest.raises(ContractError):
        ExperimentConfig("recovery", master_seed=2**64)
    with pytest.raises(ContractError):
        ExperimentConfig("recovery", master_seed=0, n=())
    with pytest.raises(ContractError):
        ExperimentConfig("recovery", master_seed=0, draws=0)
    with pytest.raises(ContractError):
        ExperimentConfig("recovery", master_seed=0, jobs=0)
    with pytest.raises(ContractError):
        run_experiment(ExperimentConfig("nope", master_seed=0))
    with pytest.raises(ContractError):
        CellResult("x", {}, 1, {"violation_rate": 1.5})


# -- determinism ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kind,kw",
    [
        ("unbiasedness", {}),
        ("concentration", {}),
        ("probabilistic", {"n": (20,), "d": (3, 4), "draws": 40}),
        ("expander_ablation", {"n": (24,), "dmult": (1,), "seeds": 3}),
        ("recovery", {"n": (5, 9), "draws": 20}),
    ],
)
def test_results_bit_identical_across_jobs(kind, kw):
    a = run_experiment(small(kind, jobs=1, **kw))
    b = run_experiment(small(kind, jobs=3, **kw))
    assert results_to_json(a) == results_to_json(b)
    assert results_to_csv(a) == results_to_csv(b)


def test_different_master_seeds_differ():
    a = run_unbiasedness(small("unbiasedness"))
    b = run_unbiasedness(small("unbiasedness", master_seed=12))
    assert results_to_json(a) != results_to_json(b)


# -- experiment semantics --------------------------------------------------------


def test_recovery_is_exact_up_to_rounding():
    (cell,) = run_recovery(small("recovery", n=(12,), draws=30))
    assert cell.stats["max_rel_error"] <= 1e-12
    assert cell.evaluations == 2 * comb(12, 2) * 30


def test_unbiasedness_p_one_has_zero_bias():
    cells = run_unbiasedness(small("unbiasedness"))
    full = [c for c in cells if c.key["p"] == 1.0]
    assert len(full) == 2
    for c in full:
        assert c.stats["bias"] == 0.0 and c.stats["z"] == 0.0 and c.stats["mean_edges"] == 28
    for c in cells:
        assert c.stats["ci95_low"] <= c.stats["mean"] <= c.stats["ci95_high"]
        assert c.evaluations == pytest.approx(c.stats["mean_edges"] * c.n_draws)


def test_unbiasedness_warns_below_100_draws():
    with pytest.warns(RuntimeWarning, match="unreliable"):
        run_unbiasedness(small("unbiasedness", draws=50, p=(0.5,)))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        run_unbiasedness(small("unbiasedness", draws=100, p=(0.5,)))


def test_concentration_full_sample_has_no_error():
    cells = run_concentration(small("concentration"))
    full = next(c for c in cells if c.key["m"] == 28)
    assert full.stats["max_error"] <= 1e-15
    for c in cells:
        assert c.stats["serfling_radius"] <= c.stats["hoeffding_radius"]
        assert c.stats["violation_rate"] <= 0.1
        assert c.evaluations == c.key["m"] * c.n_draws


def test_concentration_slope_recovers_known_power_law():
    # oracle: p95 = m^-1/2 exactly, with the finite-population factor applied
    n = 16
    pairs = comb(n, 2)
    ms = [6, 12, 24, 48, 72, 96]
    pure = [CellResult("concentration", {"n": n, "m": m}, 1, {"p95_error": m**-0.5}) for m in ms]
    raw, _ = concentration_slope(pure)
    assert raw == pytest.approx(-0.5, abs=1e-12)
    fpc = [
        CellResult("concentration", {"n": n, "m": m}, 1, {"p95_error": m**-0.5 * math.sqrt(1 - (m - 1) / pairs)})
        for m in ms
    ]
    raw, adj = concentration_slope(fpc)
    assert adj == pytest.approx(-0.5, abs=1e-12) and raw < -0.5
    with pytest.raises(ContractError):
        concentration_slope(pure[:1])


def test_scaling_counts_and_full_sample_ratio():
    cells = run_scaling_bench(small("scaling", n=(10,), draws=25))
    full = next(c for c in cells if c.key["p"] == 1.0)
    assert full.stats["pooled_ratio"] == 1.0 and full.stats["ratio_min"] == full.stats["ratio_max"] == 1.0
    for c in cells:
        assert c.stats["full_evaluations"] == 45 * 25
        assert c.evaluations == c.stats["full_evaluations"] + c.stats["sparse_evaluations"]
        assert c.timing is None


def test_scaling_timing_fields_only_when_requested():
    (c,) = run_scaling_bench(small("scaling", n=(10,), p=(0.5,), draws=5, timing=True))
    assert set(c.timing) == {"build_ns_mean", "full_ns_mean", "sparse_ns_mean", "wall_ratio"}


def test_connected_graph_enumeration_counts():
    # OEIS A001187: connected labeled graphs
    assert [sum(1 for _ in connected_graphs(n)) for n in range(1, 6)] == [1, 1, 4, 38, 728]


def test_sandwich_holds_on_all_small_graphs():
    (cell,) = run_distortion_sandwich(small("distortion_sandwich", n=(4,), draws=20))
    assert cell.stats["graphs"] == 38 and cell.stats["cases"] == 38 * 20
    assert cell.stats["hold_rate"] == 1.0


def test_probabilistic_smoke():
    cells = run_probabilistic(small("probabilistic", n=(30,), d=(3, 4), draws=30))
    assert len(cells) == 2
    for c in cells:
        assert c.stats["violation_rate"] <= 0.1 and c.stats["max_error"] <= c.stats["radius"]


def test_probabilistic_skips_odd_degree_sum():
    assert run_probabilistic(small("probabilistic", n=(11,), d=(3,), draws=3)) == []


def test_ablation_cells_and_invariants():
    cells = run_expander_ablation(small("expander_ablation", n=(32,), dmult=(1,), seeds=3))
    fams = {c.key["family"]: c for c in cells}
    assert set(fams) == {"dregular", "bernoulli", "uniform", "knn"}
    d = fams["dregular"].stats["d"]
    assert d == _matched_degree(32, 1) and fams["dregular"].stats["mean_edges"] == 32 * d / 2
    assert fams["uniform"].stats["mean_edges"] == 32 * d // 2
    assert fams["knn"].n_draws == 1
    assert fams["dregular"].stats["spectral_bound_holds"]


@given(st.integers(4, 300), st.sampled_from([1, 2, 4]))
def test_matched_degree_is_valid(n, c):
    d = _matched_degree(n, c)
    assert 1 <= d <= n - 1 and (n * d) % 2 == 0
    assert abs(d - min(math.ceil(c * math.log2(n)), n - 1)) <= 1


def test_knn_matched_is_closest_over_all_k():
    pts = synth_metric_matrix(5, 30, 2).values
    for target in (20, 45, 90, 200):
        best = _knn_matched(pts, target)
        oracle = min(abs(build_knn(pts, k).num_edges - target) for k in range(1, 30))
        assert abs(best.num_edges - target) == oracle


# -- sources and serialization ---------------------------------------------------


@pytest.mark.parametrize("kind", ["gaussian", "categorical", "metric", "lowrank", "uniform"])
def test_distance_sources_are_deterministic(kind):
    a = distance_source({"kind": kind}, 7, 99)
    b = distance_source({"kind": kind}, 7, 99)
    assert a.n == 7 and np.array_equal(a.values, b.values)


def test_gaussian_checkpoints_differ_in_spread():
    init = distance_source({"kind": "gaussian"}, 8, 3, "init")
    trained = distance_source({"kind": "gaussian"}, 8, 3, "trained")
    assert init.values.mean() < trained.values.mean()


def test_file_source(tmp_path):
    dm = synth_metric_matrix(0, 6, 2)
    save_distance_matrix(dm, tmp_path / "d.csv")
    back = distance_source({"kind": "file", "path": str(tmp_path / "d.csv")}, 6, 0)
    assert np.array_equal(back.values, dm.values)
    with pytest.raises(ContractError):
        distance_source({"kind": "file", "path": str(tmp_path / "d.csv")}, 7, 0)
    with pytest.raises(ContractError):
        distance_source({"kind": "bogus"}, 6, 0)


def test_serialization_shapes():
    cells = run_concentration(small("concentration", draws=20))
    csv_text = results_to_csv(cells)
    header = csv_text.splitlines()[0].split(",")
    assert header[:5] == ["experiment", "key.n", "key.m", "n_draws", "evaluations"]
    assert len(csv_text.splitlines()) == 1 + len(cells)
    tidy = plot_data_csv(cells).splitlines()
    assert tidy[0] == "experiment,cell,statistic,value"
    assert any(line.startswith("concentration,n=8;m=6,violation_rate,") for line in tidy)
    assert '"config"' in results_to_json(cells, small("concentration"))
