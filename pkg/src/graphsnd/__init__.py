"""Behavioral diversity of agent teams, measured on sparse graphs.

SND is the mean behavioral distance over all agent pairs; Graph-SND
restricts the mean to the edges of a graph, so a sparse graph costs ``|E|``
distance evaluations instead of ``n(n-1)/2``. The package provides the
distances, graph builders, estimators with their error bounds, a seeded
verification harness and a toy set-point controller.
"""

from .behavior import (
    CategoricalHead,
    CountingDistances,
    DiagonalGaussianHead,
    DistanceMatrix,
    DmaxBound,
    ObservationBatch,
    PolicyEnsemble,
    build_distance_matrix,
    pairwise_distance,
    random_categorical_ensemble,
    random_gaussian_ensemble,
    random_observation_batch,
    synth_lowrank_matrix,
    synth_metric_matrix,
    tvd_categorical,
    w2_diag_gaussian,
)
from .control import ControlledEnsemble, ControlTrace, control_step, run_control, run_control_loop
from .errors import ContractError, ConvergenceError, EmptyGraphError, GateFailure, GraphSNDError, ParseError
from .estimators import (
    BoundReport,
    EstimateReport,
    bound_report,
    chernoff_unconditional,
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
    build_custom,
    build_d_regular,
    build_knn,
    build_uniform_size,
    forwarding_index,
    is_connected,
    spectral_gap,
)
from .harness import ExperimentConfig, run_experiment
from .seeding import derive_seed, make_rng

__version__ = "0.1.0"
