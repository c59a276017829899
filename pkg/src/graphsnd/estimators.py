"""Full SND, Graph-SND and its sampling estimators, plus every bound on them.

All estimators accept any object with ``n`` and a vectorized
``lookup(rows, cols)``: a :class:`~graphsnd.behavior.DistanceMatrix` or a
:class:`~graphsnd.behavior.CountingDistances` wrapper. Each estimator looks
up exactly the distances it needs, so the counting wrapper measures the
pairwise-evaluation cost of a call.
"""

from dataclasses import asdict, dataclass, field
from math import comb, exp, log, sqrt

import numpy as np

from .errors import ContractError, EmptyGraphError
from .graphs import pair_index
from .linalg import jacobi_eigenvalues

__all__ = [
    "EstimateReport",
    "BoundReport",
    "snd_full",
    "graph_snd",
    "snd_uniform",
    "ht_estimate",
    "hoeffding_radius",
    "serfling_radius",
    "chernoff_unconditional",
    "distortion_bounds",
    "nuclear_norm",
    "spectral_discrepancy_bound",
    "probabilistic_radius",
    "bound_report",
]


@dataclass(frozen=True)
class EstimateReport:
    value: float
    kind: str
    graph: dict = field(default_factory=dict)
    m: int = 0
    fallback_used: bool = False
    zero_weight: bool = False

    def __post_init__(self):
        if self.value < 0:
            raise ContractError(f"estimate {self.value} is negative")
        if self.kind == "uniform_mean" and self.m < 1 and not self.fallback_used:
            raise ContractError("a uniform-mean estimate needs m >= 1")

    def to_dict(self):
        return asdict(self)


def _check_n(dm, g):
    if g.n != dm.n:
        raise ContractError(f"graph has {g.n} vertices but the distance matrix has {dm.n}")


def _edge_values(dm, g):
    if g.empty:
        return np.empty(0)
    return np.asarray(dm.lookup(g.edges[:, 0], g.edges[:, 1]), dtype=float)


def snd_full(dm):
    """Mean distance over all unordered pairs."""
    if dm.n < 2:
        raise ContractError("SND needs n >= 2")
    i, j = pair_index(dm.n)
    return float(np.sum(dm.lookup(i, j)) / i.size)


def graph_snd(dm, g):
    """Weighted mean of distances over the edges of ``g``.

    A graph of total weight zero yields 0 with ``zero_weight=True``.
    """
    _check_n(dm, g)
    if g.zero_weight:
        return EstimateReport(0.0, "graph_weighted", g.descriptor(), g.num_edges, zero_weight=True)
    vals = _edge_values(dm, g)
    value = float(np.sum(g.weights * vals) / g.total_weight)
    return EstimateReport(value, "graph_weighted", g.descriptor(), g.num_edges)


def snd_uniform(dm, g):
    """Unweighted mean of distances over the edges of ``g``.

    Raises :class:`EmptyGraphError` on an edgeless graph; falling back to
    the complete graph is a caller policy.
    """
    _check_n(dm, g)
    if g.empty:
        raise EmptyGraphError("uniform-mean estimator needs at least one edge")
    vals = _edge_values(dm, g)
    return EstimateReport(float(np.mean(vals)), "uniform_mean", g.descriptor(), g.num_edges)


def ht_estimate(dm, g):
    """Horvitz-Thompson estimate ``|P|^-1 * sum_E (1/p) d`` on a Bernoulli draw.

    Unbiased for full SND; an empty draw contributes the empty sum, 0.
    """
    _check_n(dm, g)
    if g.kind != "bernoulli" or g.params.get("weight_mode") != "ht":
        raise ContractError("ht_estimate needs a Bernoulli graph built with weight_mode='ht'")
    pairs = comb(dm.n, 2)
    vals = _edge_values(dm, g)
    value = float(np.sum(g.weights * vals) / pairs) if vals.size else 0.0
    return EstimateReport(value, "horvitz_thompson", g.descriptor(), g.num_edges)


# ---------------------------------------------------------------------------
# concentration radii


def _check_delta(delta):
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def _check_dmax(dmax):
    if not dmax >= 0 or not np.isfinite(dmax):
        raise ValueError(f"dmax must be finite and nonnegative, got {dmax}")


def hoeffding_radius(dmax, delta, m):
    """Two-sided Hoeffding radius for the mean of ``m`` draws without replacement."""
    _check_dmax(dmax)
    _check_delta(delta)
    if m < 1:
        raise ValueError("m must be at least 1")
    return dmax * sqrt(log(2.0 / delta) / (2.0 * m))


def serfling_radius(dmax, delta, m, pairs):
    """Hoeffding radius shrunk by the finite-population factor ``1 - (m-1)/pairs``."""
    _check_dmax(dmax)
    _check_delta(delta)
    if not 1 <= m <= pairs:
        raise ValueError(f"need 1 <= m <= pairs, got m={m}, pairs={pairs}")
    return dmax * sqrt((1.0 - (m - 1) / pairs) * log(2.0 / delta) / (2.0 * m))


def chernoff_unconditional(dmax, delta, p, pairs):
    """Radius in terms of the expected edge count ``mu = p * pairs``.

    Returns ``(radius, extra_failure)``: the radius holds with probability at
    least ``1 - delta - extra_failure`` on Bernoulli-``p`` draws, where
    ``extra_failure = exp(-mu/8)`` covers draws with fewer than ``mu/2`` edges.
    """
    _check_dmax(dmax)
    _check_delta(delta)
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if pairs < 1:
        raise ValueError("pairs must be at least 1")
    mu = p * pairs
    return dmax * sqrt(log(2.0 / delta) / mu), exp(-mu / 8.0)


def probabilistic_radius(dmax, delta, n, d):
    """High-probability radius for a uniformly random simple ``d``-regular graph."""
    _check_dmax(dmax)
    _check_delta(delta)
    if d < 3 or (n * d) % 2 or d >= n:
        raise ValueError(f"need d >= 3, d < n and n*d even, got n={n}, d={d}")
    return dmax * sqrt((8.0 / (n * d)) * (log(4.0 / delta) + (d * d - 1) / 4.0))


# ---------------------------------------------------------------------------
# fixed-graph distortion


def distortion_bounds(snd_u, g_edges, pairs, pi_upper):
    """Sandwich ``(|E|/|P|) s <= SND <= (|E| pi / |P|) s`` for ``s = snd_u``.

    Valid for a connected unit-weight graph and a distance satisfying the
    triangle inequality. Any upper bound on the forwarding index keeps the
    right-hand side valid.
    """
    if np.any(np.asarray(snd_u) < 0):
        raise ValueError("snd_u must be nonnegative")
    if pi_upper < 1:
        raise ValueError("pi_upper must be at least 1")
    frac = g_edges / pairs
    return frac * snd_u, frac * pi_upper * snd_u


def nuclear_norm(dm):
    """Sum of absolute eigenvalues, from the same Jacobi solver as the spectral gap."""
    values = dm.values if hasattr(dm, "values") else np.asarray(dm, dtype=float)
    return float(np.sum(np.abs(jacobi_eigenvalues(values))))


def spectral_discrepancy_bound(dm, sr, nuclear=None):
    """Absolute and relative bounds on ``|SND_G^u - SND|`` for a regular graph.

    Returns ``(abs_bound, rel_bound, rho_star)``; ``rel_bound`` and
    ``rho_star`` are ``None`` when SND is zero. ``nuclear`` skips the
    eigendecomposition when the nuclear norm is already known.
    """
    n = dm.n
    d = sr.d
    if d < 1:
        raise ContractError("spectral bound needs degree >= 1")
    nuc = nuclear_norm(dm) if nuclear is None else float(nuclear)
    slack = sr.lambda2 + d / (n - 1)
    abs_bound = slack / (n * d) * nuc
    snd = snd_full(dm)
    if snd <= 0:
        return abs_bound, None, None
    rho = nuc / (n * snd)
    return abs_bound, slack / d * rho, rho


@dataclass
class BoundReport:
    hoeffding_radius: float = None
    serfling_radius: float = None
    chernoff_radius: float = None
    chernoff_extra_failure: float = None
    distortion_lower: float = None
    distortion_upper: float = None
    spectral_abs: float = None
    spectral_rel: float = None
    probabilistic_radius: float = None
    inputs: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def bound_report(dm, g, delta=0.1, dmax=None, snd_u=None, forwarding=None, spectral=None):
    """Every bound applicable to ``(dm, g)``, with the inputs that fed them.

    Conditional radii use the realized edge count ``m``; the Chernoff form
    (Bernoulli graphs only) uses the expected count ``p * |P|``. Fixed-graph
    bounds are filled in when ``g`` is connected with unit weights; the
    spectral and probabilistic bounds when it is also regular.
    """
    from .graphs import forwarding_index, is_connected, spectral_gap

    n = dm.n
    pairs = comb(n, 2)
    if dmax is None:
        dmax = dm.max_entry if hasattr(dm, "max_entry") else float(np.max(dm.values))
    m = g.num_edges
    rep = BoundReport()
    rep.inputs = {"D_max": dmax, "delta": delta, "m": m, "pairs": pairs, "n": n}
    if 1 <= m:
        rep.hoeffding_radius = hoeffding_radius(dmax, delta, m)
        rep.serfling_radius = serfling_radius(dmax, delta, m, pairs)
    if g.kind == "bernoulli":
        p = g.params["p"]
        rep.chernoff_radius, rep.chernoff_extra_failure = chernoff_unconditional(dmax, delta, p, pairs)
        rep.inputs["p"] = p
    if m >= 1 and g.unit_weights and is_connected(g):
        if snd_u is None:
            snd_u = snd_uniform(dm, g).value
        fw = forwarding if forwarding is not None else forwarding_index(g)
        rep.distortion_lower, rep.distortion_upper = distortion_bounds(snd_u, m, pairs, fw.pi_upper)
        rep.inputs["pi_upper"] = fw.pi_upper
        deg = g.degrees()
        if np.all(deg == deg[0]):
            d = int(deg[0])
            sr = spectral if spectral is not None else spectral_gap(g)
            nuc = nuclear_norm(dm)
            rep.spectral_abs, rep.spectral_rel, rho = spectral_discrepancy_bound(dm, sr, nuclear=nuc)
            rep.inputs.update({"lambda2": sr.lambda2, "d": d, "nuclear_norm": nuc, "rho_star": rho})
            if d >= 3 and d < n and (n * d) % 2 == 0:
                rep.probabilistic_radius = probabilistic_radius(dmax, delta, n, d)
    return rep
