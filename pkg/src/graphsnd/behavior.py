"""Behavioral distances between agents.

Agents are affine policy heads evaluated on a shared batch of joint
observations. The pairwise distance between two agents is the average, over
every observation of every agent in the batch, of a closed-form distance
between their action distributions: Wasserstein-2 for diagonal Gaussians and
total variation for categoricals.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ContractError
from .seeding import make_rng

__all__ = [
    "ObservationBatch",
    "DiagonalGaussianHead",
    "CategoricalHead",
    "PolicyEnsemble",
    "DistanceMatrix",
    "DmaxBound",
    "CountingDistances",
    "w2_diag_gaussian",
    "tvd_categorical",
    "pairwise_distance",
    "build_distance_matrix",
    "metric_matrix_from_points",
    "synth_metric_matrix",
    "synth_lowrank_matrix",
    "random_gaussian_ensemble",
    "random_categorical_ensemble",
    "random_observation_batch",
]

DIST_SUM_TOL = 1e-9
TRIANGLE_RTOL = 1e-9


# ---------------------------------------------------------------------------
# closed-form distances


def w2_diag_gaussian(mu1, sigma1, mu2, sigma2):
    """W2 between N(mu1, diag(sigma1**2)) and N(mu2, diag(sigma2**2)).

    With diagonal covariances the matrix square roots commute and the
    distance is ``sqrt(|mu1 - mu2|**2 + |sigma1 - sigma2|**2)``.
    """
    mu1, sigma1, mu2, sigma2 = (np.asarray(x, dtype=float) for x in (mu1, sigma1, mu2, sigma2))
    if not (mu1.shape == sigma1.shape == mu2.shape == sigma2.shape):
        raise ValueError(
            f"dimension mismatch: {mu1.shape}, {sigma1.shape}, {mu2.shape}, {sigma2.shape}"
        )
    if np.any(sigma1 <= 0) or np.any(sigma2 <= 0):
        raise ValueError("standard deviations must be strictly positive")
    return float(np.sqrt(np.sum((mu1 - mu2) ** 2) + np.sum((sigma1 - sigma2) ** 2)))


def _check_distribution(p, name):
    if p.ndim != 1:
        raise ValueError(f"{name} must be a vector")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"{name} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > DIST_SUM_TOL:
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1 within {DIST_SUM_TOL}")


def tvd_categorical(p, q):
    """Total variation distance ``0.5 * |p - q|_1`` between two distributions.

    Inputs are validated but never renormalized; see
    :func:`normalize_distribution` for a lenient path.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_distribution(p, "p")
    _check_distribution(q, "q")
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    return float(0.5 * np.sum(np.abs(p - q)))


def normalize_distribution(p):
    """Clip negatives to zero and rescale to unit mass."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    total = p.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("cannot normalize a distribution with no positive mass")
    return p / total


# ---------------------------------------------------------------------------
# policies and observations


@dataclass(frozen=True)
class ObservationBatch:
    """Joint observations, ``obs[t, k]`` is agent ``k``'s view at sample ``t``."""

    obs: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        if obs.ndim != 3:
            raise ContractError("observation batch must have shape (T, n, d_obs)")
        T, n, d_obs = obs.shape
        if T < 1 or n < 2 or d_obs < 1:
            raise ContractError(f"need T >= 1, n >= 2, d_obs >= 1, got {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise ContractError("observations must be finite")
        object.__setattr__(self, "obs", obs)

    @property
    def T(self):
        return self.obs.shape[0]

    @property
    def n(self):
        return self.obs.shape[1]

    @property
    def d_obs(self):
        return self.obs.shape[2]

    def flat(self):
        """All ``T * n`` observation vectors stacked, shape ``(T*n, d_obs)``."""
        return self.obs.reshape(-1, self.d_obs)


@dataclass(frozen=True)
class DiagonalGaussianHead:
    """Affine mean with a state-independent diagonal standard deviation."""

    mean_weights: np.ndarray
    mean_bias: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.mean_weights, dtype=float))
        b = np.asarray(self.mean_bias, dtype=float).reshape(-1)
        ls = np.asarray(self.log_std, dtype=float).reshape(-1)
        if w.shape[0] != b.shape[0] or b.shape != ls.shape:
            raise ContractError(
                f"inconsistent head shapes: weights {w.shape}, bias {b.shape}, log_std {ls.shape}"
            )
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b)) and np.all(np.isfinite(ls))):
            raise ContractError("head parameters must be finite")
        if np.any(np.exp(ls) <= 0):
            raise ContractError("exp(log_std) underflows to zero")
        object.__setattr__(self, "mean_weights", w)
        object.__setattr__(self, "mean_bias", b)
        object.__setattr__(self, "log_std", ls)

    kind = "gaussian"

    @property
    def d_obs(self):
        return self.mean_weights.shape[1]

    @property
    def d_out(self):
        return self.mean_bias.shape[0]

    def mean(self, obs):
        return np.asarray(obs, dtype=float) @ self.mean_weights.T + self.mean_bias

    def std(self):
        return np.exp(self.log_std)

    def to_dict(self):
        return {
            "mean_weights": self.mean_weights.tolist(),
            "mean_bias": self.mean_bias.tolist(),
            "log_std": self.log_std.tolist(),
        }


@dataclass(frozen=True)
class CategoricalHead:
    """Affine logits followed by a softmax over ``A >= 2`` actions."""

    logits_weights: np.ndarray
    logits_bias: np.ndarray

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.logits_weights, dtype=float))
        b = np.asarray(self.logits_bias, dtype=float).reshape(-1)
        if w.shape[0] != b.shape[0]:
            raise ContractError(f"inconsistent head shapes: weights {w.shape}, bias {b.shape}")
        if b.shape[0] < 2:
            raise ContractError("categorical heads need at least two actions")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ContractError("head parameters must be finite")
        object.__setattr__(self, "logits_weights", w)
        object.__setattr__(self, "logits_bias", b)

    kind = "categorical"

    @property
    def d_obs(self):
        return self.logits_weights.shape[1]

    @property
    def d_out(self):
        return self.logits_bias.shape[0]

    def probs(self, obs):
        logits = np.asarray(obs, dtype=float) @ self.logits_weights.T + self.logits_bias
        logits = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(logits)
        return e / e.sum(axis=-1, keepdims=True)

    def to_dict(self):
        return {
            "logits_weights": self.logits_weights.tolist(),
            "logits_bias": self.logits_bias.tolist(),
        }


@dataclass(frozen=True)
class PolicyEnsemble:
    """``n`` heads of one kind sharing observation and action spaces."""

    heads: tuple

    def __post_init__(self):
        heads = tuple(self.heads)
        if len(heads) < 2:
            raise ContractError("an ensemble needs at least two agents")
        kinds = {h.kind for h in heads}
        if len(kinds) != 1:
            raise ContractError(f"mixed head kinds in ensemble: {sorted(kinds)}")
        if len({h.d_obs for h in heads}) != 1 or len({h.d_out for h in heads}) != 1:
            raise ContractError("all heads must share observation and action dimensions")
        object.__setattr__(self, "heads", heads)

    @property
    def n(self):
        return len(self.heads)

    @property
    def kind(self):
        return self.heads[0].kind

    @property
    def d_obs(self):
        return self.heads[0].d_obs

    @property
    def d_out(self):
        return self.heads[0].d_out

    def outputs(self, batch):
        """Per-agent distribution parameters on every observation of ``batch``.

        Returns a list with one entry per agent: ``(mean, std)`` for Gaussian
        heads and a probability table for categorical heads, evaluated on the
        ``T * n`` flattened observations.
        """
        if batch.d_obs != self.d_obs:
            raise ContractError(f"batch d_obs={batch.d_obs} but heads expect {self.d_obs}")
        flat = batch.flat()
        if self.kind == "gaussian":
            return [(h.mean(flat), h.std()) for h in self.heads]
        return [h.probs(flat) for h in self.heads]


def _output_distance(kind, out_i, out_j):
    """Mean closed-form distance over the rows of two agents' outputs."""
    if kind == "gaussian":
        (mu_i, sd_i), (mu_j, sd_j) = out_i, out_j
        per_obs = np.sqrt(np.sum((mu_i - mu_j) ** 2, axis=1) + np.sum((sd_i - sd_j) ** 2))
    else:
        per_obs = 0.5 * np.sum(np.abs(out_i - out_j), axis=1)
    return float(np.mean(per_obs))


def _check_batch(ensemble, batch):
    if batch.n != ensemble.n:
        raise ContractError(f"batch has {batch.n} agents, ensemble has {ensemble.n}")


def pairwise_distance(ensemble, batch, i, j):
    """Monte-Carlo behavioral distance between agents ``i`` and ``j``.

    Averages the per-observation distance over all ``T`` samples and all
    ``n`` agents' observations, normalized by ``T * n``.
    """
    _check_batch(ensemble, batch)
    n = ensemble.n
    for idx in (i, j):
        if not 0 <= idx < n:
            raise IndexError(f"agent index {idx} out of range for n={n}")
    if i == j:
        return 0.0
    flat = batch.flat()
    hi, hj = ensemble.heads[i], ensemble.heads[j]
    if ensemble.kind == "gaussian":
        out_i, out_j = (hi.mean(flat), hi.std()), (hj.mean(flat), hj.std())
    else:
        out_i, out_j = hi.probs(flat), hj.probs(flat)
    if i > j:
        out_i, out_j = out_j, out_i
    return _output_distance(ensemble.kind, out_i, out_j)


def build_distance_matrix(ensemble, batch, metric=False):
    """All ``n(n-1)/2`` pairwise distances as a :class:`DistanceMatrix`."""
    _check_batch(ensemble, batch)
    outputs = ensemble.outputs(batch)
    n = ensemble.n
    d = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        d[i, j] = d[j, i] = _output_distance(ensemble.kind, outputs[i], outputs[j])
    return DistanceMatrix(d, metric=metric)


# ---------------------------------------------------------------------------
# distance matrices


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, nonnegative, zero-diagonal ``n x n`` matrix.

    Set ``metric=True`` to verify the triangle inequality on construction
    (relative tolerance 1e-9).
    """

    values: np.ndarray
    metric: bool = False
    atol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        d = np.array(self.values, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ContractError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] < 2:
            raise ContractError("distance matrix needs n >= 2")
        if not np.all(np.isfinite(d)):
            raise ContractError("distance matrix has non-finite entries")
        if np.any(d < 0):
            raise ContractError("distance matrix has negative entries")
        if np.any(np.abs(np.diag(d)) > self.atol):
            raise ContractError("distance matrix diagonal must be zero")
        asym = np.max(np.abs(d - d.T))
        if asym > self.atol:
            raise ContractError(f"distance matrix not symmetric (max |d - d^T| = {asym:.3g})")
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        d.setflags(write=False)
        object.__setattr__(self, "values", d)
        if self.metric:
            worst = triangle_violation(d)
            if worst > 0:
                raise ContractError(f"triangle inequality violated by {worst:.3g}")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def max_entry(self):
        return float(self.values.max())

    def lookup(self, rows, cols):
        return self.values[np.asarray(rows, dtype=np.intp), np.asarray(cols, dtype=np.intp)]

    def upper(self):
        """Entries ``d[i, j]`` for ``i < j`` in row-major order."""
        i, j = np.triu_indices(self.n, k=1)
        return self.values[i, j]

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return self.metric == other.metric and np.array_equal(self.values, other.values)

    __hash__ = None


def triangle_violation(d, rtol=TRIANGLE_RTOL):
    """Largest amount by which ``d[i,j] > d[i,k] + d[k,j]`` beyond tolerance.

    Returns 0.0 when the triangle inequality holds for every triple.
    """
    d = np.asarray(d, dtype=float)
    scale = max(float(d.max()), 1e-300)
    worst = 0.0
    for k in range(d.shape[0]):
        via_k = d[:, k][:, None] + d[k, :][None, :]
        excess = d - via_k - rtol * scale
        worst = max(worst, float(excess.max()))
    return max(worst, 0.0)


@dataclass(frozen=True)
class DmaxBound:
    """A declared upper bound on every entry of a distance matrix."""

    value: float

    def __post_init__(self):
        if not (np.isfinite(self.value) and self.value > 0):
            raise ContractError(f"D_max must be finite and positive, got {self.value!r}")

    @classmethod
    def of(cls, dm, value=None):
        """Validate ``value`` against ``dm`` or fall back to its largest entry."""
        if value is None:
            value = dm.max_entry
            if value == 0:
                value = 1.0
        if value < dm.max_entry:
            raise ContractError(f"D_max={value} is below the largest distance {dm.max_entry}")
        return cls(float(value))


class CountingDistances:
    """Lookup wrapper that counts pairwise-distance evaluations.

    Wraps a :class:`DistanceMatrix`, or an ensemble plus batch, in which case
    each looked-up distance is actually computed on demand.
    """

    def __init__(self, source, batch=None):
        self.evaluations = 0
        if isinstance(source, DistanceMatrix):
            self._dm = source
            self._outputs = None
            self.n = source.n
        else:
            if batch is None:
                raise ValueError("an ensemble source needs an observation batch")
            _check_batch(source, batch)
            self._dm = None
            self._kind = source.kind
            self._outputs = source.outputs(batch)
            self.n = source.n

    def lookup(self, rows, cols):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        self.evaluations += int(rows.size)
        if self._dm is not None:
            return self._dm.lookup(rows, cols)
        out = [
            _output_distance(self._kind, self._outputs[min(i, j)], self._outputs[max(i, j)])
            if i != j
            else 0.0
            for i, j in zip(rows.tolist(), cols.tolist())
        ]
        return np.asarray(out, dtype=float)

    def reset(self):
        self.evaluations = 0


# ---------------------------------------------------------------------------
# synthetic generators


def metric_matrix_from_points(points, scale=1.0):
    """Scaled Euclidean distances between the rows of ``points``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[0] == 1 and np.asarray(points).ndim == 1:
        x = x.T
    diff = x[:, None, :] - x[None, :, :]
    d = scale * np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d, metric=True)


def synth_metric_matrix(seed, n, embed_dim, scale=1.0, points=None):
    """Distances between pseudorandom Gaussian points, so always metric.

    Pass ``points`` to bypass the generator with an explicit embedding.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if points is None:
        if n < 2 or embed_dim < 1:
            raise ValueError("need n >= 2 and embed_dim >= 1")
        points = make_rng(seed, "synth_metric").standard_normal((n, embed_dim))
    return metric_matrix_from_points(points, scale)


def rho_star(values):
    """Normalized nuclear norm ``|D|_* / (n * SND(D))`` via Jacobi eigenvalues."""
    from .linalg import jacobi_eigenvalues

    d = np.asarray(values, dtype=float)
    n = d.shape[0]
    snd = d[np.triu_indices(n, 1)].mean()
    if snd == 0:
        return float("nan")
    return float(np.sum(np.abs(jacobi_eigenvalues(d))) / (n * snd))


def _lowrank_values(gram, dmax):
    d = np.array(gram, dtype=float)
    np.fill_diagonal(d, 0.0)
    top = d.max()
    return d * (dmax / top) if top > 0 else d


def synth_lowrank_matrix(seed, n, rank, dmax=1.0, heterogeneity=0.5, rho_cap=None, factors=None):
    """Nonnegative low-rank distance table with a controlled nuclear norm.

    The table is ``X X^T`` for a nonnegative ``n x rank`` factor ``X`` with
    entries ``1 + heterogeneity * U(-1, 1)``, its diagonal zeroed and the
    whole matrix rescaled so the largest entry equals ``dmax``. Zeroing the
    diagonal adds at most a diagonal correction to the rank-``rank`` part.

    When ``rho_cap`` is given, the heterogeneity is shrunk by bisection until
    ``rho_star`` is at most the cap; a constant table has
    ``rho_star = 2 (n - 1) / n`` so any cap at or above that is reachable.
    ``factors`` bypasses the generator with an explicit ``X``.
    """
    if not 1 <= rank < n:
        raise ValueError(f"need 1 <= rank < n, got rank={rank}, n={n}")
    if dmax < 0:
        raise ValueError("dmax must be nonnegative")
    if dmax == 0:
        return DistanceMatrix(np.zeros((n, n)))
    if factors is None:
        u = make_rng(seed, "synth_lowrank").uniform(-1.0, 1.0, size=(n, rank))
    else:
        x = np.asarray(factors, dtype=float)
        if x.shape != (n, rank) or np.any(x < 0):
            raise ValueError("factors must be a nonnegative (n, rank) array")

    def build(h):
        xx = x if factors is not None else 1.0 + h * u
        return _lowrank_values(xx @ xx.T, dmax)

    d = build(heterogeneity)
    if rho_cap is not None and factors is None:
        if rho_cap < 2.0 * (n - 1) / n:
            raise ValueError(f"rho_cap {rho_cap} is below the floor 2(n-1)/n")
        if rho_star(d) > rho_cap:
            lo, hi = 0.0, heterogeneity
            for _ in range(40):
                mid = 0.5 * (lo + hi)
                if rho_star(build(mid)) <= rho_cap:
                    lo = mid
                else:
                    hi = mid
            d = build(lo)
    return DistanceMatrix(d)


def random_gaussian_ensemble(seed, n, d_obs, d_act, weight_scale=1.0, log_std_scale=0.3):
    """Heterogeneous affine Gaussian heads; ``weight_scale`` sets the spread."""
    rng = make_rng(seed, "gaussian_ensemble")
    heads = []
    for _ in range(n):
        heads.append(
            DiagonalGaussianHead(
                mean_weights=weight_scale * rng.standard_normal((d_act, d_obs)),
                mean_bias=weight_scale * rng.standard_normal(d_act),
                log_std=log_std_scale * rng.standard_normal(d_act) - 0.5,
            )
        )
    return PolicyEnsemble(tuple(heads))


def random_categorical_ensemble(seed, n, d_obs, n_actions, weight_scale=1.0):
    rng = make_rng(seed, "categorical_ensemble")
    heads = [
        CategoricalHead(
            logits_weights=weight_scale * rng.standard_normal((n_actions, d_obs)),
            logits_bias=weight_scale * rng.standard_normal(n_actions),
        )
        for _ in range(n)
    ]
    return PolicyEnsemble(tuple(heads))


def random_observation_batch(seed, T, n, d_obs):
    return ObservationBatch(make_rng(seed, "observations").standard_normal((T, n, d_obs)))
