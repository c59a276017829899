"""Aggregation graphs over the agent set and their structural measurements."""

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .behavior import DistanceMatrix
from .errors import ContractError
from .linalg import MAX_DENSE_N, jacobi_eigenvalues
from .seeding import make_rng

__all__ = [
    "Graph",
    "SpectralReport",
    "ForwardingReport",
    "build_complete",
    "build_bernoulli",
    "build_uniform_size",
    "build_knn",
    "build_d_regular",
    "build_custom",
    "spectral_gap",
    "forwarding_index",
    "apply_permutation",
    "pair_index",
    "is_connected",
]

DREGULAR_RESTART_CAP = 10_000
BRUTE_EXACT_MAX_N = 7


def pair_index(n):
    """Row-major ``(i, j)`` arrays of all pairs ``i < j``."""
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.intp), j.astype(np.intp)


@dataclass(frozen=True)
class Graph:
    """Weighted undirected simple graph on vertices ``0 .. n-1``.

    Edges are stored as an ``(m, 2)`` array with ``i < j`` in each row,
    sorted lexicographically. ``kind`` and ``params`` describe how the graph
    was produced (e.g. ``"bernoulli"`` with ``{"p": 0.1, "weight_mode":
    "ht"}``).
    """

    n: int
    edges: np.ndarray
    weights: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.n)
        e = np.asarray(self.edges, dtype=np.intp).reshape(-1, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if n < 1:
            raise ContractError("a graph needs at least one vertex")
        if w.shape[0] != e.shape[0]:
            raise ContractError(f"{e.shape[0]} edges but {w.shape[0]} weights")
        if e.size:
            if np.any(e[:, 0] == e[:, 1]):
                raise ContractError("self-loops are not allowed")
            e = np.sort(e, axis=1)
            if e.min() < 0 or e.max() >= n:
                raise ContractError(f"edge endpoint out of range for n={n}")
            order = np.lexsort((e[:, 1], e[:, 0]))
            e, w = e[order], w[order]
            dup = np.all(e[1:] == e[:-1], axis=1)
            if np.any(dup):
                i, j = e[1:][dup][0]
                raise ContractError(f"duplicate edge ({i}, {j})")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractError("edge weights must be finite and nonnegative")
        e.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "params", dict(self.params))

    @property
    def num_edges(self):
        return int(self.edges.shape[0])

    @property
    def total_weight(self):
        return float(np.sum(self.weights))

    @property
    def zero_weight(self):
        """True when ``W(G) = 0``; Graph-SND is then 0 by convention."""
        return self.total_weight == 0.0

    @property
    def empty(self):
        return self.num_edges == 0

    @property
    def unit_weights(self):
        return bool(np.all(self.weights == 1.0))

    def degrees(self):
        deg = np.zeros(self.n, dtype=np.intp)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self, weighted=False):
        a = np.zeros((self.n, self.n))
        vals = self.weights if weighted else 1.0
        a[self.edges[:, 0], self.edges[:, 1]] = vals
        a[self.edges[:, 1], self.edges[:, 0]] = vals
        return a

    def neighbors(self):
        """Sorted adjacency lists."""
        nbrs = [[] for _ in range(self.n)]
        for i, j in self.edges.tolist():
            nbrs[i].append(j)
            nbrs[j].append(i)
        for lst in nbrs:
            lst.sort()
        return nbrs

    def descriptor(self):
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "n": self.n,
            "num_edges": self.num_edges,
            "total_weight": self.total_weight,
        }

    def edge_set(self):
        return {(int(i), int(j)) for i, j in self.edges}

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and self.kind == other.kind
            and self.params == other.params
            and np.array_equal(self.edges, other.edges)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def build_custom(n, edges, weights=None, kind="custom", params=None):
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    if weights is None:
        weights = np.ones(edges.shape[0])
    return Graph(n, edges, weights, kind, params or {})


# ---------------------------------------------------------------------------
# builders


def build_complete(n):
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    i, j = pair_index(n)
    return Graph(n, np.column_stack([i, j]), np.ones(i.size), "complete")


def build_bernoulli(seed, n, p, weight_mode="unit"):
    """Include each of the ``C(n, 2)`` pairs independently with probability ``p``.

    ``weight_mode="ht"`` puts weight ``1/p`` on every sampled edge. The result
    may have no edges; check :attr:`Graph.empty`.
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if weight_mode not in ("unit", "ht"):
        raise ValueError(f"unknown weight_mode {weight_mode!r}")
    if n < 2:
        raise ValueError("need n >= 2")
    i, j = pair_index(n)
    keep = make_rng(seed, "bernoulli", n).random(i.size) < p
    w = np.full(int(keep.sum()), 1.0 / p if weight_mode == "ht" else 1.0)
    return Graph(
        n, np.column_stack([i[keep], j[keep]]), w, "bernoulli", {"p": p, "weight_mode": weight_mode}
    )


def build_uniform_size(seed, n, m):
    """Exactly ``m`` distinct pairs drawn uniformly without replacement."""
    pairs = comb(n, 2)
    if not 1 <= m <= pairs:
        raise ValueError(f"m must lie in [1, {pairs}], got {m}")
    i, j = pair_index(n)
    pick = np.sort(make_rng(seed, "uniform_size", n).choice(pairs, size=m, replace=False))
    return Graph(n, np.column_stack([i[pick], j[pick]]), np.ones(m), "uniform", {"m": m})


def build_knn(points, k):
    """Union-symmetrized k-nearest-neighbor graph under Euclidean distance.

    Each vertex links to its ``k`` nearest other points; distance ties go to
    the smaller index. An edge is kept if either endpoint selected it.
    """
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if k < 1 or n < k + 1:
        raise ValueError(f"need k >= 1 and n >= k + 1, got k={k}, n={n}")
    sq = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=-1)
    idx = np.arange(n)
    chosen = set()
    for i in range(n):
        others = idx[idx != i]
        order = others[np.lexsort((others, sq[i, others]))]
        for j in order[:k].tolist():
            chosen.add((min(i, j), max(i, j)))
    edges = np.array(sorted(chosen), dtype=np.intp).reshape(-1, 2)
    return Graph(n, edges, np.ones(len(edges)), "knn", {"k": k})


def _pairing_attempt(rng, n, d):
    """One Steger-Wormald style pass: pair stubs, keep valid pairs, re-pair the rest.

    Returns the edge set, or None when no valid pair can be formed from the
    remaining stubs.
    """
    edges = set()
    stubs = np.repeat(np.arange(n), d)
    while stubs.size:
        rng.shuffle(stubs)
        leftover = {}
        for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
            if a > b:
                a, b = b, a
            if a != b and (a, b) not in edges:
                edges.add((a, b))
            else:
                leftover[a] = leftover.get(a, 0) + 1
                leftover[b] = leftover.get(b, 0) + 1
        if not leftover:
            break
        verts = sorted(leftover)
        if not any(
            u != v and (min(u, v), max(u, v)) not in edges
            for u, v in combinations(verts, 2)
        ):
            return None
        stubs = np.repeat(np.array(verts), [leftover[v] for v in verts])
    return edges


def _configuration_attempt(rng, n, d):
    stubs = np.repeat(np.arange(n), d)
    rng.shuffle(stubs)
    edges = set()
    for a, b in zip(stubs[0::2].tolist(), stubs[1::2].tolist()):
        if a > b:
            a, b = b, a
        if a == b or (a, b) in edges:
            return None
        edges.add((a, b))
    return edges


def build_d_regular(seed, n, d, method="pairing", max_restarts=DREGULAR_RESTART_CAP):
    """Random simple ``d``-regular graph from a stub matching.

    ``method="configuration"`` draws a uniform perfect matching of the ``n*d``
    stubs and restarts from scratch on any self-loop or repeated edge, which
    is exactly uniform over simple graphs but needs about ``exp((d*d-1)/4)``
    restarts. ``method="pairing"`` (default) keeps the valid pairs of each
    round and re-matches only the offending stubs, restarting only when the
    leftover stubs admit no valid pair; it is asymptotically uniform for
    sparse ``d`` and practical at ``d = O(log n)``.
    """
    if d < 1 or d >= n:
        raise ValueError(f"need 1 <= d < n, got d={d}, n={n}")
    if (n * d) % 2:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    attempt = {"pairing": _pairing_attempt, "configuration": _configuration_attempt}.get(method)
    if attempt is None:
        raise ValueError(f"unknown method {method!r}")
    rng = make_rng(seed, "d_regular", n, d)
    for restart in range(max_restarts):
        edges = attempt(rng, n, d)
        if edges is not None:
            e = np.array(sorted(edges), dtype=np.intp)
            return Graph(n, e, np.ones(len(e)), "dregular", {"d": d, "method": method})
    raise RuntimeError(f"d-regular generation failed after {max_restarts} restarts (n={n}, d={d})")


# ---------------------------------------------------------------------------
# measurements


@dataclass(frozen=True)
class SpectralReport:
    d: int
    lambda2: float
    gap: float
    eigenvalues: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"d": self.d, "lambda2": self.lambda2, "gap": self.gap}


def spectral_gap(g):
    """Second-largest adjacency eigenvalue magnitude of a regular unit-weight graph."""
    if not g.unit_weights:
        raise ContractError("spectral_gap needs unit edge weights")
    deg = g.degrees()
    if g.n < 2 or np.any(deg != deg[0]):
        raise ContractError("spectral_gap needs a regular graph")
    if g.n > MAX_DENSE_N:
        raise ContractError(f"spectral_gap is limited to n <= {MAX_DENSE_N}")
    d = int(deg[0])
    eig = jacobi_eigenvalues(g.adjacency())
    lambda2 = float(np.max(np.abs(eig[1:])))
    gap = 1.0 - lambda2 / d if d > 0 else 0.0
    return SpectralReport(d, lambda2, gap, eig)


def is_connected(g):
    if g.n == 1:
        return True
    nbrs = g.neighbors()
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


@dataclass(frozen=True)
class ForwardingReport:
    pi_upper: int
    pi_exact: int = None
    routing: str = "bfs"

    def to_dict(self):
        return {"pi_upper": self.pi_upper, "pi_exact": self.pi_exact, "routing": self.routing}


def _bfs_parents(nbrs, source):
    """BFS tree where each vertex's parent is its smallest-index predecessor."""
    n = len(nbrs)
    dist = [-1] * n
    parent = [-1] * n
    dist[source] = 0
    order = [source]
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if dist[v] == -1:
                dist[v] = dist[u] + 1
                parent[v] = u
                order.append(v)
                queue.append(v)
            elif dist[v] == dist[u] + 1 and u < parent[v]:
                parent[v] = u
    return dist, parent, order


def _route_upper(g):
    nbrs = g.neighbors()
    n = g.n
    eid = {(int(i), int(j)): k for k, (i, j) in enumerate(g.edges.tolist())}
    load = np.zeros(g.num_edges, dtype=np.int64)
    for s in range(n - 1):
        dist, parent, order = _bfs_parents(nbrs, s)
        if min(dist) < 0:
            raise ContractError("forwarding index needs a connected graph")
        # subtree count of targets t > s; each tree edge carries that many paths
        below = [1 if v > s else 0 for v in range(n)]
        # parents may be re-pointed after discovery, so order children by distance
        for v in sorted(order[1:], key=lambda u: -dist[u]):
            p = parent[v]
            if below[v]:
                load[eid[(min(v, p), max(v, p))]] += below[v]
            below[p] += below[v]
    return int(load.max()) if load.size else 0


def _simple_paths(nbrs, s, t, limit):
    """All simple s-t paths as sorted tuples of edge ids (bounded by ``limit``)."""
    paths = []
    stack = [(s, [s], [])]
    while stack:
        u, visited, used = stack.pop()
        for v in nbrs[u]:
            if v in visited:
                continue
            edge = (min(u, v), max(u, v))
            if v == t:
                paths.append(used + [edge])
                if len(paths) > limit:
                    raise RuntimeError("too many simple paths for brute force")
            else:
                stack.append((v, visited + [v], used + [edge]))
    return paths


def _cut_lower_bound(g):
    """``max_S ceil(|S| |S^c| / |cut(S)|)``: every pair across a cut uses a cut edge."""
    n = g.n
    a, b = g.edges[:, 0], g.edges[:, 1]
    best = 1
    for mask in range(1, 1 << (n - 1)):
        side = (mask >> np.arange(n)) & 1
        cut = int(np.sum(side[a] != side[b]))
        k = int(side.sum())
        best = max(best, -(-(k * (n - k)) // cut))
    return best


def _brute_exact(g, upper):
    """Exact integral forwarding index over all simple-path systems.

    Every simple path of every pair is enumerated; choosing one per pair so
    as to minimize the largest edge load is solved as a 0/1 program by
    scipy's HiGHS branch and bound, bounded above by the BFS routing value.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import coo_matrix

    nbrs = g.neighbors()
    eid = {(int(i), int(j)): k for k, (i, j) in enumerate(g.edges.tolist())}
    m = g.num_edges
    options = []
    for s, t in combinations(range(g.n), 2):
        options.append([tuple(eid[e] for e in p) for p in _simple_paths(nbrs, s, t, 200_000)])
    dist_sum = sum(min(len(p) for p in opts) for opts in options)
    lower = max(1, -(-dist_sum // m), _cut_lower_bound(g))
    if lower >= upper:
        return upper

    # variables: one indicator per (pair, path), then the load level L
    rows, cols = [], []
    prow, pcol = [], []
    var = 0
    for k, opts in enumerate(options):
        for path in opts:
            prow.append(k)
            pcol.append(var)
            rows.extend(path)
            cols.extend([var] * len(path))
            var += 1
    nvar = var + 1
    pick = coo_matrix((np.ones(len(prow)), (prow, pcol)), shape=(len(options), nvar))
    load = coo_matrix(
        (np.r_[np.ones(len(rows)), -np.ones(m)], (np.r_[rows, np.arange(m)], np.r_[cols, np.full(m, var)])),
        shape=(m, nvar),
    )
    cost = np.zeros(nvar)
    cost[var] = 1.0
    lb = np.zeros(nvar)
    ub = np.ones(nvar)
    lb[var], ub[var] = lower, upper
    res = milp(
        cost,
        constraints=[LinearConstraint(pick.tocsr(), 1, 1), LinearConstraint(load.tocsr(), -np.inf, 0)],
        integrality=np.ones(nvar),
        bounds=Bounds(lb, ub),
    )
    if not res.success:
        raise RuntimeError(f"exact forwarding index solve failed: {res.message}")
    return int(round(res.x[var]))


def forwarding_index(g, mode="route_upper"):
    """Edge forwarding index of a connected unit-weight graph.

    ``route_upper`` routes every pair along one BFS shortest path (smallest
    predecessor wins ties) and returns the largest edge load, an upper bound
    on the true index. ``brute_exact`` (``n <= 7``) additionally searches all
    simple-path systems by branch and bound.
    """
    if mode not in ("route_upper", "brute_exact"):
        raise ValueError(f"unknown mode {mode!r}")
    if not g.unit_weights:
        raise ContractError("forwarding index needs unit edge weights")
    if g.n < 2:
        raise ContractError("forwarding index needs n >= 2")
    if not is_connected(g):
        raise ContractError("forwarding index needs a connected graph")
    upper = _route_upper(g)
    if mode == "route_upper":
        return ForwardingReport(upper)
    if g.n > BRUTE_EXACT_MAX_N:
        raise ContractError(f"brute_exact is limited to n <= {BRUTE_EXACT_MAX_N}")
    return ForwardingReport(upper, _brute_exact(g, upper), "bfs+exhaustive")


def apply_permutation(g, dm, sigma):
    """Relabel a distance matrix: ``out[i, j] = dm[sigma[i], sigma[j]]``."""
    sigma = np.asarray(sigma, dtype=np.intp)
    n = dm.n
    if g is not None and g.n != n:
        raise ContractError(f"graph has {g.n} vertices, matrix has {n}")
    if sigma.shape != (n,) or not np.array_equal(np.sort(sigma), np.arange(n)):
        raise ValueError("sigma is not a permutation of 0..n-1")
    return DistanceMatrix(dm.values[np.ix_(sigma, sigma)], metric=False)
