"""Reading and writing distance matrices, ensembles, batches and graphs.

Floats are written with ``repr`` so every emitted file reloads to an
identical in-memory value. Format problems raise :class:`ParseError` with a
1-based line/column; well-formed files whose contents break an invariant
(asymmetry, negative weights) raise :class:`ContractError`.
"""

import json
from pathlib import Path

import numpy as np

from .behavior import CategoricalHead, DiagonalGaussianHead, DistanceMatrix, ObservationBatch, PolicyEnsemble
from .errors import ContractError, ParseError
from .graphs import Graph

__all__ = [
    "parse_distance_matrix",
    "format_distance_matrix",
    "load_distance_matrix",
    "save_distance_matrix",
    "parse_graph_csv",
    "format_graph_csv",
    "graph_to_json",
    "graph_from_json",
    "load_graph",
    "save_graph",
    "ensemble_to_json",
    "ensemble_from_json",
    "load_ensemble",
    "parse_observation_batch",
    "format_observation_batch",
    "load_observation_batch",
]


def _fmt(x):
    return repr(float(x))


def _number(token, line, column, source):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token.strip()!r}", line, column, source) from None
    return value


def _lines(text):
    """Non-blank lines with their 1-based numbers."""
    for k, raw in enumerate(text.splitlines(), start=1):
        if raw.strip():
            yield k, raw


# ---------------------------------------------------------------------------
# distance matrices


def parse_distance_matrix(text, source=None):
    rows = []
    width = None
    for line, raw in _lines(text):
        tokens = raw.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(f"expected {width} columns, found {len(tokens)}", line, None, source)
        rows.append([_number(t, line, col, source) for col, t in enumerate(tokens, start=1)])
    if not rows:
        raise ParseError("empty distance matrix", None, None, source)
    if len(rows) != width:
        raise ParseError(f"matrix has {len(rows)} rows but {width} columns", None, None, source)
    return DistanceMatrix(np.array(rows))


def format_distance_matrix(dm):
    return "".join(",".join(_fmt(x) for x in row) + "\n" for row in dm.values)


def load_distance_matrix(path):
    return parse_distance_matrix(Path(path).read_text(), source=str(path))


def save_distance_matrix(dm, path):
    Path(path).write_text(format_distance_matrix(dm))


# ---------------------------------------------------------------------------
# graphs


def parse_graph_csv(text, source=None):
    """Edge list with an ``n=<count>`` header and ``i,j,w`` rows."""
    lines = list(_lines(text))
    if not lines:
        raise ParseError("empty graph file", None, None, source)
    line, header = lines[0]
    head = header.strip().replace(" ", "")
    if not head.startswith("n="):
        raise ParseError("first line must be 'n=<count>'", line, 1, source)
    try:
        n = int(head[2:])
    except ValueError:
        raise ParseError(f"bad vertex count {head[2:]!r}", line, 3, source) from None
    edges, weights, seen = [], [], {}
    for line, raw in lines[1:]:
        tokens = raw.split(",")
        if len(tokens) not in (2, 3):
            raise ParseError(f"expected 'i,j[,w]', found {len(tokens)} fields", line, None, source)
        ij = []
        for col, t in enumerate(tokens[:2], start=1):
            try:
                ij.append(int(t))
            except ValueError:
                raise ParseError(f"not a vertex index: {t.strip()!r}", line, col, source) from None
        i, j = ij
        w = _number(tokens[2], line, 3, source) if len(tokens) == 3 else 1.0
        if i == j:
            raise ParseError(f"self-loop on vertex {i}", line, 1, source)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ParseError(f"duplicate edge {key} (first on line {seen[key]})", line, 1, source)
        seen[key] = line
        edges.append(key)
        weights.append(w)
    return Graph(n, np.array(edges, dtype=np.intp).reshape(-1, 2), np.array(weights))


def format_graph_csv(g):
    out = [f"n={g.n}\n"]
    out += [f"{i},{j},{_fmt(w)}\n" for (i, j), w in zip(g.edges.tolist(), g.weights)]
    return "".join(out)


def graph_to_json(g):
    return (
        json.dumps(
            {
                "n": g.n,
                "kind": g.kind,
                "params": g.params,
                "edges": [[int(i), int(j), float(w)] for (i, j), w in zip(g.edges.tolist(), g.weights)],
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )


def graph_from_json(text, source=None):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, source) from None
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise ParseError("graph JSON needs 'n' and 'edges'", None, None, source)
    seen = set()
    edges, weights = [], []
    for k, e in enumerate(obj["edges"]):
        if not isinstance(e, (list, tuple)) or len(e) not in (2, 3):
            raise ParseError(f"edge #{k} must be [i, j] or [i, j, w]", None, None, source)
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise ParseError(f"edge #{k}: self-loop on vertex {i}", None, None, source)
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ParseError(f"edge #{k}: duplicate edge {key}", None, None, source)
        seen.add(key)
        edges.append(key)
        weights.append(float(e[2]) if len(e) == 3 else 1.0)
    return Graph(
        int(obj["n"]),
        np.array(edges, dtype=np.intp).reshape(-1, 2),
        np.array(weights),
        kind=obj.get("kind", "custom"),
        params=obj.get("params", {}),
    )


def load_graph(path):
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return graph_from_json(text, source=str(path))
    return parse_graph_csv(text, source=str(path))


def save_graph(g, path):
    path = Path(path)
    path.write_text(graph_to_json(g) if path.suffix.lower() == ".json" else format_graph_csv(g))


# ---------------------------------------------------------------------------
# ensembles and observation batches


def ensemble_to_json(ensemble):
    obj = {
        "kind": ensemble.kind,
        "n": ensemble.n,
        "d_obs": ensemble.d_obs,
        ("d_act" if ensemble.kind == "gaussian" else "A"): ensemble.d_out,
        "heads": [h.to_dict() for h in ensemble.heads],
    }
    return json.dumps(obj, indent=2) + "\n"


def ensemble_from_json(text, source=None):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, source) from None
    kind = obj.get("kind")
    if kind not in ("gaussian", "categorical"):
        raise ParseError(f"kind must be 'gaussian' or 'categorical', got {kind!r}", None, None, source)
    heads = []
    try:
        for h in obj["heads"]:
            if kind == "gaussian":
                heads.append(
                    DiagonalGaussianHead(
                        np.array(h["mean_weights"], dtype=float),
                        np.array(h["mean_bias"], dtype=float),
                        np.array(h["log_std"], dtype=float),
                    )
                )
            else:
                heads.append(
                    CategoricalHead(np.array(h["logits_weights"], dtype=float), np.array(h["logits_bias"], dtype=float))
                )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed head: {exc}", None, None, source) from None
    ens = PolicyEnsemble(tuple(heads))
    if "n" in obj and obj["n"] != ens.n:
        raise ContractError(f"header says n={obj['n']} but {ens.n} heads given")
    if "d_obs" in obj and obj["d_obs"] != ens.d_obs:
        raise ContractError(f"header says d_obs={obj['d_obs']} but heads have {ens.d_obs}")
    return ens


def load_ensemble(path):
    return ensemble_from_json(Path(path).read_text(), source=str(path))


def parse_observation_batch(text, source=None):
    """Rows ``t,k,x_1..x_d``: observation of agent ``k`` at step ``t``."""
    records = {}
    width = None
    for line, raw in _lines(text):
        tokens = raw.split(",")
        if width is None:
            width = len(tokens)
            if width < 3:
                raise ParseError("rows need t, k and at least one observation value", line, None, source)
        elif len(tokens) != width:
            raise ParseError(f"expected {width} columns, found {len(tokens)}", line, None, source)
        idx = []
        for col, t in enumerate(tokens[:2], start=1):
            try:
                idx.append(int(t))
            except ValueError:
                raise ParseError(f"not an index: {t.strip()!r}", line, col, source) from None
        key = tuple(idx)
        if key in records:
            raise ParseError(f"duplicate (t, k) = {key}", line, 1, source)
        records[key] = [_number(t, line, col, source) for col, t in enumerate(tokens[2:], start=3)]
    if not records:
        raise ParseError("empty observation batch", None, None, source)
    T = 1 + max(t for t, _ in records)
    n = 1 + max(k for _, k in records)
    if len(records) != T * n or min(min(key) for key in records) < 0:
        raise ParseError(f"need every (t, k) in [0,{T}) x [0,{n}) exactly once", None, None, source)
    obs = np.empty((T, n, width - 2))
    for (t, k), row in records.items():
        obs[t, k] = row
    return ObservationBatch(obs)


def format_observation_batch(batch):
    out = []
    for t in range(batch.T):
        for k in range(batch.n):
            out.append(",".join([str(t), str(k)] + [_fmt(x) for x in batch.obs[t, k]]) + "\n")
    return "".join(out)


def load_observation_batch(path):
    return parse_observation_batch(Path(path).read_text(), source=str(path))
