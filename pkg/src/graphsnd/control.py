"""Toy closed-loop diversity controller.

Each agent behaves as ``a_i = h + s * delta_i``, so pairwise distances are
``s * ||delta_i - delta_j||``, exactly linear in the scale ``s``. Every
iteration the controller measures SND of the unscaled deviations with a
(possibly sparse) estimator and sets the next scale to ``target / SND``.
The scale set at iteration ``t - 1`` is the one in force while the agents act
at iteration ``t``, so

    applied_t = s_{t-1} * SND_t        audit_t = s_{t-1} * SND_full_t

The first iteration has no earlier scale and calibrates from its own
measurement. Deviations then drift by Gaussian noise. The full-SND audit is
computed alongside but never read by the controller.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .behavior import CountingDistances, DistanceMatrix
from .errors import ContractError, EmptyGraphError
from .estimators import snd_full, snd_uniform
from .graphs import build_bernoulli, build_complete, build_d_regular, build_knn, build_uniform_size
from .seeding import derive_seed, make_rng

__all__ = [
    "ControlledEnsemble",
    "EstimatorSpec",
    "TraceRow",
    "ControlTrace",
    "parse_estimator",
    "initial_ensemble",
    "control_step",
    "run_control",
    "audit_full_snd",
    "run_control_loop",
]

TRACE_COLUMNS = ("iteration", "s", "applied_snd", "audit_snd", "m", "fallback_used", "reward_proxy")


def _deviation_distances(deviations):
    diff = deviations[:, None, :] - deviations[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


@dataclass(frozen=True)
class ControlledEnsemble:
    """Shared base behavior plus per-agent deviations under a common scale.

    ``scale=None`` means no measurement has been taken yet; the first
    control step then calibrates from its own measurement. ``drift_sigma``
    is the per-iteration noise norm relative to ``drift_unit`` (by default
    the mean deviation norm at construction).
    """

    base: np.ndarray
    deviations: np.ndarray
    scale: float = None
    drift_sigma: float = 0.02
    drift_unit: float = None

    def __post_init__(self):
        h = np.asarray(self.base, dtype=float).reshape(-1)
        dev = np.asarray(self.deviations, dtype=float)
        if dev.ndim != 2 or dev.shape[0] < 2 or dev.shape[1] != h.shape[0]:
            raise ContractError(f"need deviations of shape (n >= 2, {h.shape[0]}), got {dev.shape}")
        if self.scale is not None and not self.scale >= 0:
            raise ContractError("scale must be nonnegative")
        if not self.drift_sigma >= 0:
            raise ContractError("drift_sigma must be nonnegative")
        object.__setattr__(self, "base", h)
        object.__setattr__(self, "deviations", dev)
        if self.drift_unit is None:
            object.__setattr__(self, "drift_unit", float(np.mean(np.linalg.norm(dev, axis=1))))

    @property
    def n(self):
        return self.deviations.shape[0]

    @property
    def dim(self):
        return self.deviations.shape[1]

    def behaviors(self):
        s = 1.0 if self.scale is None else self.scale
        return self.base[None, :] + s * self.deviations

    def base_distances(self):
        """Distances between unscaled deviations, ``||delta_i - delta_j||``."""
        return _deviation_distances(self.deviations)


@dataclass(frozen=True)
class EstimatorSpec:
    """Graph spec for the controller's measurement.

    ``kind`` is one of ``full``, ``bernoulli`` (``param`` = p), ``uniform``
    (``param`` = m), ``knn`` (``param`` = k, rebuilt on the current
    deviations) or ``dregular`` (``param`` = d, one fixed graph per run).
    """

    kind: str
    param: float = None

    def __str__(self):
        return self.kind if self.param is None else f"{self.kind}:{self.param:g}"


def parse_estimator(text):
    """Parse ``"full"``, ``"bernoulli:0.1"``, ``"uniform:122"``, ``"knn:3"`` or ``"dregular:6"``."""
    if isinstance(text, EstimatorSpec):
        return text
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.lower()
    if kind in ("full", "complete"):
        return EstimatorSpec("full")
    if kind not in ("bernoulli", "uniform", "knn", "dregular"):
        raise ContractError(f"unknown estimator {text!r}")
    if not arg:
        raise ContractError(f"estimator {kind!r} needs a parameter, e.g. {kind}:0.1")
    try:
        param = float(arg)
    except ValueError:
        raise ContractError(f"bad estimator parameter {arg!r}") from None
    if kind == "bernoulli" and not 0 < param <= 1:
        raise ContractError("Bernoulli p must lie in (0, 1]")
    if kind != "bernoulli":
        if param != int(param) or param < 1:
            raise ContractError(f"{kind} parameter must be a positive integer")
        param = int(param)
    return EstimatorSpec(kind, param)


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    s: float
    applied_snd: float
    audit_snd: float
    m: int
    fallback_used: bool
    reward_proxy: float
    measured_snd: float = None
    s_next: float = None
    evaluations: int = 0


@dataclass
class ControlTrace:
    """Per-iteration record of one control run."""

    target: float
    estimator: str
    seed: int
    rows: list = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def late(self, name, window):
        return self.column(name)[-window:]

    def tracking_error(self, window):
        """Mean relative error of the applied signal over the last ``window`` iterations."""
        return float(np.mean(np.abs(self.late("applied_snd", window) - self.target)) / self.target)

    def audit_error(self, window):
        audit = self.late("audit_snd", window)
        if np.any(np.isnan(audit)):
            raise ContractError("trace was recorded without the audit")
        return float(np.mean(np.abs(audit - self.target)) / self.target)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.iteration,
                    repr(float(r.s)),
                    repr(float(r.applied_snd)),
                    "" if r.audit_snd is None else repr(float(r.audit_snd)),
                    r.m,
                    int(r.fallback_used),
                    repr(float(r.reward_proxy)),
                ]
            )
        return buf.getvalue()


def initial_ensemble(seed, n, dim=256, drift_sigma=0.02):
    """Seeded base behavior and standard-normal deviations."""
    rng = make_rng(seed, "control_init", n, dim)
    return ControlledEnsemble(rng.standard_normal(dim), rng.standard_normal((n, dim)), None, drift_sigma)


def _measure(ens, spec, seed, dm):
    """``(SND estimate, m, fallback_used, evaluations)`` on unscaled deviations."""
    counter = CountingDistances(dm)
    n = ens.n
    if spec.kind == "full":
        g = build_complete(n)
    elif spec.kind == "bernoulli":
        g = build_bernoulli(derive_seed(seed, "graph"), n, spec.param)
    elif spec.kind == "uniform":
        g = build_uniform_size(derive_seed(seed, "graph"), n, min(spec.param, comb(n, 2)))
    elif spec.kind == "knn":
        g = build_knn(ens.deviations, spec.param)
    elif spec.kind == "dregular":
        # the run seed is folded into ``seed`` by the caller for fixed graphs
        g = build_d_regular(derive_seed(seed, "dregular"), n, spec.param)
    else:
        raise ContractError(f"unknown estimator kind {spec.kind!r}")
    try:
        value = snd_uniform(counter, g).value
        fallback = False
        m = g.num_edges
    except EmptyGraphError:
        value = snd_full(counter)
        fallback = True
        m = comb(n, 2)
    return value, m, fallback, counter.evaluations


def control_step(ens, target, estimator, seed, iteration=0, audit=True, graph_seed=None):
    """One measure-scale-drift iteration; returns ``(ens', row)``.

    ``seed`` drives the drift noise. The estimator's random graph uses
    ``graph_seed`` when given (defaults to ``seed``); both are derived by
    independent labels, so runs with different estimators at the same
    ``seed`` see identical drift.
    """
    if not target > 0:
        raise ContractError("target must be positive")
    spec = parse_estimator(estimator)
    dm = ens.base_distances()
    gseed = seed if graph_seed is None else graph_seed
    measured, m, fallback, evals = _measure(ens, spec, gseed, dm)
    if measured <= 0:
        raise ContractError("measured SND of the deviations is zero; cannot rescale")
    s_next = target / measured
    s = s_next if ens.scale is None else ens.scale
    applied = s * measured
    audit_value = s * snd_full(dm) if audit else None
    noise = make_rng(seed, "drift").standard_normal(ens.deviations.shape)
    step_norm = ens.drift_sigma * ens.drift_unit / math.sqrt(ens.dim)
    new = replace(ens, deviations=ens.deviations + step_norm * noise, scale=s_next)
    row = TraceRow(
        iteration=iteration,
        s=s,
        applied_snd=applied,
        audit_snd=audit_value,
        m=m,
        fallback_used=fallback,
        reward_proxy=-abs(applied - target) / target,
        measured_snd=measured,
        s_next=s_next,
        evaluations=evals,
    )
    return new, row


def run_control(n, target, estimator, seed, iterations=167, dim=256, drift_sigma=0.02, audit=True, history=False):
    """One control run. With ``history=True`` also returns the per-iteration states."""
    spec = parse_estimator(estimator)
    ens = initial_ensemble(derive_seed(seed, "init"), n, dim, drift_sigma)
    trace = ControlTrace(target, str(spec), seed)
    states = []
    for t in range(iterations):
        if history:
            states.append(ens)
        step_seed = derive_seed(seed, "iteration", t)
        if spec.kind == "dregular":
            gseed = derive_seed(seed, "fixed_graph")
        else:
            gseed = derive_seed(seed, "graph", t)
        ens, row = control_step(ens, target, spec, step_seed, iteration=t, audit=audit, graph_seed=gseed)
        trace.rows.append(row)
    return (trace, states) if history else trace


def audit_full_snd(trace, history):
    """Post-hoc complete-graph SND of the scaled behaviors at every iteration.

    ``history[t]`` is the ensemble state the agents acted in at iteration
    ``t``; the scale in force is read from the trace. Returns the audit
    series and its difference from the applied signal.
    """
    if len(history) != len(trace.rows):
        raise ContractError("history and trace lengths differ")
    audit = np.array([r.s * snd_full(state.base_distances()) for r, state in zip(trace.rows, history)])
    applied = trace.column("applied_snd")
    return {"audit_snd": audit, "audit_minus_applied": audit - applied}


def _sem(x):
    x = np.asarray(x, dtype=float)
    return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def run_control_loop(
    n=50,
    targets=(0.12, 0.14, 0.15),
    estimator="bernoulli:0.1",
    seeds=(0, 1, 2),
    iterations=167,
    late_window=50,
    paired="full",
    dim=256,
    drift_sigma=0.02,
    master_seed=0,
    audit=True,
):
    """Every (target, seed) cell for ``estimator`` and, optionally, a paired arm.

    Cell seeds are ``derive_seed(master_seed, "control", target, seed)`` and
    are shared by both arms, so paired runs see the same initial state and
    drift noise. Returns ``(summary, traces)`` with ``traces`` keyed by
    ``(estimator, target, seed)``.
    """
    if iterations < late_window:
        raise ContractError("iterations must be at least the late-window size")
    arms = [str(parse_estimator(estimator))]
    if paired:
        arms.append(str(parse_estimator(paired)))
    traces = {}
    cells = []
    for target in targets:
        for seed in seeds:
            cell_seed = derive_seed(master_seed, "control", float(target), int(seed))
            cell = {"target": float(target), "seed": int(seed)}
            for arm in arms:
                tr = run_control(n, target, arm, cell_seed, iterations, dim, drift_sigma, audit)
                traces[(arm, float(target), int(seed))] = tr
                late = tr.rows[-late_window:]
                cell[arm] = {
                    "tracking_error": tr.tracking_error(late_window),
                    "audit_error": tr.audit_error(late_window) if audit else None,
                    "reward_proxy": float(np.mean([r.reward_proxy for r in late])),
                    "mean_m": float(np.mean([r.m for r in late])),
                    "fallbacks": int(sum(r.fallback_used for r in tr.rows)),
                    "evaluations_per_call": float(np.mean([r.evaluations for r in tr.rows])),
                }
            cells.append(cell)
    summary = {
        "n": n,
        "targets": [float(t) for t in targets],
        "seeds": [int(s) for s in seeds],
        "iterations": iterations,
        "late_window": late_window,
        "dim": dim,
        "drift_sigma": drift_sigma,
        "master_seed": master_seed,
        "estimator": arms[0],
        "paired": arms[1] if paired else None,
        "cells": cells,
    }
    for arm in arms:
        summary[f"{arm}.max_tracking_error"] = max(c[arm]["tracking_error"] for c in cells)
        if audit:
            summary[f"{arm}.max_audit_error"] = max(c[arm]["audit_error"] for c in cells)
    if paired:
        a, b = arms
        diffs = np.array([c[a]["reward_proxy"] - c[b]["reward_proxy"] for c in cells])
        summary["paired"] = b
        summary["paired_reward_diff_mean"] = float(np.mean(diffs))
        summary["paired_reward_diff_sem"] = _sem(diffs)
        summary["paired_reward_diffs"] = diffs.tolist()
        ea = np.mean([c[a]["evaluations_per_call"] for c in cells])
        eb = np.mean([c[b]["evaluations_per_call"] for c in cells])
        summary["evaluation_ratio"] = float(eb / ea) if ea else None
    return summary, traces


def summary_json(summary):
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"
