"""Topological simplification by persistence optimization.

The loss is the squared 2-Wasserstein distance between the current diagram
and a target diagram holding the signal pairs of the input. Each iteration
moves the birth and death vertices of every pair toward their assigned
target (direct descent on the analytic gradient, or Adam), then recomputes
the diagram and the assignment. The accelerated method recomputes the
discrete gradient only around updated vertices and re-solves the assignment
only for pairs whose birth or death vertex changed.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field as dc_field, asdict
from typing import Iterable

import numpy as np

from .assignment import Assignment, assignment_cost, still_pairs, update_assignment, wasserstein
from .gradient import build_gradient, update_gradient
from .grid import Grid, ScalarField, build_vertex_order
from .persistence import PersistenceDiagram, pair_critical_simplices

log = logging.getLogger(__name__)


class TargetError(ValueError):
    pass


@dataclass
class TargetSpec:
    """Selects the signal pairs to keep; every other finite pair is cancelled.

    Criteria compose: a finite pair is non-signal as soon as one criterion
    rejects it. Infinite pairs are always signal.
    """

    threshold: float | None = None           # fraction of the function range
    remove_dims: tuple[int, ...] = ()
    keep_infinite_only: bool = False
    signal_keys: frozenset | None = None     # explicit (dim, finite, birthVertex, deathVertex) keys

    def is_signal(self, p, value_range: float) -> bool:
        if not p.finite:
            return True
        if self.keep_infinite_only or p.dim in self.remove_dims:
            return False
        if self.threshold is not None and p.persistence < self.threshold * value_range:
            return False
        if self.signal_keys is not None and p.key not in self.signal_keys:
            return False
        return True


def build_target(D: PersistenceDiagram, spec: TargetSpec, value_range: float) -> PersistenceDiagram:
    """Copy of D restricted to its signal pairs."""
    if spec.signal_keys is not None:
        missing = [p.key for p in D.infinite() if p.key not in spec.signal_keys]
        if missing:
            raise TargetError(f"target would remove infinite pairs {missing}")
    return PersistenceDiagram([p for p in D if spec.is_signal(p, value_range)])


def loss(D, DT, prev: Assignment | None = None, Dprev=None, still=None) -> tuple[float, Assignment]:
    """Squared 2-Wasserstein distance to the target and its assignment."""
    if prev is None:
        _, a = wasserstein(D, DT, 2.0)
        return a.cost, a
    return update_assignment(prev, D, Dprev, DT, 2.0, still=still)


def target_points(D, DT, assignment: Assignment) -> np.ndarray:
    """(n, 2) target coordinates per point: assigned target or diagonal projection."""
    out = np.empty((len(D), 2))
    for i, p in enumerate(D):
        t = assignment.targets[i]
        if t >= 0:
            out[i] = DT[t].point
        else:
            m = 0.5 * (p.birth + p.death)
            out[i] = (m, m)
    return out


def loss_gradient(values: np.ndarray, D, DT, assignment: Assignment) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death parts of the gradient of the fixed-assignment loss w.r.t. the vertex values."""
    tp = target_points(D, DT, assignment)
    gb = np.zeros_like(values)
    gd = np.zeros_like(values)
    if len(D) == 0:
        return gb, gd
    bv = np.array([p.birth_vertex for p in D], dtype=np.int64)
    dv = np.array([p.death_vertex for p in D], dtype=np.int64)
    fin = np.array([p.finite for p in D], dtype=bool)
    np.add.at(gb, bv, 2.0 * (values[bv] - tp[:, 0]))
    np.add.at(gd, dv[fin], 2.0 * (values[dv[fin]] - tp[fin, 1]))
    return gb, gd


def fixed_assignment_loss(values: np.ndarray, D, DT, assignment: Assignment) -> float:
    """Loss as a function of the vertex values, holding pairs and assignment fixed.

    Points sent to the diagonal are charged against their own projection,
    which moves with the values.
    """
    total = 0.0
    used = set()
    for i, p in enumerate(D):
        b = values[p.birth_vertex]
        t = assignment.targets[i]
        if t >= 0:
            used.add(int(t))
            tb, td = DT[t].point
            total += (b - tb) ** 2
            if p.finite:
                total += (values[p.death_vertex] - td) ** 2
        else:
            total += 0.5 * (values[p.death_vertex] - b) ** 2
    for j, q in enumerate(DT):
        if j not in used:
            total += 0.5 * (q.death - q.birth) ** 2
    return total


@dataclass
class StepResult:
    values: np.ndarray
    updated: np.ndarray
    max_birth_change: float
    max_death_change: float


def gradient_step(field: ScalarField, D, DT, assignment: Assignment, alpha_b: float, alpha_d: float) -> StepResult:
    """One direct descent step with separate birth and death step sizes."""
    values = field.values
    gb, gd = loss_gradient(values, D, DT, assignment)
    db, dd = -alpha_b * gb, -alpha_d * gd
    delta = db + dd
    updated = np.flatnonzero(delta != 0.0)
    return StepResult(values + delta, updated, float(np.abs(db).max(initial=0.0)),
                      float(np.abs(dd).max(initial=0.0)))


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None


def adam_step(values: np.ndarray, grad: np.ndarray, state: AdamState) -> np.ndarray:
    if state.m is None:
        state.m = np.zeros_like(values)
        state.v = np.zeros_like(values)
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad ** 2
    mhat = state.m / (1 - state.beta1 ** state.t)
    vhat = state.v / (1 - state.beta2 ** state.t)
    return values - state.lr * mhat / (np.sqrt(vhat) + state.eps)


@dataclass
class SolverConfig:
    method: str = "accelerated"      # or "baseline"
    alpha_b: float = 0.5
    alpha_d: float = 0.5
    stop: float = 0.01
    max_iter: int = 1000
    optimizer: str = "direct"        # or "adam"
    adam_lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    check_updates: bool = False      # compare every fast update against a full recomputation

    def __post_init__(self):
        if self.method not in ("baseline", "accelerated"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.optimizer not in ("direct", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.alpha_b < 0 or self.alpha_d < 0:
            raise ValueError("step sizes must be non-negative")
        if self.optimizer == "direct" and self.alpha_b + self.alpha_d <= 0:
            raise ValueError("alpha_b + alpha_d must be positive for direct descent")
        if not 0.0 <= self.stop <= 1.0:
            raise ValueError("stop fraction must lie in [0, 1]")


@dataclass
class IterationRecord:
    iteration: int
    loss: float
    stillPairFraction: float
    nonStillSignalPairFraction: float
    updatedVertexFraction: float
    times: dict
    fullLoss: float | None = None


@dataclass
class SolverReport:
    method: str
    optimizer: str
    loss0: float = 0.0
    lossFinal: float = 0.0
    l2: float = 0.0
    linf: float = 0.0
    iterations: int = 0
    maxIterations: bool = False
    targetPairs: int = 0
    inputPairs: int = 0
    maxBirthChange: float = 0.0
    maxDeathChange: float = 0.0
    signalDisplacement: dict = dc_field(default_factory=dict)
    records: list = dc_field(default_factory=list)
    totalTime: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def field_distances(f: ScalarField, g: ScalarField) -> dict:
    if tuple(f.dims) != tuple(g.dims):
        raise ValueError(f"dimension mismatch: {f.dims} vs {g.dims}")
    d = g.values - f.values
    return {"l2": float(np.sqrt(np.sum(d * d))), "linf": float(np.abs(d).max(initial=0.0))}


def signal_displacement_stats(DT, Dg) -> dict:
    """Birth-death displacement of each target pair under the optimal assignment onto D(g)."""
    if len(DT) == 0:
        return {"min": 0.0, "avg": 0.0, "max": 0.0}
    _, a = wasserstein(DT, Dg, 2.0)
    disp = []
    for i, p in enumerate(DT):
        t = a.targets[i]
        if t >= 0:
            q = Dg[t]
            disp.append(float(np.hypot(p.birth - q.birth, p.death - q.death)))
        else:
            disp.append(abs(p.death - p.birth) / np.sqrt(2.0))
    disp = np.array(disp)
    return {"min": float(disp.min()), "avg": float(disp.mean()), "max": float(disp.max())}


def _signal_fraction(D, assignment, still_idx: set) -> float:
    sig = [i for i in range(len(D)) if assignment.targets[i] >= 0]
    if not sig:
        return 0.0
    return sum(1 for i in sig if i not in still_idx) / len(sig)


def run(field: ScalarField, spec: TargetSpec | PersistenceDiagram, config: SolverConfig | None = None,
        callback=None):
    """Simplify ``field`` toward the target; returns (g, report).

    ``spec`` is either a TargetSpec applied to D(field) or a ready target
    diagram. ``callback(j, field, diagram)`` runs after every iteration.
    """
    config = config or SolverConfig()
    t_start = time.perf_counter()
    grid = Grid(field.dims)
    values = field.values.copy()
    value_range = float(values.max() - values.min())

    order = build_vertex_order(field)
    grad = build_gradient(grid, order)
    D = pair_critical_simplices(grad, field, order)
    DT = spec if isinstance(spec, PersistenceDiagram) else build_target(D, spec, value_range)
    L, phi = loss(D, DT)
    L0 = L

    report = SolverReport(config.method, config.optimizer, loss0=L0, targetPairs=len(DT), inputPairs=len(D))
    report.records.append(asdict(IterationRecord(0, L0, 1.0, 0.0, 0.0, {}, L0 if config.check_updates else None)))
    adam = AdamState(config.adam_lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    cur = field
    j = 0
    while L > config.stop * L0 and j < config.max_iter:
        j += 1
        times = {}
        t0 = time.perf_counter()
        if config.optimizer == "direct":
            st = gradient_step(cur, D, DT, phi, config.alpha_b, config.alpha_d)
            new_values, updated = st.values, st.updated
            report.maxBirthChange = max(report.maxBirthChange, st.max_birth_change)
            report.maxDeathChange = max(report.maxDeathChange, st.max_death_change)
        else:
            gb, gd = loss_gradient(cur.values, D, DT, phi)
            new_values = adam_step(cur.values, gb + gd, adam)
            updated = np.flatnonzero(new_values != cur.values)
        nxt = cur.with_values(new_values)
        times["step"] = 1e3 * (time.perf_counter() - t0)

        t0 = time.perf_counter()
        order = build_vertex_order(nxt)
        if config.method == "accelerated":
            grad = update_gradient(grad, order, updated, check=config.check_updates)
        else:
            grad = build_gradient(grid, order)
        times["gradient"] = 1e3 * (time.perf_counter() - t0)

        t0 = time.perf_counter()
        D_new = pair_critical_simplices(grad, nxt, order)
        times["diagram"] = 1e3 * (time.perf_counter() - t0)
        if config.check_updates and config.method == "accelerated":
            ref = pair_critical_simplices(build_gradient(grid, order), nxt, order)
            if not ref.same_pairs(D_new):
                raise AssertionError(f"fast persistence update diverged at iteration {j}")

        t0 = time.perf_counter()
        still = still_pairs(D_new, D)
        if config.method == "accelerated":
            L, phi_new = loss(D_new, DT, phi, D, still)
        else:
            L, phi_new = loss(D_new, DT)
        times["assignment"] = 1e3 * (time.perf_counter() - t0)

        still_idx = {i for i, _ in still}
        rec = IterationRecord(
            j, L,
            len(still) / len(D_new) if len(D_new) else 1.0,
            _signal_fraction(D_new, phi_new, still_idx),
            updated.size / grid.n_vertices,
            times,
        )
        if config.check_updates:
            rec.fullLoss = loss(D_new, DT)[0]
        report.records.append(asdict(rec))
        log.debug("iteration %d loss %.3e updated %d", j, L, updated.size)
        cur, D, phi = nxt, D_new, phi_new
        if callback is not None:
            callback(j, cur, D)

    report.iterations = j
    report.maxIterations = bool(L > config.stop * L0)
    if report.maxIterations:
        log.warning("stopped at the iteration limit (%d) with loss %.3e > %.3e", j, L, config.stop * L0)
    report.lossFinal = float(L)
    report.__dict__.update(field_distances(field, cur))
    report.signalDisplacement = signal_displacement_stats(DT, D)
    report.totalTime = 1e3 * (time.perf_counter() - t_start)
    return cur, report


def count_persistent(D: Iterable, dim: int, min_persistence: float) -> int:
    return sum(1 for p in D if p.finite and p.dim == dim and p.persistence > min_persistence)
