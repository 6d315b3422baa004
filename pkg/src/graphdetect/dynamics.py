"""Discrete-time consensus dynamics and piecewise-constant LPV schedules."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .detectability import (
    RANK_TOL,
    CONTRACTION_MARGIN,
    DetectabilityReport,
    OutputSpec,
    _has_nonzero_row_sum,
    _complete_with_hautus,
    _null_space,
    _transition_products,
    detectability_report,
    observability_gramian,
)
from .graph import WeightedGraph, is_strongly_connected, laplacian, parse_graph
from .matfun import as_matrix, expm

__all__ = [
    "DiscreteSystem",
    "Trajectory",
    "Segment",
    "LpvSchedule",
    "ScheduleFormatError",
    "discretize",
    "simulate",
    "lpv_transition",
    "lpv_detectability",
    "load_schedule",
    "parse_schedule",
]


@dataclass(frozen=True)
class DiscreteSystem:
    """``x_{k+1} = a_d x_k + b_d u_k``, ``y_k = c x_k`` sampled every ``dt``."""

    a_d: np.ndarray
    b_d: np.ndarray
    c: np.ndarray
    dt: float

    def __post_init__(self):
        n = self.a_d.shape[0]
        if self.a_d.shape != (n, n):
            raise ValueError("a_d must be square")
        if self.b_d.shape[0] != n:
            raise ValueError(f"b_d has {self.b_d.shape[0]} rows, expected {n}")
        if self.c.shape[1] != n:
            raise ValueError(f"c has {self.c.shape[1]} columns, expected {n}")

    @property
    def n(self) -> int:
        return self.a_d.shape[0]


@dataclass
class Trajectory:
    times: list[float]
    states: list[np.ndarray]
    outputs: list[np.ndarray]

    def to_csv(self) -> str:
        n = len(self.states[0]) if self.states else 0
        m = len(self.outputs[0]) if self.outputs else 0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(m)])
        for t, x, y in zip(self.times, self.states, self.outputs):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in y])
        return buf.getvalue()


def discretize(g: WeightedGraph, dt: float, b=None, out: OutputSpec | None = None) -> DiscreteSystem:
    """Sample ``dx/dt = -L x`` every ``dt``: ``a_d = expm(-L dt)``.

    ``b`` is used as the discrete input map as given (no zero-order-hold
    integration); pass an already integrated matrix if that is wanted.
    Without ``out`` the system has an empty output.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = g.n
    a_d = expm(-laplacian(g) * dt).value
    if b is None:
        b_d = np.zeros((n, 0))
    else:
        b_d = np.array(b, dtype=float)
        if b_d.ndim == 1:
            b_d = b_d.reshape(-1, 1)
        b_d = as_matrix(b_d, "input matrix")
        if b_d.shape[0] != n:
            raise ValueError(f"input matrix has {b_d.shape[0]} rows, graph has {n} nodes")
    c = out.c_matrix(n) if out is not None else np.zeros((0, n))
    return DiscreteSystem(a_d, b_d, c, float(dt))


def simulate(sys: DiscreteSystem, x0, inputs: Sequence = (), steps: int = 0, t0: float = 0.0) -> Trajectory:
    """Iterate the recursion for ``steps`` steps, recording ``y_k`` from ``k = 0``.

    An empty ``inputs`` means zero input.
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != sys.n:
        raise ValueError(f"x0 has length {x.shape[0]}, system has {sys.n} states")
    r = sys.b_d.shape[1]
    inputs = list(inputs)
    if inputs and len(inputs) < steps:
        raise ValueError(f"{len(inputs)} inputs given for {steps} steps")
    times, states, outputs = [t0], [x.copy()], [sys.c @ x]
    for k in range(steps):
        x = sys.a_d @ x
        if inputs and r:
            u = np.asarray(inputs[k], dtype=float).reshape(-1)
            if u.shape[0] != r:
                raise ValueError(f"input {k} has length {u.shape[0]}, expected {r}")
            x = x + sys.b_d @ u
        times.append(t0 + (k + 1) * sys.dt)
        states.append(x.copy())
        outputs.append(sys.c @ x)
    return Trajectory(times, states, outputs)


@dataclass(frozen=True)
class Segment:
    graph: WeightedGraph
    delta_t: float

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("segment delta_t must be positive")

    def transition(self) -> np.ndarray:
        return expm(-laplacian(self.graph) * self.delta_t).value


@dataclass(frozen=True)
class LpvSchedule:
    """Ordered segments ``(graph_i, delta_t_i)``; ``periodic`` marks a repeating schedule."""

    segments: tuple[Segment, ...]
    periodic: bool = False
    t0: float = 0.0

    def __post_init__(self):
        if not self.segments:
            raise ValueError("schedule has no segments")
        ns = {s.graph.n for s in self.segments}
        if len(ns) != 1:
            raise ValueError(f"segments have inconsistent node counts {sorted(ns)}")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n(self) -> int:
        return self.segments[0].graph.n

    @property
    def span(self) -> tuple[float, float]:
        return self.t0, self.t0 + sum(s.delta_t for s in self.segments)

    def transitions(self) -> list[np.ndarray]:
        return [s.transition() for s in self.segments]


def lpv_transition(schedule: LpvSchedule) -> np.ndarray:
    """State map over the whole schedule, ``x_f = M x_0``.

    ``M = E_f ... E_1 E_0`` with ``E_i = expm(-L_i dt_i)``: the earliest
    segment acts first.
    """
    m = np.eye(schedule.n)
    for e in schedule.transitions():
        m = e @ m
    return m


def lpv_detectability(schedule: LpvSchedule, out: OutputSpec,
                      tol_rank: float = RANK_TOL) -> DetectabilityReport:
    """Certificate and numeric detectability for a piecewise-constant schedule.

    The certificate needs every segment graph strongly connected and a
    nonzero row sum in ``C``.  Numerically, a single segment reduces to the
    constant case; a periodic schedule is checked on its one-period product;
    otherwise the kernel of the output map over the window is required to be
    contracted by the full product in the 2-norm.  The kernel is completed
    with the near-unimodular eigenvectors of the product that the window
    map annihilates, as in :func:`unobservable_basis`.
    """
    n = schedule.n
    c = out.c_matrix(n)
    applicable = all(is_strongly_connected(s.graph) for s in schedule.segments)
    cert = applicable and _has_nonzero_row_sum(c)
    factors = schedule.transitions()
    if len(factors) == 1 or schedule.periodic:
        m = factors[0] if len(factors) == 1 else lpv_transition(schedule)
        report = detectability_report(m, c, certificate=(applicable, cert), tol_rank=tol_rank)
        if len(factors) > 1:
            report.notes.append("numeric check on the one-period product")
        return report

    q = len(factors)
    w = observability_gramian(factors, c, q)
    window_map = np.vstack([c @ phi for phi in _transition_products(factors, q, n)])
    m = lpv_transition(schedule)
    scale = float(np.linalg.norm(window_map, 2)) if window_map.size else 0.0
    kernel = _null_space(window_map, max(scale, np.finfo(float).tiny), tol_rank)
    kernel = _complete_with_hautus(kernel, m, window_map, max(scale, float(np.linalg.norm(m - np.eye(n), 2))),
                                   tol_rank)
    dim = kernel.shape[1]
    notes = ["numeric check on the full window (aperiodic schedule)"]
    if not applicable:
        notes.append("a segment graph is not strongly connected; certificate does not apply")
    elif not cert:
        notes.append("every row of C sums to zero; certificate cannot conclude")
    if dim == 0:
        modulus = None
        detectable = True
    else:
        modulus = float(np.linalg.norm(m @ kernel, 2))
        detectable = modulus < 1.0 - CONTRACTION_MARGIN
    ones = np.ones(n) / np.sqrt(n)
    contraction = b_bound = None
    if detectable:
        contraction = 0.5 * ((modulus or 0.0) + 1.0)
        complement = _null_space(kernel.T, 1.0, tol_rank) if dim else np.eye(n)
        b_bound = float(np.min(np.linalg.eigvalsh(complement.T @ w @ complement))) if complement.shape[1] else 0.0
    return DetectabilityReport(
        certificate_applicable=bool(applicable),
        certificate_detectable=bool(cert),
        numeric_detectable=bool(detectable),
        unobservable_dimension=int(dim),
        max_unobservable_modulus=modulus,
        gramian_min_eigenvalue_on_test_vector=float(ones @ w @ ones),
        contraction_a=contraction,
        gramian_bound_b=b_bound,
        window_p=q if detectable else None,
        window_q=q if detectable else None,
        notes=notes,
    )


class ScheduleFormatError(ValueError):
    pass


def _graph_from_entry(entry, base: Path | None) -> WeightedGraph:
    if isinstance(entry, str):
        path = Path(entry)
        if base is not None and not path.is_absolute():
            path = base / path
        return parse_graph(path.read_text(encoding="utf-8"))
    if isinstance(entry, dict):
        try:
            n = int(entry["n"])
            directed = bool(entry.get("directed", True))
            edges = entry["edges"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ScheduleFormatError(f"inline graph needs 'n' and 'edges': {exc}") from None
        return WeightedGraph.from_edges(n, edges, directed=directed, one_based=True)
    raise ScheduleFormatError("segment 'graph' must be a path or an inline {n, directed, edges} object")


def parse_schedule(text: str, base: Path | None = None) -> LpvSchedule:
    """Parse a schedule document.

    Either a JSON array of ``{"graph": ..., "dt": ...}`` objects or an object
    ``{"periodic": bool, "segments": [...]}``.  ``graph`` is a path to a graph
    file (relative to ``base``) or an inline ``{"n", "directed", "edges"}``
    object with 1-based ``[i, j, w]`` edges.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleFormatError(f"invalid JSON: {exc}") from None
    periodic = False
    if isinstance(doc, dict):
        periodic = bool(doc.get("periodic", False))
        doc = doc.get("segments")
    if not isinstance(doc, list) or not doc:
        raise ScheduleFormatError("schedule must be a nonempty list of segments")
    segments = []
    for k, item in enumerate(doc):
        if not isinstance(item, dict) or "graph" not in item or "dt" not in item:
            raise ScheduleFormatError(f"segment {k} needs 'graph' and 'dt'")
        try:
            dt = float(item["dt"])
        except (TypeError, ValueError):
            raise ScheduleFormatError(f"segment {k} has a non-numeric dt") from None
        try:
            segments.append(Segment(_graph_from_entry(item["graph"], base), dt))
        except ValueError as exc:
            raise ScheduleFormatError(f"segment {k}: {exc}") from None
    try:
        return LpvSchedule(tuple(segments), periodic=periodic)
    except ValueError as exc:
        raise ScheduleFormatError(str(exc)) from None


def load_schedule(path) -> LpvSchedule:
    path = Path(path)
    return parse_schedule(path.read_text(encoding="utf-8"), base=path.parent)
