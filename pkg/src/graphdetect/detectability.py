"""Uniform detectability and stabilizability of graph systems.

Two independent routes are provided:

* a graph certificate: a strongly connected graph measured through an
  output matrix with a nonzero row sum is detectable for every ``dt > 0``;
* a numeric check on the pair ``(A, C)``: the unobservable subspace is
  computed and the spectral radius of ``A`` restricted to it is compared
  with 1.

:class:`DetectabilityReport` carries both outcomes plus the witnesses
(contraction level ``a``, Gramian bound ``b``, windows ``p``, ``q``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .graph import WeightedGraph, is_strongly_connected, reverse_graph
from .matfun import as_matrix

__all__ = [
    "OutputSpec",
    "DetectabilityReport",
    "observability_gramian",
    "observability_matrix",
    "unobservable_basis",
    "certify_detectability",
    "certify_stabilizability",
    "numeric_detectability",
    "numeric_stabilizability",
    "gramian_lower_bound_witness",
    "detectability_report",
    "ROW_SUM_TOL",
    "CONTRACTION_MARGIN",
    "RANK_TOL",
]

ROW_SUM_TOL = 1e-9
CONTRACTION_MARGIN = 1e-9
RANK_TOL = 1e-8
PBH_BAND = 1e-6


@dataclass(frozen=True)
class OutputSpec:
    """Output map given either as a matrix or as measured nodes (1-based)."""

    matrix: np.ndarray | None = None
    measured_nodes: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.matrix is None) == (self.measured_nodes is None):
            raise ValueError("give exactly one of an output matrix or measured nodes")
        if self.matrix is not None:
            object.__setattr__(self, "matrix", as_matrix(self.matrix, "output matrix"))
        else:
            nodes = tuple(int(v) for v in self.measured_nodes)
            if not nodes:
                raise ValueError("measured node list is empty")
            if len(set(nodes)) != len(nodes):
                raise ValueError("measured node list has repeats")
            object.__setattr__(self, "measured_nodes", nodes)

    @classmethod
    def nodes(cls, *nodes: int) -> "OutputSpec":
        return cls(measured_nodes=tuple(nodes))

    def c_matrix(self, n: int) -> np.ndarray:
        """Realize ``C`` for an ``n``-node system."""
        if self.matrix is not None:
            if self.matrix.shape[1] != n:
                raise ValueError(
                    f"output matrix has {self.matrix.shape[1]} columns, system has {n} states")
            return self.matrix
        c = np.zeros((len(self.measured_nodes), n))
        for row, node in enumerate(self.measured_nodes):
            if not 1 <= node <= n:
                raise ValueError(f"measured node {node} outside [1, {n}]")
            c[row, node - 1] = 1.0
        return c

    def to_dict(self) -> dict:
        if self.matrix is not None:
            return {"matrix": self.matrix.tolist()}
        return {"measured_nodes": list(self.measured_nodes)}

    @classmethod
    def from_dict(cls, d: dict) -> "OutputSpec":
        if "matrix" in d:
            return cls(matrix=np.array(d["matrix"], dtype=float))
        return cls(measured_nodes=tuple(d["measured_nodes"]))


@dataclass
class DetectabilityReport:
    certificate_applicable: bool
    certificate_detectable: bool
    numeric_detectable: bool
    unobservable_dimension: int
    max_unobservable_modulus: float | None
    gramian_min_eigenvalue_on_test_vector: float
    contraction_a: float | None = None
    gramian_bound_b: float | None = None
    window_p: int | None = None
    window_q: int | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def detectable(self) -> bool:
        return (self.certificate_applicable and self.certificate_detectable) or self.numeric_detectable

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectabilityReport":
        return cls(**{k: (list(v) if k == "notes" else v) for k, v in d.items()})


def _transition_products(phis: Sequence, q: int, n: int):
    # Phi_{k|k} = I, Phi_{k+i|k} = A_{k+i-1} ... A_k; factors cycle when fewer than q are given.
    phi = np.eye(n)
    yield phi
    for i in range(q):
        phi = phis[i % len(phis)] @ phi
        yield phi


def observability_gramian(phis: Sequence, c, q: int) -> np.ndarray:
    """Discrete observability Gramian ``sum_{i=0}^{q} Phi_i^T C^T C Phi_i``.

    ``phis`` are one-step factors ``A_k, A_{k+1}, ...``; cumulative products
    give ``Phi_i`` with ``Phi_0 = I``.  A single factor is treated as a
    constant system, and shorter lists repeat periodically.  The sum has
    ``q + 1`` terms.
    """
    c = as_matrix(c, "output matrix")
    if q < 0:
        raise ValueError("q must be >= 0")
    n = c.shape[1]
    factors = [as_matrix(p, "transition factor", square=True) for p in phis]
    if q > 0 and not factors:
        raise ValueError("at least one transition factor is needed for q > 0")
    for f in factors:
        if f.shape != (n, n):
            raise ValueError(f"transition factor has shape {f.shape}, expected {(n, n)}")
    ctc = c.T @ c
    w = np.zeros((n, n))
    for phi in _transition_products(factors, q, n):
        w += phi.T @ ctc @ phi
    return 0.5 * (w + w.T)


def observability_matrix(a, c) -> np.ndarray:
    """Stacked ``[C; CA; ...; CA^(n-1)]``."""
    a = as_matrix(a, square=True)
    c = as_matrix(c)
    blocks = [c]
    for _ in range(a.shape[0] - 1):
        blocks.append(blocks[-1] @ a)
    return np.vstack(blocks)


def _null_space(m: np.ndarray, scale: float, tol: float) -> np.ndarray:
    # Right singular vectors with singular value <= tol * scale.
    if m.shape[0] == 0:
        return np.eye(m.shape[1])
    _, s, vh = np.linalg.svd(m)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].T.conj()


def _hautus_vectors(a: np.ndarray, c: np.ndarray, scale: float, tol: float) -> np.ndarray:
    # Real basis of the eigenvectors with |lambda| >= 1 - PBH_BAND that fail
    # the Hautus rank test rank [A - lambda I; C] = n.
    n = a.shape[0]
    vals = np.linalg.eigvals(a)
    candidates = []
    for lam in vals[np.abs(vals) >= 1.0 - PBH_BAND]:
        if lam.imag < 0 or any(abs(lam - mu) <= 1e-8 for mu in candidates):
            continue
        candidates.append(lam)
    vectors = []
    for lam in candidates:
        stacked = np.vstack([a - lam * np.eye(n), c.astype(complex)])
        null = _null_space(stacked, scale, tol)
        for v in null.T:
            vectors.extend([v.real, v.imag] if abs(lam.imag) > 0 else [v.real])
    if not vectors:
        return np.zeros((n, 0))
    return np.column_stack(vectors)


def unobservable_basis(a, c, tol_rank: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the unobservable subspace of ``(a, c)``.

    This is the kernel of :func:`observability_matrix`, but it is computed
    by the orthogonal staircase recursion

        U_0 = ker C,   U_{k+1} = {x in U_k : (A - I) x in U_k}

    which never forms powers of ``A``.  For ``A = expm(-L dt)`` with small
    ``dt`` the stacked powers lose rank numerically long before the true
    subspace does, while each staircase step only sees ``O(dt)`` couplings.
    Rank decisions use ``tol_rank`` relative to ``max(||C||, ||A - I||)``.

    Each step divides the basis error by the smallest singular value it
    removes, so weakly observable modes can push a truly unobservable
    direction out.  The result is therefore completed with the
    eigenvectors of eigenvalues with ``|lambda| >= 1 - 1e-6`` that fail
    the Hautus test, which are the directions the detectability decision
    depends on.
    """
    a = as_matrix(a, square=True)
    c = as_matrix(c)
    n = a.shape[0]
    shifted = a - np.eye(n)
    c_scale = float(np.linalg.norm(c, 2)) if c.size else 0.0
    scale = max(c_scale, float(np.linalg.norm(shifted, 2)), np.finfo(float).tiny)
    basis = _null_space(c, max(c_scale, np.finfo(float).tiny), tol_rank)
    while basis.shape[1] > 0:
        image = shifted @ basis
        leak = image - basis @ (basis.T @ image)
        z = _null_space(leak, scale, tol_rank)
        if z.shape[1] == basis.shape[1]:
            break
        basis = basis @ z
        if basis.shape[1]:
            basis, _ = np.linalg.qr(basis)
    return _complete_with_hautus(basis, a, c, scale, tol_rank)


def _complete_with_hautus(basis, a, c, scale, tol):
    # Exact eigenvectors first; kernel directions within 1e-6 of their
    # span are the same directions carrying accumulated error.
    extra = _hautus_vectors(a, c, scale, tol)
    if not extra.shape[1]:
        return basis
    u, sv, _ = np.linalg.svd(extra, full_matrices=False)
    exact = u[:, sv > 1e-6 * sv[0]]
    rest = basis - exact @ (exact.T @ basis)
    u, sv, _ = np.linalg.svd(rest, full_matrices=False)
    return np.column_stack([exact, u[:, sv > 1e-6]])


def numeric_detectability(a, c, tol_rank: float = RANK_TOL):
    """Detectability of the constant pair ``(a, c)``.

    Returns ``(detectable, unobservable_dim, max_unobservable_modulus)``;
    the modulus is ``None`` when the pair is observable.  The pair is
    detectable when the spectral radius of ``a`` restricted to the
    unobservable subspace is below ``1 - 1e-9``.
    """
    a = as_matrix(a, square=True)
    c = as_matrix(c)
    if c.shape[1] != a.shape[0]:
        raise ValueError(f"output matrix has {c.shape[1]} columns, state matrix is {a.shape[0]}x{a.shape[0]}")
    basis = unobservable_basis(a, c, tol_rank)
    dim = basis.shape[1]
    if dim == 0:
        return True, 0, None
    restricted = basis.T @ a @ basis
    radius = float(np.max(np.abs(np.linalg.eigvals(restricted))))
    return radius < 1.0 - CONTRACTION_MARGIN, dim, radius


def numeric_stabilizability(a, b, tol_rank: float = RANK_TOL):
    """Stabilizability of ``(a, b)`` as detectability of ``(a^T, b^T)``."""
    a = as_matrix(a, square=True)
    b = as_matrix(b)
    return numeric_detectability(a.T, b.T, tol_rank)


def _has_nonzero_row_sum(c: np.ndarray) -> bool:
    return bool(np.any(np.abs(c.sum(axis=1)) > ROW_SUM_TOL))


def certify_detectability(g: WeightedGraph, out: OutputSpec, dt: float):
    """Graph certificate: ``(applicable, detectable)``.

    Applicable iff ``g`` is strongly connected; detectable iff additionally
    some row of ``C`` has ``|row sum| > 1e-9``.  Measured-node outputs have
    unit row sums, so they are detectable whenever the certificate applies.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    c = out.c_matrix(g.n)
    applicable = is_strongly_connected(g)
    return applicable, applicable and _has_nonzero_row_sum(c)


def certify_stabilizability(g: WeightedGraph, b, dt: float):
    """Dual certificate on the reversed graph with output ``b^T``."""
    b = as_matrix(b, "input matrix")
    if b.shape[0] != g.n:
        raise ValueError(f"input matrix has {b.shape[0]} rows, graph has {g.n} nodes")
    return certify_detectability(reverse_graph(g), OutputSpec(matrix=b.T), dt)


def gramian_lower_bound_witness(c, q: int = 1) -> float:
    """``1^T C^T C 1``, the per-step Gramian mass on the consensus direction."""
    if q < 1:
        raise ValueError("q must be >= 1")
    c = as_matrix(c)
    s = c.sum(axis=1)
    return float(s @ s)


def detectability_report(a, c, *, certificate: tuple[bool, bool] | None = None,
                         tol_rank: float = RANK_TOL) -> DetectabilityReport:
    """Run the numeric check on ``(a, c)`` and back-fill the detectability witnesses.

    With ``p = q = n``: ``a_contraction`` is the midpoint between the
    restricted spectral radius and 1, and ``b`` is the smallest Gramian
    eigenvalue on the orthogonal complement of the unobservable subspace.
    """
    a = as_matrix(a, square=True)
    c = as_matrix(c)
    n = a.shape[0]
    detectable, dim, modulus = numeric_detectability(a, c, tol_rank)
    w = observability_gramian([a], c, n)
    ones = np.ones(n) / np.sqrt(n)
    rayleigh = float(ones @ w @ ones)
    notes = []
    applicable, cert = certificate if certificate is not None else (False, False)
    if certificate is not None and not applicable:
        notes.append("graph is not strongly connected; certificate does not apply")
    elif certificate is not None and not cert:
        notes.append("every row of C sums to zero; certificate cannot conclude")
    contraction = b_bound = p = q = None
    if detectable:
        p = q = n
        radius = modulus if modulus is not None else 0.0
        contraction = 0.5 * (radius + 1.0)
        basis = unobservable_basis(a, c, tol_rank)
        if basis.shape[1] == n:
            b_bound = 0.0
        else:
            complement = _null_space(basis.T, 1.0, tol_rank) if basis.shape[1] else np.eye(n)
            b_bound = float(np.min(np.linalg.eigvalsh(complement.T @ w @ complement)))
    if applicable and cert and not detectable:
        notes.append("certificate and numeric check disagree")
    return DetectabilityReport(
        certificate_applicable=bool(applicable),
        certificate_detectable=bool(cert),
        numeric_detectable=bool(detectable),
        unobservable_dimension=int(dim),
        max_unobservable_modulus=modulus,
        gramian_min_eigenvalue_on_test_vector=rayleigh,
        contraction_a=contraction,
        gramian_bound_b=b_bound,
        window_p=p,
        window_q=q,
        notes=notes,
    )
