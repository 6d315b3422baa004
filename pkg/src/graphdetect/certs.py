"""Numerical certificates for transition matrices of connected graphs.

For a strongly connected graph the matrix ``M = expm(-L dt)`` is entrywise
positive, right stochastic, and its induced infinity norm is attained only
at ``v = +-1``.  The checks here verify those facts on a concrete matrix and
return the evidence.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .matfun import as_matrix

__all__ = [
    "StochasticityEvidence",
    "PreconditionError",
    "check_positivity",
    "check_right_stochastic",
    "check_inf_norm_uniqueness",
    "perron_frobenius_power",
    "SIGN_PATTERN_MAX_N",
]

SIGN_PATTERN_MAX_N = 10
UNIT_NORM_TOL = 1e-10
STRICT_DECREASE_MARGIN = 1e-12


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class StochasticityEvidence:
    min_entry: float
    max_entry: float
    max_row_sum_deviation: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StochasticityEvidence":
        return cls(float(d["min_entry"]), float(d["max_entry"]),
                   float(d["max_row_sum_deviation"]), bool(d["passed"]))


def check_positivity(m, tol: float | None = None) -> bool:
    """True iff every entry of ``m`` exceeds ``tol``.

    The default ``tol`` is ``1e-12`` times the largest absolute entry, so
    the test stays meaningful when the whole matrix is small.
    """
    m = as_matrix(m, square=True)
    if tol is None:
        tol = 1e-12 * float(np.max(np.abs(m))) if m.size else 0.0
    return bool(np.all(m > tol))


def check_right_stochastic(m, tol: float = 1e-10) -> StochasticityEvidence:
    m = as_matrix(m, square=True)
    lo = float(m.min())
    hi = float(m.max())
    dev = float(np.max(np.abs(m.sum(axis=1) - 1.0)))
    passed = lo > tol and hi < 1.0 - tol and dev <= tol
    return StochasticityEvidence(lo, hi, dev, passed)


def _sphere_samples(n: int, trials: int, rng: np.random.Generator) -> np.ndarray:
    # Uniform in the cube, then one coordinate pushed to a face so ||v||_inf = 1.
    v = rng.uniform(-1.0, 1.0, size=(trials, n))
    face = rng.integers(0, n, size=trials)
    sign = rng.choice([-1.0, 1.0], size=trials)
    v[np.arange(trials), face] = sign
    return v


def _sign_patterns(n: int) -> np.ndarray:
    pats = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    constant = np.all(pats == pats[:, :1], axis=1)
    return pats[~constant]


def check_inf_norm_uniqueness(m, trials: int = 1000, seed: int = 0, tol: float = 1e-10) -> bool:
    """Check that ``+-1`` are the only unit-infinity-norm maximizers of ``||m v||_inf``.

    Verifies ``||m 1||_inf = 1`` within ``1e-10`` and ``||m v||_inf < 1 - 1e-12``
    for ``trials`` random unit vectors plus, for ``n <= 10``, every
    non-constant ``+-1`` sign pattern.  Random draws that happen to be
    ``+-1`` are discarded.  ``tol`` is handed to the
    :func:`check_right_stochastic` precondition.

    Raises
    ------
    PreconditionError
        If ``m`` fails :func:`check_right_stochastic` or ``trials < 100``.
    """
    m = as_matrix(m, square=True)
    if trials < 100:
        raise PreconditionError("at least 100 trials are required")
    evidence = check_right_stochastic(m, tol=tol)
    if not evidence.passed:
        raise PreconditionError(
            "matrix is not strictly inside (0, 1) with unit row sums: "
            f"min={evidence.min_entry:.3g}, max={evidence.max_entry:.3g}, "
            f"row-sum deviation={evidence.max_row_sum_deviation:.3g}")
    n = m.shape[0]
    ones = np.ones(n)
    if abs(np.max(np.abs(m @ ones)) - 1.0) > UNIT_NORM_TOL:
        return False
    rng = np.random.default_rng(seed)
    vs = _sphere_samples(n, trials, rng)
    constant = np.all(np.abs(np.abs(vs) - 1.0) == 0, axis=1) & np.all(vs == vs[:, :1], axis=1)
    vs = vs[~constant]
    if n <= SIGN_PATTERN_MAX_N:
        vs = np.vstack([vs, _sign_patterns(n)])
    norms = np.max(np.abs(vs @ m.T), axis=1)
    return bool(np.all(norms < 1.0 - STRICT_DECREASE_MARGIN))


def perron_frobenius_power(a) -> np.ndarray:
    """Return ``(I + a)^(n-1)``, strictly positive when ``a >= 0`` is irreducible."""
    a = as_matrix(a, square=True)
    n = a.shape[0]
    return np.linalg.matrix_power(np.eye(n) + a, max(n - 1, 0))
