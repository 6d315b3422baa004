"""Dense matrix functions: exponential, induced norms, row sums.

:func:`expm` is a scaling-and-squaring Padé exponential following Higham,
"The scaling and squaring method for the matrix exponential revisited"
(SIAM J. Matrix Anal. Appl. 26, 2005).  :func:`expm_taylor_oracle` is a
plain truncated series kept for tests only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MatrixFormatError",
    "ExpmResult",
    "as_matrix",
    "expm",
    "expm_taylor_oracle",
    "induced_inf_norm",
    "row_sums",
    "parse_matrix",
    "format_matrix",
]


class MatrixFormatError(ValueError):
    pass


def as_matrix(m, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    a = np.array(m, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    if square and a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class ExpmResult:
    value: np.ndarray
    scaling_squarings: int
    pade_degree: int
    estimated_backward_error: float


# theta_m from Higham (2005), Table 2.3: largest ||A||_1 for which the
# degree-m diagonal Padé approximant has backward error <= 2**-53.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}


def _pade_error_constant(m: int) -> float:
    # Leading coefficient of e^x - r_m(x): (m!)^2 / ((2m)! (2m+1)!).
    return math.factorial(m) ** 2 / (math.factorial(2 * m) * math.factorial(2 * m + 1))


def _backward_error_estimate(norm1: float, m: int) -> float:
    # First term of the backward-error series, ||Delta A|| / ||A|| ~ c_m ||A||^(2m).
    return _pade_error_constant(m) * norm1 ** (2 * m)


def _uv_low(a, m, ident):
    b = _PADE_COEFFS[m]
    a2 = a @ a
    powers = [ident, a2]
    for _ in range(2, m // 2 + 1):
        powers.append(powers[-1] @ a2)
    u_inner = sum(b[2 * k + 1] * powers[k] for k in range(m // 2 + 1))
    v = sum(b[2 * k] * powers[k] for k in range(m // 2 + 1))
    return a @ u_inner, v


def _uv_13(a, ident):
    b = _PADE_COEFFS[13]
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def expm(a) -> ExpmResult:
    """Matrix exponential by scaling and squaring with a diagonal Padé approximant.

    The Padé degree is the smallest of 3, 5, 7, 9 whose 1-norm threshold
    covers ``a``; otherwise ``a`` is scaled by ``2**-s`` into the degree-13
    range and the result squared ``s`` times.

    Raises
    ------
    ValueError
        If ``a`` is not square or has non-finite entries.
    """
    a = as_matrix(a, "expm argument", square=True)
    n = a.shape[0]
    ident = np.eye(n)
    if n == 0:
        return ExpmResult(ident, 0, 0, 0.0)
    norm1 = float(np.linalg.norm(a, 1))
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _uv_low(a, m, ident)
            value = np.linalg.solve(v - u, v + u)
            return ExpmResult(value, 0, m, _backward_error_estimate(norm1, m))
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13])))) if norm1 > 0 else 0
    scaled = a / 2.0 ** s
    u, v = _uv_13(scaled, ident)
    value = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        value = value @ value
    est = _backward_error_estimate(norm1 / 2.0 ** s, 13)
    return ExpmResult(value, s, 13, est)


def expm_taylor_oracle(a, terms: int) -> np.ndarray:
    """Truncated series ``sum_{k<terms} a^k / k!`` by Horner nesting.

    Test oracle only: no scaling, so it is accurate just for small-norm
    arguments (``||a||_1 <~ 5`` with ``terms`` around 100).
    """
    a = as_matrix(a, "oracle argument", square=True)
    if terms < 1:
        raise ValueError("terms must be >= 1")
    n = a.shape[0]
    ident = np.eye(n)
    # I + a/1 (I + a/2 (I + ... (I + a/(terms-1)))).
    acc = ident.copy()
    for k in range(terms - 1, 0, -1):
        acc = ident + (a @ acc) / k
    return acc


def induced_inf_norm(m) -> float:
    """Induced infinity norm: the largest absolute row sum."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(np.atleast_2d(m)), axis=1)))


def row_sums(m) -> np.ndarray:
    return np.sum(np.atleast_2d(np.asarray(m, dtype=float)), axis=1)


def parse_matrix(text: str) -> np.ndarray:
    """Parse ``rows cols`` followed by row-major whitespace-separated values.

    ``#`` comment lines are skipped.
    """
    tokens = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            tokens.extend(line.split())
    if len(tokens) < 2:
        raise MatrixFormatError("matrix file must start with 'rows cols'")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError:
        raise MatrixFormatError("matrix dimensions must be integers") from None
    if rows < 1 or cols < 1:
        raise MatrixFormatError("matrix dimensions must be positive")
    values = tokens[2:]
    if len(values) != rows * cols:
        raise MatrixFormatError(f"expected {rows * cols} entries, found {len(values)}")
    try:
        data = np.array([float(v) for v in values]).reshape(rows, cols)
    except ValueError as exc:
        raise MatrixFormatError(f"bad matrix entry: {exc}") from None
    if not np.all(np.isfinite(data)):
        raise MatrixFormatError("matrix entries must be finite")
    return data


def format_matrix(m) -> str:
    m = as_matrix(m)
    lines = [f"{m.shape[0]} {m.shape[1]}"]
    lines.extend(" ".join(repr(float(x)) for x in row) for row in m)
    return "\n".join(lines) + "\n"
