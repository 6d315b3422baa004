"""Time-varying discrete Kalman filter for graph systems.

Bounded error covariance on a detectable pair, and growth on an
undetectable one, is the operational face of detectability.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .detectability import OutputSpec
from .dynamics import DiscreteSystem, LpvSchedule
from .matfun import as_matrix

__all__ = [
    "KalmanConfig",
    "EstimationTrace",
    "InnovationError",
    "kalman_step",
    "run_estimator",
]


class InnovationError(np.linalg.LinAlgError):
    """Innovation covariance is not numerically positive definite."""


def _symmetric(m, name, tol=1e-12):
    m = as_matrix(m, name, square=True)
    if not np.allclose(m, m.T, rtol=0.0, atol=tol * max(1.0, float(np.max(np.abs(m))))):
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


def _psd_factor(m: np.ndarray) -> np.ndarray:
    # F with F F^T = m for PSD m; Cholesky fails on singular Q.
    vals, vecs = np.linalg.eigh(m)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class KalmanConfig:
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    initial_covariance: np.ndarray

    def __post_init__(self):
        q = _symmetric(self.process_noise, "process noise")
        r = _symmetric(self.measurement_noise, "measurement noise")
        p0 = _symmetric(self.initial_covariance, "initial covariance")
        if np.min(np.linalg.eigvalsh(q)) < -1e-12 * max(1.0, np.trace(q)):
            raise ValueError("process noise is not positive semidefinite")
        for m, name in ((r, "measurement noise"), (p0, "initial covariance")):
            try:
                np.linalg.cholesky(m)
            except np.linalg.LinAlgError:
                raise ValueError(f"{name} is not positive definite") from None
        if q.shape != p0.shape:
            raise ValueError("process noise and initial covariance sizes differ")
        object.__setattr__(self, "process_noise", q)
        object.__setattr__(self, "measurement_noise", r)
        object.__setattr__(self, "initial_covariance", p0)

    @classmethod
    def isotropic(cls, n: int, m: int, q: float, r: float, p0: float) -> "KalmanConfig":
        return cls(q * np.eye(n), r * np.eye(m), p0 * np.eye(n))


@dataclass
class EstimationTrace:
    estimates: list[np.ndarray] = field(default_factory=list)
    covariance_traces: list[float] = field(default_factory=list)
    error_norms: list[float] = field(default_factory=list)
    covariances: list[np.ndarray] | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "trace_P", "err_norm"])
        for k, (tr, err) in enumerate(zip(self.covariance_traces, self.error_norms), start=1):
            writer.writerow([k, repr(float(tr)), repr(float(err))])
        return buf.getvalue()


def kalman_step(a, c, cfg: KalmanConfig, prior_estimate, prior_cov, measurement):
    """One predict/update cycle with the Joseph-form covariance update.

    Returns ``(estimate, covariance)``.

    Raises
    ------
    InnovationError
        If ``C P C^T + R`` has no Cholesky factor.
    """
    a = np.asarray(a, dtype=float)
    c = np.atleast_2d(np.asarray(c, dtype=float))
    x = np.asarray(prior_estimate, dtype=float).reshape(-1)
    y = np.asarray(measurement, dtype=float).reshape(-1)
    n = a.shape[0]

    x_pred = a @ x
    p_pred = a @ prior_cov @ a.T + cfg.process_noise
    p_pred = 0.5 * (p_pred + p_pred.T)

    s = c @ p_pred @ c.T + cfg.measurement_noise
    try:
        factor = la.cho_factor(0.5 * (s + s.T), lower=True)
    except la.LinAlgError as exc:
        raise InnovationError(f"innovation covariance is not positive definite: {exc}") from None
    gain = la.cho_solve(factor, c @ p_pred).T

    x_new = x_pred + gain @ (y - c @ x_pred)
    ikc = np.eye(n) - gain @ c
    p_new = ikc @ p_pred @ ikc.T + gain @ cfg.measurement_noise @ gain.T
    return x_new, 0.5 * (p_new + p_new.T)


def _step_systems(sys, out):
    if isinstance(sys, DiscreteSystem):
        if sys.c.shape[0] == 0:
            raise ValueError("system has no outputs to filter on")
        return [(sys.a_d, sys.c)]
    if isinstance(sys, LpvSchedule):
        if out is None:
            raise ValueError("an OutputSpec is required with an LPV schedule")
        c = out.c_matrix(sys.n)
        return [(a, c) for a in sys.transitions()]
    raise TypeError(f"expected DiscreteSystem or LpvSchedule, got {type(sys).__name__}")


def run_estimator(sys, cfg: KalmanConfig, true_x0, est_x0, steps: int, seed: int = 0,
                  out: OutputSpec | None = None, keep_covariances: bool = False,
                  truth_noise=None) -> EstimationTrace:
    """Simulate a noisy truth and filter it from measurements alone.

    ``sys`` is a :class:`DiscreteSystem` or an :class:`LpvSchedule`; a
    schedule's segments are applied cyclically, one per step, and needs
    ``out``.  Noise is drawn from ``numpy.random.default_rng(seed)``:
    process noise as ``F w`` with ``F F^T = Q`` and measurement noise as a
    PSD factor of ``R`` times a standard normal vector.

    ``truth_noise`` is an optional ``(Q_true, R_true)`` pair of PSD
    matrices used to simulate the truth instead of the filter's design
    values; zeros give a noise-free truth.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    systems = _step_systems(sys, out)
    n = systems[0][0].shape[0]
    m = systems[0][1].shape[0]
    if cfg.process_noise.shape != (n, n) or cfg.measurement_noise.shape != (m, m):
        raise ValueError("noise covariance sizes do not match the system")
    x = np.asarray(true_x0, dtype=float).reshape(-1)
    xh = np.asarray(est_x0, dtype=float).reshape(-1)
    if x.shape[0] != n or xh.shape[0] != n:
        raise ValueError(f"initial states must have length {n}")
    if truth_noise is None:
        q_true, r_true = cfg.process_noise, cfg.measurement_noise
    else:
        q_true = _symmetric(truth_noise[0], "true process noise")
        r_true = _symmetric(truth_noise[1], "true measurement noise")
        if q_true.shape != (n, n) or r_true.shape != (m, m):
            raise ValueError("true noise covariance sizes do not match the system")
        for mat, name in ((q_true, "true process noise"), (r_true, "true measurement noise")):
            if np.min(np.linalg.eigvalsh(mat)) < -1e-12 * max(1.0, np.trace(mat)):
                raise ValueError(f"{name} is not positive semidefinite")
    rng = np.random.default_rng(seed)
    q_factor = _psd_factor(q_true)
    r_factor = _psd_factor(r_true)
    p = cfg.initial_covariance.copy()
    trace = EstimationTrace(covariances=[] if keep_covariances else None)
    for k in range(steps):
        a, c = systems[k % len(systems)]
        x = a @ x + q_factor @ rng.standard_normal(n)
        y = c @ x + r_factor @ rng.standard_normal(m)
        xh, p = kalman_step(a, c, cfg, xh, p, y)
        trace.estimates.append(xh.copy())
        trace.covariance_traces.append(float(np.trace(p)))
        trace.error_norms.append(float(np.linalg.norm(xh - x)))
        if keep_covariances:
            trace.covariances.append(p.copy())
    return trace
