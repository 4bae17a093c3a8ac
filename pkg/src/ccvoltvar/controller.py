"""Incremental Volt/Var law, its linearised closed loop and stability tests.

The law updates each DER set-point from the local voltage::

    q[k+1] = q[k] + eta * (1 - v[k]) - (1 - eta) * alpha * q[k]

Substituting ``v = X q + rho`` gives ``q[k+1] = A q[k] + B`` with
``A = (1 - (1 - eta) alpha) I - eta X`` and ``B = eta (1 - rho)``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, SingularSystem

__all__ = [
    "Gains",
    "step_unprojected",
    "step_projected",
    "apply_reactive_priority",
    "equilibrium",
    "closed_loop_matrix",
    "stability_margin",
    "classify_stability",
    "stability_check_multiphase",
    "simulate_linear_loop",
    "simulate_projected_loop",
    "detect_divergence",
]

DIVERGENCE_THRESHOLD = 1e3
DIVERGENCE_STEPS = 100


@dataclass(frozen=True)
class Gains:
    eta: float
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")

    @property
    def x(self):
        """Design variable ``[alpha/eta, -alpha]``; undefined for ``eta == 0``."""
        if self.eta <= 0:
            raise DomainError("x is undefined when eta == 0")
        return np.array([self.alpha / self.eta, -self.alpha])

    @property
    def shift(self):
        """``1^T x = alpha (1 - eta) / eta``, the only combination q* depends on."""
        return self.alpha * (1.0 - self.eta) / self.eta

    @classmethod
    def from_x(cls, x, lambda_max=None, margin=1e-6):
        """Recover ``(eta, alpha)`` from ``x = [alpha/eta, -alpha]``.

        At ``x1 == 0`` the map is not invertible: ``alpha`` is zero and
        ``eta`` is set to the largest value below one keeping the eigenvalue
        stability test ``eta * lambda_max < 2`` satisfied with ``margin``.
        """
        x1, x2 = float(x[0]), float(x[1])
        if x1 < 0 or x2 > 0:
            raise DomainError(f"x must lie in R+ x R-, got {x}")
        alpha = -x2
        if x1 > 0:
            return cls(min(alpha / x1, 1.0), alpha)
        eta = 1.0 - margin
        if lambda_max:
            eta = min(eta, (2.0 - margin) / lambda_max)
        return cls(eta, 0.0)


def step_unprojected(q, v, gains):
    q = np.asarray(q, dtype=float)
    return q + gains.eta * (1.0 - np.asarray(v, dtype=float)) - (1.0 - gains.eta) * gains.alpha * q


def step_projected(q, v, gains, q_min, q_max):
    return np.clip(step_unprojected(q, v, gains), q_min, q_max)


def apply_reactive_priority(p_prev, q_next, s):
    """Cap active power so that ``p**2 + q**2 <= s**2`` (reactive power first)."""
    p_prev, q_next, s = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (p_prev, q_next, s)))
    if np.any(np.abs(q_next) > s * (1 + 1e-12)):
        raise DomainError("reactive set-point exceeds the inverter rating")
    out = np.minimum(p_prev, np.sqrt(np.maximum(s**2 - q_next**2, 0.0)))
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def _as_matrix(X):
    X = getattr(X, "X", X)
    return np.atleast_2d(np.asarray(X, dtype=float))


def equilibrium(gains, X, rho):
    """Unique fixed point ``(q*, nu*)`` of the linearised loop."""
    X = _as_matrix(X)
    rho = np.asarray(rho, dtype=float)
    if gains.eta == 0 and gains.alpha == 0:
        raise SingularSystem("eta = alpha = 0 freezes the controller; no unique equilibrium")
    K = gains.eta * X + (1.0 - gains.eta) * gains.alpha * np.eye(X.shape[0])
    q = np.linalg.solve(K, gains.eta * (1.0 - rho))
    return q, X @ q + rho


def closed_loop_matrix(gains, X):
    X = _as_matrix(X)
    return (1.0 - (1.0 - gains.eta) * gains.alpha) * np.eye(X.shape[0]) - gains.eta * X


def _loop_eigs(gains, eigvals):
    lam = np.real(np.asarray(eigvals))
    return (1.0 - gains.eta) * gains.alpha + gains.eta * lam


def stability_margin(gains, eigvals):
    """Distance of ``(1-eta) alpha + eta lambda`` to the boundary of ``(0, 2)``.

    Positive exactly when every eigenvalue of ``A`` lies strictly inside the
    unit disc (symmetric ``X``).
    """
    c = _loop_eigs(gains, eigvals)
    return float(min(c.min(), 2.0 - c.max()))


def classify_stability(gains, eigvals):
    """One of ``"stable"``, ``"marginal"`` (controller frozen) or ``"unstable"``."""
    if gains.eta == 0 and gains.alpha == 0:
        return "marginal"
    return "stable" if stability_margin(gains, eigvals) > 0 else "unstable"


def stability_check_multiphase(gains, norm2):
    """Norm-based sufficient test ``0 < 1'x - ||X||`` and ``1'x - 2 + ||X|| < 0``."""
    t = gains.shift
    return bool(t - norm2 > 0 and (t - 2.0) + norm2 < 0)


def simulate_linear_loop(gains, X, rho, q0, steps):
    """Iterate ``q <- A q + B``; returns the ``(steps + 1, n)`` trajectory."""
    A = closed_loop_matrix(gains, X)
    B = gains.eta * (1.0 - np.asarray(rho, dtype=float))
    traj = np.empty((steps + 1, A.shape[0]))
    traj[0] = q0
    for k in range(steps):
        traj[k + 1] = A @ traj[k] + B
    return traj


def simulate_projected_loop(gains, X, rho, q0, steps, q_min, q_max):
    """Projected iteration ``q <- clip(A q + B)`` on the linear model."""
    A = closed_loop_matrix(gains, X)
    B = gains.eta * (1.0 - np.asarray(rho, dtype=float))
    traj = np.empty((steps + 1, A.shape[0]))
    traj[0] = q0
    for k in range(steps):
        traj[k + 1] = np.clip(A @ traj[k] + B, q_min, q_max)
    return traj


def detect_divergence(gains, X, rho, q0, steps=DIVERGENCE_STEPS, threshold=DIVERGENCE_THRESHOLD):
    """First step at which ``max|q|`` exceeds ``threshold``, or ``None``."""
    A = closed_loop_matrix(gains, X)
    B = gains.eta * (1.0 - np.asarray(rho, dtype=float))
    q = np.asarray(q0, dtype=float)
    for k in range(1, steps + 1):
        q = A @ q + B
        if not np.all(np.isfinite(q)) or np.max(np.abs(q)) > threshold:
            return k
    return None
