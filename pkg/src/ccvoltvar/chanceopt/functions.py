"""Constraint functions of the gain design problem in the variable ``x``.

``x = [alpha/eta, -alpha]`` enters the equilibrium only through the shift
``t = x1 + x2``::

    q(x; rho) = (X + t I)^-1 (1 - rho) = P diag(1 / (t + lambda)) P^-1 (1 - rho)

All routines accept ``rho`` of shape ``(..., n)`` and broadcast over the
leading axes.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import SingularSystem

__all__ = [
    "HValues",
    "shift",
    "q_of_t",
    "q_of_x",
    "q_derivative",
    "grad_q",
    "family_values",
    "family_derivative",
    "eval_h",
    "smooth_hinge",
    "smooth_g",
    "best_u",
    "cvar_constraint_estimate",
]

FAMILIES = (1, 2, 3, 4)
# CVaR shift used for eps = 1 rows, where the optimal shift is unbounded
U_EPS_ONE = 1e3


def shift(x):
    return float(x[0]) + float(x[1])


def _modal(model, rho):
    w = (1.0 - np.asarray(rho, dtype=float)) @ model.P_inv.T
    return w


def _check_shift(t, model):
    if t + model.lambda_min <= 1e-12:
        raise SingularSystem(f"X + tI is singular or indefinite (t = {t:.3e})")


def q_derivative(t, model, rho, order=0):
    """``d^k q / dt^k`` at shift ``t`` through the eigen-decomposition."""
    _check_shift(t, model)
    lam = model.eigvals
    coef = {0: 1.0, 1: -1.0, 2: 2.0, 3: -6.0}[order]
    out = (_modal(model, rho) * (coef / (t + lam) ** (order + 1))) @ model.P.T
    return np.real(out)


def q_of_t(t, model, rho):
    return q_derivative(t, model, rho, 0)


def q_of_x(x, model, rho):
    return q_of_t(shift(x), model, rho)


def grad_q(x, model, rho):
    """Jacobian of ``q`` w.r.t. ``x`` with shape ``(..., 2, n)``; both rows agree."""
    r = q_derivative(shift(x), model, rho, 1)
    return np.stack([r, r], axis=-2)


def family_values(i, q, model, rho, spec):
    """Constraint family ``h_i`` (``i`` in 1..4) evaluated from ``q``."""
    if i == 1:
        return q - spec.q_max
    if i == 2:
        return spec.q_min - q
    Xq = q @ model.X.T
    if i == 3:
        return Xq + rho - spec.v_max
    if i == 4:
        return spec.v_min - Xq - rho
    raise ValueError(f"unknown constraint family {i}")


def family_derivative(i, dq, model):
    """``d h_i / dt`` (or higher) from the matching derivative of ``q``."""
    if i == 1:
        return dq
    if i == 2:
        return -dq
    Xdq = dq @ model.X.T
    return Xdq if i == 3 else -Xdq


@dataclass
class HValues:
    h0: object
    h1: np.ndarray
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray
    h5: np.ndarray
    h6: float
    h7: float
    h8: float

    def family(self, i):
        return getattr(self, f"h{i}")


def eval_h(x, model, rho, spec):
    """All constraint functions at ``x`` for one or many ``rho``."""
    rho = np.asarray(rho, dtype=float)
    q = q_of_x(x, model, rho)
    t = shift(x)
    fam = [family_values(i, q, model, rho, spec) for i in FAMILIES]
    return HValues(
        h0=np.sum(q**2, axis=-1),
        h1=fam[0], h2=fam[1], h3=fam[2], h4=fam[3],
        h5=(t - 2.0) + np.real(model.eigvals),
        h6=-t, h7=-float(x[0]), h8=float(x[1]),
    )


def smooth_hinge(y, xi):
    """``(y + sqrt(xi^2 + y^2)) / 2``, a smooth upper bound of ``max(y, 0)``."""
    return 0.5 * (y + np.hypot(xi, y))


def smooth_hinge_derivatives(y, xi):
    r = np.hypot(xi, y)
    return 0.5 * (1.0 + y / r), 0.5 * xi**2 / r**3


def smooth_g(h, u, eps, xi):
    return smooth_hinge(np.asarray(h) + u, xi) - u * eps


def best_u(h, eps, xi, iters=200):
    """Minimise ``mean(smooth_g(h_s, u)) `` over ``u >= 0`` for each row of ``h``.

    ``h`` has shape ``(..., n_samples)``; returns ``(u, value)`` with the
    leading shape. The objective is convex in ``u`` so the derivative is
    bisected. For ``eps = 1`` the value tends to ``mean(h)`` as ``u`` grows
    and ``u`` is pinned at ``U_EPS_ONE``, which leaves a bias of about
    ``xi / (4 U_EPS_ONE)``.
    """
    h = np.asarray(h, dtype=float)
    lead = h.shape[:-1]
    if eps >= 1:
        # the infimum sits at u -> inf; a large fixed shift makes the hinge linear
        u = np.full(lead, U_EPS_ONE)
        return u, smooth_g(h, u[..., None], eps, xi).mean(axis=-1)

    def slope(u):
        return smooth_hinge_derivatives(h + u[..., None], xi)[0].mean(axis=-1) - eps

    lo = np.zeros(lead)
    hi = np.maximum(-h.min(axis=-1), 0.0) + 1.0
    while np.any(bad := slope(hi) < 0):
        hi = np.where(bad, 2.0 * hi, hi)
    at_zero = slope(lo) >= 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = slope(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, hi)):
            break
    u = np.where(at_zero, 0.0, 0.5 * (lo + hi))
    value = smooth_g(h, u[..., None], eps, xi).mean(axis=-1)
    return u, value


def cvar_constraint_estimate(x, u, i, n, m, problem):
    """Sample-average CVaR surrogate for family ``i``, node ``n``, interval ``m``."""
    spec = problem.spec
    rho = problem.samples[m]
    q = q_of_x(x, problem.model, rho)
    h = family_values(i, q, problem.model, rho, spec)[:, n]
    return float(np.mean(smooth_g(h, u, spec.epsilons[i - 1], spec.xi)))
