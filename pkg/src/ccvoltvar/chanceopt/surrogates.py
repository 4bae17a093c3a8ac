"""Convex surrogates of the sample-average design problem around an anchor.

Around the anchor ``x_p`` every constraint value is replaced by the
quadratic upper model::

    h~(x) = h(x_p) + (x - x_p)' grad h(x_p) + m ||x - x_p||^2

with ``m = 2 max(0, c_bar)`` and ``c_bar`` a bound on the curvature of
``h`` along ``t = x1 + x2`` (see :func:`curvature_bounds`). The objective is linearised inside
the norm and gets a proximal term ``d/2 ||x - x_p||^2``. A positive
``scale`` on the objective leaves the minimiser unchanged but sets how
strongly the proximal term damps each step.
"""

from dataclasses import dataclass

import numpy as np

from .functions import family_derivative, family_values, q_derivative, shift, smooth_hinge

__all__ = ["curvature_bounds", "majorizer_matrices", "SurrogateBundle", "build_surrogates"]


def _curvature_at_zero(i, model, rho):
    return family_derivative(i, q_derivative(0.0, model, rho, 2), model)


def _modal_coefficients(i, model, rho):
    """``a`` with ``h_i(t) = sum_k a_k / (t + lambda_k) + const`` per node."""
    lam = np.real(model.eigvals)
    w = np.real((1.0 - rho) @ model.P_inv.T)
    P = np.real(model.P)
    sign = 1.0 if i in (1, 3) else -1.0
    scale = lam if i in (3, 4) else np.ones_like(lam)
    return sign * P * (w * scale)[..., None, :], lam


def _curvature_termwise(i, model, rho):
    """Upper bound on ``sup_{t>=0} h_i''(t)`` summing only positive modal terms."""
    a, lam = _modal_coefficients(i, model, rho)
    return np.sum(np.maximum(a, 0.0) * (2.0 / lam**3), axis=-1)


def _curvature_anchor(i, model, rho, t):
    """Half-curvature bound valid for every ``t' >= 0`` around the anchor ``t``.

    With ``s = t + lambda`` the Taylor remainder is exact::

        h(t + tau) - h(t) - h'(t) tau = tau^2 sum_k a_k / (s_k^2 (s_k + tau))

    and each term is largest at ``tau = -t``. Since ``||dx||^2 >= tau^2 / 2``
    the weight ``m = 2 max(0, c)`` majorizes, as with the fixed rules.
    """
    a, lam = _modal_coefficients(i, model, rho)
    s = t + lam
    return np.sum(np.maximum(a, 0.0) / (s**2 * lam), axis=-1)


def curvature_bounds(i, model, rho, rule="anchor", t=0.0):
    """Per-sample ``c_bar`` for family ``i``, shape of ``rho``.

    ``"origin"`` evaluates the curvature at ``t = 0`` (not an upper bound when
    modal terms have mixed signs), ``"safe"`` keeps only the positive modal
    terms at ``t = 0`` and ``"anchor"`` bounds the exact remainder around the
    anchor shift ``t``. The last two give global majorizers on ``t >= 0``.
    """
    rho = np.asarray(rho, dtype=float)
    if rule == "anchor":
        return _curvature_anchor(i, model, rho, t)
    if rule == "origin":
        return _curvature_at_zero(i, model, rho)
    if rule == "safe":
        return _curvature_termwise(i, model, rho)
    raise ValueError(f"unknown majorizer rule {rule!r}")


def majorizer_matrices(problem, families=(1, 2, 3, 4), rule=None, per_sample=False, t=0.0):
    """Diagonal entry ``2 max(0, c_bar)`` of ``M`` per family.

    Returns ``{i: array}`` of shape ``(b, n)``, the maximum over samples so
    one matrix serves the sample average; with ``per_sample`` the shape is
    ``(b, n_samples, n)``. ``t`` is the anchor shift for the ``"anchor"`` rule.
    """
    rule = rule or problem.spec.majorizer
    out = {}
    for i in families:
        c = curvature_bounds(i, problem.model, problem.samples, rule, t)
        m = 2.0 * np.maximum(c, 0.0)
        out[i] = m if per_sample else m.max(axis=1)
    return out


@dataclass
class SurrogateBundle:
    """Data of the convex subproblem built at ``anchor``.

    Constraint ``k`` stands for family ``index[k][0]``, node ``index[k][1]``,
    interval ``index[k][2]``; ``H[k]`` and ``S[k]`` are the per-sample value
    and slope (along ``t``) at the anchor and ``m[k]`` the curvature weight.
    """

    anchor: np.ndarray
    H: np.ndarray
    S: np.ndarray
    m: np.ndarray
    eps: np.ndarray
    index: list
    q: np.ndarray
    dq: np.ndarray
    prox: float
    xi: float
    scale: float = 1.0

    @property
    def n_constraints(self):
        return self.H.shape[0]

    def delta(self, x):
        return np.asarray(x, dtype=float) - self.anchor

    def h_tilde(self, x):
        """Surrogate values, shape ``(K, n_samples)``."""
        dx = self.delta(x)
        return self.H + self.S * dx.sum() + self.m[:, None] * (dx @ dx)

    def g_tilde(self, x, u):
        """Sample-averaged smooth CVaR surrogate per constraint, shape ``(K,)``."""
        u = np.asarray(u, dtype=float)
        return smooth_hinge(self.h_tilde(x) + u[:, None], self.xi).mean(axis=1) - self.eps * u

    def h0_tilde(self, x):
        """Objective surrogate: sum over intervals of the sample mean."""
        dx = self.delta(x)
        lin = self.q + dx.sum() * self.dq
        b = self.q.shape[0]
        fit = np.sum(lin**2, axis=-1).mean(axis=1).sum()
        return float(self.scale * fit + b * 0.5 * self.prox * (dx @ dx))

    def objective_coefficients(self):
        """``(c0, a0, a1, prox_total)`` with ``h0~ = c0 + 2 a0 tau + a1 tau^2 + prox_total/2 |dx|^2``."""
        b = self.q.shape[0]
        c0 = self.scale * np.sum(self.q**2, axis=-1).mean(axis=1).sum()
        a0 = self.scale * np.sum(self.q * self.dq, axis=-1).mean(axis=1).sum()
        a1 = self.scale * np.sum(self.dq**2, axis=-1).mean(axis=1).sum()
        return float(c0), float(a0), float(a1), b * self.prox


def build_surrogates(x_p, problem, majorizers=None, scale=1.0):
    """Surrogate data at ``x_p``; ``scale`` multiplies the fitted objective term."""
    spec = problem.spec
    model = problem.model
    x_p = np.asarray(x_p, dtype=float)
    t = shift(x_p)
    rho = problem.samples
    q = q_derivative(t, model, rho, 0)
    dq = q_derivative(t, model, rho, 1)
    fams = spec.active_families
    if majorizers is None:
        majorizers = majorizer_matrices(problem, fams, t=t)
    H, S, m, eps, index = [], [], [], [], []
    b, _, n = rho.shape
    for i in fams:
        hv = family_values(i, q, model, rho, spec)
        sv = family_derivative(i, dq, model)
        for mm in range(b):
            for nn in range(n):
                H.append(hv[mm, :, nn])
                S.append(sv[mm, :, nn])
                m.append(majorizers[i][mm, nn])
                eps.append(spec.epsilons[i - 1])
                index.append((i, nn, mm))
    ns = problem.n_samples
    return SurrogateBundle(
        anchor=x_p.copy(),
        H=np.array(H).reshape(-1, ns),
        S=np.array(S).reshape(-1, ns),
        m=np.array(m, dtype=float),
        eps=np.array(eps, dtype=float),
        index=index,
        q=q,
        dq=dq,
        prox=spec.d,
        xi=spec.xi,
        scale=float(scale),
    )
