"""Log-barrier Newton solver for the strongly convex surrogate subproblem.

Variables are the two design coordinates ``x`` and one auxiliary ``u_k >= 0``
per chance constraint. Each ``u_k`` appears in a single constraint, so the
Newton system is solved through the Schur complement of the diagonal
``u`` block. A phase-I problem (minimise a common slack ``s``) recovers a
strictly feasible start when the anchor sits on the boundary.
"""

from dataclasses import dataclass

import numpy as np

from ..exceptions import MaxNewtonIterations, SubproblemInfeasible
from .functions import best_u, smooth_hinge_derivatives

__all__ = ["SubproblemResult", "solve_subproblem"]


@dataclass
class SubproblemResult:
    x: np.ndarray
    u: np.ndarray
    objective: float
    multipliers: np.ndarray
    linear_multipliers: np.ndarray
    kkt_residual: float
    max_violation: float
    newton_steps: int
    phase1: bool


class _Barrier:
    def __init__(self, bundle, A_lin, b_lin, phase1):
        self.b = bundle
        self.A = A_lin
        self.bl = b_lin
        self.phase1 = phase1
        self.ny = 3 if phase1 else 2
        c0, a0, a1, prox = bundle.objective_coefficients()
        self.c0, self.a0, self.a1, self.prox = c0, a0, a1, prox
        # eps = 1 rows keep their shift u fixed (see best_u)
        self.fixed = bundle.eps >= 1

    def split(self, z):
        return z[: self.ny], z[self.ny:]

    def objective(self, y):
        if self.phase1:
            return y[2]
        dx = y[:2] - self.b.anchor
        tau = dx.sum()
        return self.c0 + 2 * self.a0 * tau + self.a1 * tau**2 + 0.5 * self.prox * (dx @ dx)

    def constraints(self, z):
        y, u = self.split(z)
        G = self.b.g_tilde(y[:2], u)
        L = self.A @ y[:2] - self.bl
        if self.phase1:
            G = G - y[2]
            L = L - y[2]
        return G, L

    def feasible(self, z):
        _, u = self.split(z)
        G, L = self.constraints(z)
        return np.all(G < 0) and np.all(L < 0) and np.all(u > 0)

    def value(self, z, tb):
        y, u = self.split(z)
        G, L = self.constraints(z)
        return tb * self.objective(y) - np.sum(np.log(-G)) - np.sum(np.log(-L)) - np.sum(np.log(u[~self.fixed]))

    def derivatives(self, z, tb):
        """Gradient and Schur-ready Hessian blocks of the barrier function."""
        b = self.b
        ny = self.ny
        y, u = self.split(z)
        x = y[:2]
        dx = x - b.anchor
        tau = dx.sum()
        r2 = dx @ dx
        Y = b.H + b.S * tau + b.m[:, None] * r2 + u[:, None]
        d1, d2 = smooth_hinge_derivatives(Y, b.xi)
        # per-sample gradient of h~ wrt x: S*(1,1) + 2 m dx
        a1 = b.S + 2 * b.m[:, None] * dx[0]
        a2 = b.S + 2 * b.m[:, None] * dx[1]
        Gval = b.g_tilde(x, u)
        L = self.A @ x - self.bl
        if self.phase1:
            Gval = Gval - y[2]
            L = L - y[2]
        K = Gval.size

        gx = np.empty((K, ny))
        gx[:, 0] = np.mean(d1 * a1, axis=1)
        gx[:, 1] = np.mean(d1 * a2, axis=1)
        if self.phase1:
            gx[:, 2] = -1.0
        gu = np.mean(d1, axis=1) - b.eps
        mean_d1 = np.mean(d1, axis=1)
        Hxx = np.zeros((K, ny, ny))
        Hxx[:, 0, 0] = np.mean(d2 * a1 * a1, axis=1) + 2 * b.m * mean_d1
        Hxx[:, 1, 1] = np.mean(d2 * a2 * a2, axis=1) + 2 * b.m * mean_d1
        Hxx[:, 0, 1] = Hxx[:, 1, 0] = np.mean(d2 * a1 * a2, axis=1)
        Hxu = np.zeros((K, ny))
        Hxu[:, 0] = np.mean(d2 * a1, axis=1)
        Hxu[:, 1] = np.mean(d2 * a2, axis=1)
        Huu = np.mean(d2, axis=1)

        w = 1.0 / (-Gval)
        grad_y = np.zeros(ny)
        H_yy = np.zeros((ny, ny))
        if self.phase1:
            grad_y[2] = tb
        else:
            grad_y[:2] = tb * (2 * (self.a0 + self.a1 * tau) + self.prox * dx)
            H_yy[:2, :2] = tb * (2 * self.a1 * np.ones((2, 2)) + self.prox * np.eye(2))
        grad_y += w @ gx
        H_yy += np.einsum("k,kij->ij", w, Hxx) + np.einsum("k,ki,kj->ij", w**2, gx, gx)
        grad_u = w * gu - 1.0 / u
        H_yu = (w[:, None] * Hxu + (w**2 * gu)[:, None] * gx).T
        D = w * Huu + (w * gu) ** 2 + 1.0 / u**2
        grad_u[self.fixed] = 0.0
        H_yu[:, self.fixed] = 0.0
        D[self.fixed] = 1.0

        Ay = np.zeros((self.A.shape[0], ny))
        Ay[:, :2] = self.A
        if self.phase1:
            Ay[:, 2] = -1.0
        wl = 1.0 / (-L)
        grad_y += wl @ Ay
        H_yy += np.einsum("j,ji,jk->ik", wl**2, Ay, Ay)
        return grad_y, grad_u, H_yy, H_yu, D, w, wl

    def newton_direction(self, z, tb):
        gy, gu, Hyy, Hyu, D, _, _ = self.derivatives(z, tb)
        S = Hyy - (Hyu / D) @ Hyu.T
        rhs = -gy + Hyu @ (gu / D)
        try:
            dy = np.linalg.solve(S, rhs)
        except np.linalg.LinAlgError:
            dy = np.linalg.lstsq(S, rhs, rcond=None)[0]
        du = (-gu - Hyu.T @ dy) / D
        dz = np.concatenate([dy, du])
        g = np.concatenate([gy, gu])
        return dz, g


def _center(bar, z, tb, tol=1e-10, max_steps=500, stop=None):
    """Damped Newton on the barrier function at weight ``tb``.

    Near the end of the path the barrier value is large and round-off
    limits the attainable decrement; a line search that can no longer make
    progress is then treated as converged.
    """
    steps = 0
    dec = np.inf
    for _ in range(max_steps):
        dz, g = bar.newton_direction(z, tb)
        dec = -(g @ dz)
        if dec / 2 <= tol:
            return z, steps
        step = 1.0
        f0 = bar.value(z, tb)
        slack = 64 * np.finfo(float).eps * max(1.0, abs(f0))
        while True:
            cand = z + step * dz
            if bar.feasible(cand) and bar.value(cand, tb) <= f0 + 0.25 * step * (g @ dz) + slack:
                break
            step *= 0.5
            if step < 1e-12:
                return z, steps
        moved = step * np.linalg.norm(dz)
        z = cand
        steps += 1
        if stop is not None and stop(z):
            return z, steps
        if moved <= 1e-14 * (1.0 + np.linalg.norm(z)):
            return z, steps
    if dec > 1e-6:
        raise MaxNewtonIterations(f"barrier centering exceeded {max_steps} Newton steps")
    return z, steps


def _initial_u(bundle, x):
    if bundle.n_constraints == 0:
        return np.zeros(0), np.zeros(0)
    h = bundle.h_tilde(x)
    u = np.empty(bundle.n_constraints)
    val = np.empty(bundle.n_constraints)
    for e in np.unique(bundle.eps):
        sel = bundle.eps == e
        u[sel], val[sel] = best_u(h[sel], e, bundle.xi)
    return u, val


def solve_subproblem(bundle, A_lin, b_lin, x_start=None, u_start=None, gap_tol=1e-9, mu=20.0):
    """Minimise the surrogate objective subject to the surrogate constraints.

    ``A_lin @ x <= b_lin`` are the deterministic (linear) constraints. The
    search starts from the anchor unless ``x_start`` is given.
    """
    x0 = bundle.anchor.copy() if x_start is None else np.asarray(x_start, dtype=float)
    u0, _ = _initial_u(bundle, x0)
    if u_start is not None:
        u0 = np.where(np.asarray(u_start) > 0, u_start, u0)
    u0 = np.maximum(u0, 1e-12)
    total_steps = 0
    z = np.concatenate([x0, u0])
    phase2 = _Barrier(bundle, A_lin, b_lin, phase1=False)
    used_phase1 = False
    if not phase2.feasible(z):
        used_phase1 = True
        G, L = phase2.constraints(z)
        worst = max(np.max(G, initial=-np.inf), np.max(L, initial=-np.inf))
        s0 = worst + max(1e-3, abs(worst))
        bar1 = _Barrier(bundle, A_lin, b_lin, phase1=True)
        z1 = np.concatenate([x0, [s0], u0])
        m1 = bundle.n_constraints * 2 + len(b_lin)
        tb = 1.0 / max(abs(s0), 1e-12)

        def done(zz):
            return zz[2] < 0 and phase2.feasible(np.concatenate([zz[:2], zz[3:]]))

        while True:
            z1, n = _center(bar1, z1, tb, stop=done)
            total_steps += n
            if done(z1):
                break
            if m1 / tb < 1e-14:
                s_best = z1[2]
                if s_best > 1e-9:
                    raise SubproblemInfeasible(
                        f"surrogate problem has no feasible point near the anchor (slack {s_best:.3e})"
                    )
                # no interior: keep the anchor
                u_keep, _ = _initial_u(bundle, bundle.anchor)
                return SubproblemResult(
                    bundle.anchor.copy(), u_keep, float(phase2.objective(bundle.anchor)),
                    np.zeros(bundle.n_constraints), np.zeros(len(b_lin)), 0.0, float(s_best),
                    total_steps, True,
                )
            tb *= mu
        z = np.concatenate([z1[:2], z1[3:]])

    m = bundle.n_constraints * 2 + len(b_lin)
    f = phase2.objective(z[:2])
    tb = m / max(abs(f), 1e-8)
    while True:
        z, n = _center(phase2, z, tb)
        total_steps += n
        if m / tb < gap_tol:
            break
        tb *= mu

    gy, gu, *_, w, wl = phase2.derivatives(z, tb)
    kkt = float(max(np.max(np.abs(gy)), np.max(np.abs(gu), initial=0.0)) / tb)
    G, L = phase2.constraints(z)
    return SubproblemResult(
        x=z[:2].copy(),
        u=z[2:].copy(),
        objective=float(phase2.objective(z[:2])),
        multipliers=w / tb,
        linear_multipliers=wl / tb,
        kkt_residual=kkt,
        max_violation=float(max(np.max(G, initial=-np.inf), np.max(L, initial=-np.inf))),
        newton_steps=total_steps,
        phase1=used_phase1,
    )
