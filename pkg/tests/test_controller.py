import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccvoltvar.controller import (
    Gains,
    apply_reactive_priority,
    classify_stability,
    closed_loop_matrix,
    detect_divergence,
    equilibrium,
    simulate_linear_loop,
    simulate_projected_loop,
    stability_check_multiphase,
    stability_margin,
    step_projected,
    step_unprojected,
)
from ccvoltvar.exceptions import DomainError, SingularSystem

from conftest import random_spd

X1 = np.array([[0.1]])
RHO1 = np.array([1.02])


def test_unprojected_step_examples():
    assert step_unprojected([0.3], [0.9], Gains(0.0, 0.0)) == pytest.approx([0.3])
    assert step_unprojected([0.0, 0.0], [1.0, 1.0], Gains(0.4, 2.0)) == pytest.approx([0.0, 0.0])
    assert step_unprojected([0.1], [1.02], Gains(0.5, 1.0)) == pytest.approx([0.04])


def test_projected_step():
    g = Gains(1.0, 0.0)
    assert step_projected([0.0], [-4.0], g, -4, 4) == pytest.approx([4.0])
    assert step_projected([0.1], [1.02], Gains(0.5, 1.0), -1, 1) == pytest.approx([0.04])
    q, _ = equilibrium(Gains(0.5, 1.0), X1, RHO1)
    v = X1 @ q + RHO1
    assert step_projected(q, v, Gains(0.5, 1.0), -1, 1) == pytest.approx(q, abs=1e-15)


def test_reactive_priority():
    assert apply_reactive_priority(1.0, 0.0, 1.0) == 1.0
    assert apply_reactive_priority(1.0, 0.6, 1.0) == pytest.approx(0.8)
    assert apply_reactive_priority(0.7, 1.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        apply_reactive_priority(0.5, 1.2, 1.0)


def test_equilibrium_examples():
    q, nu = equilibrium(Gains(0.0, 2.0), X1, RHO1)
    assert q == pytest.approx([0.0]) and nu == pytest.approx(RHO1)
    X = np.array([[0.1, 0.1], [0.1, 0.15]])
    rho = np.array([1.03, 1.04])
    for g in (Gains(1.0, 0.7), Gains(0.6, 0.0)):
        q, nu = equilibrium(g, X, rho)
        assert q == pytest.approx(np.linalg.solve(X, 1 - rho))
        assert nu == pytest.approx([1.0, 1.0])
    q, nu = equilibrium(Gains(0.5, 1.0), X1, RHO1)
    assert q == pytest.approx([-0.0181818], abs=1e-7)
    assert nu == pytest.approx([1.0181818], abs=1e-7)
    g = Gains(0.5, 1.0)
    assert g.x == pytest.approx([2.0, -1.0])
    assert q == pytest.approx(-0.02 / (0.1 + g.x.sum()), abs=1e-15)
    traj = simulate_linear_loop(g, X1, RHO1, [0.0], 200)
    assert traj[-1] == pytest.approx(q, abs=1e-14)
    with pytest.raises(SingularSystem):
        equilibrium(Gains(0.0, 0.0), X1, RHO1)


def test_stability_margin_examples():
    assert stability_margin(Gains(0.5, 1.0), [0.1]) == pytest.approx(0.55)
    A = closed_loop_matrix(Gains(0.5, 1.0), X1)
    assert abs(A[0, 0]) == pytest.approx(0.45)
    assert classify_stability(Gains(0.0, 2.5), [0.1]) == "unstable"
    assert stability_margin(Gains(0.0, 2.5), [0.1]) < 0
    assert classify_stability(Gains(0.0, 0.0), [0.1]) == "marginal"
    assert stability_margin(Gains(0.0, 0.0), [0.1]) == 0.0


def test_multiphase_check_examples():
    one = Gains(0.5, 1.0)  # 1'x = 1
    assert one.shift == pytest.approx(1.0)
    assert stability_check_multiphase(one, 0.5)
    assert not stability_check_multiphase(one, 1.5)
    for t_gain in (Gains(0.5, 0.2), Gains(0.5, 1.9)):
        assert stability_check_multiphase(t_gain, 1e-12) == (0 < t_gain.shift < 2)


def test_linear_loop_bound_and_divergence():
    g = Gains(0.5, 1.0)
    q_star, _ = equilibrium(g, X1, RHO1)
    traj = simulate_linear_loop(g, X1, RHO1, [0.0], 50)
    assert abs(traj[-1, 0] - q_star[0]) <= 0.45**50 * abs(q_star[0]) + 1e-18
    flat = simulate_linear_loop(g, X1, RHO1, q_star, 10)
    assert np.allclose(flat, q_star[0], atol=1e-16)
    bad = Gains(0.0, 2.5)
    assert classify_stability(bad, [0.1]) == "unstable"
    k = detect_divergence(bad, X1, RHO1, [0.01])
    assert k is not None and k <= 100
    assert detect_divergence(g, X1, RHO1, [0.01]) is None


def test_gains_from_x_round_trip():
    g = Gains(0.3, 1.7)
    back = Gains.from_x(g.x)
    assert back.eta == pytest.approx(0.3) and back.alpha == pytest.approx(1.7)
    z = Gains.from_x([0.0, 0.0], lambda_max=0.5)
    assert z.alpha == 0.0 and 0 < z.eta < 1
    assert stability_margin(z, [0.5]) > 0
    with pytest.raises(DomainError):
        Gains(1.2, 0.0)
    with pytest.raises(DomainError):
        Gains(0.0, 1.0).x


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.floats(0.05, 1.0), st.floats(0.0, 3.0), st.integers(0, 2**31))
def test_fixed_point_consistency(n, eta, alpha, seed):
    rng = np.random.default_rng(seed)
    X = random_spd(rng, n)
    lam = np.linalg.eigvalsh(X)
    g = Gains(eta, alpha)
    if stability_margin(g, lam) <= 1e-3:
        return
    rho = 1 + rng.normal(0, 0.03, n)
    q_star, nu = equilibrium(g, X, rho)
    r = np.max(np.abs(np.linalg.eigvals(closed_loop_matrix(g, X))))
    steps = int(np.ceil(np.log(1e-12) / np.log(r))) if r > 0 else 1
    if steps > 50000:
        return
    traj = simulate_linear_loop(g, X, rho, np.zeros(n), steps)
    assert np.max(np.abs(traj[-1] - q_star)) <= 1e-8 * max(1.0, np.abs(q_star).max())
    t = g.shift
    if eta > 0:
        assert q_star == pytest.approx(np.linalg.solve(X + t * np.eye(n), 1 - rho), rel=1e-9, abs=1e-12)
    assert nu == pytest.approx(X @ q_star + rho)


def test_projected_contraction(rng):
    for _ in range(20):
        n = 5
        X = random_spd(rng, n)
        g = Gains(0.6, 1.2)
        rho = 1 + rng.normal(0, 0.01, n)
        q_star, _ = equilibrium(g, X, rho)
        box = np.abs(q_star).max() * 3 + 0.01
        A = closed_loop_matrix(g, X)
        r = np.max(np.abs(np.linalg.eigvalsh(A)))
        traj = simulate_projected_loop(g, X, rho, rng.uniform(-box, box, n), 30, -box, box)
        err = np.linalg.norm(traj - q_star, axis=1)
        assert np.all(err[1:] <= r * err[:-1] + 1e-14)


def test_monotone_roles():
    X = np.array([[0.1, 0.1], [0.1, 0.15]])
    rho = np.array([1.03, 1.05])
    norms = [np.linalg.norm(equilibrium(Gains(0.5, a), X, rho)[0]) for a in (0.2, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(norms) < 0)
    devs = [np.linalg.norm(equilibrium(Gains(e, 1.0), X, rho)[1] - 1) for e in (0.2, 0.4, 0.6, 0.8)]
    assert np.all(np.diff(devs) < 0)
    norms1 = [abs(equilibrium(Gains(0.5, a), X1, RHO1)[0][0]) for a in (0.2, 0.5, 1.0)]
    assert np.all(np.diff(norms1) < 0)
