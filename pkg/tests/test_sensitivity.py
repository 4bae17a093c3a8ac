import numpy as np
import pytest

from ccvoltvar.datasets import feeder_8, feeder_42, make_forecast
from ccvoltvar.exceptions import NotPositiveDefinite, NumericalError, TopologyError
from ccvoltvar.netmodel import Der, DerFleet, Line, Network
from ccvoltvar.powerflow import InjectionState, solve_pf
from ccvoltvar.sensitivity import (
    SensitivityModel,
    build_x_lindistflow,
    eig_decompose,
    load_x_matrix,
    reduce_to_der_nodes,
    save_x_matrix,
)

from conftest import chain


def walk_oracle(net):
    """Sum the reactances shared by the two root paths of every node pair."""
    N = net.n_nodes
    up = {0: (None, None)}
    frontier = [0]
    while frontier:
        nd = frontier.pop()
        for k, ln in enumerate(net.lines):
            for a, b in ((ln.from_node, ln.to_node), (ln.to_node, ln.from_node)):
                if a == nd and b not in up:
                    up[b] = (a, k)
                    frontier.append(b)

    def path(n):
        lines = set()
        while n != 0:
            n, k = up[n]
            lines.add(k)
        return lines

    X = np.zeros((N, N))
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            X[i - 1, j - 1] = sum(net.lines[k].x for k in path(i) & path(j))
    return X


def test_chain_example():
    model = build_x_lindistflow(chain([0.1, 0.05]))
    assert np.allclose(model.X, [[0.1, 0.1], [0.1, 0.15]], atol=1e-15)
    assert np.sort(model.eigvals) == pytest.approx(np.sort(np.roots([1, -0.25, 0.005])), abs=1e-12)
    assert np.sort(model.eigvals) == pytest.approx([0.02192, 0.22808], abs=1e-5)


def test_single_line():
    model = build_x_lindistflow(chain([0.1]))
    assert model.X.tolist() == [[0.1]]
    assert model.eigvals.tolist() == pytest.approx([0.1])


@pytest.mark.parametrize("make", [feeder_8, feeder_42])
def test_matches_path_walk_oracle(make):
    net, _ = make()
    model = build_x_lindistflow(net)
    assert np.max(np.abs(model.X - walk_oracle(net))) <= 1e-12
    assert model.symmetric and model.lambda_min > 0


def test_meshed_input_rejected():
    net = chain([0.1, 0.1])
    object.__setattr__(net, "lines", net.lines + (Line(0, 2, 0.1, 0.1),))
    with pytest.raises(TopologyError):
        build_x_lindistflow(net)


def test_eig_decompose_cases():
    lam, P, Pi = eig_decompose(np.array([[0.1]]))
    assert lam.tolist() == pytest.approx([0.1]) and abs(P[0, 0]) == pytest.approx(1.0)
    X = np.array([[0.1, 0.1], [0.1, 0.15]])
    lam, P, Pi = eig_decompose(X)
    assert np.max(np.abs((P * lam) @ Pi - X)) <= 1e-12
    assert np.allclose(P.T @ P, np.eye(2), atol=1e-10)
    lam, P, Pi = eig_decompose(0.3 * np.eye(4))
    assert np.allclose(lam, 0.3) and np.allclose(P @ P.T, np.eye(4))
    with pytest.raises(NumericalError):
        eig_decompose(np.array([[np.nan]]))


def test_reduction():
    net = chain([0.1, 0.05])
    model = build_x_lindistflow(net)
    only2 = DerFleet([Der("g", 2, 0.2, -0.1, 0.1)], 2)
    red = reduce_to_der_nodes(model, only2)
    assert red.X.tolist() == [[pytest.approx(0.15)]]
    both = DerFleet([Der("a", 1, 0.2, -0.1, 0.1), Der("b", 2, 0.2, -0.1, 0.1)], 2)
    assert reduce_to_der_nodes(model, both) is model


def test_reduction_interlacing():
    net, _ = feeder_42()
    model = build_x_lindistflow(net)
    rng = np.random.default_rng(0)
    nodes = np.sort(rng.choice(np.arange(1, 43), 10, replace=False))
    fleet = DerFleet([Der(f"g{n}", int(n), 0.2, -0.1, 0.1) for n in nodes], 42)
    red = reduce_to_der_nodes(model, fleet)
    assert red.lambda_min >= model.lambda_min - 1e-15
    assert red.reduced and np.array_equal(red.nodes, nodes)


def test_load_x_matrix(tmp_path):
    p = tmp_path / "eye.csv"
    np.savetxt(p, np.eye(3), delimiter=",")
    m = load_x_matrix(p)
    assert np.allclose(m.eigvals, 1.0) and m.norm2 == pytest.approx(1.0)
    z = np.eye(3)
    z[1] = 0
    np.savetxt(p, z, delimiter=",")
    with pytest.raises(NotPositiveDefinite):
        load_x_matrix(p)


def test_non_symmetric_multiphase_file(tmp_path):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((9, 9))
    S = A @ A.T / 9 + 0.5 * np.eye(9)
    K = rng.standard_normal((9, 9)) * 0.02
    X = S + (K - K.T)
    assert np.linalg.eigvalsh(0.5 * (X + X.T)).min() > 0
    p = tmp_path / "x9.csv"
    save_x_matrix(SensitivityModel(X), p)
    m = load_x_matrix(p)
    assert not m.symmetric
    assert np.array_equal(m.X, X)
    assert m.norm2 == pytest.approx(np.linalg.norm(X, 2))


@pytest.mark.parametrize("make", [feeder_8, feeder_42])
def test_finite_difference_columns(make):
    net, fleet = make()
    model = build_x_lindistflow(net)
    fc = make_forecast(net, fleet)
    z = InjectionState(fc.p_av[12], fc.p_l[12], fc.q_l[12])
    base = solve_pf(net, z).v
    h = 1e-3
    for i in range(0, net.n_nodes, max(1, net.n_nodes // 6)):
        q = np.zeros(net.n_nodes)
        q[i] = h
        inj = InjectionState(z.p_av, z.p_l, z.q_l, q_ctrl=q, der_nodes=np.arange(1, net.n_nodes + 1))
        col = (solve_pf(net, inj).v - base) / h
        rel = np.linalg.norm(col - model.X[:, i]) / np.linalg.norm(model.X[:, i])
        assert rel <= 0.15
