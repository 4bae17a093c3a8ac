import numpy as np
import pytest

from ccvoltvar.controller import Gains, equilibrium, simulate_projected_loop
from ccvoltvar.datasets import feeder_8, make_forecast, sample_day
from ccvoltvar.exceptions import AlignmentError, DomainError, SchemaError
from ccvoltvar.powerflow import InjectionState, compute_rho
from ccvoltvar.scenarios import UncertaintyModel
from ccvoltvar.sensitivity import build_x_lindistflow
from ccvoltvar.simkit import (
    GainsSchedule,
    Profiles,
    ProtectionState,
    bars_svg,
    cdf_svg,
    compute_metrics,
    empirical_cdf,
    energy_balance_error,
    load_profiles,
    load_trace_table,
    protection_step,
    run_lengths,
    run_linear_multiphase,
    run_simulation,
    static_voltvar,
    write_profiles,
    write_trace,
)

GAINS = Gains(0.5, 1.0)


def constant_profiles(net, fleet, seconds, pv=0.9, load=0.05, start_s=0.0):
    p_av = np.zeros((seconds, net.n_nodes))
    p_av[:, fleet.nodes - 1] = pv * fleet.s
    p_l = np.full((seconds, net.n_nodes), load)
    return Profiles(p_av, p_l, -0.33 * p_l, 1.0, start_s)


def day_slice(net, fleet, start_s, seconds, seed=0):
    fc = make_forecast(net, fleet)
    p_av, p_l, q_l = sample_day(fc, UncertaintyModel(), seed=seed)
    sl = slice(start_s, start_s + seconds)
    return Profiles(p_av[sl], p_l[sl], q_l[sl], 1.0, float(start_s))


@pytest.fixture(scope="module")
def feeder():
    return feeder_8()


@pytest.mark.parametrize("strategy", ["ogd", "voltvar", "onoff"])
def test_zero_profiles_give_a_flat_trace(feeder, strategy):
    net, fleet = feeder
    tr = run_simulation(net, fleet, Profiles.zeros(net.n_nodes, 30), strategy, GAINS, tau=1.0)
    assert np.allclose(tr.v, 1.0, atol=1e-12)
    assert np.all(tr.q == 0)
    m = compute_metrics(tr)
    assert m.gamma_v.size == 0 and m.line_loss_kwh == 0
    assert m.curtailment_kwh == 0 and m.reactive_kvarh == 0


@pytest.mark.parametrize("tau", [0.1, 1.0])
def test_protection_examples(tau):
    s = ProtectionState.initial(1)
    assert not protection_step(s, [1.07], tau).connected[0]

    trip_steps = int(round(600 / tau))
    s = ProtectionState.initial(1)
    for k in range(1, trip_steps + 1):
        s = protection_step(s, [1.055], tau)
        assert s.connected[0] == (k < trip_steps)

    back_steps = int(round(60 / tau))
    s = ProtectionState(np.zeros(1, dtype=bool), np.zeros(1, dtype=int), np.zeros(1, dtype=int))
    for k in range(1, back_steps + 1):
        s = protection_step(s, [1.04], tau)
        assert s.connected[0] == (k == back_steps)


def test_protection_counter_resets_on_condition_break():
    s = ProtectionState.initial(1)
    for _ in range(5999):
        s = protection_step(s, [1.055], 0.1)
    s = protection_step(s, [1.049], 0.1)
    assert s.over_count[0] == 0
    s = protection_step(s, [1.055], 0.1)
    assert s.connected[0]


def test_voltvar_curve_examples():
    assert static_voltvar(1.0, 0.0, 1.0) == 0.0
    assert static_voltvar(1.05, 0.0, 1.0) == pytest.approx(-0.44)
    assert static_voltvar(1.03, 0.0, 1.0) == pytest.approx(-0.22)
    assert static_voltvar(0.95, 0.0, 2.0) == pytest.approx(0.88)
    # active priority: cap is sqrt(s^2 - p^2) when smaller than 0.44 s
    assert static_voltvar(1.08, 0.95, 1.0) == pytest.approx(-np.sqrt(1 - 0.95**2))


def test_run_lengths_and_cdf():
    f = np.zeros(25, dtype=bool)
    f[[5, 6, 7, 20]] = True
    assert list(run_lengths(f)) == [3, 1]
    assert list(run_lengths([True, True])) == [2]
    assert run_lengths([]).size == 0
    x, F = empirical_cdf([3.0, 1.0, 2.0])
    assert list(x) == [1, 2, 3] and np.all(np.diff(F) > 0) and F[-1] == 1


def test_onoff_never_injects_and_capability_holds(feeder):
    net, fleet = feeder
    prof = day_slice(net, fleet, 12 * 3600, 120)
    for strategy in ("ogd", "voltvar", "onoff"):
        tr = run_simulation(net, fleet, prof, strategy, GAINS, tau=0.5)
        s2 = fleet.s**2
        assert np.all(tr.p**2 + tr.q**2 <= s2 + 1e-12)
        assert np.all(tr.q[~tr.connected] == 0) and np.all(tr.p[~tr.connected] == 0)
        if strategy == "onoff":
            assert np.all(tr.q == 0)
        else:
            assert np.any(tr.q != 0)


def test_energy_balance(feeder):
    net, fleet = feeder
    prof = day_slice(net, fleet, 11 * 3600, 300)
    tr = run_simulation(net, fleet, prof, "ogd", GAINS, tau=1.0)
    assert energy_balance_error(tr) < 1e-3
    m = compute_metrics(tr)
    assert m.line_loss_kwh > 0 and m.reactive_kvarh > 0


def test_protection_safety_under_heavy_pv(feeder):
    net, fleet = feeder
    prof = constant_profiles(net, fleet, 60, pv=1.0, load=0.0)
    tr = run_simulation(net, fleet, prof, "onoff", tau=0.1)
    idx = fleet.nodes - 1
    high = (tr.v[:, idx] > 1.06) & tr.connected
    assert not np.any(high[1:] & high[:-1])
    assert np.any(~tr.connected)


def test_ogd_limit_point_matches_linear_loop(feeder):
    net, fleet = feeder
    prof = constant_profiles(net, fleet, 60, pv=0.5)
    tr = run_simulation(net, fleet, prof, "ogd", GAINS, tau=0.1, protection=False)
    p = np.minimum(prof.p_av[0][fleet.nodes - 1], fleet.s)
    rho = compute_rho(net, InjectionState(prof.p_av[0], prof.p_l[0], prof.q_l[0], p_ctrl=p, der_nodes=fleet.nodes))
    X = build_x_lindistflow(net).X
    lin = simulate_projected_loop(GAINS, X, rho, np.zeros(net.n_nodes), 2000, fleet.q_min, fleet.q_max)
    assert np.max(np.abs(tr.q[-1] - lin[-1])) <= 0.005
    # unconstrained equilibrium agrees as well when the boxes are inactive
    q_star, _ = equilibrium(GAINS, X, rho)
    if np.all((q_star > fleet.q_min) & (q_star < fleet.q_max)):
        assert np.max(np.abs(tr.q[-1] - q_star)) <= 0.005
    # the controller has settled: the last second barely moves
    assert np.max(np.abs(tr.q[-1] - tr.q[-11])) < 1e-6


def test_gains_switch_settles_within_ten_seconds(feeder):
    net, fleet = feeder
    prof = constant_profiles(net, fleet, 60, pv=0.6, start_s=3570.0)
    sched = GainsSchedule([(0.0, Gains(0.3, 4.0)), (3600.0, Gains(0.8, 0.5))])
    tr = run_simulation(net, fleet, prof, "ogd", sched, tau=0.1, protection=False)
    after = tr.t >= 3600.0
    q = tr.q[after]
    swing = np.max(np.abs(q - q[0]))
    assert swing > 1e-3
    settled = np.max(np.abs(q - q[-1]), axis=1) <= 0.01 * swing
    k = np.flatnonzero(~settled)
    t_settle = tr.t[after][k[-1] + 1] - 3600.0 if k.size else 0.0
    assert t_settle <= 10.0
    assert tr.gains_schedule[1]["eta"] == 0.8


def test_power_flow_failure_holds_voltage(feeder):
    net, fleet = feeder
    prof = constant_profiles(net, fleet, 3, pv=0.0, load=0.05)
    heavy = Profiles(prof.p_av, prof.p_l.copy(), prof.q_l, 1.0)
    heavy.p_l[1] = 50.0
    tr = run_simulation(net, fleet, heavy, "onoff", tau=1.0)
    assert tr.pf_failed.tolist() == [False, True, False]
    assert np.array_equal(tr.v[1], tr.v[0])
    assert compute_metrics(tr).pf_failures == 1


def test_input_checks(feeder):
    net, fleet = feeder
    prof = Profiles.zeros(net.n_nodes, 5)
    with pytest.raises(DomainError):
        run_simulation(net, fleet, prof, "droop")
    with pytest.raises(DomainError):
        run_simulation(net, fleet, prof, "ogd")
    with pytest.raises(AlignmentError):
        run_simulation(net, fleet, prof, "onoff", tau=0.3)
    with pytest.raises(DomainError):
        run_simulation(net, fleet, Profiles.zeros(3, 5), "onoff")


def test_profile_and_trace_round_trip(tmp_path, feeder):
    net, fleet = feeder
    prof = day_slice(net, fleet, 12 * 3600, 20)
    write_profiles(prof, tmp_path / "p.csv")
    back = load_profiles(tmp_path / "p.csv")
    assert back.start_s == prof.start_s and back.dt == 1.0
    assert np.allclose(back.p_av, prof.p_av, rtol=1e-9)

    tr = run_simulation(net, fleet, prof, "voltvar", tau=1.0)
    write_trace(tr, tmp_path / "t.csv")
    t, v = load_trace_table(tmp_path / "t.csv")
    assert np.allclose(v, tr.v, rtol=1e-9) and np.allclose(t, tr.t)

    write_trace(tr, tmp_path / "d.csv", every=7)
    t, v = load_trace_table(tmp_path / "d.csv")
    assert t.size == 3 and np.isclose(v.max(), tr.v.max())

    (tmp_path / "x.csv").write_text("t,node\n0,1\n")
    with pytest.raises(SchemaError):
        load_trace_table(tmp_path / "x.csv")


def test_multiphase_linear_loop(rng):
    n = 6
    B = rng.standard_normal((n, n))
    X = 0.02 * (B @ B.T + n * np.eye(n)) / n + 0.002 * (B - B.T)
    rho = 1.0 + rng.normal(0.02, 0.01, n)
    ok = run_linear_multiphase(X, rho, GAINS, -np.inf, np.inf, steps=300)
    assert ok.diverged_at is None and ok.mode == "linear-model"
    assert np.allclose(ok.q[-1], np.linalg.solve(X + np.eye(n), 1 - rho), atol=1e-8)
    bad = run_linear_multiphase(X, rho, Gains(0.05, 60.0), -np.inf, np.inf, steps=300)
    assert bad.diverged_at is not None


def test_svg_output_is_wellformed():
    import xml.etree.ElementTree as ET

    ET.fromstring(cdf_svg({"a": empirical_cdf([1, 2, 3]), "b": empirical_cdf([2, 4])}))
    ET.fromstring(bars_svg({"lost": {"ogd": 1.0, "onoff": 3.0}, "reactive": {"ogd": 2.0}}))
