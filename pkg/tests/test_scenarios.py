import numpy as np
import pytest

from ccvoltvar.datasets import feeder_8, load_shipped_forecast, make_forecast
from ccvoltvar.exceptions import AlignmentError, DomainError, SchemaError, TooManyDropped
from ccvoltvar.powerflow import InjectionState, compute_rho
from ccvoltvar.scenarios import (
    ForecastSeries,
    ScenarioSet,
    UncertaintyModel,
    forecast_from_profiles,
    generate_scenarios,
    load_forecast,
    load_scenarios,
    sample_delta,
    time_grid,
    write_forecast,
    write_scenarios,
)

from conftest import chain


def noon_forecast(net, n=None, pv=0.25, load=0.02):
    n = n or net.n_nodes
    p_av = np.full((1, n), pv)
    p_l = np.full((1, n), load)
    return ForecastSeries(p_av, p_l, -0.33 * p_l)


def test_zero_spread_gives_zero_delta():
    m = UncertaintyModel(sigma_pv=0.0, sigma_load=0.0)
    zbar = (np.full(4, 0.3), np.full(4, 0.1), np.full(4, -0.03))
    for d in sample_delta(m, zbar, np.random.default_rng(0)):
        assert np.array_equal(d, np.zeros(4))


def test_sample_mean_within_law_of_large_numbers_bound():
    m = UncertaintyModel(sigma_pv=0.1)
    rng = np.random.default_rng(3)
    zbar = (np.ones(1), np.ones(1), -np.ones(1))
    draws = np.array([1.0 + sample_delta(m, zbar, rng)[0][0] for _ in range(10_000)])
    assert abs(draws.mean() - 1.0) <= 0.004


@pytest.mark.parametrize("family", ["gaussian", "uniform", "scaled-beta"])
def test_truncation_keeps_available_power_nonnegative(family):
    m = UncertaintyModel(family=family, sigma_pv=5.0, sigma_load=5.0)
    rng = np.random.default_rng(4)
    zbar = (np.full(50, 0.01), np.full(50, 0.02), np.full(50, -0.01))
    for _ in range(200):
        d_av, d_pl, d_ql = sample_delta(m, zbar, rng)
        assert np.all(zbar[0] + d_av >= 0)
        assert np.all(zbar[1] + d_pl >= 0)
        assert np.all(zbar[2] + d_ql <= 0)


def test_families_have_unit_variance():
    rng = np.random.default_rng(5)
    for family in ("gaussian", "uniform", "scaled-beta"):
        z = UncertaintyModel(family=family, truncation=10.0).standard(rng, 200_000)
        assert abs(z.mean()) < 0.01
        assert abs(z.var() - 1.0) < 0.02


def test_zero_spread_scenarios_equal_the_forecast_power_flow():
    net, _ = feeder_8()
    fc = noon_forecast(net)
    scen = generate_scenarios(net, fc, UncertaintyModel(sigma_pv=0.0, sigma_load=0.0), n_samples=5)
    ref = compute_rho(net, InjectionState(*fc.interval(0)))
    assert np.allclose(scen.rho[0], ref[None, :], atol=1e-12)
    assert scen.dropped == 0


def test_scenarios_are_deterministic_per_seed():
    net, _ = feeder_8()
    fc = noon_forecast(net)
    a = generate_scenarios(net, fc, UncertaintyModel(seed=11), n_samples=20)
    b = generate_scenarios(net, fc, UncertaintyModel(seed=11), n_samples=20)
    c = generate_scenarios(net, fc, UncertaintyModel(seed=12), n_samples=20)
    assert a.rho.tobytes() == b.rho.tobytes()
    assert not np.array_equal(a.rho, c.rho)


def test_high_voltage_quantile_grows_with_spread():
    net = chain([0.02] * 5, [0.02] * 5)
    fc = noon_forecast(net, pv=0.3)
    q95 = []
    for sigma in (0.05, 0.10):
        scen = generate_scenarios(net, fc, UncertaintyModel(sigma_pv=sigma, seed=2), n_samples=100)
        q95.append(np.quantile(scen.rho[0].max(axis=1), 0.95))
    assert q95[0] < q95[1]


def test_time_grid_examples():
    assert time_grid(0.1, 1800, 3600) == (18000, 2, 36000)
    assert time_grid(1, 3, 9) == (3, 3, 9)
    assert time_grid(1, 1800, 1800)[1] == 1
    with pytest.raises(AlignmentError):
        time_grid(0.7, 1800, 3600)
    with pytest.raises(AlignmentError):
        time_grid(1, 1800, 2000)


def test_too_many_failed_draws_raise():
    net = chain([0.5, 0.5], [0.5, 0.5])
    fc = ForecastSeries(np.zeros((1, 2)), np.full((1, 2), 5.0), np.full((1, 2), 5.0))
    with pytest.raises(TooManyDropped):
        generate_scenarios(net, fc, UncertaintyModel(), n_samples=4)


def test_forecast_validation():
    with pytest.raises(DomainError):
        ForecastSeries(-np.ones((1, 2)), np.zeros((1, 2)), np.zeros((1, 2)))
    with pytest.raises(DomainError):
        ForecastSeries(np.ones((1, 2)), np.zeros((1, 3)), np.zeros((1, 2)))
    with pytest.raises(DomainError):
        UncertaintyModel(family="cauchy")


def test_forecast_from_profiles_averages_blocks():
    t = np.arange(8, dtype=float)[:, None] * np.ones((1, 2))
    fc = forecast_from_profiles(t, t, -t, dt=1.0, interval_s=4.0)
    assert fc.n_intervals == 2
    assert np.allclose(fc.p_av[:, 0], [1.5, 5.5])
    with pytest.raises(AlignmentError):
        forecast_from_profiles(t, t, t, dt=1.0, interval_s=4.0, n_intervals=3)


def test_forecast_and_scenario_round_trip(tmp_path):
    net, fleet = feeder_8()
    fc = make_forecast(net, fleet)
    write_forecast(fc, tmp_path / "f.csv")
    back = load_forecast(tmp_path / "f.csv")
    assert np.array_equal(back.p_av, fc.p_av) and np.array_equal(back.q_l, fc.q_l)

    scen = ScenarioSet(1.0 + np.random.default_rng(0).normal(0, 0.01, (2, 3, 4)), nodes=[2, 4, 6, 8])
    write_scenarios(scen, tmp_path / "s.csv")
    again = load_scenarios(tmp_path / "s.csv")
    assert np.array_equal(again.rho, scen.rho)
    assert list(again.nodes) == [2, 4, 6, 8]
    assert np.array_equal(again.at_nodes([4, 8]), scen.rho[:, :, [1, 3]])

    (tmp_path / "bad.csv").write_text("m,s,node\n1,1,1\n")
    with pytest.raises(SchemaError):
        load_scenarios(tmp_path / "bad.csv")


def test_shipped_forecast_covers_a_day():
    fc = load_shipped_forecast("feeder8")
    assert fc.n_intervals == 48 and fc.interval_s == 1800.0
    assert fc.horizon_s == 86400.0
    assert fc.p_av.max() > 0 and fc.p_av[0].max() == 0
