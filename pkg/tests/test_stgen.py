import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from celltide.errors import CelltideError
from celltide.spatial import SIGMA_PRESETS
from celltide.stgen import (
    STModel, generate, mean_profile, moment_match, mu_of_t, validate,
)
from celltide.temporal import REFERENCE_MODELS, SinusoidModel, evaluate

PI = math.pi
PARK = REFERENCE_MODELS["park"]


def test_mean_profile_n1():
    m = STModel(PARK, 1.3, 1)
    t = np.arange(48)
    np.testing.assert_array_equal(mean_profile(m, t), evaluate(PARK, t))


def test_mean_profile_park_at_six():
    assert mean_profile(STModel(PARK, 1.3, 10), 6) == pytest.approx(evaluate(PARK, 6) / 10,
                                                                    rel=1e-15)


def test_mean_profile_halves_when_n_doubles():
    t = np.arange(100)
    a, b = STModel(PARK, 1.3, 7), STModel(PARK, 1.3, 14)
    np.testing.assert_allclose(mean_profile(b, t), mean_profile(a, t) / 2, rtol=1e-15)


def test_mu_of_t_cases():
    assert mu_of_t(1.0, 2.0) == -2.0
    assert mu_of_t(math.e, 1e-9) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(CelltideError, match="non-positive"):
        mu_of_t(0.0, 1.0)


def test_moment_match_plug_in():
    p = moment_match(1.0, math.e - 1)
    assert p.sigma == pytest.approx(1.0, rel=1e-15)
    assert p.mu == pytest.approx(-0.5, rel=1e-15)


def test_moment_match_near_deterministic():
    p = moment_match(5.0, 1e-4)
    assert p.sigma == pytest.approx(math.sqrt(math.log(1 + 1e-4 / 25)), rel=1e-12)
    assert p.sigma == pytest.approx(0.002, rel=1e-3)


@pytest.mark.parametrize("m,v", [(0, 1), (1, 0), (-1, 1)])
def test_moment_match_errors(m, v):
    with pytest.raises(CelltideError):
        moment_match(m, v)


@settings(max_examples=200)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_moment_match_forward(m, v):
    p = moment_match(m, v)
    mean = math.exp(p.mu + p.sigma ** 2 / 2)
    var = math.expm1(p.sigma ** 2) * math.exp(2 * p.mu + p.sigma ** 2)
    assert mean == pytest.approx(m, rel=1e-12)
    assert var == pytest.approx(v, rel=1e-10)


@settings(max_examples=200)
@given(st.floats(0.01, 100), st.floats(0.05, 4))
def test_mu_of_t_matches_moment_match(m, sigma):
    v = m * m * math.expm1(sigma ** 2)
    p = moment_match(m, v)
    assert p.mu == pytest.approx(mu_of_t(m, sigma), rel=1e-12, abs=1e-12)
    assert p.sigma == pytest.approx(sigma, rel=1e-12)
    # analytic lognormal mean equals m
    assert math.exp(mu_of_t(m, sigma) + sigma ** 2 / 2) == pytest.approx(m, rel=1e-12)


def test_stmodel_validation():
    with pytest.raises(CelltideError):
        STModel(PARK, 0.0, 10)
    with pytest.raises(CelltideError):
        STModel(PARK, 1.0, 0)
    dips = SinusoidModel(10.0, ((PI / 12, 20.0, 0.0),))
    with pytest.raises(CelltideError, match="non-positive"):
        STModel(dips, 1.0, 5)


def test_generate_deterministic_and_seed_sensitive():
    m = STModel(PARK, 1.3, 50)
    a, b = generate(m, 48, 42), generate(m, 48, 42)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, generate(m, 48, 43).values)
    assert np.all(a.values > 0) and np.all(np.isfinite(a.values))


def test_generate_draw_order_pinned():
    m = STModel(PARK, 1.3, 3)
    gen = generate(m, 4, 7)
    z = np.random.Generator(np.random.PCG64(7)).standard_normal(12)
    mu = mu_of_t(mean_profile(m, np.arange(4)), 1.3)
    expect = np.exp(np.repeat(mu, 3) + 1.3 * z).reshape(4, 3)
    np.testing.assert_array_equal(gen.values, expect)


def test_generate_noiseless_limit():
    m = STModel(PARK, 1e-9, 5)
    gen = generate(m, 30, 1)
    prof = mean_profile(m, np.arange(30))
    np.testing.assert_allclose(gen.values, np.repeat(prof[:, None], 5, axis=1), rtol=1e-6)
    assert validate(gen).nrmse_mean_profile < 1e-6


def test_generate_errors():
    m = STModel(PARK, 1.0, 2)
    with pytest.raises(CelltideError):
        generate(m, 0, 1)
    with pytest.raises(CelltideError):
        generate(m, 5, -1)
    with pytest.raises(CelltideError):
        generate(m, 5, 2 ** 64)


def test_park_hourly_means_within_clt_bound():
    sigma, n = 1.3, 10_000
    m = STModel(PARK, sigma, n)
    gen = generate(m, 504, 2024)
    prof = mean_profile(m, np.arange(504))
    bound = 3 * prof * math.sqrt(math.expm1(sigma ** 2) / n)
    inside = np.abs(gen.values.mean(axis=1) - prof) <= bound
    assert inside.mean() >= 0.99


def test_log_marginal_moments():
    sigma, n = 2.8, 20_000
    m = STModel(REFERENCE_MODELS["cbd"], sigma, 100)
    gen = generate(m, 6, 5)
    mu = mu_of_t(mean_profile(m, np.arange(6)), sigma)
    logs = np.log(gen.values)
    gen_big = generate(STModel(REFERENCE_MODELS["cbd"], sigma, n), 3, 8)
    logs_big = np.log(gen_big.values)
    mu_big = mu_of_t(mean_profile(gen_big.model, np.arange(3)), sigma)
    for t in range(3):
        assert abs(logs_big[t].mean() - mu_big[t]) < 4 * sigma / math.sqrt(n)
        assert abs(logs_big[t].std() - sigma) < 4 * sigma / math.sqrt(2 * n)
    assert logs.shape == (6, 100) and np.isfinite(mu).all()


CAMPUS_HEAVY_TAIL = pytest.mark.xfail(
    strict=True,
    reason="sigma=3.6 gives a per-hour relative std of the station mean of "
           "sqrt((e^12.96 - 1)/1e4) ~ 6.5 at N=1e4; the pi/4 line drowns in noise")


@pytest.mark.parametrize("region", ["park", pytest.param("campus", marks=CAMPUS_HEAVY_TAIL), "cbd"])
def test_generated_frequencies_match_driver(region):
    model = REFERENCE_MODELS[region]
    st_model = STModel(model, SIGMA_PRESETS[region], 10_000)
    rep = validate(generate(st_model, 504, 99))
    assert rep.dominant_frequencies.frequencies == model.omegas


@pytest.mark.parametrize("region", ["park", "campus", "cbd"])
def test_generated_frequencies_match_driver_moderate_sigma(region):
    # sigma = 1.3 keeps the CLT bound (~2% per hour) for every driving model
    model = REFERENCE_MODELS[region]
    rep = validate(generate(STModel(model, 1.3, 10_000), 504, 99))
    assert rep.dominant_frequencies.frequencies == model.omegas


def test_csv_and_dataset_export():
    gen = generate(STModel(PARK, 1.3, 3), 5, 1)
    lines = gen.to_csv().splitlines()
    assert lines[0] == "hour,station_index,volume" and len(lines) == 16
    assert lines[1].startswith("0,0,")
    ds = gen.to_dataset()
    assert ds.hours == 5 and len(ds.stations) == 3
    np.testing.assert_array_equal(ds.volumes, gen.values)
