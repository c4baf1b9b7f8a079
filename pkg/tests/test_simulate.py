import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from strategies import BASELINE
from weakgarch.errors import (
    InsufficientData,
    InsufficientPaths,
    InvalidConfig,
    InvalidKurtosisPath,
    NegativeVarianceExplosion,
)
from weakgarch.limit import continuous_to_discrete
from weakgarch.params import ContinuousParams, KurtosisSpec
from weakgarch.simulate import (
    BLOCK,
    Scheme,
    SimConfig,
    blp_orthogonality_check,
    effective_garch_params,
    innovation_pair,
    kappa_schedule,
    kurtotic_transform,
    matched_innovation_kurtosis,
    read_binary,
    sample_kurtosis,
    scheme_kurtosis,
    simulate,
    student_dof,
)

EULER, GARCH = Scheme.DIFFUSION_EULER, Scheme.GARCH_CONSISTENT
FLAT = ContinuousParams(0.0045, 0.05, 0.0)


def cfg(**kw):
    base = dict(n_paths=2000, n_steps=50, horizon=1.0, seed=1)
    base.update(kw)
    return SimConfig(**base)


# ------------------------------------------------------------- innovations


def test_eta_definition():
    xi = np.array([-2.0, 0.0, 1.0, 3.0])
    pair = innovation_pair(xi)
    assert np.array_equal(pair.eta, (xi * xi - 1.0) / math.sqrt(2.0))


def test_eta_moments():
    xi = np.random.default_rng(0).standard_normal(10**6)
    eta = innovation_pair(xi).eta
    n = xi.size
    assert abs(eta.mean()) < 4 * eta.std() / math.sqrt(n)
    # var(eta) - 1 has standard error sqrt((E eta^4 - 1) / n); E eta^4 = 15
    assert abs(eta.var() - 1.0) < 4 * math.sqrt(14.0 / n)
    assert abs(np.corrcoef(xi, eta)[0, 1]) < 4 / math.sqrt(n)


def test_transform_is_identity_at_three():
    xi = np.random.default_rng(1).standard_normal(1000)
    assert np.array_equal(kurtotic_transform(xi, 3.0), xi)


@given(st.floats(3.0, 40.0))
def test_transform_fixes_median(kappa):
    assert kurtotic_transform(0.0, kappa) == 0.0


@given(st.floats(3.01, 40.0), st.lists(st.floats(-12, 12), min_size=2, max_size=50))
def test_transform_is_monotone_and_odd(kappa, xs):
    x = np.sort(np.array(xs))
    y = kurtotic_transform(x, kappa)
    assert np.all(np.diff(y) >= 0)
    assert np.allclose(kurtotic_transform(-x, kappa), -y, rtol=1e-12, atol=0)


@pytest.mark.parametrize("kappa", [3.5, 4.0, 7.0, 20.0])
def test_table_matches_exact_quantile(kappa):
    x = np.linspace(-10, 10, 20001)
    approx = kurtotic_transform(x, kappa)
    exact = kurtotic_transform(x, kappa, exact=True)
    assert np.max(np.abs(approx - exact) / np.maximum(1.0, np.abs(exact))) < 1e-9


@pytest.mark.parametrize("kappa", [4.0, 7.0])
def test_transform_moments_by_quadrature(kappa):
    def moment(p):
        f = lambda x: kurtotic_transform(x, kappa, exact=True) ** p * stats.norm.pdf(x)
        return integrate.quad(f, -37.0, 37.0, limit=400, epsabs=1e-13, points=[0.0])[0]

    assert moment(2) == pytest.approx(1.0, rel=1e-8)
    assert moment(4) == pytest.approx(kappa, rel=1e-6)


@pytest.fixture(scope="module")
def kurtotic_draws():
    xi = np.random.default_rng(2).standard_normal(10**7)
    return kurtotic_transform(xi, 7.0)


def test_transform_location_and_scale_monte_carlo(kurtotic_draws):
    y = kurtotic_draws
    assert student_dof(7.0) == 5.5
    assert abs(y.mean()) < 4 / math.sqrt(y.size)
    assert y.var() == pytest.approx(1.0, abs=0.01)


def test_transform_excess_kurtosis_monte_carlo(kurtotic_draws):
    # with 5.5 degrees of freedom the eighth moment is infinite, so this
    # estimate converges slowly and is skewed low; see the quadrature test
    # for the exact value
    y = kurtotic_draws
    assert abs(np.mean(y**4) / y.var() ** 2 - 3.0 - 4.0) < 0.2


def test_transform_rejects_sub_gaussian():
    with pytest.raises(InvalidConfig):
        kurtotic_transform(0.5, 2.5)


# ------------------------------------------------------------- configuration


@pytest.mark.parametrize(
    "kw",
    [dict(n_paths=0), dict(n_steps=0), dict(horizon=0.0), dict(v0=0.0), dict(seed=-1), dict(seed=2**64),
     dict(n_paths=1.5), dict(burn_in=-1)],
)
def test_invalid_config(kw):
    with pytest.raises(InvalidConfig):
        simulate(BASELINE, KurtosisSpec.nelson(), cfg(**kw))


def test_config_dict_round_trip():
    c = cfg(scheme=GARCH, burn_in=3)
    assert SimConfig.from_dict(c.to_dict()) == c
    with pytest.raises(InvalidConfig):
        SimConfig.from_dict({**c.to_dict(), "extra": 1})
    with pytest.raises(InvalidConfig):
        SimConfig.from_dict({**c.to_dict(), "scheme": "Exact"})


def test_kappa_schedule_uses_time_to_maturity():
    k = KurtosisSpec(kappa_a=7.0, kappa_b=-2.0)
    kap, clamped = kappa_schedule(k, cfg(n_steps=4, horizon=1.5))
    # tau at step starts: 1.5, 1.125, 0.75, 0.375
    assert kap == pytest.approx([4.0, 4.75, 5.5, 6.25])
    assert clamped == 0


def test_strict_mode_rejects_sub_gaussian_profile():
    k = KurtosisSpec(kappa_a=2.0, kappa_b=2.0)  # below 3 near maturity
    with pytest.raises(InvalidKurtosisPath):
        simulate(BASELINE, k, cfg(strict=True))
    ps = simulate(BASELINE, k, cfg())
    assert ps.kappa_clamped_steps > 0
    assert ps.kappa_path.min() == 3.0


# ------------------------------------------------------------- determinism


@pytest.mark.parametrize("scheme", [EULER, GARCH])
def test_bit_identical_across_threads(scheme):
    c = cfg(n_paths=3 * BLOCK + 17, n_steps=20, scheme=scheme, store_full_paths=True)
    k = KurtosisSpec(kappa_a=7.0, kappa_b=-2.0)
    a = simulate(BASELINE, k, c, threads=1)
    b = simulate(BASELINE, k, c, threads=3)
    c16 = simulate(BASELINE, k, c, threads=16)
    for other in (b, c16):
        assert np.array_equal(a.log_prices, other.log_prices)
        assert np.array_equal(a.variances, other.variances)
        assert np.array_equal(a.terminal_log_prices, other.terminal_log_prices)
        assert a.truncations == other.truncations


def test_paths_do_not_depend_on_path_count():
    small = simulate(BASELINE, KurtosisSpec.nelson(), cfg(n_paths=10))
    large = simulate(BASELINE, KurtosisSpec.nelson(), cfg(n_paths=BLOCK + 5))
    assert np.array_equal(small.terminal_log_prices, large.terminal_log_prices[:10])


def test_seed_changes_draws():
    a = simulate(BASELINE, KurtosisSpec.nelson(), cfg(seed=1))
    b = simulate(BASELINE, KurtosisSpec.nelson(), cfg(seed=2))
    assert not np.array_equal(a.terminal_log_prices, b.terminal_log_prices)


def test_full_paths_agree_with_terminal_values():
    ps = simulate(BASELINE, KurtosisSpec.nelson(), cfg(store_full_paths=True))
    assert np.array_equal(ps.log_prices[:, -1], ps.terminal_log_prices)
    assert np.array_equal(ps.variances[:, -1], ps.terminal_variances)
    assert np.all(ps.log_prices[:, 0] == 0.0)
    assert np.all(ps.variances >= 0.0)


# ------------------------------------------------------------- dynamics


@pytest.mark.parametrize("scheme", [EULER, GARCH])
def test_zero_alpha_stationary_start_is_constant(scheme):
    ps = simulate(FLAT, KurtosisSpec.constant(7.0), cfg(v0=FLAT.long_run_variance, scheme=scheme, store_full_paths=True))
    assert np.all(ps.variances == FLAT.long_run_variance)


def test_garch_scheme_at_gaussian_kurtosis_is_plain_garch():
    c = cfg(n_paths=500, n_steps=40, scheme=GARCH, store_full_paths=True, horizon=40 / 252)
    ps = simulate(BASELINE, KurtosisSpec.nelson(), c)
    p, _ = continuous_to_discrete(BASELINE, c.dt)
    e2 = ps.residuals() ** 2 / c.dt
    v = ps.variances
    expected = p.omega + p.alpha * e2 + p.beta * v[:, :-1]
    assert np.allclose(v[:, 1:], expected, rtol=1e-12, atol=0)


def test_effective_params_and_matched_kurtosis():
    p, disp = continuous_to_discrete(BASELINE, 1 / 12)
    assert effective_garch_params(p, 3.0) == p
    kt = matched_innovation_kurtosis(p, disp)
    assert kt > 3.0
    assert scheme_kurtosis(p, kt) == pytest.approx(disp, rel=1e-12)
    eff = effective_garch_params(p, kt)
    assert eff.lam == pytest.approx(p.lam, rel=1e-15)
    assert eff.alpha > p.alpha


def test_garch_scheme_never_truncates():
    ps = simulate(BASELINE, KurtosisSpec.constant(7.0), cfg(n_paths=4000, n_steps=250, scheme=GARCH))
    assert ps.truncations == 0


def test_explosive_variance_is_flagged():
    wild = ContinuousParams(1.0, 1.0, 0.99)
    with pytest.raises(NegativeVarianceExplosion):
        simulate(wild, KurtosisSpec.constant(60.0), cfg(n_steps=10, horizon=5.0, v0=1.0))


@pytest.mark.parametrize("scheme", [EULER, GARCH])
def test_stationary_mean_of_terminal_variance(scheme):
    ps = simulate(BASELINE, KurtosisSpec.nelson(), cfg(n_paths=20000, n_steps=250, scheme=scheme, seed=5))
    v = ps.terminal_variances
    assert abs(v.mean() - 0.09) < 3 * v.std(ddof=1) / math.sqrt(v.size)


def test_mean_variance_relaxes_exponentially():
    c = cfg(n_paths=20000, n_steps=400, v0=0.2, store_full_paths=True, seed=9)
    ps = simulate(BASELINE, KurtosisSpec.constant(5.0), c)
    for t in (0.25, 0.5, 1.0):
        col = ps.variances[:, round(t / c.dt)]
        target = 0.09 + (0.2 - 0.09) * math.exp(-0.05 * t)
        assert abs(col.mean() - target) < 3 * col.std(ddof=1) / math.sqrt(col.size)


def test_euler_price_is_a_martingale():
    ps = simulate(BASELINE, KurtosisSpec.constant(7.0), cfg(n_paths=40000, n_steps=200, seed=3))
    s = np.exp(ps.terminal_log_prices)
    assert abs(s.mean() - 1.0) < 4 * s.std(ddof=1) / math.sqrt(s.size)


def test_schemes_agree_at_gaussian_kurtosis():
    k = KurtosisSpec.nelson()
    a = simulate(BASELINE, k, cfg(n_paths=40000, n_steps=1000, seed=21)).terminal_variances
    b = simulate(BASELINE, k, cfg(n_paths=40000, n_steps=1000, seed=22, scheme=GARCH)).terminal_variances

    def mean_var_se(x):
        n = x.size
        m2 = x.var()
        m4 = np.mean((x - x.mean()) ** 4)
        return x.mean(), math.sqrt(m2 / n), m2, math.sqrt((m4 - m2 * m2) / n)

    ma, sma, va, sva = mean_var_se(a)
    mb, smb, vb, svb = mean_var_se(b)
    assert abs(ma - mb) < 4 * math.hypot(sma, smb)
    assert abs(va - vb) < 4 * math.hypot(sva, svb)


# ------------------------------------------------------------- diagnostics


def test_blp_needs_enough_paths():
    ps = simulate(BASELINE, KurtosisSpec.nelson(), cfg(n_paths=100, scheme=GARCH, store_full_paths=True))
    p, _ = continuous_to_discrete(BASELINE, ps.dt)
    with pytest.raises(InsufficientPaths):
        blp_orthogonality_check(ps, p)


def test_blp_moments_and_negative_control():
    c = cfg(n_paths=20000, n_steps=40, horizon=40 / 252, scheme=GARCH, store_full_paths=True, seed=4)
    ps = simulate(BASELINE, KurtosisSpec.nelson(), c)
    p, _ = continuous_to_discrete(BASELINE, c.dt)
    rep = blp_orthogonality_check(ps, p)
    assert len(rep.moments) == 15
    assert rep.passed, [(m.power, m.lag, m.z) for m in rep.failures()]
    bad = blp_orthogonality_check(ps, dataclasses.replace(p, beta=p.beta + 0.05))
    assert any(m.power == 2 for m in bad.failures())


def test_blp_flat_variance_moments_are_tiny():
    c = cfg(n_paths=10000, n_steps=20, scheme=GARCH, store_full_paths=True, seed=8)
    ps = simulate(FLAT, KurtosisSpec.nelson(), c)
    p, _ = continuous_to_discrete(FLAT, c.dt)
    rep = blp_orthogonality_check(ps, p)
    assert rep.passed
    assert all(m.se < 0.01 for m in rep.moments if m.power < 2)


def test_sample_kurtosis_needs_data():
    ps = simulate(FLAT, KurtosisSpec.nelson(), cfg(n_paths=100, store_full_paths=True))
    with pytest.raises(InsufficientData):
        sample_kurtosis(ps)


def test_gaussian_returns_have_kurtosis_three():
    ps = simulate(FLAT, KurtosisSpec.nelson(), cfg(n_paths=20000, n_steps=60, store_full_paths=True, seed=12))
    k, se = sample_kurtosis(ps)
    assert abs(k - 3.0) < 3 * se
    k10, se10 = sample_kurtosis(ps, aggregate=10)
    assert abs(k10 - 3.0) < 3 * se10


def test_jackknife_matches_brute_force():
    ps = simulate(BASELINE, KurtosisSpec.constant(6.0), cfg(n_paths=200, n_steps=5000, store_full_paths=True))
    k, se = sample_kurtosis(ps)
    r = ps.residuals()
    loo = np.array([
        np.mean(np.delete(r, i, 0) ** 4) / np.mean(np.delete(r, i, 0) ** 2) ** 2 for i in range(r.shape[0])
    ])
    n = loo.size
    assert se == pytest.approx(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)), rel=1e-8)
    assert k == pytest.approx(np.mean(r**4) / np.mean(r**2) ** 2, rel=1e-12)


# ------------------------------------------------------------- export


def test_terminal_csv_and_binary_round_trip(tmp_path):
    ps = simulate(BASELINE, KurtosisSpec.nelson(), cfg(n_paths=7, n_steps=5, store_full_paths=True))
    ps.write_terminal_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "path_id,log_S_T,V_T"
    assert len(lines) == 8
    assert float(lines[3].split(",")[1]) == ps.terminal_log_prices[2]

    ps.write_binary(tmp_path / "p.bin")
    raw = (tmp_path / "p.bin").read_bytes()
    assert raw[:4] == b"WGPS" and len(raw) == 16 + 7 * 6 * 8
    assert np.array_equal(read_binary(tmp_path / "p.bin"), ps.log_prices)
