import csv
import math
import warnings

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from strategies import BASELINE, as_vector, continuous_params
from weakgarch.aggregation import aggregate
from weakgarch.errors import BetaQuadraticInfeasible, InconsistentInput, KurtosisOutOfRange
from weakgarch.limit import (
    CONVERGENCE_CSV_HEADER,
    c_limit,
    consistency_residual,
    continuous_to_discrete,
    convergence_table,
    discrete_kurtosis,
    discrete_to_continuous,
    kappa_limit,
    write_convergence_csv,
)
from weakgarch.params import ContinuousParams, DiscreteGarchParams

# 50-digit evaluations of the discretization displays at the smile parameters
ORACLE_D1 = dict(omega=0.0043893517949357391818, alpha=0.057183263680595876107,
                 beta=0.89404616082011813298, kappa=3.7376547004284054549, c=1.312676636391174505)
ORACLE_DAILY = dict(omega=0.000017855371432352405106, alpha=0.006084371239198701426,
                    beta=0.99371723574488627185, kappa=3.7499503992857741214, c=1.0011906730395361722)
ALPHA_RATE_2_16 = 0.099785352705247990529
SWEEP = [2.0**-k for k in range(4, 17)]


def test_unit_step_closed_forms():
    p, k = continuous_to_discrete(BASELINE, 1.0)
    assert p.lam == pytest.approx(math.exp(-0.05), rel=1e-15)
    assert p.lam == pytest.approx(0.951229, abs=5e-7)
    assert p.omega == pytest.approx(0.0043893, abs=1e-7)
    o = ORACLE_D1
    assert as_vector(p, k) == pytest.approx([o["omega"], o["alpha"], o["beta"], o["kappa"]], rel=1e-13)
    assert c_limit(BASELINE, 1.0) == pytest.approx(o["c"], rel=1e-14)


def test_daily_step_against_oracle():
    p, k = continuous_to_discrete(BASELINE, 1 / 252)
    o = ORACLE_DAILY
    assert as_vector(p, k) == pytest.approx([o["omega"], o["alpha"], o["beta"], o["kappa"]], rel=1e-13)
    assert c_limit(BASELINE, 1 / 252) == pytest.approx(o["c"], rel=1e-14)


def test_zero_alpha_is_deterministic_variance():
    c = ContinuousParams(0.02, 0.3, 0.0)
    p, k = continuous_to_discrete(c, 0.5)
    assert p.alpha == 0.0 and k == 3.0
    assert p.beta == pytest.approx(math.exp(-0.15), rel=1e-15)


def test_kappa_limit_values(baseline):
    assert kappa_limit(baseline) == pytest.approx(3.75, rel=1e-15)
    assert kappa_limit(ContinuousParams(1.0, 0.05, 0.0)) == 3.0
    ks = [kappa_limit(ContinuousParams(1.0, 0.05, a * math.sqrt(0.05))) for a in (0.9, 0.99, 0.999)]
    assert ks[0] < ks[1] < ks[2] and ks[2] > 1000


@pytest.mark.parametrize("n", [2, 3, 5, 10])
@pytest.mark.parametrize("delta", [1 / 1000, 1 / 504, 1 / 252])
def test_discretization_commutes_with_aggregation(n, delta):
    fine, k = continuous_to_discrete(BASELINE, delta)
    agg = aggregate(fine, k, n * delta)
    direct, kd = continuous_to_discrete(BASELINE, n * delta)
    assert as_vector(agg.params, agg.kurtosis) == pytest.approx(as_vector(direct, kd), abs=1e-12, rel=1e-12)


@given(continuous_params(), st.sampled_from([1 / 252, 1 / 52, 1 / 12, 1.0]), st.integers(2, 5))
def test_commutation_property(c, delta, n):
    assume(c.alpha**2 > 1e-8 * c.theta)
    assume(c.theta * n * delta < 2.3)
    fine, k = continuous_to_discrete(c, delta)
    agg = aggregate(fine, k, n * delta)
    direct, kd = continuous_to_discrete(c, n * delta)
    assert as_vector(agg.params, agg.kurtosis) == pytest.approx(as_vector(direct, kd), rel=1e-9, abs=1e-12)


@given(continuous_params(), st.floats(1e-4, 2.3))
def test_discrete_region_is_valid(c, theta_delta):
    # c exp(-theta delta) > 1 holds for every alpha^2 < theta only while
    # theta delta is below about 2.368
    delta = theta_delta / c.theta
    p, k = continuous_to_discrete(c, delta)
    assert 0.0 < p.beta < 1.0
    assert p.alpha >= 0.0
    if c.alpha**2 > 1e-12 * c.theta:
        assert p.alpha > 0.0
        assert k > 3.0


def test_beta_quadratic_infeasible_at_very_coarse_steps(baseline):
    # at the smile parameters c exp(-theta delta) drops through 1 near theta delta = 5.655
    continuous_to_discrete(baseline, 5.6 / 0.05)
    with pytest.raises(BetaQuadraticInfeasible):
        continuous_to_discrete(baseline, 5.7 / 0.05)
    with pytest.raises(BetaQuadraticInfeasible):
        continuous_to_discrete(ContinuousParams(1.0, 1.0, 0.875), 3.0)


def test_kurtosis_display_limits(baseline):
    assert discrete_kurtosis(baseline, 1e-9) == pytest.approx(3.75, rel=1e-8)
    assert discrete_kurtosis(baseline, 1e6) == pytest.approx(3.0, abs=1e-4)
    # the simplified display equals the printed one with kappa - 1 over alpha^2 + 2 theta
    th, a2, d = 0.05, 0.01, 0.3
    kap = 3 * th / (th - a2)
    printed = 3 + 6 * (kap - 1) * a2 * (th * d - (1 - math.exp(-th * d))) / (th**2 * d**2 * (a2 + 2 * th))
    assert discrete_kurtosis(baseline, d) == pytest.approx(printed, rel=1e-12)


@pytest.mark.parametrize("delta", [1 / 252, 1 / 12, 1.0, 7.0])
def test_round_trip_recovers_continuous(delta, baseline):
    p, k = continuous_to_discrete(baseline, delta)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        c = discrete_to_continuous(p, k)
    assert [c.omega, c.theta, c.alpha] == pytest.approx([0.0045, 0.05, 0.1], rel=1e-9)


@given(continuous_params(), st.sampled_from([1 / 252, 1 / 12, 1.0]))
def test_round_trip_property(c, delta):
    assume(c.theta * delta <= 2.3)  # beyond this the beta quadratic can lose its root
    p, k = continuous_to_discrete(c, delta)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = discrete_to_continuous(p, k)
    assert [back.omega, back.theta] == pytest.approx([c.omega, c.theta], rel=1e-9)
    assert back.alpha == pytest.approx(c.alpha, rel=1e-7, abs=1e-9 * math.sqrt(c.theta))
    q, kq = continuous_to_discrete(back, delta)
    assert as_vector(q, kq) == pytest.approx(as_vector(p, k), rel=1e-9, abs=1e-15)


def test_theta_recovery_from_persistence():
    p = DiscreteGarchParams(1.0, 0.0043893, 0.05, 0.951229 - 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        c = discrete_to_continuous(p, 3.7)
    assert c.theta == pytest.approx(0.05, rel=1e-5)


def test_gaussian_kurtosis_forces_zero_alpha_with_warning():
    p, _ = continuous_to_discrete(BASELINE, 1 / 252)
    with pytest.warns(InconsistentInput):
        c = discrete_to_continuous(p, 3.0)
    assert c.alpha == 0.0


def test_off_manifold_input_warns():
    p, k = continuous_to_discrete(BASELINE, 1 / 252)
    with pytest.warns(InconsistentInput):
        discrete_to_continuous(p, k + 0.1)
    assert consistency_residual(BASELINE, p, k) < 1e-12


@pytest.mark.parametrize("kappa", [2.9, math.inf, math.nan])
def test_bad_kurtosis(kappa):
    p, _ = continuous_to_discrete(BASELINE, 1 / 252)
    with pytest.raises(KurtosisOutOfRange):
        discrete_to_continuous(p, kappa)


def test_convergence_rates_improve(baseline):
    rows = convergence_table(baseline, SWEEP)
    err_a = [abs(r.alpha_rate - 0.1) for r in rows]
    err_t = [abs(r.theta_rate - 0.05) for r in rows]
    err_w = [abs(r.omega_rate - 0.0045) for r in rows]
    for errs in (err_a, err_t, err_w):
        assert all(b < a for a, b in zip(errs, errs[1:]))
    assert rows[-1].alpha_rate == pytest.approx(ALPHA_RATE_2_16, rel=1e-12)
    assert abs(rows[-1].kappa_value - 3.75) < abs(rows[0].kappa_value - 3.75)
    assert rows[-1].kappa_value == pytest.approx(3.75, abs=1e-5)


def test_alpha_rate_error_is_first_order_in_sqrt_step(baseline):
    # alpha_rate = alpha - theta sqrt(delta) + O(delta)
    rows = convergence_table(baseline, SWEEP)
    for r in rows[-4:]:
        assert (0.1 - r.alpha_rate) / math.sqrt(r.delta) == pytest.approx(0.05, rel=0.15)


def test_zero_alpha_sweep_has_zero_alpha_rate():
    rows = convergence_table(ContinuousParams(0.0045, 0.05, 0.0), SWEEP)
    assert all(r.alpha_rate == 0.0 for r in rows)


def test_sweep_requires_decreasing_steps(baseline):
    with pytest.raises(ValueError):
        convergence_table(baseline, [0.1, 0.2])


def test_convergence_csv(tmp_path, baseline):
    path = tmp_path / "conv.csv"
    write_convergence_csv(convergence_table(baseline, SWEEP), path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CONVERGENCE_CSV_HEADER == ["delta", "omega_rate", "alpha_rate", "theta_rate", "kappa"]
    assert len(rows) == len(SWEEP) + 1
    assert np.isfinite(np.array(rows[1:], dtype=float)).all()
