"""Temporal aggregation of weak GARCH(1,1) and its numerical inverse.

Going from a fine step ``delta`` to a coarse step ``Delta = n * delta`` is
exact and closed-form (Drost & Nijman, 1993). Going the other way needs a
one-dimensional root search on the fine-step ARCH coefficient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._numerics import one_minus_pow, ramp, smaller_root, sum_one_minus_pow
from .errors import (
    ConvergenceFailure,
    DegenerateAlpha,
    KurtosisOutOfRange,
    NoSolutionInBracket,
    NotIntegerMultiple,
    NoValidBetaRoot,
)
from .params import DiscreteGarchParams, validate_discrete, validate_step

ALPHA_EDGE = 1e-14
RESIDUAL_TOL = 1e-12
MAX_ITER = 200
EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class AggregationResult:
    params: DiscreteGarchParams
    kurtosis: float
    c_factor: Optional[float] = None


def frequency_ratio(fine_delta: float, coarse_delta: float, rtol: float = 1e-9) -> int:
    """Integer n with coarse = n * fine, or NotIntegerMultiple."""
    fine_delta = validate_step(fine_delta)
    coarse_delta = validate_step(coarse_delta)
    ratio = coarse_delta / fine_delta
    n = round(ratio)
    if n < 1 or abs(ratio - n) > rtol * max(n, 1):
        raise NotIntegerMultiple(f"{coarse_delta!r} / {fine_delta!r} = {ratio!r} is not a positive integer")
    return int(n)


def _check_kappa(kappa: float, alpha: float) -> float:
    kappa = float(kappa)
    if not math.isfinite(kappa):
        raise KurtosisOutOfRange("kurtosis must be finite")
    if alpha > 0.0 and kappa <= 3.0:
        raise KurtosisOutOfRange(f"kurtosis must exceed 3 when alpha > 0, got {kappa}")
    return kappa


def aggregated_kurtosis(fine: DiscreteGarchParams, fine_kappa: float, n: int) -> float:
    """Unconditional kurtosis of n-step sums of the fine-step residuals."""
    a, b, lam = fine.alpha, fine.beta, fine.lam
    k = fine_kappa
    out = 3.0 + (k - 3.0) / n
    if a == 0.0 or n == 1:
        return out
    num = ramp(lam, n) * a * (1.0 - b * lam)
    den = n * n * (1.0 - lam) ** 2 * (1.0 - lam * lam + a * a)
    return out + 6.0 * (k - 1.0) * num / den


def _c_minus_one(alpha: float, lam: float, kappa: float, n: int) -> float:
    # c - 1 written as a sum of non-negative terms over a positive
    # denominator; c itself tends to 1 as the step shrinks and c * L - 1
    # would otherwise cancel to a handful of digits
    oml = 1.0 - lam
    one_m_l2 = oml * (1.0 + lam)
    one_m_bl = one_m_l2 + alpha * lam  # 1 - beta * lam
    excess = (
        n * oml * (alpha * alpha + alpha * oml + oml)
        + alpha * one_m_bl * sum_one_minus_pow(lam, n, power=2)
        + 2.0 * n * (n - 1) * oml * (one_m_l2 + alpha * alpha) / ((kappa - 1.0) * (1.0 + lam))
        + 4.0 * ramp(lam, n) * alpha * one_m_bl / one_m_l2
    )
    base = alpha * one_m_bl * one_minus_pow(lam, 2 * n) / one_m_l2
    return excess / base


def c_factor(fine: DiscreteGarchParams, fine_kappa: float, n: int) -> float:
    """The c scalar linking fine-step parameters to the n-step beta."""
    if fine.alpha == 0.0:
        raise DegenerateAlpha("c is undefined for alpha = 0")
    if n < 1:
        raise NotIntegerMultiple(f"n must be >= 1, got {n}")
    return 1.0 + _c_minus_one(fine.alpha, fine.lam, fine_kappa, n)


def beta_from_c(c_minus_1: float, big_lam: float) -> tuple:
    """Solve beta / (1 + beta**2) = (c L - 1) / (c (1 + L**2) - 2).

    Returns (beta, 1 - beta) for the root in [0, 1). The relation is the
    quadratic x**2 - m x + 1 with m - 2 = c (1 - L)**2 / (c L - 1).
    """
    one_m_L = 1.0 - big_lam
    denom = c_minus_1 * big_lam - one_m_L
    c = 1.0 + c_minus_1
    if not (c > 0.0 and denom > 0.0):
        raise NoValidBetaRoot(f"c * lambda = {c * big_lam} must exceed 1")
    return smaller_root(c * one_m_L * one_m_L / denom)


def aggregate(
    fine: DiscreteGarchParams, fine_kappa: float, coarse_delta: float
) -> AggregationResult:
    """Parameters and kurtosis of the same process sampled every ``coarse_delta``."""
    validate_discrete(fine)
    fine_kappa = _check_kappa(fine_kappa, fine.alpha)
    n = frequency_ratio(fine.delta, coarse_delta)
    if n == 1:
        c = c_factor(fine, fine_kappa, 1) if fine.alpha > 0 else None
        return AggregationResult(fine, fine_kappa, c)

    lam = fine.lam
    big_lam = lam**n
    omega = fine.omega * one_minus_pow(lam, n) / (1.0 - lam)
    kappa = aggregated_kurtosis(fine, fine_kappa, n)

    if fine.alpha == 0.0:
        coarse = DiscreteGarchParams(coarse_delta, omega, 0.0, big_lam)
        return AggregationResult(validate_discrete(coarse), kappa, None)

    cm1 = _c_minus_one(fine.alpha, lam, fine_kappa, n)
    beta, one_m_beta = beta_from_c(cm1, big_lam)
    alpha = one_m_beta - (1.0 - big_lam)
    if alpha < 0.0:
        raise NoValidBetaRoot(f"aggregated beta {beta} exceeds persistence {big_lam}")
    coarse = DiscreteGarchParams(float(coarse_delta), omega, alpha, beta)
    return AggregationResult(validate_discrete(coarse), kappa, 1.0 + cm1)


def _fine_kappa(alpha: float, lam: float, n: int, coarse_kappa: float) -> float:
    # the kurtosis relation is affine in the fine kurtosis; this is its inverse
    beta = lam - alpha
    six_nq = 6.0 * ramp(lam, n) * alpha * (1.0 - beta * lam) / (
        n * (1.0 - lam) ** 2 * (1.0 - lam * lam + alpha * alpha)
    )
    return 1.0 + (n * (coarse_kappa - 3.0) + 2.0) / (1.0 + six_nq)


def _residual_terms(alpha, lam, n, coarse, coarse_kappa):
    k = _fine_kappa(alpha, lam, n, coarse_kappa)
    c = 1.0 + _c_minus_one(alpha, lam, k, n)
    big_lam = coarse.lam
    one_m_bL = (1.0 - big_lam) * (1.0 + big_lam) + coarse.alpha * big_lam
    return (1.0 - coarse.beta) ** 2, c * coarse.alpha * one_m_bL


def disaggregation_residual(
    alpha: float, lam: float, n: int, coarse: DiscreteGarchParams, coarse_kappa: float
) -> float:
    """Mismatch in the beta relation for a trial fine-step alpha.

    The relation B / (1 + B^2) = (c L - 1) / (c (1 + L^2) - 2) between the
    coarse beta B and persistence L rearranges to (1 - B)^2 = c A (1 - B L),
    A = L - B the coarse alpha. c depends on the trial alpha directly and
    through the fine kurtosis, which the kurtosis relation pins down for each
    trial alpha. Returns (1 - B)^2 - c A (1 - B L).
    """
    lhs, rhs = _residual_terms(alpha, lam, n, coarse, coarse_kappa)
    return lhs - rhs


def disaggregate(
    coarse: DiscreteGarchParams, coarse_kappa: float, fine_delta: float
) -> AggregationResult:
    """Fine-step parameters whose aggregate over ``coarse.delta`` is ``coarse``."""
    validate_discrete(coarse)
    coarse_kappa = _check_kappa(coarse_kappa, coarse.alpha)
    n = frequency_ratio(fine_delta, coarse.delta)
    if n == 1:
        c = c_factor(coarse, coarse_kappa, 1) if coarse.alpha > 0 else None
        return AggregationResult(coarse, coarse_kappa, c)

    fine_delta = float(fine_delta)
    big_lam = coarse.lam
    lam = math.exp(math.log(big_lam) / n)
    omega = coarse.omega * one_minus_pow(big_lam, 1.0 / n) / (1.0 - big_lam)

    if coarse.alpha == 0.0:
        fine = DiscreteGarchParams(fine_delta, omega, 0.0, lam)
        return AggregationResult(validate_discrete(fine), 3.0 + n * (coarse_kappa - 3.0), None)

    def f(a):
        return disaggregation_residual(a, lam, n, coarse, coarse_kappa)

    lo, hi = ALPHA_EDGE, lam - ALPHA_EDGE
    f_lo, f_hi = f(lo), f(hi)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or f_lo * f_hi > 0.0:
        raise NoSolutionInBracket(
            f"no fine-step alpha in ({lo}, {hi}) reproduces the coarse parameters"
        )
    try:
        alpha, info = brentq(f, lo, hi, xtol=1e-300, rtol=4 * EPS, maxiter=MAX_ITER, full_output=True)
    except RuntimeError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    if not info.converged:
        raise ConvergenceFailure(f"root finder stopped after {info.iterations} iterations")
    lhs, rhs = _residual_terms(alpha, lam, n, coarse, coarse_kappa)
    if abs(lhs - rhs) > RESIDUAL_TOL * max(abs(lhs), abs(rhs), 1e-300):
        raise ConvergenceFailure(f"relative residual {abs(lhs - rhs)} above tolerance at alpha = {alpha}")

    kappa = _fine_kappa(alpha, lam, n, coarse_kappa)
    if kappa <= 3.0:
        raise NoSolutionInBracket(
            f"the only fine-step alpha ({alpha}) needs kurtosis {kappa} <= 3"
        )
    fine = DiscreteGarchParams(fine_delta, omega, alpha, lam - alpha)
    c = c_factor(fine, kappa, n)
    return AggregationResult(validate_discrete(fine), kappa, c)
