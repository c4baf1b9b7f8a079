"""Map between discrete weak-GARCH parameters and the diffusion limit.

``continuous_to_discrete`` is the exact discretization: the parameters it
returns at step ``Delta`` are the temporal aggregate of those at any finer
step ``Delta / n``. ``discrete_to_continuous`` inverts it from a single
sampling frequency plus the unconditional kurtosis.
"""
from __future__ import annotations

import csv
import math
import sys
import warnings
from dataclasses import dataclass
from typing import Iterable, List, Tuple

from ._numerics import phi, smaller_root
from .errors import BetaQuadraticInfeasible, InconsistentInput, KurtosisOutOfRange
from .params import (
    ContinuousParams,
    DiscreteGarchParams,
    validate_continuous,
    validate_discrete,
    validate_step,
)

CONSISTENCY_TOL = 1e-6
_TINY = sys.float_info.min
CONVERGENCE_CSV_HEADER = ["delta", "omega_rate", "alpha_rate", "theta_rate", "kappa"]


def kappa_limit(c: ContinuousParams) -> float:
    """Unconditional kurtosis of returns as the step goes to zero."""
    validate_continuous(c)
    return 3.0 / (1.0 - c.alpha**2 / c.theta)


def c_limit_minus_one(c: ContinuousParams, delta: float) -> float:
    # numerator minus denominator of the limiting c, expanded so every term
    # is non-negative (c -> 1 as delta -> 0)
    th, a2 = c.theta, c.alpha**2
    x = th * delta
    excess = delta**2 * th * (th - a2) + a2 / th * (2.0 * phi(x) + 0.5 * phi(2.0 * x))
    base = 0.5 * a2 / th * -math.expm1(-2.0 * x)
    return excess / base


def c_limit(c: ContinuousParams, delta: float) -> float:
    """The aggregation c-factor from an infinitely fine step up to ``delta``."""
    return 1.0 + c_limit_minus_one(c, delta)


def discrete_kurtosis(c: ContinuousParams, delta: float) -> float:
    """Unconditional kurtosis of ``delta``-step returns.

    With kappa = 3 theta / (theta - alpha^2) the factor (kappa - 1) / (alpha^2 +
    2 theta) collapses to 1 / (theta - alpha^2).
    """
    th, a2 = c.theta, c.alpha**2
    if a2 < _TINY:
        return 3.0
    return 3.0 + 6.0 * a2 * phi(th * delta) / (th * th * delta * delta * (th - a2))


def continuous_to_discrete(c: ContinuousParams, delta: float) -> Tuple[DiscreteGarchParams, float]:
    validate_continuous(c)
    delta = validate_step(delta)
    x = c.theta * delta
    lam = math.exp(-x)
    omega = c.long_run_variance * -math.expm1(-x)
    if c.alpha**2 < _TINY:
        # alpha^2 underflows; the variance is deterministic to double precision
        return DiscreteGarchParams(delta, omega, 0.0, lam), 3.0

    cm1 = c_limit_minus_one(c, delta)
    one_m_lam = -math.expm1(-x)
    denom = cm1 * lam - one_m_lam  # c exp(-theta delta) - 1
    if denom <= 0.0:
        raise BetaQuadraticInfeasible(
            f"c * exp(-theta delta) = {(1.0 + cm1) * lam} <= 1 at delta = {delta}"
        )
    beta, one_m_beta = smaller_root((1.0 + cm1) * one_m_lam**2 / denom)
    # for alpha -> 0 the difference can round a hair below zero
    p = DiscreteGarchParams(delta, omega, max(one_m_beta - one_m_lam, 0.0), beta)
    return validate_discrete(p), discrete_kurtosis(c, delta)


def _relerr(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def consistency_residual(c: ContinuousParams, p: DiscreteGarchParams, kappa: float) -> float:
    """Largest relative gap between (p, kappa) and the exact discretization of c."""
    q, k = continuous_to_discrete(c, p.delta)
    # alpha is (1 - beta) - (1 - lambda), so it is only resolved to a
    # fraction of 1 - lambda; a tiny alpha is judged on that scale
    scale = max(abs(q.alpha), abs(p.alpha), 1.0 - p.lam)
    return max(
        _relerr(q.omega, p.omega),
        abs(q.alpha - p.alpha) / scale,
        _relerr(q.beta, p.beta),
        _relerr(k, kappa),
    )


def discrete_to_continuous(p: DiscreteGarchParams, kappa: float, mu: float = 0.0) -> ContinuousParams:
    """Recover (omega, theta, alpha) from one frequency and its kurtosis.

    theta and omega follow from the persistence and the long-run variance.
    alpha comes from inverting the discrete kurtosis map, which is a
    monotone Mobius function of alpha^2 and so inverts in closed form.
    Emits :class:`InconsistentInput` when the discrete alpha and beta are not
    the ones the recovered diffusion would produce.
    """
    validate_discrete(p)
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 3.0:
        raise KurtosisOutOfRange(f"kurtosis must be finite and >= 3, got {kappa}")
    delta = p.delta
    theta = -math.log(p.lam) / delta
    omega = p.omega * theta / (1.0 - p.lam)
    g = 6.0 * phi(theta * delta) / (theta * delta) ** 2
    excess = kappa - 3.0
    alpha = math.sqrt(excess * theta / (g + excess))
    c = validate_continuous(ContinuousParams(omega, theta, alpha, mu))

    resid = consistency_residual(c, p, kappa)
    if resid > CONSISTENCY_TOL:
        warnings.warn(
            f"discrete parameters are off the weak-GARCH manifold (relative residual {resid:.3g})",
            InconsistentInput,
            stacklevel=2,
        )
    return c


@dataclass(frozen=True)
class ConvergenceRow:
    delta: float
    omega_rate: float
    alpha_rate: float
    theta_rate: float
    kappa_value: float


def convergence_table(c: ContinuousParams, deltas: Iterable[float]) -> List[ConvergenceRow]:
    deltas = [validate_step(d) for d in deltas]
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    rows = []
    for d in deltas:
        p, k = continuous_to_discrete(c, d)
        rows.append(
            ConvergenceRow(
                delta=d,
                omega_rate=p.omega / d,
                alpha_rate=p.alpha / math.sqrt(d),
                theta_rate=-math.expm1(-c.theta * d) / d,
                kappa_value=k,
            )
        )
    return rows


def write_convergence_csv(rows: List[ConvergenceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONVERGENCE_CSV_HEADER)
        for r in rows:
            w.writerow([repr(r.delta), repr(r.omega_rate), repr(r.alpha_rate), repr(r.theta_rate), repr(r.kappa_value)])
