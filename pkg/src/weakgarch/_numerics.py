"""Cancellation-free building blocks for the aggregation formulas.

Persistence values sit very close to one at fine steps, so the naive forms of
``1 - lam**n`` and ``n (1 - lam) - (1 - lam**n)`` lose most of their digits.
"""
import math

import numpy as np


def one_minus_pow(lam: float, n: float) -> float:
    """1 - lam**n."""
    return -math.expm1(n * math.log(lam))


def ramp(lam: float, n: int) -> float:
    """n (1 - lam) - (1 - lam**n) for integer n >= 1.

    Uses the identity n(1-lam) - (1-lam^n) = (1-lam) * sum_{j<n} (1 - lam^j).
    """
    return (1.0 - lam) * sum_one_minus_pow(lam, n)


def phi(x: float) -> float:
    """x - (1 - exp(-x)), the continuous analogue of :func:`ramp`."""
    if x < 0.1:
        # alternating series x^2/2 - x^3/6 + ...; 20 terms is plenty at x < 0.1
        term = x * x / 2.0
        total = term
        for k in range(3, 23):
            term *= -x / k
            total += term
        return total
    return x + math.expm1(-x)


def smaller_root(m_minus_2: float) -> tuple:
    """Root x in (0, 1) of x**2 - m x + 1 = 0 and its complement 1 - x.

    Takes m - 2 > 0 rather than m: near m = 2 the root approaches one and
    both the discriminant and 1 - x would otherwise be lost to cancellation.
    """
    r = math.sqrt(m_minus_2 * (4.0 + m_minus_2))
    s = 2.0 + m_minus_2 + r
    return 2.0 / s, (m_minus_2 + r) / s


def sum_one_minus_pow(lam: float, n: int, power: int = 1) -> float:
    """sum_{j<n} (1 - lam**(power j))."""
    if n == 1:
        return 0.0
    j = np.arange(1, n, dtype=float)
    return float(np.sum(-np.expm1(power * j * math.log(lam))))
