"""Parameter types shared by every module.

All variance-type quantities are annualised: a discrete parameter set at
step ``delta`` describes the recursion

    h_k = omega + alpha * eps_k**2 / delta + beta * h_{k-1}

so ``omega / (1 - alpha - beta)`` is a long-run variance per year, directly
comparable across sampling frequencies.
"""
from __future__ import annotations

import math
from dataclasses import MISSING, asdict, dataclass, fields
from typing import Any, Mapping, Union

import numpy as np

from .errors import (
    InfiniteKurtosis,
    InvalidConfig,
    InvalidStep,
    KurtosisOutOfRange,
    NegativeCoefficient,
    NonPositiveOmega,
    NonPositiveParameter,
    StationarityViolation,
)

GAUSSIAN_KURTOSIS = 3.0


def validate_step(delta: float) -> float:
    delta = float(delta)
    if not math.isfinite(delta) or delta <= 0.0:
        raise InvalidStep(f"step length must be finite and > 0, got {delta!r}")
    return delta


@dataclass(frozen=True)
class DiscreteGarchParams:
    delta: float
    omega: float
    alpha: float
    beta: float

    @property
    def lam(self) -> float:
        """Persistence alpha + beta."""
        return self.alpha + self.beta

    @property
    def long_run_variance(self) -> float:
        return self.omega / (1.0 - self.lam)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "DiscreteGarchParams":
        return cls(**_exact_keys(cls, d))


@dataclass(frozen=True)
class ContinuousParams:
    """Coefficients of the limit SDE.

    dS/S = mu dt + sqrt(V) dB1
    dV   = (omega - theta V) dt + alpha sqrt(kappa_t - 1) V dB2
    """

    omega: float
    theta: float
    alpha: float
    mu: float = 0.0

    @property
    def long_run_variance(self) -> float:
        return self.omega / self.theta

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ContinuousParams":
        return cls(**_exact_keys(cls, d))


Implied = str  # the literal "implied"


@dataclass(frozen=True)
class KurtosisSpec:
    """Unconditional kurtosis plus an affine instantaneous-kurtosis profile.

    ``kappa`` is either an explicit unconditional kurtosis or ``"implied"``,
    meaning it is derived from the continuous parameters. The instantaneous
    kurtosis is ``kappa_a + kappa_b * tau`` with ``tau`` the time remaining to
    the horizon, floored at 3.
    """

    kappa: Union[float, Implied] = "implied"
    kappa_a: float = GAUSSIAN_KURTOSIS
    kappa_b: float = 0.0

    @classmethod
    def constant(cls, kappa_t: float) -> "KurtosisSpec":
        return cls(kappa_a=float(kappa_t), kappa_b=0.0)

    @classmethod
    def nelson(cls) -> "KurtosisSpec":
        """The kappa_t = 3 slice, i.e. Nelson's strong-GARCH diffusion."""
        return cls.constant(GAUSSIAN_KURTOSIS)

    def raw(self, tau):
        return self.kappa_a + self.kappa_b * np.asarray(tau, dtype=float)

    def instantaneous(self, tau):
        out = np.maximum(self.raw(tau), GAUSSIAN_KURTOSIS)
        return float(out) if out.ndim == 0 else out

    @property
    def is_constant(self) -> bool:
        return self.kappa_b == 0.0

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "kappa_a": self.kappa_a, "kappa_b": self.kappa_b}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "KurtosisSpec":
        spec = cls(**_exact_keys(cls, d))
        return validate_kurtosis_spec(spec)


def _exact_keys(cls, d: Mapping[str, Any]) -> dict:
    names = [f.name for f in fields(cls)]
    unknown = set(d) - set(names)
    if unknown:
        raise InvalidConfig(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    required = [f.name for f in fields(cls) if f.default is MISSING]
    missing = [n for n in required if n not in d]
    if missing:
        raise InvalidConfig(f"missing keys for {cls.__name__}: {missing}")
    out = {}
    for k, v in d.items():
        if k == "kappa" and v == "implied":
            out[k] = v
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise InvalidConfig(f"{cls.__name__}.{k} must be a number, got {v!r}")
        out[k] = float(v)
    return out


def validate_discrete(p: DiscreteGarchParams) -> DiscreteGarchParams:
    """Return ``p`` unchanged if it lies in the covariance-stationary region."""
    validate_step(p.delta)
    for name in ("omega", "alpha", "beta"):
        if not math.isfinite(getattr(p, name)):
            raise NonPositiveParameter(f"{name} must be finite")
    if p.omega <= 0.0:
        raise NonPositiveOmega(f"omega must be > 0, got {p.omega}")
    if p.alpha < 0.0 or p.beta < 0.0:
        raise NegativeCoefficient(f"alpha, beta must be >= 0, got {p.alpha}, {p.beta}")
    if p.lam >= 1.0:
        raise StationarityViolation(f"alpha + beta = {p.lam} >= 1")
    if p.lam <= 0.0:
        raise StationarityViolation("alpha + beta must be > 0")
    return p


def validate_continuous(c: ContinuousParams) -> ContinuousParams:
    for name in ("omega", "theta", "alpha", "mu"):
        if not math.isfinite(getattr(c, name)):
            raise NonPositiveParameter(f"{name} must be finite")
    if c.omega <= 0.0 or c.theta <= 0.0:
        raise NonPositiveParameter(f"omega and theta must be > 0, got {c.omega}, {c.theta}")
    if c.alpha < 0.0:
        raise NonPositiveParameter(f"alpha must be >= 0, got {c.alpha}")
    if c.alpha**2 >= c.theta:
        raise InfiniteKurtosis(f"alpha**2 = {c.alpha**2} >= theta = {c.theta}")
    return c


def validate_kurtosis_spec(k: KurtosisSpec) -> KurtosisSpec:
    if k.kappa != "implied":
        if isinstance(k.kappa, str):
            raise InvalidConfig(f"kappa must be a number or 'implied', got {k.kappa!r}")
        if not math.isfinite(k.kappa) or k.kappa < GAUSSIAN_KURTOSIS:
            raise KurtosisOutOfRange(f"unconditional kurtosis must be finite and >= 3, got {k.kappa}")
    if not (math.isfinite(k.kappa_a) and math.isfinite(k.kappa_b)):
        raise KurtosisOutOfRange("instantaneous kurtosis coefficients must be finite")
    return k
