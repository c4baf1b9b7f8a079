"""European options on simulated paths and Black-Scholes implied volatility."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import (
    HorizonMismatch,
    InvalidConfig,
    NoConvergence,
    PriceOutOfBounds,
)
from .params import ContinuousParams, KurtosisSpec
from .simulate import PathSet, Scheme, SimConfig, simulate

VOL_LO = 1e-4
VOL_HI = 5.0
PRICE_TOL = 1e-10
SMILE_CSV_HEADER = ["strike", "moneyness", "price", "price_se", "implied_vol", "iv_lo", "iv_hi"]
DEFAULT_MONEYNESS = tuple(np.round(np.linspace(0.7, 1.3, 13), 10))


@dataclass(frozen=True)
class OptionSpec:
    spot: float
    strike: float
    maturity: float
    rate: float = 0.0
    is_call: bool = True

    def __post_init__(self):
        for name in ("spot", "strike", "maturity"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise InvalidConfig(f"{name} must be finite and > 0, got {v!r}")
        if not math.isfinite(self.rate):
            raise InvalidConfig("rate must be finite")

    @property
    def discount(self) -> float:
        return math.exp(-self.rate * self.maturity)

    def bounds(self) -> tuple:
        """Static no-arbitrage (lower, upper) price bounds."""
        pv_k = self.strike * self.discount
        if self.is_call:
            return max(self.spot - pv_k, 0.0), self.spot
        return max(pv_k - self.spot, 0.0), pv_k


def bs_price(o: OptionSpec, sigma) -> float:
    """Black-Scholes value; ``sigma`` may be an array."""
    sigma = np.asarray(sigma, dtype=float)
    sd = sigma * math.sqrt(o.maturity)
    fwd = o.spot / o.discount
    with np.errstate(divide="ignore"):
        d1 = (math.log(fwd / o.strike) + 0.5 * sd * sd) / sd
    d2 = d1 - sd
    if o.is_call:
        out = o.discount * (fwd * ndtr(d1) - o.strike * ndtr(d2))
    else:
        out = o.discount * (o.strike * ndtr(-d2) - fwd * ndtr(-d1))
    # the difference of two terms of order spot can round a few ulp outside
    out = np.clip(out, *o.bounds())
    return float(out) if out.ndim == 0 else out


def implied_vol(o: OptionSpec, price: float) -> float:
    """Volatility in [1e-4, 5] reproducing ``price``.

    Prices at or below the 1e-4 value (but above intrinsic) return 1e-4.
    """
    lo_b, hi_b = o.bounds()
    price = float(price)
    if not (math.isfinite(price) and lo_b < price < hi_b):
        raise PriceOutOfBounds(f"price {price} outside the no-arbitrage band ({lo_b}, {hi_b})")
    f_lo = bs_price(o, VOL_LO) - price
    if f_lo >= 0.0:
        return VOL_LO
    f_hi = bs_price(o, VOL_HI) - price
    if f_hi < 0.0:
        raise NoConvergence(f"price {price} needs a volatility above {VOL_HI}")
    # brentq is bisection safeguarded with inverse quadratic steps
    sigma, info = brentq(
        lambda s: bs_price(o, s) - price, VOL_LO, VOL_HI, xtol=1e-15, rtol=4 * np.finfo(float).eps,
        maxiter=200, full_output=True, disp=False,
    )
    if not info.converged or abs(bs_price(o, sigma) - price) > PRICE_TOL * max(1.0, price):
        raise NoConvergence(f"implied volatility search stopped at {sigma}")
    return float(sigma)


def _check_horizon(paths: PathSet, o: OptionSpec) -> None:
    T = paths.config.horizon
    if abs(T - o.maturity) > 1e-12 * max(T, o.maturity):
        raise HorizonMismatch(f"paths end at {T}, option matures at {o.maturity}")


def payoffs(paths: PathSet, o: OptionSpec) -> np.ndarray:
    s_t = o.spot * np.exp(paths.terminal_log_prices)
    return np.maximum(s_t - o.strike, 0.0) if o.is_call else np.maximum(o.strike - s_t, 0.0)


def mc_price(paths: PathSet, o: OptionSpec) -> tuple:
    """Discounted mean payoff and its standard error.

    The paths should have been simulated with drift equal to ``o.rate``.
    """
    _check_horizon(paths, o)
    x = payoffs(paths, o) * o.discount
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def mc_price_conditional(paths: PathSet, o: OptionSpec) -> tuple:
    """Mixing estimator: average the Black-Scholes price given each variance path.

    Valid for the Euler scheme, whose price and variance shocks are
    independent, so log S_T given the variance path is normal with variance
    equal to the integrated variance. Much less noisy than :func:`mc_price`.
    """
    _check_horizon(paths, o)
    if Scheme(paths.config.scheme) is not Scheme.DIFFUSION_EULER:
        raise InvalidConfig("the conditional estimator needs independent price shocks")
    vol = np.sqrt(np.maximum(paths.integrated_variances, 0.0) / o.maturity)
    x = bs_price(o, np.maximum(vol, 1e-300))
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


@dataclass(frozen=True)
class SmileRow:
    strike: float
    moneyness: float
    price: float
    price_se: float
    implied_vol: float
    iv_lo: float
    iv_hi: float
    is_call: bool = True


@dataclass
class SmileResult:
    maturity: float
    rows: List[SmileRow] = field(default_factory=list)
    truncations: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def iv_at(self, moneyness: float) -> SmileRow:
        for r in self.rows:
            if math.isclose(r.moneyness, moneyness, rel_tol=1e-9):
                return r
        raise KeyError(moneyness)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SMILE_CSV_HEADER)
            for r in self.rows:
                w.writerow([repr(float(getattr(r, k))) for k in SMILE_CSV_HEADER])


def _iv_or_edge(o: OptionSpec, price: float) -> float:
    lo_b, hi_b = o.bounds()
    if price <= lo_b:
        return VOL_LO
    if price >= hi_b:
        return math.nan
    try:
        return implied_vol(o, price)
    except NoConvergence:
        return math.nan


def smile_from_paths(
    paths: PathSet,
    strikes: Sequence[float],
    o_template: OptionSpec,
    otm: bool = True,
    estimator=mc_price,
) -> SmileResult:
    """Price every strike on one shared set of paths.

    With ``otm`` the strikes below spot are priced as puts and the rest as
    calls; otherwise the template's option type is used throughout. The
    band (iv_lo, iv_hi) re-inverts the price one standard error either side.
    """
    out = SmileResult(maturity=o_template.maturity, truncations=paths.truncations)
    for k in strikes:
        is_call = (k >= o_template.spot) if otm else o_template.is_call
        o = replace(o_template, strike=float(k), is_call=is_call)
        price, se = estimator(paths, o)
        try:
            iv = implied_vol(o, price)
        except (PriceOutOfBounds, NoConvergence):
            iv = math.nan
        lo, hi = _iv_or_edge(o, price - se), _iv_or_edge(o, price + se)
        out.rows.append(SmileRow(float(k), float(k) / o.spot, price, se, iv, lo, hi, bool(is_call)))
    return out


def smile(
    c: ContinuousParams,
    k: KurtosisSpec,
    cfg: SimConfig,
    strikes: Optional[Sequence[float]],
    o_template: OptionSpec,
    otm: bool = True,
    threads: int = 1,
    estimator=mc_price,
) -> SmileResult:
    """Simulate once with drift equal to the rate and price a strike grid."""
    if strikes is None:
        strikes = [m * o_template.spot for m in DEFAULT_MONEYNESS]
    if any(not (s > 0.0) for s in strikes):
        raise InvalidConfig("strikes must be positive")
    if abs(cfg.horizon - o_template.maturity) > 1e-12 * max(cfg.horizon, o_template.maturity):
        raise HorizonMismatch(f"horizon {cfg.horizon} differs from maturity {o_template.maturity}")
    c = replace(c, mu=o_template.rate)
    paths = simulate(c, k, cfg, threads=threads)
    return smile_from_paths(paths, strikes, o_template, otm=otm, estimator=estimator)


def wing_steepness(res: SmileResult, lo: float = 0.8, hi: float = 1.2) -> tuple:
    """|iv(lo) - iv(hi)| and a standard error from the two iv bands."""
    a, b = res.iv_at(lo), res.iv_at(hi)
    se_a = 0.5 * (a.iv_hi - a.iv_lo)
    se_b = 0.5 * (b.iv_hi - b.iv_lo)
    return abs(a.implied_vol - b.implied_vol), math.hypot(se_a, se_b)


__all__ = [
    "OptionSpec",
    "SmileResult",
    "SmileRow",
    "bs_price",
    "implied_vol",
    "mc_price",
    "mc_price_conditional",
    "smile",
    "smile_from_paths",
    "wing_steepness",
]
