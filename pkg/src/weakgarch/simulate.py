"""Monte Carlo paths for the weak-GARCH diffusion and its exact discretization.

Two engines share one driver:

* ``DiffusionEuler`` steps the limit SDE
  dV = (omega - theta V) dt + alpha sqrt(kappa_t - 1) V dB2 with full
  truncation, two independent normals per step.
* ``GarchConsistent`` runs the discrete recursion at step dt with the exact
  discretization parameters, one normal per step pushed through a kurtotic
  quantile transform.

Random numbers come from counter-based Philox streams, one per block of
``BLOCK`` paths, keyed by (seed, block index). A path's draws depend only on
the seed and its block, so results are identical for any thread count.
"""
from __future__ import annotations

import enum
import functools
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import special, stats
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.signal import lfilter

from .errors import (
    InsufficientData,
    InsufficientPaths,
    InvalidConfig,
    InvalidKurtosisPath,
    NegativeVarianceExplosion,
)
from .limit import continuous_to_discrete
from .params import (
    GAUSSIAN_KURTOSIS,
    ContinuousParams,
    DiscreteGarchParams,
    KurtosisSpec,
    validate_continuous,
    validate_kurtosis_spec,
)

BLOCK = 4096
TRUNCATION_LIMIT = 0.05
PATH_MAGIC = b"WGPS"
PATH_VERSION = 1

# quantile-map grid; beyond it the exact Student-t quantile is used
_GRID_HI, _GRID_H = 8.0, 0.01


class Scheme(str, enum.Enum):
    DIFFUSION_EULER = "DiffusionEuler"
    GARCH_CONSISTENT = "GarchConsistent"


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``burn_in`` steps are run before time zero with the kurtosis held at its
    value for the full horizon; nothing from them is stored. ``strict`` turns
    a kurtosis profile that dips below 3 into an error instead of a clamp.
    """

    n_paths: int
    n_steps: int
    horizon: float
    seed: int = 0
    scheme: Scheme = Scheme.DIFFUSION_EULER
    v0: float = 0.09
    store_full_paths: bool = False
    burn_in: int = 0
    strict: bool = False

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = Scheme(self.scheme).value
        return d

    @classmethod
    def from_dict(cls, d) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown keys for SimConfig: {sorted(unknown)}")
        try:
            d = dict(d)
            if "scheme" in d:
                d["scheme"] = Scheme(d["scheme"])
            return validate_config(cls(**d))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidConfig):
                raise
            raise InvalidConfig(str(exc)) from exc


def validate_config(cfg: SimConfig) -> SimConfig:
    for name in ("n_paths", "n_steps", "seed", "burn_in"):
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
            raise InvalidConfig(f"{name} must be an integer, got {v!r}")
    if cfg.n_paths < 1 or cfg.n_steps < 1:
        raise InvalidConfig("n_paths and n_steps must be >= 1")
    if cfg.burn_in < 0:
        raise InvalidConfig("burn_in must be >= 0")
    if not 0 <= cfg.seed < 2**64:
        raise InvalidConfig("seed must fit in an unsigned 64-bit integer")
    if not (math.isfinite(cfg.horizon) and cfg.horizon > 0.0):
        raise InvalidConfig(f"horizon must be > 0, got {cfg.horizon}")
    if not (math.isfinite(cfg.v0) and cfg.v0 > 0.0):
        raise InvalidConfig(f"v0 must be > 0, got {cfg.v0}")
    Scheme(cfg.scheme)
    return cfg


@dataclass
class PathSet:
    """Simulated log prices (relative to S0 = 1) and variances.

    ``integrated_variances`` is the left-point sum of V dt over each path,
    the variance the log price actually accumulated.
    """

    terminal_log_prices: np.ndarray
    terminal_variances: np.ndarray
    config: SimConfig
    mu: float
    log_prices: Optional[np.ndarray] = None
    variances: Optional[np.ndarray] = None
    integrated_variances: Optional[np.ndarray] = None
    truncations: int = 0
    kappa_clamped_steps: int = 0
    kappa_path: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_paths(self) -> int:
        return self.terminal_log_prices.shape[0]

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def has_full_paths(self) -> bool:
        return self.log_prices is not None

    def residuals(self) -> np.ndarray:
        """Per-step log-price increments net of the drift, paths x steps."""
        if self.log_prices is None:
            raise InvalidConfig("full paths were not stored")
        return np.diff(self.log_prices, axis=1) - self.mu * self.dt

    def write_terminal_csv(self, path) -> None:
        ids = np.arange(self.n_paths)
        with open(path, "w") as fh:
            fh.write("path_id,log_S_T,V_T\n")
            for i, x, v in zip(ids, self.terminal_log_prices, self.terminal_variances):
                fh.write(f"{i},{float(x)!r},{float(v)!r}\n")

    def write_binary(self, path, which: str = "log_prices") -> None:
        """Full paths as a 16-byte header plus row-major float64."""
        arr = getattr(self, which)
        if arr is None:
            raise InvalidConfig("full paths were not stored")
        n_paths, n_cols = arr.shape
        with open(path, "wb") as fh:
            fh.write(PATH_MAGIC + struct.pack("<III", PATH_VERSION, n_paths, n_cols - 1))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:4] != PATH_MAGIC:
            raise InvalidConfig(f"{path} is not a path file")
        _, n_paths, n_steps = struct.unpack("<III", head[4:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    return data.reshape(n_paths, n_steps + 1)


@dataclass(frozen=True)
class InnovationPair:
    xi: np.ndarray
    eta: np.ndarray


def innovation_pair(xi) -> InnovationPair:
    """Pair a normal draw with eta = (xi^2 - 1) / sqrt(2).

    eta has mean 0, variance 1 and zero correlation with xi.
    """
    xi = np.asarray(xi, dtype=float)
    return InnovationPair(xi, (xi * xi - 1.0) / math.sqrt(2.0))


def student_dof(kappa: float) -> float:
    """Degrees of freedom of the Student-t with kurtosis ``kappa``."""
    return 4.0 + 6.0 / (kappa - 3.0)


def _t_exact(xi, nu: float):
    # quantile of the unit-variance t at the normal cdf of xi, computed from
    # the lower tail and mirrored so both tails keep full precision
    scale = math.sqrt((nu - 2.0) / nu)
    a = np.abs(np.asarray(xi, dtype=float))
    p = special.ndtr(-a)
    with np.errstate(divide="ignore"):
        q = -special.stdtrit(nu, p)
    q = np.where(a == 0.0, 0.0, q)
    far = a > 20.0
    if np.any(far):
        # stdtrit loses accuracy for p below about 1e-140; the leading tail
        # term P(T > t) ~ K t^-nu is exact to O(t^-2) out here
        log_k = (
            special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
            - 0.5 * math.log(math.pi * nu) + 0.5 * (nu - 1) * math.log(nu)
        )
        q = np.where(far, np.exp((log_k - special.log_ndtr(-a)) / nu), q)
    return np.copysign(q * scale, xi)


@functools.lru_cache(maxsize=64)
def _quantile_map(kappa: float) -> CubicHermiteSpline:
    nu = student_dof(kappa)
    scale = math.sqrt((nu - 2.0) / nu)
    # tabulate the right half only and mirror, so the map is exactly odd
    x = np.linspace(0.0, _GRID_HI, round(_GRID_HI / _GRID_H) + 1)
    y = _t_exact(x, nu)
    # d/dxi G^{-1}(F(xi)) = f(xi) / g(y), g the unit-variance t density
    dydx = stats.norm.pdf(x) * scale / stats.t.pdf(y / scale, nu)
    return CubicHermiteSpline(x, y, dydx, extrapolate=False)


def kurtotic_transform(xi, kappa: float, exact: bool = False):
    """Map standard normal draws to unit-variance draws with kurtosis ``kappa``.

    The target is the standardized Student-t with 4 + 6 / (kappa - 3) degrees
    of freedom, reached through the quantile transform G^{-1}(F(xi)). The map
    is monotone and odd, and the identity at kappa = 3. By default a cached
    cubic Hermite table is used inside |xi| < 8 (relative error below 1e-9);
    ``exact=True`` evaluates the t quantile directly.
    """
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < GAUSSIAN_KURTOSIS:
        raise InvalidConfig(f"target kurtosis must be finite and >= 3, got {kappa}")
    scalar = np.ndim(xi) == 0
    xi = np.asarray(xi, dtype=float)
    if kappa == GAUSSIAN_KURTOSIS:
        out = xi.copy()
    elif exact:
        out = _t_exact(xi, student_dof(kappa))
    else:
        a = np.abs(xi)
        out = _quantile_map(kappa)(a)
        outside = np.isnan(out)
        if outside.any():
            out[outside] = _t_exact(a[outside], student_dof(kappa))
        out = np.copysign(out, xi)
    return float(out) if scalar else out


def kappa_schedule(k: KurtosisSpec, cfg: SimConfig):
    """Instantaneous kurtosis at the start of each step and the clamp count."""
    t = np.arange(cfg.n_steps) * cfg.dt
    raw = np.atleast_1d(k.raw(cfg.horizon - t)).astype(float)
    if raw.shape != t.shape:
        raw = np.broadcast_to(raw, t.shape).copy()
    clamped = int(np.count_nonzero(raw < GAUSSIAN_KURTOSIS))
    return np.maximum(raw, GAUSSIAN_KURTOSIS), clamped


def garch_spread(kappa) -> np.ndarray:
    """sqrt((kappa - 1) / 2), the factor multiplying alpha in the scheme."""
    return np.sqrt((np.asarray(kappa, dtype=float) - 1.0) / 2.0)


def effective_garch_params(p: DiscreteGarchParams, kappa_t: float) -> DiscreteGarchParams:
    """Strong-GARCH coefficients the consistent scheme actually runs.

    With s = sqrt((kappa_t - 1) / 2) the update collapses to
    V+ = omega + s alpha V xi~^2 + (lambda - s alpha) V, a GARCH(1,1) with
    unit-variance t innovations. At kappa_t = 3, s = 1 and these are ``p``.
    """
    s = float(garch_spread(kappa_t))
    return DiscreteGarchParams(p.delta, p.omega, s * p.alpha, p.lam - s * p.alpha)


def scheme_kurtosis(p: DiscreteGarchParams, kappa_t: float) -> float:
    """Stationary per-step return kurtosis of the consistent scheme."""
    lam2 = p.lam * p.lam
    a_eff2 = p.alpha**2 * (kappa_t - 1.0) / 2.0
    den = 1.0 - lam2 - a_eff2 * (kappa_t - 1.0)
    if den <= 0.0:
        return math.inf
    return kappa_t * (1.0 - lam2) / den


def matched_innovation_kurtosis(p: DiscreteGarchParams, target: float) -> float:
    """kappa_t at which the scheme's stationary kurtosis equals ``target``."""
    if scheme_kurtosis(p, GAUSSIAN_KURTOSIS) >= target:
        raise InvalidConfig(
            f"target kurtosis {target} is below the Gaussian-innovation value"
        )
    # the kurtosis is finite only while alpha^2 (kappa_t - 1)^2 / 2 < 1 - lambda^2
    hi = 1.0 + math.sqrt(2.0 * (1.0 - p.lam**2)) / p.alpha
    hi = min(hi * (1.0 - 1e-12), 1e6)
    return brentq(lambda k: scheme_kurtosis(p, k) - target, GAUSSIAN_KURTOSIS, hi, xtol=1e-14)


def _block_stream(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed + (block << 64)))


class _Engine:
    def __init__(self, c: ContinuousParams, cfg: SimConfig, kappas: np.ndarray, kappa_burn: float):
        self.c = c
        self.cfg = cfg
        self.dt = cfg.dt
        self.kappas = kappas
        self.kappa_burn = kappa_burn
        self.scheme = Scheme(cfg.scheme)
        self.vbar = c.long_run_variance
        if self.scheme is Scheme.GARCH_CONSISTENT:
            self.p, _ = continuous_to_discrete(c, self.dt)

    def _euler_step(self, x, v, z, kappa):
        c, dt = self.c, self.dt
        sq = math.sqrt(dt)
        vol = np.sqrt(v)
        x_new = x + (c.mu - 0.5 * v) * dt + vol * sq * z[0]
        # drift written as theta (vbar - v) so a stationary start stays put exactly
        v_new = v + c.theta * (self.vbar - v) * dt + c.alpha * math.sqrt(kappa - 1.0) * v * sq * z[1]
        bad = v_new < 0.0
        n_bad = int(np.count_nonzero(bad))
        if n_bad:
            v_new[bad] = 0.0
        return x_new, v_new, n_bad

    def _garch_step(self, x, v, z, kappa):
        p, dt = self.p, self.dt
        xt = kurtotic_transform(z[0], kappa)
        x_new = x + self.c.mu * dt + np.sqrt(v * dt) * xt
        # V+ = omega + alpha xt^2 V + beta V + u written around the long-run level
        s = float(garch_spread(kappa))
        v_new = self.vbar + p.lam * (v - self.vbar) + s * p.alpha * v * (xt * xt - 1.0)
        bad = v_new <= 0.0
        n_bad = int(np.count_nonzero(bad))
        if n_bad:
            v_new[bad] = 0.0
        return x_new, v_new, n_bad

    def run_block(self, block: int, out: dict) -> int:
        cfg = self.cfg
        lo = block * BLOCK
        hi = min(lo + BLOCK, cfg.n_paths)
        m = hi - lo
        rng = _block_stream(cfg.seed, block)
        n_draw = 2 if self.scheme is Scheme.DIFFUSION_EULER else 1
        step = self._euler_step if self.scheme is Scheme.DIFFUSION_EULER else self._garch_step

        x = np.zeros(BLOCK)
        v = np.full(BLOCK, cfg.v0)
        n_bad = 0
        for _ in range(cfg.burn_in):
            z = rng.standard_normal((n_draw, BLOCK))
            _, v, b = step(x, v, z, self.kappa_burn)
            n_bad += b
        x[:] = 0.0
        full = cfg.store_full_paths
        if full:
            out["log_prices"][lo:hi, 0] = x[:m]
            out["variances"][lo:hi, 0] = v[:m]
        iv = np.zeros(BLOCK)
        for k in range(cfg.n_steps):
            z = rng.standard_normal((n_draw, BLOCK))
            iv += v
            x, v, b = step(x, v, z, self.kappas[k])
            n_bad += b
            if full:
                out["log_prices"][lo:hi, k + 1] = x[:m]
                out["variances"][lo:hi, k + 1] = v[:m]
        out["terminal_log_prices"][lo:hi] = x[:m]
        out["terminal_variances"][lo:hi] = v[:m]
        out["integrated_variances"][lo:hi] = iv[:m] * self.dt
        # truncations are counted on the whole block so the tally does not
        # depend on where the path count cuts the last block
        return n_bad


def simulate(
    c: ContinuousParams,
    k: KurtosisSpec,
    cfg: SimConfig,
    threads: int = 1,
) -> PathSet:
    """Simulate ``cfg.n_paths`` paths of (log S, V) over ``cfg.horizon``.

    The kurtosis profile is evaluated at the start of every step on the time
    remaining to the horizon. ``threads`` only changes the wall-clock time.
    """
    validate_continuous(c)
    validate_kurtosis_spec(k)
    validate_config(cfg)
    kappas, clamped = kappa_schedule(k, cfg)
    if clamped and cfg.strict:
        raise InvalidKurtosisPath(f"instantaneous kurtosis below 3 on {clamped} of {cfg.n_steps} steps")
    kappa_burn = max(float(k.raw(cfg.horizon)), GAUSSIAN_KURTOSIS)
    engine = _Engine(c, cfg, kappas, kappa_burn)

    n = cfg.n_paths
    out = {
        "terminal_log_prices": np.empty(n),
        "terminal_variances": np.empty(n),
        "integrated_variances": np.empty(n),
    }
    if cfg.store_full_paths:
        out["log_prices"] = np.empty((n, cfg.n_steps + 1))
        out["variances"] = np.empty((n, cfg.n_steps + 1))

    n_blocks = -(-n // BLOCK)
    threads = max(1, int(threads))
    if threads == 1 or n_blocks == 1:
        bad = [engine.run_block(b, out) for b in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            bad = list(pool.map(lambda b: engine.run_block(b, out), range(n_blocks)))
    truncations = int(sum(bad))
    total_steps = n_blocks * BLOCK * (cfg.n_steps + cfg.burn_in)
    if truncations > TRUNCATION_LIMIT * total_steps:
        raise NegativeVarianceExplosion(
            f"variance truncated on {truncations} of {total_steps} steps"
        )
    return PathSet(
        terminal_log_prices=out["terminal_log_prices"],
        terminal_variances=out["terminal_variances"],
        config=cfg,
        mu=c.mu,
        log_prices=out.get("log_prices"),
        variances=out.get("variances"),
        integrated_variances=out["integrated_variances"],
        truncations=truncations,
        kappa_clamped_steps=clamped,
        kappa_path=kappas,
    )


def with_seed(cfg: SimConfig, seed: int) -> SimConfig:
    return replace(cfg, seed=int(seed))


# ---------------------------------------------------------------- diagnostics

BLP_LAGS = 5
BLP_POWERS = (0, 1, 2)
BLP_Z = 4.0
MIN_BLP_PATHS = 10_000
MIN_KURTOSIS_OBS = 1_000_000


@dataclass(frozen=True)
class BlpMoment:
    power: int
    lag: int
    mean: float
    se: float

    @property
    def z(self) -> float:
        return self.mean / self.se if self.se > 0 else (0.0 if self.mean == 0 else math.inf)


@dataclass(frozen=True)
class BlpReport:
    moments: tuple
    threshold: float = BLP_Z

    @property
    def passed(self) -> bool:
        return all(abs(m.z) <= self.threshold for m in self.moments)

    def failures(self) -> list:
        return [m for m in self.moments if abs(m.z) > self.threshold]


def blp_orthogonality_check(paths: PathSet, p: DiscreteGarchParams, threshold: float = BLP_Z) -> BlpReport:
    """Sample orthogonality moments of the GARCH recursion implied by ``p``.

    Rebuilds h_k = omega + alpha e_k^2 + beta h_{k-1} from the stored
    residuals, e_k = eps_k / sqrt(dt), starting at the stored V(0), and
    estimates E[(e_{k+1}^2 - h_k) e_{k-i}^r] for r = 0, 1, 2 and i < 5.
    Paths are independent, so each moment's standard error comes from the
    spread of per-path averages. ``p`` is used as given, without
    validation, so deliberately broken parameters can be checked.
    """
    if paths.n_paths < MIN_BLP_PATHS:
        raise InsufficientPaths(f"need at least {MIN_BLP_PATHS} paths, got {paths.n_paths}")
    e = paths.residuals() / math.sqrt(paths.dt)
    n_steps = e.shape[1]
    if n_steps < BLP_LAGS + 2:
        raise InvalidConfig(f"need at least {BLP_LAGS + 2} steps for the lagged moments")
    e2 = e * e
    h0 = paths.variances[:, 0]
    # h_k for k = 1..n: h_k - beta h_{k-1} = omega + alpha e_k^2
    h, _ = lfilter([1.0], [1.0, -p.beta], p.omega + p.alpha * e2, axis=1, zi=(p.beta * h0)[:, None])
    h = np.concatenate([h0[:, None], h], axis=1)  # h[:, k] predicts e2[:, k]
    k = np.arange(BLP_LAGS, n_steps)
    err = e2[:, k] - h[:, k]
    out = []
    for r in BLP_POWERS:
        for i in range(BLP_LAGS):
            lagged = e[:, k - 1 - i] ** r
            per_path = np.mean(err * lagged, axis=1)
            se = per_path.std(ddof=1) / math.sqrt(per_path.size)
            out.append(BlpMoment(r, i, float(per_path.mean()), float(se)))
    return BlpReport(tuple(out), threshold)


def _aggregate_returns(eps: np.ndarray, n: int) -> np.ndarray:
    m = eps.shape[1] // n
    return eps[:, : m * n].reshape(eps.shape[0], m, n).sum(axis=2)


def sample_kurtosis(paths: PathSet, aggregate: int = 1) -> tuple:
    """Pooled kurtosis of per-step (or ``aggregate``-step) returns.

    Returns (kurtosis, standard error); the error is a delete-one-path
    jackknife, which respects the dependence along each path.
    """
    eps = paths.residuals()
    if paths.n_paths * eps.shape[1] < MIN_KURTOSIS_OBS or paths.n_paths < 2:
        raise InsufficientData(
            f"need n_paths * n_steps >= {MIN_KURTOSIS_OBS}, got {paths.n_paths * eps.shape[1]}"
        )
    r = _aggregate_returns(eps, int(aggregate)) if aggregate > 1 else eps
    r2 = r * r
    s2 = r2.sum(axis=1)
    s4 = (r2 * r2).sum(axis=1)
    n_obs = r.shape[1]
    P = s2.size
    kurt = (s4.sum() / (P * n_obs)) / (s2.sum() / (P * n_obs)) ** 2
    m2 = (s2.sum() - s2) / ((P - 1) * n_obs)
    m4 = (s4.sum() - s4) / ((P - 1) * n_obs)
    loo = m4 / (m2 * m2)
    se = math.sqrt((P - 1) / P * np.sum((loo - loo.mean()) ** 2))
    return float(kurt), float(se)
