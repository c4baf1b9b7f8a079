"""Command-line entry point.

Every command reads JSON, writes into ``--out`` and prints a one-line
summary. Exit codes: 0 success, 2 invalid input, 3 solver failure,
4 simulation diagnostic.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__
from .aggregation import aggregate, disaggregate
from .errors import InvalidConfig, SimulationError, SolverError, ValidationError
from .limit import continuous_to_discrete, convergence_table, discrete_to_continuous, write_convergence_csv
from .params import (
    ContinuousParams,
    DiscreteGarchParams,
    KurtosisSpec,
    validate_continuous,
    validate_kurtosis_spec,
)
from .pricing import DEFAULT_MONEYNESS, OptionSpec, smile_from_paths
from .simulate import SimConfig, simulate, validate_config
from .svg import line_plot

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_SIMULATION = 0, 2, 3, 4
BASELINE = ContinuousParams(omega=0.0045, theta=0.05, alpha=0.1, mu=0.0)


def parse_step(text) -> float:
    """A step length such as ``0.004`` or ``1/252``."""
    try:
        v = float(Fraction(str(text)))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidConfig(f"cannot read step length {text!r}") from exc
    if not (math.isfinite(v) and v > 0):
        raise InvalidConfig(f"step length must be > 0, got {text!r}")
    return v


def _u64(text) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise InvalidConfig(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: expected a JSON object")
    return data


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def read_discrete(path) -> tuple:
    """Discrete parameters plus the ``kappa`` key stored alongside them."""
    d = load_json(path)
    if "kappa" not in d:
        raise InvalidConfig(f"{path}: missing key 'kappa'")
    kappa = d.pop("kappa")
    if isinstance(kappa, bool) or not isinstance(kappa, (int, float)):
        raise InvalidConfig("kappa must be a number")
    return DiscreteGarchParams.from_dict(d), float(kappa)


def discrete_record(p: DiscreteGarchParams, kappa: float) -> dict:
    return {**p.to_dict(), "kappa": kappa}


# ------------------------------------------------------------ experiments


@dataclass(frozen=True)
class OptionGrid:
    spot: float = 100.0
    rate: float = 0.0
    maturities: tuple = (1.0,)
    moneyness: tuple = DEFAULT_MONEYNESS
    otm: bool = True
    is_call: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulation run needs; the horizon is each maturity."""

    continuous: ContinuousParams = BASELINE
    kurtosis: KurtosisSpec = KurtosisSpec.constant(7.0)
    sim: SimConfig = SimConfig(n_paths=100_000, n_steps=1000, horizon=1.0, seed=20240601, v0=0.09)
    options: OptionGrid = OptionGrid()
    nelson_benchmark: bool = True
    output_dir: Optional[str] = None

    def to_dict(self) -> dict:
        sim = self.sim.to_dict()
        sim.pop("horizon")
        opts = asdict(self.options)
        opts["maturities"] = list(opts["maturities"])
        opts["moneyness"] = list(opts["moneyness"])
        return {
            "continuous": self.continuous.to_dict(),
            "kurtosis": self.kurtosis.to_dict(),
            "sim": sim,
            "options": opts,
            "nelson_benchmark": self.nelson_benchmark,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfig(f"unknown experiment keys: {sorted(unknown)}")
        base = cls()
        cont = ContinuousParams.from_dict(d["continuous"]) if "continuous" in d else base.continuous
        kurt = KurtosisSpec.from_dict({**base.kurtosis.to_dict(), **d["kurtosis"]}) if "kurtosis" in d else base.kurtosis
        sim_d = base.sim.to_dict()
        if "sim" in d:
            if "horizon" in d["sim"]:
                raise InvalidConfig("sim.horizon is set by options.maturities")
            sim_d.update(d["sim"])
        sim = SimConfig.from_dict(sim_d)
        opts = base.options
        if "options" in d:
            od = d["options"]
            known = {f.name for f in fields(OptionGrid)}
            if set(od) - known:
                raise InvalidConfig(f"unknown option keys: {sorted(set(od) - known)}")
            od = {**asdict(opts), **od}
            try:
                opts = OptionGrid(
                    spot=float(od["spot"]),
                    rate=float(od["rate"]),
                    maturities=tuple(float(t) for t in od["maturities"]),
                    moneyness=tuple(float(m) for m in od["moneyness"]),
                    otm=bool(od["otm"]),
                    is_call=bool(od["is_call"]),
                )
            except (TypeError, ValueError) as exc:
                raise InvalidConfig(f"bad options block: {exc}") from exc
        out = cls(
            continuous=cont,
            kurtosis=kurt,
            sim=sim,
            options=opts,
            nelson_benchmark=bool(d.get("nelson_benchmark", base.nelson_benchmark)),
            output_dir=d.get("output_dir", base.output_dir),
        )
        return validate_experiment(out)


def validate_experiment(e: ExperimentConfig) -> ExperimentConfig:
    validate_continuous(e.continuous)
    validate_kurtosis_spec(e.kurtosis)
    validate_config(e.sim)
    if not e.options.maturities or not e.options.moneyness:
        raise InvalidConfig("need at least one maturity and one strike")
    for t in e.options.maturities:
        if not (math.isfinite(t) and t > 0):
            raise InvalidConfig(f"maturity must be > 0, got {t}")
    for m in e.options.moneyness:
        if not (math.isfinite(m) and m > 0):
            raise InvalidConfig(f"moneyness must be > 0, got {m}")
    OptionSpec(e.options.spot, e.options.spot, 1.0, e.options.rate)
    return e


def load_experiment(args) -> ExperimentConfig:
    exp = ExperimentConfig.from_dict(load_json(args.config)) if args.config else ExperimentConfig()
    if args.seed is not None:
        exp = replace(exp, sim=replace(exp.sim, seed=args.seed))
    return exp


def _out_dir(args, exp: Optional[ExperimentConfig] = None) -> Path:
    out = args.out or (exp.output_dir if exp else None) or "."
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _tag(t: float) -> str:
    return f"T{t:g}".replace(".", "p")


def _manifest(out: Path, command: str, exp: ExperimentConfig, started: float, extra: dict) -> None:
    resolved = exp.to_dict()
    write_json(out / "config.json", resolved)
    write_json(
        out / "manifest.json",
        {
            "command": command,
            "version": __version__,
            "seed": exp.sim.seed,
            "config_sha256": config_hash(resolved),
            "wall_seconds": round(time.time() - started, 3),
            **extra,
        },
    )


# --------------------------------------------------------------- commands


def cmd_aggregate(args) -> str:
    p, kappa = read_discrete(args.config)
    res = aggregate(p, kappa, parse_step(args.to))
    out = _out_dir(args) / (args.name or "aggregated.json")
    write_json(out, discrete_record(res.params, res.kurtosis))
    q = res.params
    return f"aggregated to delta={q.delta:.6g}: omega={q.omega:.6g} alpha={q.alpha:.6g} beta={q.beta:.6g} kappa={res.kurtosis:.6g} -> {out}"


def cmd_disaggregate(args) -> str:
    p, kappa = read_discrete(args.config)
    res = disaggregate(p, kappa, parse_step(args.to))
    out = _out_dir(args) / (args.name or "disaggregated.json")
    write_json(out, discrete_record(res.params, res.kurtosis))
    q = res.params
    return f"disaggregated to delta={q.delta:.6g}: omega={q.omega:.6g} alpha={q.alpha:.6g} beta={q.beta:.6g} kappa={res.kurtosis:.6g} -> {out}"


def cmd_discretize(args) -> str:
    c = ContinuousParams.from_dict(load_json(args.config))
    p, kappa = continuous_to_discrete(c, parse_step(args.step))
    out = _out_dir(args) / (args.name or "discrete.json")
    write_json(out, discrete_record(p, kappa))
    return f"discretized at delta={p.delta:.6g}: omega={p.omega:.6g} alpha={p.alpha:.6g} beta={p.beta:.6g} kappa={kappa:.6g} -> {out}"


def cmd_limit(args) -> str:
    p, kappa = read_discrete(args.config)
    c = discrete_to_continuous(p, kappa)
    out_dir = _out_dir(args)
    out = out_dir / (args.name or "continuous.json")
    write_json(out, c.to_dict())
    msg = f"limit: omega={c.omega:.6g} theta={c.theta:.6g} alpha={c.alpha:.6g} -> {out}"
    if args.sweep:
        k0, k1 = args.sweep_exponents
        rows = convergence_table(c, [2.0**-k for k in range(k0, k1 + 1)])
        csv_path = out_dir / "convergence.csv"
        write_convergence_csv(rows, csv_path)
        msg += f"; sweep -> {csv_path}"
    return msg


def _sim_config(exp: ExperimentConfig, maturity: float, store_full: bool = False) -> SimConfig:
    return replace(exp.sim, horizon=float(maturity), store_full_paths=store_full or exp.sim.store_full_paths)


def cmd_simulate(args) -> str:
    started = time.time()
    exp = load_experiment(args)
    out = _out_dir(args, exp)
    c = replace(exp.continuous, mu=exp.options.rate)
    summary = {}
    for t in exp.options.maturities:
        cfg = _sim_config(exp, t, store_full=args.full_paths)
        ps = simulate(c, exp.kurtosis, cfg, threads=args.threads)
        ps.write_terminal_csv(out / f"terminal_{_tag(t)}.csv")
        if args.full_paths:
            ps.write_binary(out / f"log_prices_{_tag(t)}.bin", "log_prices")
            ps.write_binary(out / f"variances_{_tag(t)}.bin", "variances")
        summary[_tag(t)] = {
            "truncations": ps.truncations,
            "kappa_clamped_steps": ps.kappa_clamped_steps,
            "mean_V_T": float(np.mean(ps.terminal_variances)),
        }
    _manifest(out, "simulate", exp, started, {"runs": summary})
    return f"simulated {exp.sim.n_paths} paths x {exp.sim.n_steps} steps for {len(exp.options.maturities)} maturities -> {out}"


def _run_smiles(exp: ExperimentConfig, threads: int, otm: bool, kurt: KurtosisSpec):
    c = replace(exp.continuous, mu=exp.options.rate)
    results = {}
    for t in exp.options.maturities:
        cfg = _sim_config(exp, t)
        ps = simulate(c, kurt, cfg, threads=threads)
        tmpl = OptionSpec(exp.options.spot, exp.options.spot, t, exp.options.rate, exp.options.is_call)
        strikes = [m * exp.options.spot for m in exp.options.moneyness]
        results[t] = smile_from_paths(ps, strikes, tmpl, otm=otm)
    return results


def cmd_price(args) -> str:
    started = time.time()
    exp = load_experiment(args)
    out = _out_dir(args, exp)
    res = _run_smiles(exp, args.threads, otm=False, kurt=exp.kurtosis)
    for t, r in res.items():
        r.write_csv(out / f"prices_{_tag(t)}.csv")
    _manifest(out, "price", exp, started, {"truncations": {_tag(t): r.truncations for t, r in res.items()}})
    return f"priced {len(exp.options.moneyness)} strikes at {len(res)} maturities -> {out}"


def cmd_smile(args) -> str:
    started = time.time()
    exp = load_experiment(args)
    out = _out_dir(args, exp)
    weak = _run_smiles(exp, args.threads, otm=exp.options.otm, kurt=exp.kurtosis)
    nelson = _run_smiles(exp, args.threads, otm=exp.options.otm, kurt=KurtosisSpec.nelson()) if exp.nelson_benchmark else {}
    series = []
    for t, r in weak.items():
        r.write_csv(out / f"smile_{_tag(t)}.csv")
        series.append((f"weak GARCH T={t:g}", r.column("moneyness"), r.column("implied_vol")))
    for t, r in nelson.items():
        r.write_csv(out / f"smile_nelson_{_tag(t)}.csv")
        series.append((f"Nelson T={t:g}", r.column("moneyness"), r.column("implied_vol")))
    (out / "smile.svg").write_text(
        line_plot(series, title="Implied volatility smile", xlabel="moneyness K/S", ylabel="implied volatility")
    )
    trunc = {f"weak_{_tag(t)}": r.truncations for t, r in weak.items()}
    trunc.update({f"nelson_{_tag(t)}": r.truncations for t, r in nelson.items()})
    _manifest(out, "smile", exp, started, {"truncations": trunc})
    return f"smiles for {len(weak)} maturities ({'with' if nelson else 'without'} Nelson benchmark) -> {out}"


COMMANDS = {
    "aggregate": cmd_aggregate,
    "disaggregate": cmd_disaggregate,
    "discretize": cmd_discretize,
    "limit": cmd_limit,
    "simulate": cmd_simulate,
    "price": cmd_price,
    "smile": cmd_smile,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="input JSON file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: config output_dir or .)")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the configured seed")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads; never changes results")

    ap = argparse.ArgumentParser(prog="weakgarch", description="Weak GARCH aggregation, diffusion limit and option smiles.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, help_ in (("aggregate", "fine step -> coarse step"), ("disaggregate", "coarse step -> fine step")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--to", required=True, metavar="STEP", help="target step, e.g. 1/252")
        p.add_argument("--name", help="output file name")

    p = sub.add_parser("discretize", parents=[common], help="continuous parameters -> discrete at one step")
    p.add_argument("--step", required=True, metavar="STEP")
    p.add_argument("--name", help="output file name")

    p = sub.add_parser("limit", parents=[common], help="discrete parameters -> continuous limit")
    p.add_argument("--sweep", action="store_true", help="also write the convergence table CSV")
    p.add_argument("--sweep-exponents", nargs=2, type=int, default=(4, 16), metavar=("K0", "K1"),
                   help="sweep steps 2^-K0 .. 2^-K1 (default 4 16)")
    p.add_argument("--name", help="output file name")

    p = sub.add_parser("simulate", parents=[common], help="simulate paths from an experiment config")
    p.add_argument("--full-paths", action="store_true", help="also write binary full-path files")

    sub.add_parser("price", parents=[common], help="price the option grid from an experiment config")
    sub.add_parser("smile", parents=[common], help="implied-volatility smiles plus the Nelson benchmark")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    needs_config = args.command in ("aggregate", "disaggregate", "discretize", "limit")
    try:
        if needs_config and not args.config:
            raise InvalidConfig(f"{args.command} needs --config")
        if args.threads < 1:
            raise InvalidConfig("--threads must be >= 1")
        print(COMMANDS[args.command](args))
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SimulationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
