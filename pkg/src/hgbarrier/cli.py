"""Command-line front end: price options, run Monte Carlo benchmarks,
reproduce the reference grid, and dump reusable config files.

Configuration comes from an optional key=value file (``--config``) overridden
by command-line flags; ``dump-config`` writes the merged configuration back
out so a run can be reproduced exactly.  Exit codes: 0 success, 2 input
validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields

from .model import BarrierSpec, MarketState, ModelParams, OptionSpec, barrier_level, choose_beta
from .montecarlo import McConfig, mc_doc_price, mc_time_dependent_doc_price
from .pricing import QuadratureConfig, approx_price, bs_barrier_price
from .quadrature import QuadratureError

__all__ = ["RunConfig", "main", "cmd_price", "cmd_mc", "cmd_table2", "cmd_dump_config"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

# the twelve reference rows: correlation, barrier level, initial squared vol
TABLE2_ROWS = [
    (-0.5, 90.0, 0.02),
    (-0.5, 90.0, 0.04),
    (-0.5, 90.0, 0.08),
    (-0.5, 85.0, 0.02),
    (-0.5, 85.0, 0.04),
    (-0.5, 85.0, 0.08),
    (-0.7, 90.0, 0.02),
    (-0.7, 90.0, 0.04),
    (-0.7, 90.0, 0.08),
    (-0.7, 85.0, 0.02),
    (-0.7, 85.0, 0.04),
    (-0.7, 85.0, 0.08),
]


@dataclass
class RunConfig:
    """Flat run configuration; field names match the CLI flags (kebab-case)."""

    a: float = 0.2
    c: float = 10.0
    theta: float = 1.0
    eps: float = 0.1
    rho: float = -0.5
    r: float = 0.01
    strike: float = 104.0
    maturity: float = 1.0
    spot: float = 100.0
    t: float = 0.0
    e2v: float = 0.04
    barrier: float = 90.0
    beta: float | None = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    endpoint_inset: float = 1e-7
    max_subdivisions: int = 200
    paths: int = 100_000
    steps: int = 1000
    seed: int = 20_240_901
    scheme: str = "euler-logspot"
    bridge: bool = True
    antithetic: bool = False
    workers: int = 1
    barrier_mode: str = "constant"
    with_mc: bool = False
    precision: int = 6

    def model_params(self) -> ModelParams:
        return ModelParams(a=self.a, c=self.c, eps=self.eps, rho=self.rho, r=self.r, theta=self.theta)

    def log_vol(self) -> float:
        if self.e2v <= 0.0:
            raise ValueError(f"e2v (initial squared volatility) must be positive, got {self.e2v}")
        return 0.5 * math.log(self.e2v)

    def option_and_spec(self, params: ModelParams) -> tuple[OptionSpec, BarrierSpec]:
        probe = OptionSpec(
            strike=self.strike,
            maturity=self.maturity,
            barrier=BarrierSpec.single(self.barrier, self.maturity, 0.0),
        )
        beta = self.beta if self.beta is not None else choose_beta(params, probe, self.t, self.log_vol())
        spec = BarrierSpec.single(self.barrier, self.maturity, beta)
        return OptionSpec(strike=self.strike, maturity=self.maturity, barrier=spec), spec

    def market_state(self) -> MarketState:
        return MarketState(t=self.t, x=self.spot, v=self.log_vol())

    def quad_config(self) -> QuadratureConfig:
        return QuadratureConfig(
            rel_tol=self.rel_tol,
            abs_tol=self.abs_tol,
            endpoint_inset=self.endpoint_inset,
            max_subdivisions=self.max_subdivisions,
        )

    def mc_config(self) -> McConfig:
        return McConfig(
            n_paths=self.paths,
            n_steps=self.steps,
            seed=self.seed,
            scheme=self.scheme,
            bridge=self.bridge,
            antithetic=self.antithetic,
        )


_BOOL_FIELDS = {"bridge", "antithetic", "with_mc"}
_INT_FIELDS = {"max_subdivisions", "paths", "steps", "seed", "workers", "precision"}
_STR_FIELDS = {"scheme", "barrier_mode"}


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    valid = {f.name for f in fields(RunConfig)}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if key not in valid:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _coerce(key, val)
    return values


def _coerce(key: str, val: str):
    if key in _BOOL_FIELDS:
        low = val.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {key} expects a boolean, got {val!r}")
    if key in _INT_FIELDS:
        return int(val)
    if key in _STR_FIELDS:
        return val
    if key == "beta" and val.lower() == "none":
        return None
    return float(val)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hgbarrier",
        description="Down-and-out call pricing under the 2-hypergeometric "
        "stochastic volatility model (first-order vol-of-vol expansion and "
        "Monte Carlo benchmarks).",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("price", "first-order asymptotic price with diagnostics"),
        ("mc", "Monte Carlo benchmark price"),
        ("table2", "reproduce the 12-row reference grid as CSV"),
        ("dump-config", "write the merged configuration as key=value text"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--out", help="write output here instead of stdout")
        for f in fields(RunConfig):
            flag = "--" + f.name.replace("_", "-")
            if f.name in _BOOL_FIELDS:
                p.add_argument(flag, action=argparse.BooleanOptionalAction, default=None)
            elif f.name in _INT_FIELDS:
                p.add_argument(flag, type=int, default=None)
            elif f.name in _STR_FIELDS:
                p.add_argument(flag, type=str, default=None)
            else:
                p.add_argument(flag, type=float, default=None)
    return parser


def _merge_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(_parse_config_file(args.config))
    for f in fields(RunConfig):
        flag_val = getattr(args, f.name, None)
        if flag_val is not None:
            values[f.name] = flag_val
    return RunConfig(**values)


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}g}"


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_price(cfg: RunConfig, out_path: str | None = None) -> int:
    params = cfg.model_params()
    option, spec = cfg.option_and_spec(params)
    state = cfg.market_state()
    breakdown = approx_price(params, option, spec, state, cfg.quad_config())
    p = cfg.precision
    lines = [
        f"f0 = {_fmt(breakdown.f0, p)}",
        f"f1 = {_fmt(breakdown.f1, p)}",
        f"correction = {_fmt(breakdown.correction, p)}",
        f"total = {_fmt(breakdown.total, p)}",
        f"f_bs = {_fmt(breakdown.bs_reference, p)}",
        f"beta = {_fmt(breakdown.beta_used, p)}",
        f"barrier_at_eval = {_fmt(breakdown.barrier_at_eval, p)}",
        f"quad_error = {_fmt(breakdown.quad_error_estimate, p)}",
    ]
    if breakdown.negative_total:
        lines.append("warning = total is negative; expansion may have broken down")
    _emit("\n".join(lines) + "\n", out_path)
    return EXIT_OK


def _run_mc_single(cfg: RunConfig, scheme: str):
    params = cfg.model_params()
    option, spec = cfg.option_and_spec(params)
    state = cfg.market_state()
    mc_cfg = McConfig(
        n_paths=cfg.paths, n_steps=cfg.steps, seed=cfg.seed,
        scheme=scheme, bridge=cfg.bridge, antithetic=cfg.antithetic,
    )
    if cfg.barrier_mode == "constant":
        return mc_doc_price(params, option, cfg.barrier, state, mc_cfg, workers=cfg.workers)
    if cfg.barrier_mode == "moving":
        return mc_time_dependent_doc_price(params, option, spec, state, mc_cfg, workers=cfg.workers)
    raise ValueError(f"barrier_mode must be 'constant' or 'moving', got {cfg.barrier_mode!r}")


def cmd_mc(cfg: RunConfig, out_path: str | None = None) -> int:
    schemes = ["euler-logspot", "closed-vol"] if cfg.scheme == "both" else [cfg.scheme]
    p = cfg.precision
    lines = []
    estimates = []
    for scheme in schemes:
        est = _run_mc_single(cfg, scheme)
        estimates.append(est)
        lines.append(
            f"scheme = {est.scheme}  mean = {_fmt(est.mean, p)}  std_error = {_fmt(est.std_error, p)}  "
            f"paths = {est.n_paths}  steps = {est.n_steps}  elapsed = {est.elapsed:.2f}s"
        )
    if len(estimates) == 2:
        diff = abs(estimates[0].mean - estimates[1].mean)
        combined = math.hypot(estimates[0].std_error, estimates[1].std_error)
        verdict = "OK" if diff <= 2.0 * combined else "INCONSISTENT"
        lines.append(
            f"consistency = {verdict}  |diff| = {_fmt(diff, p)}  2*combined_se = {_fmt(2.0 * combined, p)}"
        )
    _emit("\n".join(lines) + "\n", out_path)
    return EXIT_OK


def cmd_table2(cfg: RunConfig, out_path: str | None = None) -> int:
    p = cfg.precision
    header = "rho,H,e2v,f0,f1,total,f_bs"
    if cfg.with_mc:
        header += ",mc_mean,mc_se,rel_err"
    rows = [header]
    for rho, h, e2v in TABLE2_ROWS:
        row_cfg = RunConfig(**{**cfg.__dict__, "rho": rho, "barrier": h, "e2v": e2v, "beta": None})
        params = row_cfg.model_params()
        option, spec = row_cfg.option_and_spec(params)
        state = row_cfg.market_state()
        breakdown = approx_price(params, option, spec, state, row_cfg.quad_config())
        cells = [
            _fmt(rho, p), _fmt(h, p), _fmt(e2v, p),
            _fmt(breakdown.f0, p), _fmt(breakdown.f1, p),
            _fmt(breakdown.total, p), _fmt(breakdown.bs_reference, p),
        ]
        if cfg.with_mc:
            pairs = []
            for scheme in ("euler-logspot", "closed-vol"):
                mc_cfg = McConfig(
                    n_paths=row_cfg.paths, n_steps=row_cfg.steps, seed=row_cfg.seed,
                    scheme=scheme, bridge=row_cfg.bridge, antithetic=row_cfg.antithetic,
                )
                pairs.append(mc_doc_price(params, option, h, state, mc_cfg, workers=row_cfg.workers))
            mc_mean = 0.5 * (pairs[0].mean + pairs[1].mean)
            mc_se = 0.5 * math.hypot(pairs[0].std_error, pairs[1].std_error)
            rel_err = (breakdown.total - mc_mean) / mc_mean
            cells += [_fmt(mc_mean, p), _fmt(mc_se, p), _fmt(rel_err, p)]
        rows.append(",".join(cells))
    _emit("\n".join(rows) + "\n", out_path)
    return EXIT_OK


def cmd_dump_config(cfg: RunConfig, out_path: str | None = None) -> int:
    lines = ["# hgbarrier run configuration"]
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if val is None:
            val = "none"
        elif isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{f.name} = {val}")
    _emit("\n".join(lines) + "\n", out_path)
    return EXIT_OK


_COMMANDS = {
    "price": cmd_price,
    "mc": cmd_mc,
    "table2": cmd_table2,
    "dump-config": cmd_dump_config,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg, args.out)
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
