"""Command-line front end.

    kmrelay outage [--alpha 0.06 --ps 0.5 ...]
    kmrelay sweep --spec sweep.yaml [-o out.csv]
    kmrelay optimal-alpha [--method nakagami ...]
    kmrelay validate [--trials 1000000 ...]

Exit status is 2 for invalid input and 0 otherwise; series that fail to
converge are reported in the output, not through the exit status.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from importlib.metadata import PackageNotFoundError, version
from typing import Dict, List, Optional

from . import analytic, experiments
from .analytic import Method
from .series import SeriesPolicy
from .sysmodel import ParameterError, SystemParams

log = logging.getLogger("kmrelay")

COMMANDS = ("outage", "sweep", "optimal-alpha", "validate")
# broadest first so that a per-link flag wins over a group flag
GROUP_FLAGS = ("kappa", "mu", "omega", "kappa12", "mu12", "omega12")
LINK_FLAGS = tuple(f"{attr}{i}" for attr in ("kappa", "mu", "omega") for i in (1, 2, 3))
PARAM_FLAGS = experiments.SCALAR_FIELDS + GROUP_FLAGS + LINK_FLAGS


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


class UsageError(Exception):
    """Bad command line; the message names the offending flag."""


@dataclass
class RunConfig:
    command: str
    overrides: Dict[str, float] = field(default_factory=dict)
    spec: Optional[str] = None
    scenario: Optional[str] = None
    output: Optional[str] = None
    method: Optional[str] = None
    seed: Optional[int] = None
    trials: Optional[int] = None
    fixed_terms: Optional[int] = None
    rel_tol: Optional[float] = None
    verbosity: int = 0

    def to_argv(self) -> List[str]:
        argv = ["-v"] * self.verbosity + [self.command]
        for name, value in self.overrides.items():
            argv += [_flag(name), repr(float(value))]
        for name in ("spec", "scenario", "output", "method", "seed", "trials",
                     "fixed_terms", "rel_tol"):
            value = getattr(self, name)
            if value is not None:
                argv += [_flag(name), repr(value) if isinstance(value, float) else str(value)]
        return argv

    def policy(self) -> SeriesPolicy:
        policy = SeriesPolicy()
        if self.rel_tol is not None:
            policy = replace(policy, rel_tol=self.rel_tol)
        if self.fixed_terms is not None:
            policy = replace(policy, fixed_terms=self.fixed_terms)
        return policy

    def system(self) -> SystemParams:
        return experiments.apply_overrides(SystemParams(), self.overrides)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(flag):
    def conv(text):
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if value < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be >= 1, got {value}")
        return value
    return conv


def _finite_float(flag):
    def conv(text):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects a number, got {text!r}") from None
        if not math.isfinite(value):
            raise argparse.ArgumentTypeError(f"{flag} must be finite, got {text!r}")
        return value
    return conv


def build_parser() -> argparse.ArgumentParser:
    try:
        pkg_version = version("artifact")
    except PackageNotFoundError:
        pkg_version = "unknown"
    parser = _Parser(prog="kmrelay", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"kmrelay {pkg_version}")
    parser.add_argument("-v", "--verbose", action="count", default=0, dest="verbosity",
                        help="more log output on stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    common = _Parser(add_help=False)
    params = common.add_argument_group("system parameters (defaults: baseline evaluation settings)")
    for name in PARAM_FLAGS:
        params.add_argument(_flag(name), dest=f"p_{name}", type=_finite_float(_flag(name)),
                            metavar="X")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=_positive_int("--trials"), help="Monte Carlo trials")
    common.add_argument("--fixed-terms", type=_positive_int("--fixed-terms"),
                        help="truncate every series at exactly this many terms")
    common.add_argument("--rel-tol", type=_finite_float("--rel-tol"),
                        help="adaptive series tolerance")
    common.add_argument("-o", "--output", help="CSV destination (default: stdout)")

    sub.add_parser("outage", parents=[common], help="all applicable methods at one point")
    sweep = sub.add_parser("sweep", parents=[common], help="grid sweep from a spec file")
    sweep.add_argument("--spec", help="YAML sweep description")
    sweep.add_argument("--scenario", choices=sorted(experiments.SCENARIOS))
    opt = sub.add_parser("optimal-alpha", parents=[common], help="outage-minimizing alpha")
    opt.add_argument("--method", choices=[m.value for m in Method])
    opt.add_argument("--spec", help="YAML sweep description; optimize at every grid point")
    opt.add_argument("--scenario", choices=sorted(experiments.SCENARIOS))
    sub.add_parser("validate", parents=[common], help="Monte Carlo vs closed forms")
    return parser


def parse_args(argv) -> RunConfig:
    ns = build_parser().parse_args(list(argv))
    if ns.command is None:
        raise UsageError(f"a subcommand is required: {', '.join(COMMANDS)}")
    overrides = {name: getattr(ns, f"p_{name}") for name in PARAM_FLAGS
                 if getattr(ns, f"p_{name}") is not None}
    cfg = RunConfig(command=ns.command, overrides=overrides,
                    spec=getattr(ns, "spec", None), scenario=getattr(ns, "scenario", None),
                    output=ns.output, method=getattr(ns, "method", None), seed=ns.seed,
                    trials=ns.trials, fixed_terms=ns.fixed_terms, rel_tol=ns.rel_tol,
                    verbosity=ns.verbosity)
    if cfg.spec and cfg.scenario:
        raise UsageError("--spec and --scenario are mutually exclusive")
    if cfg.command == "sweep" and not (cfg.spec or cfg.scenario):
        raise UsageError("sweep needs --spec FILE or --scenario NAME")
    try:
        cfg.system()
        cfg.policy()
    except ParameterError as exc:
        raise UsageError(f"{_flag(exc.field)}: {exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _configure_logging(verbosity: int):
    level = logging.WARNING - 10 * min(verbosity, 2)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(
        "ts=%(asctime)s level=%(levelname)s logger=%(name)s msg=%(message)s"))
    root = logging.getLogger("kmrelay")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def _load_sweep(cfg: RunConfig) -> experiments.SweepSpec:
    if cfg.spec:
        try:
            spec = experiments.load_spec(cfg.spec)
        except FileNotFoundError:
            raise UsageError(f"--spec: file not found: {cfg.spec}") from None
    elif cfg.scenario:
        spec = experiments.scenario(cfg.scenario)
    else:
        spec = experiments.SweepSpec(base=cfg.system())
        return _apply_run_flags(spec, cfg)
    spec = replace(spec, base=experiments.apply_overrides(spec.base, cfg.overrides))
    return _apply_run_flags(spec, cfg)


def _apply_run_flags(spec, cfg):
    policy = spec.policy
    if cfg.rel_tol is not None:
        policy = replace(policy, rel_tol=cfg.rel_tol)
    if cfg.fixed_terms is not None:
        policy = replace(policy, fixed_terms=cfg.fixed_terms)
    return replace(spec, policy=policy,
                   seed=spec.seed if cfg.seed is None else cfg.seed,
                   mc_trials=spec.mc_trials if cfg.trials is None else cfg.trials)


def _write(rows, cfg, columns=None):
    if cfg.output:
        experiments.emit_csv(rows, cfg.output, columns)
        log.info("wrote %d rows to %s", len(rows), cfg.output)
    else:
        experiments.emit_csv(rows, sys.stdout, columns)


def _run_outage(cfg):
    sys_params = cfg.system()
    methods = tuple(m.value for m in analytic.applicable_methods(sys_params))
    spec = _apply_run_flags(experiments.SweepSpec(base=sys_params, methods=methods), cfg)
    rows = experiments.run_sweep(spec)
    _write(rows, cfg, experiments.sweep_columns(spec))


def _run_sweep(cfg):
    spec = _load_sweep(cfg)
    log.info("sweep points=%d methods=%s", len(spec.points()), ",".join(spec.methods))
    rows = experiments.run_sweep(spec)
    for i, row in enumerate(rows):
        if not row.converged:
            log.warning("row=%d params=%s did not converge", i, row.params)
    _write(rows, cfg, experiments.sweep_columns(spec))


def _run_optimal_alpha(cfg):
    spec = _load_sweep(cfg)
    if cfg.method:
        spec = replace(spec, methods=(cfg.method,))
    rows = experiments.run_optimal_alpha_sweep(spec)
    _write(rows, cfg, spec.axis_names + list(experiments.OPTIMAL_ALPHA_COLUMNS))


def _run_validate(cfg):
    sys_params = cfg.system()
    trials = cfg.trials or 1_000_000
    seed = 0 if cfg.seed is None else cfg.seed
    methods = tuple(m.value for m in analytic.applicable_methods(sys_params)
                    if m is not Method.RAYLEIGH_HIGH_SNR)
    row = experiments.evaluate_point(sys_params, methods, cfg.policy(), trials, seed)
    records = []
    for m, res in row.outcomes.items():
        z = (res.value - row.mc.estimate) / row.mc.stderr if row.mc.stderr > 0 else 0.0
        if row.mc.stderr == 0.0 and abs(res.value - row.mc.estimate) > 1.0 / trials:
            z = math.inf
        records.append({"method": m, "analytic": res.value, "mc_estimate": row.mc.estimate,
                        "mc_stderr": row.mc.stderr, "z_score": z,
                        "agrees": abs(z) <= 3.0, "converged": res.converged})
    _write(records, cfg)


HANDLERS = {"outage": _run_outage, "sweep": _run_sweep,
            "optimal-alpha": _run_optimal_alpha, "validate": _run_validate}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(f"kmrelay: error: {exc}", file=sys.stderr)
        return 2
    _configure_logging(cfg.verbosity)
    try:
        HANDLERS[cfg.command](cfg)
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"kmrelay: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
