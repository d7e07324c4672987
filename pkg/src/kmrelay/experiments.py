"""Parameter sweeps, optimal harvesting-time search and CSV output."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import yaml

from . import analytic
from .analytic import Method, OutageResult
from .fading import KappaMuParams
from .mathkern import DomainError
from .series import DEFAULT_POLICY, SeriesPolicy
from .sysmodel import MonteCarloReport, ParameterError, SystemParams, mc_outage

log = logging.getLogger(__name__)

SCALAR_FIELDS = ("ps", "eta", "alpha", "d1", "d2", "xi1", "xi2", "xi3",
                 "sigma_d2", "sigma_r", "c_th")
LINK_FIELDS = ("kappa", "mu", "omega")
ALIASES = {"Ps": "ps", "C_th": "c_th", "m": "mu", "m1": "mu1", "m2": "mu2",
           "m3": "mu3", "m12": "mu12", "K": "kappa"}
SERIES_METHODS = (Method.UNIFIED, Method.RICE)

# Noise variance used by the scenario library: 0.01 W read as a standard
# deviation. With 0.01 W as the variance every scenario saturates near outage 1.
SCENARIO_SIGMA_D2 = 1e-4


def _resolve(name: str):
    """Map a parameter name to ('scalar', field) or ('link', attr, link indices)."""
    canon = ALIASES.get(name, name)
    if canon in SCALAR_FIELDS:
        return ("scalar", canon, ())
    for attr in LINK_FIELDS:
        if canon == attr:
            return ("link", attr, (1, 2, 3))
        if canon.startswith(attr):
            suffix = canon[len(attr):]
            if suffix and set(suffix) <= {"1", "2", "3"} and len(set(suffix)) == len(suffix):
                return ("link", attr, tuple(int(c) for c in suffix))
    raise ParameterError(name, "unknown parameter name")


def is_parameter(name: str) -> bool:
    try:
        _resolve(name)
    except ParameterError:
        return False
    return True


def set_param(sys: SystemParams, name: str, value) -> SystemParams:
    """Copy of ``sys`` with one named parameter (or link group) replaced."""
    kind, attr, links = _resolve(name)
    value = float(value)
    try:
        if kind == "scalar":
            return replace(sys, **{attr: value})
        changes = {f"link{i}": replace(getattr(sys, f"link{i}"), **{attr: value}) for i in links}
        return replace(sys, **changes)
    except ParameterError:
        raise
    except ValueError as exc:
        raise ParameterError(name, str(exc)) from None


def get_param(sys: SystemParams, name: str) -> float:
    kind, attr, links = _resolve(name)
    if kind == "scalar":
        return getattr(sys, attr)
    return getattr(getattr(sys, f"link{links[0]}"), attr)


def apply_overrides(sys: SystemParams, overrides: Mapping[str, float]) -> SystemParams:
    for name, value in overrides.items():
        sys = set_param(sys, name, value)
    return sys


@dataclass(frozen=True)
class SweepSpec:
    base: SystemParams = field(default_factory=SystemParams)
    axes: Tuple[Tuple[str, Tuple[float, ...]], ...] = ()
    methods: Tuple[str, ...] = (Method.UNIFIED.value,)
    mc_trials: Optional[int] = None
    seed: int = 0
    policy: SeriesPolicy = DEFAULT_POLICY

    def __post_init__(self):
        axes = tuple((name, tuple(float(v) for v in values)) for name, values in self.axes)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "methods", tuple(Method(m).value for m in self.methods))
        for name, values in axes:
            _resolve(name)
            if not values:
                raise ParameterError(name, "axis grid is empty")
            if not all(math.isfinite(v) for v in values):
                raise ParameterError(name, "axis grid has non-finite values")
        if len({n for n, _ in axes}) != len(axes):
            raise ValueError("duplicate axis names")
        if self.mc_trials is not None and self.mc_trials < 1:
            raise ParameterError("mc_trials", f"must be >= 1, got {self.mc_trials}")

    @property
    def axis_names(self):
        return [name for name, _ in self.axes]

    def points(self):
        """Grid points in lexicographic order (first axis varies slowest)."""
        return list(itertools.product(*(values for _, values in self.axes)))


def sweep_columns(spec: SweepSpec):
    cols = list(spec.axis_names)
    for m in spec.methods:
        cols.append(f"outage_{m}")
        if Method(m) in SERIES_METHODS:
            cols += [f"{m}_terms", f"{m}_converged"]
    if spec.mc_trials:
        cols += ["mc_estimate", "mc_stderr"]
    return cols


@dataclass
class SweepRow:
    params: Dict[str, float]
    outcomes: Dict[str, OutageResult] = field(default_factory=dict)
    mc: Optional[MonteCarloReport] = None
    errors: Dict[str, str] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.outcomes.values()) and not self.errors

    def record(self) -> Dict[str, object]:
        rec: Dict[str, object] = dict(self.params)
        for m, r in self.outcomes.items():
            rec[f"outage_{m}"] = r.value
            if Method(m) in SERIES_METHODS:
                rec[f"{m}_terms"] = sum(r.terms_used.values())
                rec[f"{m}_converged"] = r.converged
        if self.mc is not None:
            rec["mc_estimate"] = self.mc.estimate
            rec["mc_stderr"] = self.mc.stderr
        return rec


def _failed(method: str) -> OutageResult:
    return OutageResult(math.nan, Method(method), {}, False, math.nan)


def _row_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def evaluate_point(sys: SystemParams, methods: Sequence[str], policy: SeriesPolicy,
                   mc_trials: Optional[int] = None, seed: int = 0,
                   params: Optional[Dict[str, float]] = None) -> SweepRow:
    row = SweepRow(dict(params or {}))
    for m in methods:
        try:
            row.outcomes[m] = analytic.outage(sys, m, policy)
        except (ParameterError, DomainError, ArithmeticError) as exc:
            log.warning("method=%s params=%s failed: %s", m, row.params, exc)
            row.outcomes[m] = _failed(m)
            row.errors[m] = str(exc)
    if mc_trials:
        row.mc = mc_outage(sys, mc_trials, seed)
    return row


def _evaluate(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1):
    """Evaluate every grid point; one SweepRow per point, in grid order.

    Invalid parameter combinations raise ParameterError before any work is
    done; failures of an individual method are recorded in its row.
    """
    tasks = []
    for i, point in enumerate(spec.points()):
        params = dict(zip(spec.axis_names, point))
        sys = apply_overrides(spec.base, params)
        tasks.append((sys, spec.methods, spec.policy, spec.mc_trials,
                      _row_seed(spec.seed, i), params))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate, tasks))
    return [_evaluate(t) for t in tasks]


def truncation_gap(spec: SweepSpec, policy_a: SeriesPolicy, policy_b: SeriesPolicy):
    """Largest absolute outage difference over the grid between two series
    policies, with the grid point where it occurs."""
    worst, where = -1.0, None
    for point in spec.points():
        params = dict(zip(spec.axis_names, point))
        sys = apply_overrides(spec.base, params)
        for m in spec.methods:
            gap = abs(analytic.outage(sys, m, policy_a).value
                      - analytic.outage(sys, m, policy_b).value)
            if gap > worst:
                worst, where = gap, params
    return worst, where


# -- optimal harvesting time ----------------------------------------------

@dataclass(frozen=True)
class AlphaOptimum:
    alpha: float
    outage: float
    grid_alpha: float
    grid_outage: float
    unimodal: bool


def _golden_section(f, lo, hi, tol):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _is_unimodal(values, slack=1e-13):
    diffs = np.diff(values)
    rising = False
    for d in diffs:
        if d > slack:
            rising = True
        elif d < -slack and rising:
            return False
    return True


def optimal_alpha(sys: SystemParams, method="unified", grid: int = 99, tol: float = 1e-6,
                  policy: SeriesPolicy = DEFAULT_POLICY) -> AlphaOptimum:
    """Harvesting fraction minimizing outage: grid scan on [0.01, 0.99], then
    golden-section refinement between the neighbours of the best grid point.

    A scan that is not unimodal triggers a warning and the global grid
    minimum is returned unrefined.
    """
    if grid < 3:
        raise ValueError(f"grid must have >= 3 points, got {grid}")

    def f(alpha):
        return analytic.outage(replace(sys, alpha=alpha), method, policy).value

    alphas = np.linspace(0.01, 0.99, grid)
    values = np.array([f(a) for a in alphas])
    i = int(np.argmin(values))
    grid_alpha, grid_outage = float(alphas[i]), float(values[i])
    unimodal = _is_unimodal(values)
    if not unimodal:
        warnings.warn(f"outage vs alpha is not unimodal for {method}; "
                      f"returning the grid minimum at alpha={grid_alpha}")
        return AlphaOptimum(grid_alpha, grid_outage, grid_alpha, grid_outage, False)
    lo = float(alphas[max(i - 1, 0)])
    hi = float(alphas[min(i + 1, grid - 1)])
    alpha, value = _golden_section(f, lo, hi, tol)
    if value > grid_outage:
        alpha, value = grid_alpha, grid_outage
    return AlphaOptimum(alpha, value, grid_alpha, grid_outage, True)


OPTIMAL_ALPHA_COLUMNS = ("alpha_opt", "outage_opt", "grid_alpha", "grid_outage", "unimodal")


def run_optimal_alpha_sweep(spec: SweepSpec, grid: int = 99, tol: float = 1e-6):
    """optimal_alpha at every grid point of ``spec`` (first method only)."""
    rows = []
    for point in spec.points():
        params = dict(zip(spec.axis_names, point))
        res = optimal_alpha(apply_overrides(spec.base, params), spec.methods[0], grid, tol,
                            spec.policy)
        rows.append({**params, "alpha_opt": res.alpha, "outage_opt": res.outage,
                     "grid_alpha": res.grid_alpha, "grid_outage": res.grid_outage,
                     "unimodal": res.unimodal})
    return rows


# -- CSV ---------------------------------------------------------------------

def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(rows, destination, columns: Optional[Sequence[str]] = None):
    """Write rows (SweepRow or mappings) as CSV; floats keep full precision.

    ``destination`` is a path or a text stream. Without ``columns`` the
    header comes from the first row.
    """
    records = [r.record() if isinstance(r, SweepRow) else dict(r) for r in rows]
    if columns is None:
        columns = list(records[0]) if records else []
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", newline="") as fh:
            return emit_csv(records, fh, columns)
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_format(rec.get(c)) for c in columns])
    return destination


def to_csv_string(rows, columns=None) -> str:
    buf = io.StringIO()
    emit_csv(rows, buf, columns)
    return buf.getvalue()


# -- scenario library ----------------------------------------------------

ALPHA_GRID = tuple(np.round(np.linspace(0.01, 0.99, 99), 10))


def scenario_base(**overrides) -> SystemParams:
    """Baseline evaluation settings with the scenario noise convention."""
    return apply_overrides(SystemParams(sigma_d2=SCENARIO_SIGMA_D2), overrides)


def _fading_grid():
    grid = tuple(np.round(np.linspace(0.5, 5.0, 10), 10))
    return SweepSpec(base=scenario_base(alpha=0.06, ps=0.5),
                     axes=(("kappa", grid), ("mu", grid)), methods=("unified",))


def _alpha_nakagami():
    return SweepSpec(base=scenario_base(ps=1.0, kappa=0.0),
                     axes=(("m", (1.0, 2.0, 3.0, 5.0)), ("alpha", ALPHA_GRID)),
                     methods=("nakagami",))


def _alpha_rice():
    return SweepSpec(base=scenario_base(ps=1.0, mu=1.0),
                     axes=(("kappa", (0.0, 1.0, 3.0, 5.0)), ("alpha", ALPHA_GRID)),
                     methods=("rice",))


def _loopback_power():
    ps_grid = tuple(np.round(np.linspace(0.1, 2.0, 20), 10))
    return SweepSpec(base=scenario_base(c_th=0.3, alpha=0.6, d1=4.0, d2=2.0, kappa=0.0,
                                        mu1=5.0, mu2=5.0),
                     axes=(("Ps", ps_grid), ("m3", (1.0, 2.0, 3.0, 5.0))),
                     methods=("nakagami",), mc_trials=100_000, seed=2024)


def _eta_fading():
    return SweepSpec(base=scenario_base(ps=1.0, kappa=0.0, mu3=3.0),
                     axes=(("eta", (0.5, 0.75, 1.0)), ("m12", (1.0, 2.0, 3.0, 4.0, 5.0, 6.0))),
                     methods=("nakagami",))


SCENARIOS = {
    "fading-grid": _fading_grid,          # kappa x mu surface at alpha=0.06, Ps=0.5 W
    "alpha-nakagami": _alpha_nakagami,    # outage vs alpha, several m
    "alpha-rice": _alpha_rice,            # outage vs alpha, several K
    "loopback-power": _loopback_power,    # outage vs Ps for several loop-back m3
    "eta-fading": _eta_fading,            # optimal alpha vs m1 = m2 for several eta
}


def scenario(name: str) -> SweepSpec:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


# -- spec files ----------------------------------------------------------

SPEC_KEYS = {"scenario", "base", "axes", "methods", "mc_trials", "seed", "fixed_terms", "rel_tol"}


def _grid(name, values):
    if isinstance(values, Mapping):
        try:
            return tuple(np.linspace(float(values["start"]), float(values["stop"]),
                                     int(values["num"])))
        except KeyError as exc:
            raise ParameterError(name, f"range needs start, stop and num (missing {exc})") from None
    if isinstance(values, (list, tuple)):
        return tuple(float(v) for v in values)
    return (float(values),)


def spec_from_mapping(data: Mapping) -> SweepSpec:
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown spec keys: {sorted(unknown)}")
    spec = scenario(data["scenario"]) if "scenario" in data else SweepSpec()
    base = apply_overrides(spec.base, data.get("base") or {})
    axes = spec.axes
    if "axes" in data:
        raw = data["axes"]
        items = raw.items() if isinstance(raw, Mapping) else [(a["name"], a["values"]) for a in raw]
        axes = tuple((name, _grid(name, values)) for name, values in items)
    policy = spec.policy
    if "fixed_terms" in data or "rel_tol" in data:
        policy = replace(policy, fixed_terms=data.get("fixed_terms", policy.fixed_terms),
                         rel_tol=float(data.get("rel_tol", policy.rel_tol)))
    methods = data.get("methods", spec.methods)
    if isinstance(methods, str):
        methods = [methods]
    return SweepSpec(base=base, axes=axes, methods=tuple(methods),
                     mc_trials=data.get("mc_trials", spec.mc_trials),
                     seed=int(data.get("seed", spec.seed)), policy=policy)


def load_spec(path) -> SweepSpec:
    """Read a YAML sweep description (see README for the format)."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, Mapping):
        raise ValueError(f"{path}: top level must be a mapping")
    return spec_from_mapping(data)
