"""Strict JSON run configuration for the command-line harness.

Every key is checked against an explicit schema; unknown or misplaced keys
raise :class:`ConfigError` naming the offending entry, so a typo in an
experiment file fails loudly instead of silently running with defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .decomposition import Decomposition
from .driver import STRATEGIES, GaspinConfig
from .problems import (HESSIAN_MODES, Bratu, CorruptedGradient, DoubleWell,
                       Problem, Quadratic, Rosenbrock)
from .elasticity import PlaneCompression
from .trust_region import TrustRegionConfig

SOLVER_NAMES = ("tr", "gaspin-tr", "gaspin-damping")
PROBLEM_NAMES = ("quadratic", "rosenbrock", "bratu", "elasticity", "doublewell")
START_KINDS = ("preset", "zeros", "values", "random")

DEFAULT_COMPARE_TOLERANCE = 1e-4


class ConfigError(ValueError):
    """Raised for unreadable, malformed, or out-of-schema configuration."""


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be an object, got {type(value).__name__}")
    return value


def _reject_unknown(section: dict, allowed, where: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in {where}")


def _get_number(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    return float(value)


def _get_int(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    return value


def _get_bool(section: dict, key: str, where: str, default=None):
    if key not in section:
        return default
    value = section[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be a boolean")
    return value


def _get_str(section: dict, key: str, where: str, default=None, choices=None):
    if key not in section:
        return default
    value = section[key]
    if not isinstance(value, str):
        raise ConfigError(f"{where}.{key} must be a string")
    if choices is not None and value not in choices:
        raise ConfigError(
            f"{where}.{key} must be one of {sorted(choices)}, got '{value}'")
    return value


@dataclass(frozen=True)
class ProblemSpec:
    """Parsed problem section; builds the Problem instance on demand."""

    name: str
    params: dict
    corrupt_gradient: float | None = None

    def build(self) -> Problem:
        if self.name == "quadratic":
            problem = Quadratic(**self.params)
        elif self.name == "rosenbrock":
            problem = Rosenbrock(**self.params)
        elif self.name == "bratu":
            problem = Bratu(**self.params)
        elif self.name == "elasticity":
            problem = PlaneCompression(**self.params)
        elif self.name == "doublewell":
            problem = DoubleWell(**self.params)
        else:  # pragma: no cover - guarded by the parser
            raise ConfigError(f"unknown problem '{self.name}'")
        if self.corrupt_gradient is not None:
            problem = CorruptedGradient(problem, offset=self.corrupt_gradient)
        return problem


_PROBLEM_KEYS = {
    "quadratic": {"dim", "matrix"},
    "rosenbrock": {"dim"},
    "bratu": {"grid", "lam"},
    "elasticity": {"mesh", "young", "poisson", "compression", "force"},
    "doublewell": {"dim", "tilt", "coupling"},
}


def parse_problem(section, where: str = "problem") -> ProblemSpec:
    section = _require_mapping(section, where)
    name = _get_str(section, "name", where, choices=PROBLEM_NAMES)
    if name is None:
        raise ConfigError(f"{where}.name is required")
    allowed = _PROBLEM_KEYS[name] | {"name", "corrupt_gradient"}
    _reject_unknown(section, allowed, where)

    params: dict[str, Any] = {}
    if name == "quadratic":
        dim = _get_int(section, "dim", where)
        if dim is None:
            raise ConfigError(f"{where}.dim is required for quadratic")
        params["dim"] = dim
        matrix = _get_str(section, "matrix", where,
                          default="laplacian", choices=("identity", "laplacian"))
        params["matrix"] = matrix
    elif name == "rosenbrock":
        dim = _get_int(section, "dim", where)
        if dim is None:
            raise ConfigError(f"{where}.dim is required for rosenbrock")
        params["dim"] = dim
    elif name == "bratu":
        params["grid"] = _get_int(section, "grid", where, default=16)
        params["lam"] = _get_number(section, "lam", where, default=2.0)
    elif name == "elasticity":
        params["mesh"] = _get_int(section, "mesh", where, default=8)
        params["young"] = _get_number(section, "young", where, default=30.0)
        params["poisson"] = _get_number(section, "poisson", where, default=0.3)
        params["compression"] = _get_number(section, "compression", where,
                                            default=-0.1)
        force = section.get("force", (0.0, 3.0))
        if (not isinstance(force, (list, tuple)) or len(force) != 2
                or any(isinstance(f, bool) or not isinstance(f, (int, float))
                       for f in force)):
            raise ConfigError(f"{where}.force must be a pair of numbers")
        params["force"] = (float(force[0]), float(force[1]))
    elif name == "doublewell":
        params["dim"] = _get_int(section, "dim", where, default=4)
        params["tilt"] = _get_number(section, "tilt", where, default=0.1)
        params["coupling"] = _get_number(section, "coupling", where, default=0.1)

    corrupt = _get_number(section, "corrupt_gradient", where)
    return ProblemSpec(name=name, params=params, corrupt_gradient=corrupt)


@dataclass(frozen=True)
class DecompositionSpec:
    blocks: int
    overlap: int = 0

    def build(self, n: int) -> Decomposition:
        return Decomposition.contiguous(n, self.blocks, overlap=self.overlap)


def parse_decomposition(section, where: str = "decomposition") -> DecompositionSpec:
    section = _require_mapping(section, where)
    _reject_unknown(section, {"blocks", "overlap"}, where)
    blocks = _get_int(section, "blocks", where)
    if blocks is None:
        raise ConfigError(f"{where}.blocks is required")
    overlap = _get_int(section, "overlap", where, default=0)
    if blocks < 1:
        raise ConfigError(f"{where}.blocks must be >= 1")
    if overlap < 0:
        raise ConfigError(f"{where}.overlap must be >= 0")
    return DecompositionSpec(blocks=blocks, overlap=overlap)


@dataclass(frozen=True)
class StartSpec:
    kind: str
    index: int = 0
    values: tuple = ()
    scale: float = 1.0

    def build(self, problem: Problem, seed: int) -> np.ndarray:
        if self.kind == "preset":
            return problem.preset_start(self.index)
        if self.kind == "zeros":
            return np.zeros(problem.dim)
        if self.kind == "values":
            u0 = np.asarray(self.values, dtype=float)
            if u0.shape != (problem.dim,):
                raise ConfigError(
                    f"start.values has length {u0.size}, expected {problem.dim}")
            return u0
        rng = np.random.default_rng(seed)
        return self.scale * rng.standard_normal(problem.dim)


def parse_start(section, where: str = "start") -> StartSpec:
    section = _require_mapping(section, where)
    kind = _get_str(section, "kind", where, choices=START_KINDS)
    if kind is None:
        raise ConfigError(f"{where}.kind is required")
    allowed = {"kind"}
    if kind == "preset":
        allowed.add("index")
    elif kind == "values":
        allowed.add("values")
    elif kind == "random":
        allowed.add("scale")
    _reject_unknown(section, allowed, where)
    index = _get_int(section, "index", where, default=0)
    scale = _get_number(section, "scale", where, default=1.0)
    values: tuple = ()
    if kind == "values":
        raw = section.get("values")
        if not isinstance(raw, list) or any(
                isinstance(v, bool) or not isinstance(v, (int, float))
                for v in raw):
            raise ConfigError(f"{where}.values must be a list of numbers")
        values = tuple(float(v) for v in raw)
    return StartSpec(kind=kind, index=index, values=values, scale=scale)


_TRUST_REGION_KEYS = ("eta", "gamma1", "gamma2", "delta0", "max_iters",
                      "grad_tol", "cg_tol", "max_cg", "hessian_mode")
_GASPIN_KEYS = ("c1", "c2", "deltaL0", "local_max_iters", "local_grad_tol",
                "local_delta0", "omega_fraction", "omega_rule", "block_floor",
                "bound_deltaL_with_updated_deltaG")


def _parse_tr_fields(section: dict, where: str) -> dict:
    out: dict[str, Any] = {}
    for key in ("eta", "gamma1", "gamma2", "delta0", "grad_tol", "cg_tol"):
        value = _get_number(section, key, where)
        if value is not None:
            out[key] = value
    for key in ("max_iters", "max_cg"):
        value = _get_int(section, key, where)
        if value is not None:
            out[key] = value
    mode = _get_str(section, "hessian_mode", where, choices=HESSIAN_MODES)
    if mode is not None:
        out["hessian_mode"] = mode
    return out


def _parse_gaspin_fields(section: dict, where: str) -> dict:
    out: dict[str, Any] = {}
    for key in ("c1", "c2", "deltaL0", "local_grad_tol", "local_delta0",
                "omega_fraction", "block_floor"):
        value = _get_number(section, key, where)
        if value is not None:
            out[key] = value
    value = _get_int(section, "local_max_iters", where)
    if value is not None:
        out["local_max_iters"] = value
    rule = _get_str(section, "omega_rule", where,
                    choices=("inverse-norm", "deltaL-scaled"))
    if rule is not None:
        out["omega_rule"] = rule
    flag = _get_bool(section, "bound_deltaL_with_updated_deltaG", where)
    if flag is not None:
        out["bound_deltaL_with_updated_deltaG"] = flag
    return out


_OUTPUT_KEYS = ("trace", "summary", "compare", "schwarz")

_TOP_KEYS_BY_COMMAND = {
    "run": {"problem", "decomposition", "solver", "start", "trust_region",
            "gaspin", "workers", "seed", "output"},
    "compare": {"problem", "decomposition", "solvers", "start", "trust_region",
                "gaspin", "workers", "seed", "compare_tolerance", "output"},
    "check": {"problems", "decomposition", "seed", "output"},
    "dump-schwarz": {"problem", "decomposition", "start", "trust_region",
                     "gaspin", "seed", "output"},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully parsed configuration for one harness invocation."""

    command: str
    problem: ProblemSpec | None = None
    problems: tuple[ProblemSpec, ...] = ()
    decomposition: DecompositionSpec | None = None
    solvers: tuple[str, ...] = ()
    start: StartSpec | None = None
    tr_fields: dict = dataclasses.field(default_factory=dict)
    gaspin_fields: dict = dataclasses.field(default_factory=dict)
    workers: int = 1
    seed: int = 0
    compare_tolerance: float = DEFAULT_COMPARE_TOLERANCE
    output: dict = dataclasses.field(default_factory=dict)

    def trust_region_config(self) -> TrustRegionConfig:
        try:
            return TrustRegionConfig(**self.tr_fields)
        except ValueError as exc:
            raise ConfigError(f"invalid trust_region settings: {exc}") from exc

    def gaspin_config(self, solver: str) -> GaspinConfig:
        strategy = solver.removeprefix("gaspin-")
        if strategy not in STRATEGIES:  # pragma: no cover - guarded by parser
            raise ConfigError(f"'{solver}' is not a G-ASPIN solver")
        try:
            return GaspinConfig(strategy=strategy, workers=self.workers,
                                **self.tr_fields, **self.gaspin_fields)
        except ValueError as exc:
            raise ConfigError(f"invalid gaspin settings: {exc}") from exc

    def output_name(self, key: str, default: str) -> str:
        return self.output.get(key, default)


def parse_config(document, command: str) -> RunConfig:
    """Validate a decoded JSON document for the given subcommand."""
    if command not in _TOP_KEYS_BY_COMMAND:  # pragma: no cover - CLI guards
        raise ConfigError(f"unknown command '{command}'")
    document = _require_mapping(document, "config")
    allowed = _TOP_KEYS_BY_COMMAND[command]
    for key in document:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in config for {command}")

    problem = None
    problems: tuple[ProblemSpec, ...] = ()
    if command == "check":
        raw = document.get("problems")
        if not isinstance(raw, list) or len(raw) == 0:
            raise ConfigError("check requires a non-empty 'problems' list")
        problems = tuple(parse_problem(entry, where=f"problems[{i}]")
                         for i, entry in enumerate(raw))
    else:
        if "problem" not in document:
            raise ConfigError(f"{command} requires a 'problem' section")
        problem = parse_problem(document["problem"])

    decomposition = None
    if "decomposition" in document:
        decomposition = parse_decomposition(document["decomposition"])

    solvers: tuple[str, ...] = ()
    if command == "run":
        solver = _get_str(document, "solver", "config", choices=SOLVER_NAMES)
        if solver is None:
            raise ConfigError("run requires a 'solver' entry")
        solvers = (solver,)
    elif command == "compare":
        raw = document.get("solvers")
        if not isinstance(raw, list):
            raise ConfigError("compare requires a 'solvers' list")
        for entry in raw:
            if not isinstance(entry, str) or entry not in SOLVER_NAMES:
                raise ConfigError(
                    f"solvers entries must be in {sorted(SOLVER_NAMES)},"
                    f" got {entry!r}")
        if len(set(raw)) != len(raw):
            raise ConfigError("solvers entries must be distinct")
        if len(raw) < 2:
            raise ConfigError("compare requires at least two solvers")
        solvers = tuple(raw)

    start = None
    if command in ("run", "compare", "dump-schwarz"):
        if "start" not in document:
            raise ConfigError(f"{command} requires a 'start' section")
        start = parse_start(document["start"])

    tr_fields: dict = {}
    if "trust_region" in document:
        section = _require_mapping(document["trust_region"], "trust_region")
        _reject_unknown(section, _TRUST_REGION_KEYS, "trust_region")
        tr_fields = _parse_tr_fields(section, "trust_region")

    gaspin_fields: dict = {}
    if "gaspin" in document:
        section = _require_mapping(document["gaspin"], "gaspin")
        _reject_unknown(section, _GASPIN_KEYS, "gaspin")
        gaspin_fields = _parse_gaspin_fields(section, "gaspin")

    workers = _get_int(document, "workers", "config", default=1)
    if workers is not None and workers < 0:
        raise ConfigError("workers must be >= 0")
    seed = _get_int(document, "seed", "config", default=0)
    tolerance = _get_number(document, "compare_tolerance", "config",
                            default=DEFAULT_COMPARE_TOLERANCE)
    if tolerance <= 0:
        raise ConfigError("compare_tolerance must be positive")

    output: dict = {}
    if "output" in document:
        section = _require_mapping(document["output"], "output")
        _reject_unknown(section, _OUTPUT_KEYS, "output")
        for key in _OUTPUT_KEYS:
            name = _get_str(section, key, "output")
            if name is not None:
                output[key] = name

    needs_decomp = command in ("check", "dump-schwarz") or any(
        s.startswith("gaspin-") for s in solvers)
    if needs_decomp and decomposition is None:
        raise ConfigError(f"{command} requires a 'decomposition' section here")

    return RunConfig(command=command, problem=problem, problems=problems,
                     decomposition=decomposition, solvers=solvers, start=start,
                     tr_fields=tr_fields, gaspin_fields=gaspin_fields,
                     workers=workers, seed=seed, compare_tolerance=tolerance,
                     output=output)


def load_config(path, command: str) -> RunConfig:
    """Read and validate a JSON config file for the given subcommand."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return parse_config(document, command)
