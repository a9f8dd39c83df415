"""Run configuration: a TOML document with five blocks.

Every key is optional; missing keys take the defaults below. Unknown keys
are errors. A coefficient function is written either as a number (a
constant), an ascending coefficient list, or a table
``{coefficients = [...], interval = [lo, hi], smoothing = w}``.

::

    [grid]
    nx = 64
    ny = 64
    lx = 1.0
    ly = 1.0

    [model]
    variant = "full"            # or "reduced"
    c0 = 0.001
    eps1 = 0.001
    eps2 = 0.001
    penalty_margin = 0.5
    test_mode = false
    bounds = [0.5, 2.0]
    derivative_bound = 10.0

    [model.coefficients]
    n = 1.0
    A = 1.0
    h = 1.0
    eta = 1.0
    tau_b = 1.0
    # m = ...                   # defaults to n**2

    [model.potential]
    family = "ginzburg_landau"  # or "polynomial" with coefficients = [...]

    [scheme]
    dt = 0.0001
    t_end = 0.1
    cadence = 10
    dealias = true
    s_phi = 0.0
    s_q = 0.0
    cfl = 0.25
    # max_steps, m0, A0, eta0 are optional

    [experiment]
    kind = "spinodal"
    seed = 0
    phi_mean = 0.5
    noise = 0.05
    velocity = 0.1
    eps = 0.001
    amplitudes = [0.01, 0.001, 0.0001]
    perturbation_seed = 1
    perturbation_fields = ["phi", "q", "u", "c"]

    [output]
    directory = "output"
    formats = ["csv"]           # add "snapshot" for the final state
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Any

import tomli
import tomli_w

from .coeffs import (DEFAULT_INTERVAL, DEFAULT_SMOOTHING, CoefficientSet, PotentialSpec,
                     ScalarFunction, ValidationReport, compute_c4, min_penalty,
                     validate_assumptions)
from .dynamics import ModelParams
from .grid import Grid
from .state import INITIAL_KINDS, Perturbation
from .timestep import SchemeConfig

OUTPUT_FORMATS = ("csv", "snapshot")
COEFFICIENT_NAMES = ("n", "A", "h", "eta", "tau_b", "m")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending key when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = f"{path}: " if path else ""
        super().__init__(where + message)

    def to_dict(self) -> dict:
        return {"error": "config", "message": str(self), "path": self.path, "line": self.line}


@dataclass(frozen=True)
class GridConfig:
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0


def _default_coefficients() -> dict:
    defaults = CoefficientSet()
    return {name: getattr(defaults, name) for name in COEFFICIENT_NAMES if name != "m"}


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "full"
    c0: float = 1e-3
    eps1: float = 1e-3
    eps2: float = 1e-3
    penalty_margin: float = 0.5
    test_mode: bool = False
    bounds: tuple[float, float] = (0.5, 2.0)
    derivative_bound: float = 10.0
    coefficients: dict = field(default_factory=_default_coefficients)
    potential: PotentialSpec = field(default_factory=PotentialSpec)

    @property
    def reduced(self) -> bool:
        return self.variant == "reduced"


@dataclass(frozen=True)
class SchemeBlock:
    dt: float = 1e-4
    t_end: float = 0.1
    cadence: int = 10
    dealias: bool = True
    s_phi: float = 0.0
    s_q: float = 0.0
    cfl: float = 0.25
    max_steps: int | None = None
    m0: float | None = None
    A0: float | None = None
    eta0: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "spinodal"
    seed: int = 0
    phi_mean: float = 0.5
    noise: float = 0.05
    velocity: float = 0.1
    eps: float = 1e-3
    amplitudes: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    perturbation_seed: int = 1
    perturbation_fields: tuple[str, ...] = ("phi", "q", "u", "c")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    scheme: SchemeBlock = field(default_factory=SchemeBlock)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- builders ---------------------------------------------------------
    def build_grid(self) -> Grid:
        g = self.grid
        return Grid(g.nx, g.ny, g.lx, g.ly, dealias=self.scheme.dealias)

    def coefficient_set(self) -> CoefficientSet:
        m = self.model
        fns = {**_default_coefficients(), **m.coefficients}
        fns.pop("m", None)
        return CoefficientSet(**fns, m_explicit=m.coefficients.get("m"), bounds=m.bounds,
                              derivative_bound=m.derivative_bound, test_mode=m.test_mode)

    def build_model(self) -> ModelParams:
        m = self.model
        return ModelParams(self.coefficient_set(), m.potential, m.c0, m.eps1, m.eps2)

    def scheme_config(self) -> SchemeConfig:
        s = self.scheme
        return SchemeConfig(dt=s.dt, s_phi=s.s_phi, s_q=s.s_q, m0=s.m0, A0=s.A0, eta0=s.eta0,
                            cadence=s.cadence, max_steps=s.max_steps, cfl=s.cfl)

    def penalty(self) -> float:
        return min_penalty(compute_c4(self.model.potential), self.model.penalty_margin)

    def perturbation(self, amplitude: float | None = None) -> Perturbation:
        e = self.experiment
        amp = e.eps if amplitude is None else amplitude
        return Perturbation(amp, e.perturbation_seed, e.perturbation_fields)

    def validate(self) -> ValidationReport:
        return validate_assumptions(self.coefficient_set(), self.model.potential)

    def replace(self, block: str, **changes) -> "RunConfig":
        """Copy with some keys of one block changed, re-checked like parsed input."""
        updated = dataclasses.replace(getattr(self, block), **changes)
        cfg = dataclasses.replace(self, **{block: updated})
        _check_invariants(cfg)
        return cfg

    def to_dict(self) -> dict:
        return _to_dict(self)


# -- parsing ----------------------------------------------------------------------------

def _expect(value, kind, path: str):
    if kind is bool:
        if not isinstance(value, bool):
            raise ConfigError("expected a boolean", path)
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", path)
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", path)
        return float(value)
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError("expected a string", path)
        return value
    raise TypeError(kind)


def _expect_list(value, kind, path: str, length: int | None = None) -> tuple:
    if not isinstance(value, list):
        raise ConfigError("expected an array", path)
    if length is not None and len(value) != length:
        raise ConfigError(f"expected {length} entries, got {len(value)}", path)
    return tuple(_expect(v, kind, f"{path}[{i}]") for i, v in enumerate(value))


def _table(doc: dict, key: str, path: str) -> dict:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ConfigError("expected a table", path)
    return value


def _reject_unknown(table: dict, allowed, path: str) -> None:
    for key in table:
        if key not in allowed:
            full = f"{path}.{key}" if path else key
            raise ConfigError("unknown key", full)


_FIELD_KINDS = {
    GridConfig: {"nx": int, "ny": int, "lx": float, "ly": float},
    SchemeBlock: {"dt": float, "t_end": float, "cadence": int, "dealias": bool, "s_phi": float,
                  "s_q": float, "cfl": float, "max_steps": int, "m0": float, "A0": float,
                  "eta0": float},
    OutputConfig: {"directory": str, "formats": (list, str)},
    ExperimentConfig: {"kind": str, "seed": int, "phi_mean": float, "noise": float,
                       "velocity": float, "eps": float, "amplitudes": (list, float),
                       "perturbation_seed": int, "perturbation_fields": (list, str)},
}


def _simple_block(cls, table: dict, path: str):
    kinds = _FIELD_KINDS[cls]
    _reject_unknown(table, kinds, path)
    kw = {}
    for key, kind in kinds.items():
        if key not in table:
            continue
        p = f"{path}.{key}"
        kw[key] = _expect_list(table[key], kind[1], p) if isinstance(kind, tuple) \
            else _expect(table[key], kind, p)
    return cls(**kw)


def _scalar_function(value, path: str) -> ScalarFunction:
    try:
        if isinstance(value, dict):
            _reject_unknown(value, ("coefficients", "interval", "smoothing"), path)
            raw = value.get("coefficients", [1.0])
            coeffs = _expect_list(raw if isinstance(raw, list) else [raw], float, f"{path}.coefficients")
            interval = _expect_list(value.get("interval", list(DEFAULT_INTERVAL)), float,
                                    f"{path}.interval", 2)
            smoothing = _expect(value.get("smoothing", DEFAULT_SMOOTHING), float, f"{path}.smoothing")
            return ScalarFunction(coeffs, interval, smoothing)
        if isinstance(value, list):
            return ScalarFunction(_expect_list(value, float, path))
        return ScalarFunction.constant(_expect(value, float, path))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None


def _model_block(table: dict) -> ModelConfig:
    kinds = {"variant": str, "c0": float, "eps1": float, "eps2": float, "penalty_margin": float,
             "test_mode": bool, "derivative_bound": float}
    _reject_unknown(table, set(kinds) | {"bounds", "coefficients", "potential"}, "model")
    kw = {k: _expect(table[k], kind, f"model.{k}") for k, kind in kinds.items() if k in table}
    if "bounds" in table:
        kw["bounds"] = _expect_list(table["bounds"], float, "model.bounds", 2)

    coeff_table = _table(table, "coefficients", "model.coefficients")
    _reject_unknown(coeff_table, COEFFICIENT_NAMES, "model.coefficients")
    fns = _default_coefficients()
    for name in COEFFICIENT_NAMES:
        if name in coeff_table:
            fns[name] = _scalar_function(coeff_table[name], f"model.coefficients.{name}")
    kw["coefficients"] = fns

    pot = _table(table, "potential", "model.potential")
    _reject_unknown(pot, ("family", "coefficients"), "model.potential")
    family = _expect(pot.get("family", "ginzburg_landau"), str, "model.potential.family")
    pcoeffs = _expect_list(pot.get("coefficients", []), float, "model.potential.coefficients")
    if family == "ginzburg_landau" and pcoeffs:
        raise ConfigError("coefficients are fixed for the ginzburg_landau family",
                          "model.potential.coefficients")
    try:
        kw["potential"] = PotentialSpec(family, pcoeffs)
    except ValueError as exc:
        raise ConfigError(str(exc), "model.potential") from None
    return ModelConfig(**kw)


def _check(cond: bool, message: str, path: str) -> None:
    if not cond:
        raise ConfigError(message, path)


def _check_invariants(cfg: RunConfig) -> None:
    g, m, s, e, o = cfg.grid, cfg.model, cfg.scheme, cfg.experiment, cfg.output
    for key in ("nx", "ny"):
        n = getattr(g, key)
        _check(n >= 8 and n % 2 == 0, f"must be even and >= 8, got {n}", f"grid.{key}")
    for key in ("lx", "ly"):
        _check(getattr(g, key) > 0, "must be positive", f"grid.{key}")

    _check(m.variant in ("full", "reduced"), "must be 'full' or 'reduced'", "model.variant")
    _check(m.c0 > 0, "must be positive", "model.c0")
    for key in ("eps1", "eps2", "penalty_margin"):
        _check(getattr(m, key) >= 0, "must be non-negative", f"model.{key}")
    _check(0 < m.bounds[0] <= m.bounds[1], "must satisfy 0 < lower <= upper", "model.bounds")
    _check(m.derivative_bound > 0, "must be positive", "model.derivative_bound")

    _check(s.dt > 0, "must be positive", "scheme.dt")
    _check(s.t_end > 0, "must be positive", "scheme.t_end")
    _check(s.cadence >= 1, "must be >= 1", "scheme.cadence")
    _check(s.s_phi >= 0, "must be non-negative", "scheme.s_phi")
    _check(s.s_q >= 0, "must be non-negative", "scheme.s_q")
    _check(0 < s.cfl <= 1, "must lie in (0, 1]", "scheme.cfl")
    _check(s.max_steps is None or s.max_steps >= 0, "must be non-negative", "scheme.max_steps")
    for key in ("m0", "A0", "eta0"):
        v = getattr(s, key)
        _check(v is None or v > 0, "must be positive", f"scheme.{key}")

    _check(e.kind in INITIAL_KINDS, f"must be one of {', '.join(INITIAL_KINDS)}", "experiment.kind")
    _check(e.seed >= 0, "must be non-negative", "experiment.seed")
    _check(e.perturbation_seed >= 0, "must be non-negative", "experiment.perturbation_seed")
    _check(e.noise >= 0, "must be non-negative", "experiment.noise")
    _check(e.eps >= 0, "must be non-negative", "experiment.eps")
    _check(len(e.amplitudes) > 0, "must not be empty", "experiment.amplitudes")
    _check(all(a > 0 for a in e.amplitudes), "entries must be positive", "experiment.amplitudes")
    _check(all(b < a for a, b in zip(e.amplitudes, e.amplitudes[1:])),
           "entries must be strictly descending", "experiment.amplitudes")
    bad = set(e.perturbation_fields) - {"phi", "q", "u", "c"}
    _check(not bad, f"unknown fields {sorted(bad)}", "experiment.perturbation_fields")

    _check(bool(o.directory), "must not be empty", "output.directory")
    bad = set(o.formats) - set(OUTPUT_FORMATS)
    _check(not bad, f"unknown formats {sorted(bad)}", "output.formats")


def parse_config(text: str, check_assumptions: bool = True) -> RunConfig:
    """Parse and validate a TOML run configuration.

    With ``check_assumptions`` the coefficient set must also pass
    :func:`validate_assumptions`, unless ``model.test_mode`` is set.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            found = re.search(r"line (\d+)", str(exc))
            line = int(found.group(1)) if found else None
        raise ConfigError(f"syntax error: {exc}", line=line) from None

    _reject_unknown(doc, ("grid", "model", "scheme", "experiment", "output"), "")
    cfg = RunConfig(
        grid=_simple_block(GridConfig, _table(doc, "grid", "grid"), "grid"),
        model=_model_block(_table(doc, "model", "model")),
        scheme=_simple_block(SchemeBlock, _table(doc, "scheme", "scheme"), "scheme"),
        experiment=_simple_block(ExperimentConfig, _table(doc, "experiment", "experiment"),
                                 "experiment"),
        output=_simple_block(OutputConfig, _table(doc, "output", "output"), "output"),
    )
    _check_invariants(cfg)
    if check_assumptions and not cfg.model.test_mode:
        report = cfg.validate()
        if not report.passed:
            names = ", ".join(c.name for c in report.failed())
            raise ConfigError(f"coefficient assumptions violated: {names}", "model")
    return cfg


def load_config(path, check_assumptions: bool = True) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config is not UTF-8: {exc}") from None
    return parse_config(text, check_assumptions)


# -- serialization ----------------------------------------------------------------------

def _function_to_toml(fn: ScalarFunction):
    if fn.interval == tuple(DEFAULT_INTERVAL) and fn.smoothing == DEFAULT_SMOOTHING:
        return fn.to_config()
    return {"coefficients": list(fn.coefficients), "interval": list(fn.interval),
            "smoothing": fn.smoothing}


def _plain(value) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    return value


def _to_dict(cfg: RunConfig) -> dict:
    out: dict[str, Any] = {}
    for block in ("grid", "scheme", "experiment", "output"):
        obj = getattr(cfg, block)
        out[block] = {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                      if getattr(obj, f.name) is not None}
    m = cfg.model
    model = {k: _plain(getattr(m, k)) for k in ("variant", "c0", "eps1", "eps2", "penalty_margin",
                                                 "test_mode", "bounds", "derivative_bound")}
    model["coefficients"] = {name: _function_to_toml(fn) for name, fn in m.coefficients.items()}
    pot = {"family": m.potential.family}
    if m.potential.family == "polynomial":
        pot["coefficients"] = list(m.potential.coefficients)
    model["potential"] = pot
    out["model"] = model
    return {k: out[k] for k in ("grid", "model", "scheme", "experiment", "output")}


def serialize_config(cfg: RunConfig) -> str:
    """Normalized TOML: every key explicit, optional unset keys omitted."""
    return tomli_w.dumps(cfg.to_dict())
