"""Run configuration: INI-style sections of ``key = value`` pairs.

Example::

    [model]
    family = quadratic-potts
    q = 3
    beta = 2.8046245
    B = 0.3

    [weights]
    samples = 1000000
    seed = 0

Lists are comma separated.  ``none`` (or an empty value) leaves an optional
entry unset.  Every key has a default, so a file only needs what differs.
"""

import configparser
import dataclasses
import io
import typing
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError
from .free_energy import SolverOptions
from .model import (
    general_ising_model,
    ising_model,
    make_polynomial_ising,
    potts_model,
)

FAMILIES = ("quadratic-ising", "general-ising", "quadratic-potts")


@dataclass
class ModelConfig:
    family: str = "quadratic-ising"
    beta: float = 1.0
    q: int = 3
    B: float = 0.0
    fields: typing.List[float] = field(default_factory=lambda: [0.0])
    pi: typing.Optional[typing.List[float]] = None
    # G(m) = beta * sum_k coefficients[k] m^k for the general-ising family
    coefficients: typing.List[float] = field(default_factory=lambda: [0.0, 0.0, -0.5])


@dataclass
class SolverConfig:
    random_starts: int = 64
    damping: float = 0.5
    max_iterations: int = 10_000
    newton_steps: int = 50
    residual_tolerance: float = 1e-10
    dedup_tolerance: float = 1e-6
    global_gap_tolerance: float = 1e-8
    eigenvalue_threshold: float = 1e-8
    seed: int = 0


@dataclass
class WeightsConfig:
    samples: int = 1_000_000
    seed: int = 0
    lp_tolerance: float = 1e-9
    pair_tolerance: float = 1e-8


@dataclass
class SimulateConfig:
    n: typing.List[int] = field(default_factory=lambda: [20, 40])
    samples: int = 100
    epsilon: typing.Optional[float] = None
    threshold: float = 0.5
    seed: int = 0
    budget: int = 10**9


@dataclass
class ScanConfig:
    axis: str = "beta"
    lower: float = 2.5
    upper: float = 3.2
    tolerance: float = 1e-6
    other_axis: typing.Optional[str] = None
    other_values: typing.List[float] = field(default_factory=list)


@dataclass
class PlotConfig:
    points: int = 400
    u_max: float = 0.9


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    plot: PlotConfig = field(default_factory=PlotConfig)

    def solver_options(self):
        return SolverOptions(**dataclasses.asdict(self.solver))


def _hints(cls):
    return typing.get_type_hints(cls)


def _parse_scalar(text, kind):
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    return kind(text)


def _parse_value(text, hint, where):
    text = text.strip()
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    try:
        if origin is typing.Union and type(None) in args:
            if text.lower() in ("", "none"):
                return None
            inner = next(a for a in args if a is not type(None))
            return _parse_value(text, inner, where)
        if origin in (list, typing.List):
            if not text:
                return []
            return [_parse_scalar(t.strip(), args[0]) for t in text.split(",")]
        if hint is int:
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError(text)
            return int(as_float)
        return _parse_scalar(text, hint)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}: cannot parse {text!r}") from None


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, list):
        return ", ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text):
    """Parse configuration text into a ``RunConfig``; unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed configuration: {exc}") from None
    sections = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    hints_run = _hints(RunConfig)
    values = {}
    for name in parser.sections():
        if name not in sections:
            raise ValidationError(f"unknown section [{name}]")
        cls = hints_run[name]
        hints = _hints(cls)
        kwargs = {}
        for key, raw in parser.items(name):
            if key not in hints:
                raise ValidationError(f"unknown key {key!r} in [{name}]")
            kwargs[key] = _parse_value(raw, hints[key], f"[{name}] {key}")
        values[name] = cls(**kwargs)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg):
    """Serialise every field of ``cfg``; ``parse_config`` inverts this exactly."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        parser[f.name] = {k: _format_value(v) for k, v in dataclasses.asdict(section).items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def apply_override(cfg, assignment):
    """Apply ``section.key=value`` to ``cfg`` in place."""
    if "=" not in assignment or "." not in assignment.split("=", 1)[0]:
        raise ValidationError(f"override must look like section.key=value, got {assignment!r}")
    lhs, raw = assignment.split("=", 1)
    section_name, key = lhs.strip().split(".", 1)
    if section_name not in _hints(RunConfig):
        raise ValidationError(f"unknown section {section_name!r}")
    section = getattr(cfg, section_name)
    hints = _hints(type(section))
    if key not in hints:
        raise ValidationError(f"unknown key {key!r} in [{section_name}]")
    setattr(section, key, _parse_value(raw, hints[key], lhs))


def validate_config(cfg):
    m = cfg.model
    if m.family not in FAMILIES:
        raise ValidationError(f"model family must be one of {FAMILIES}, got {m.family!r}")
    if m.family == "quadratic-potts":
        n_types = m.q
    else:
        if not m.fields:
            raise ValidationError("the Ising families need at least one field value")
        n_types = len(m.fields)
    if m.pi is not None:
        if len(m.pi) != n_types:
            raise ValidationError(f"pi needs {n_types} weights, got {len(m.pi)}")
        if any(w <= 0 for w in m.pi):
            raise ValidationError("pi weights must be positive")
    if cfg.scan.tolerance <= 0:
        raise ValidationError("scan tolerance must be positive")
    if any(n < 1 for n in cfg.simulate.n):
        raise ValidationError("simulate n values must be positive")
    return cfg


def normalised_pi(m, n_types):
    if m.pi is None:
        return None
    w = np.asarray(m.pi, dtype=float)
    return w / w.sum()


def build_model(m):
    """Construct the ``ModelSpec`` described by a ``ModelConfig``."""
    if m.family == "quadratic-potts":
        return potts_model(m.q, m.beta, m.B, normalised_pi(m, m.q))
    pi = normalised_pi(m, len(m.fields))
    if m.family == "quadratic-ising":
        return ising_model(m.beta, m.fields, pi)
    F = make_polynomial_ising(m.beta * np.asarray(m.coefficients, dtype=float))
    return general_ising_model(F, m.fields, pi)
