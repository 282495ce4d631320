"""Experiment configuration: an INI document with one section per module.

Every constant of the reproduction run is spelled out, so a changed setting
shows up as a one-line diff. ``parse_config(serialize_config(c)) == c``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .control import AdaptiveFuzzyController, PidController, ReferenceSignal
from .exceptions import ConfigError
from .fcm import FcmConfig
from .plant import SurrogateParams

#: Report row order.
REFERENCE_IDS = ("constant", "sine", "square", "step1", "step2", "step3")
CONTROLLER_IDS = ("pid", "fuzzy")


@dataclass(frozen=True)
class ExcitationConfig:
    duration: float = 100.0
    dt: float = 0.01
    seed: int = 0


@dataclass(frozen=True)
class IdentificationConfig:
    c: int = 3
    m: float = 2.0
    tol: float = 1e-6
    max_iter: int = 200
    restarts: int = 1
    seed: int = 0
    ridge: float = 1e-8
    add_rule_threshold: float | None = None
    max_rules: int = 10
    # acceptance bound on training rmse / channel std, fixed at calibration
    rmse_threshold: float = 0.05

    def fcm_config(self):
        return FcmConfig(
            c=self.c,
            m=self.m,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
            restarts=self.restarts,
        )


@dataclass(frozen=True)
class FuzzyConfig:
    n_mfs: int = 5
    error_range: tuple = (-10.0, 10.0)
    rate_range: tuple = (-5.0, 5.0)
    learning_rate: float = 2000.0
    window: int = 1000
    retune_period: float = 2.0
    width_floor_error: float = 0.1
    width_floor_rate: float = 2.0
    dz_du_sign: float = 1.0
    fcm_m: float = 2.0
    fcm_tol: float = 1e-6
    fcm_max_iter: int = 100
    rate_filter: float = 0.8


@dataclass(frozen=True)
class PidConfig:
    # grid-search optimum of constant-reference RMSE on the surrogate plant
    kp: float = 50.0
    ki: float = 0.1
    kd: float = 0.0
    grid_kp: tuple = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
    grid_ki: tuple = (0.0, 0.1, 0.5, 1.0, 2.0)
    grid_kd: tuple = (0.0, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class LoopConfig:
    duration: float = 100.0
    dt: float = 0.01
    z0: float = 0.0
    seed: int = 0


def default_references():
    return {
        "constant": ReferenceSignal("constant", amplitude=10.0),
        "sine": ReferenceSignal("sine", amplitude=1.0, frequency=1.0),
        "square": ReferenceSignal("square", amplitude=1.0, frequency=0.1),
        "step1": ReferenceSignal("step", steps=((20.0, 10.0),)),
        "step2": ReferenceSignal("step", steps=((0.0, 5.0), (20.0, 5.0))),
        "step3": ReferenceSignal("step", steps=((0.0, -5.0), (20.0, 10.0))),
    }


@dataclass(frozen=True)
class ExperimentConfig:
    plant: SurrogateParams = field(default_factory=SurrogateParams)
    excitation: ExcitationConfig = field(default_factory=ExcitationConfig)
    identification: IdentificationConfig = field(default_factory=IdentificationConfig)
    fuzzy: FuzzyConfig = field(default_factory=FuzzyConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    references: dict = field(default_factory=default_references)
    out_dir: str = "results"

    def with_seed(self, seed):
        seed = int(seed)
        return dataclasses.replace(
            self,
            excitation=dataclasses.replace(self.excitation, seed=seed),
            identification=dataclasses.replace(self.identification, seed=seed),
            loop=dataclasses.replace(self.loop, seed=seed),
        )

    def make_controller(self, controller_id):
        limits = self.plant.command_limits
        if controller_id == "pid":
            return PidController(self.pid.kp, self.pid.ki, self.pid.kd, limits)
        if controller_id == "fuzzy":
            kw = dataclasses.asdict(self.fuzzy)
            kw.pop("rate_filter")
            return AdaptiveFuzzyController(output_limits=limits, seed=self.loop.seed, **kw)
        raise ConfigError(
            f"unknown controller id {controller_id!r}; expected one of {CONTROLLER_IDS}"
        )

    def reference(self, reference_id):
        try:
            return self.references[reference_id]
        except KeyError:
            raise ConfigError(
                f"unknown reference id {reference_id!r}; expected one of "
                f"{tuple(self.references)}"
            ) from None


_SECTIONS = ("plant", "excitation", "identification", "fuzzy", "pid", "loop")


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(float(v)) for v in value)
    return str(value)


def _parse_value(text, default, where):
    text = text.strip()
    try:
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip())
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError("expected true or false")
            return text.lower() == "true"
        if isinstance(default, int):
            return int(text)
        if default is None or isinstance(default, float):
            if text.lower() == "none":
                return None
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {text!r}: {exc}") from None


def _format_reference(ref):
    if ref.kind == "step":
        body = " ".join(f"{_format_value(t)}:{_format_value(a)}" for t, a in ref.steps)
        parts = ["step", body]
        if ref.offset:
            parts.append(f"offset={_format_value(ref.offset)}")
        return " ".join(p for p in parts if p)
    parts = [ref.kind, f"amplitude={_format_value(ref.amplitude)}"]
    if ref.kind != "constant":
        parts.append(f"frequency={_format_value(ref.frequency)}")
    if ref.offset:
        parts.append(f"offset={_format_value(ref.offset)}")
    return " ".join(parts)


def _parse_reference(text, where):
    tokens = text.split()
    if not tokens:
        raise ConfigError(f"{where}: empty reference definition")
    kind, kwargs, steps = tokens[0], {}, []
    try:
        for tok in tokens[1:]:
            if "=" in tok:
                key, val = tok.split("=", 1)
                if key not in ("amplitude", "frequency", "offset"):
                    raise ValueError(f"unknown reference parameter {key!r}")
                kwargs[key] = float(val)
            elif ":" in tok and kind == "step":
                t0, a = tok.split(":", 1)
                steps.append((float(t0), float(a)))
            else:
                raise ValueError(f"unexpected token {tok!r}")
        return ReferenceSignal(kind, steps=tuple(steps), **kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def serialize_config(config):
    parser = configparser.ConfigParser(interpolation=None)
    for name in _SECTIONS:
        section = getattr(config, name)
        parser[name] = {
            f.name: _format_value(getattr(section, f.name)) for f in dataclasses.fields(section)
        }
    parser["references"] = {k: _format_reference(v) for k, v in config.references.items()}
    parser["output"] = {"out_dir": config.out_dir}
    lines = []
    for name in parser.sections():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in parser[name].items())
        lines.append("")
    return "\n".join(lines)


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=str(source))
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = set(_SECTIONS) | {"references", "output"}
    unknown = set(parser.sections()) - known
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")

    base = ExperimentConfig()
    sections = {}
    for name in _SECTIONS:
        default = getattr(base, name)
        values = {}
        if parser.has_section(name):
            fields = {f.name: f for f in dataclasses.fields(default)}
            for key, raw in parser[name].items():
                if key not in fields:
                    raise ConfigError(f"{source}: [{name}] {key}: unknown key")
                values[key] = _parse_value(raw, getattr(default, key), f"[{name}] {key}")
        try:
            sections[name] = dataclasses.replace(default, **values)
        except (ConfigError, ValueError, TypeError) as exc:
            raise ConfigError(f"{source}: [{name}]: {exc}") from None

    if parser.has_section("references"):
        references = {
            key: _parse_reference(raw, f"[references] {key}")
            for key, raw in parser["references"].items()
        }
    else:
        references = default_references()
    out_dir = parser.get("output", "out_dir", fallback=base.out_dir)
    config = ExperimentConfig(references=references, out_dir=out_dir, **sections)
    validate_config(config, source)
    return config


def validate_config(config, source="<config>"):
    def fail(where, msg):
        raise ConfigError(f"{source}: {where}: {msg}")

    for name, sec in (("excitation", config.excitation), ("loop", config.loop)):
        if not sec.duration > 0:
            fail(f"[{name}] duration", "must be > 0")
        if not sec.dt > 0:
            fail(f"[{name}] dt", "must be > 0")
    try:
        config.identification.fcm_config()
    except ConfigError as exc:
        fail("[identification]", str(exc))
    if not 0.0 <= config.fuzzy.rate_filter < 1.0:
        fail("[fuzzy] rate_filter", "must lie in [0, 1)")
    if len(config.fuzzy.error_range) != 2 or len(config.fuzzy.rate_range) != 2:
        fail("[fuzzy] error_range/rate_range", "need exactly two values")
    try:
        config.make_controller("fuzzy")
    except ConfigError as exc:
        fail("[fuzzy]", str(exc))
    if not config.references:
        fail("[references]", "at least one reference is required")
    return config


def load_config(path=None):
    """Read a config file; ``None`` gives the built-in defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, path)
