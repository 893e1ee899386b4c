"""Job configuration: a TOML file with nested sections.

Unknown keys are rejected so that a mistyped physics parameter cannot be
silently replaced by its default.  See the README for the full schema.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import FormFactor, FormFactorFamily, ModelConfig, QuadratureRule

__all__ = [
    "ConfigError",
    "ModelSection",
    "TimesSection",
    "InitialStateSection",
    "OutputSection",
    "Thresholds",
    "SweepSection",
    "JobConfig",
    "parse_config",
    "load_config",
    "OUT_DIR_ENV",
]

OUT_DIR_ENV = "SUBDYNAMICS_OUT_DIR"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class ModelSection:
    m: float = 1.0
    lam: float = 0.1
    n: int = 2000
    cutoff: float = 2.0
    rule: str = "midpoint"
    order: int = 5
    form_factor: dict = field(default_factory=lambda: {"family": "flat-cutoff"})

    def build(self) -> ModelConfig:
        ff = dict(self.form_factor)
        family = ff.pop("family")
        return ModelConfig.build(m=self.m, lam=self.lam, form_factor=FormFactor(family, ff),
                                 n=self.n, cutoff=self.cutoff, rule=self.rule, order=self.order)


@dataclass(frozen=True)
class TimesSection:
    start: float = 0.0
    stop: float = 100.0
    count: int = 201
    spacing: str = "linear"

    def grid(self) -> np.ndarray:
        if self.spacing == "linear":
            return np.linspace(self.start, self.stop, self.count)
        return np.geomspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class InitialStateSection:
    kind: str = "pure-discrete"
    path: str | None = None


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class Thresholds:
    """Pass criteria for ``validate``; a value of ``None`` disables a check."""

    rho1_sup_deviation: float | None = 0.05
    gamma_relative_error: float | None = 0.05
    trace_drift: float | None = 1e-10
    coherence_rate_error: float | None = 0.10
    require_time_window: bool = True


@dataclass(frozen=True)
class SweepSection:
    lam: tuple = ()
    n: tuple = ()


@dataclass(frozen=True)
class JobConfig:
    model: ModelSection = field(default_factory=ModelSection)
    initial_state: InitialStateSection = field(default_factory=InitialStateSection)
    times: TimesSection = field(default_factory=TimesSection)
    outputs: OutputSection = field(default_factory=OutputSection)
    thresholds: Thresholds = field(default_factory=Thresholds)
    sweep: SweepSection = field(default_factory=SweepSection)
    source: str | None = field(default=None, compare=False)

    def model_config(self) -> ModelConfig:
        return self.model.build()

    def out_dir(self, override: str | None = None) -> Path:
        """``--out`` beats the environment variable, which beats the file."""
        return Path(override or os.environ.get(OUT_DIR_ENV) or self.outputs.directory)

    def with_overrides(self, **sections) -> "JobConfig":
        return dataclasses.replace(self, **sections)

    def to_dict(self) -> dict:
        """Resolved configuration in file-key form (used for output headers)."""
        ff = FormFactor(self.model.form_factor["family"],
                        {k: v for k, v in self.model.form_factor.items() if k != "family"})
        model = {
            "m": self.model.m,
            "lambda": self.model.lam,
            "n": self.model.n,
            "cutoff": self.model.cutoff,
            "rule": self.model.rule,
            "order": self.model.order,
            "form_factor": {"family": FormFactorFamily(ff.family).value, **dict(ff.params)},
        }
        sweep = {"lambda": list(self.sweep.lam), "n": list(self.sweep.n)}
        init = {k: v for k, v in dataclasses.asdict(self.initial_state).items() if v is not None}
        thr = {k: v for k, v in dataclasses.asdict(self.thresholds).items() if v is not None}
        return {
            "model": model,
            "initial_state": init,
            "times": dataclasses.asdict(self.times),
            "outputs": dataclasses.asdict(self.outputs),
            "thresholds": thr,
            "sweep": sweep,
        }


# -- parsing -------------------------------------------------------------

_SCHEMA = {
    "model": {"m", "lambda", "n", "cutoff", "rule", "order", "form_factor"},
    "initial_state": {"kind", "path"},
    "times": {"start", "stop", "count", "spacing"},
    "outputs": {"directory", "format"},
    "thresholds": {"rho1_sup_deviation", "gamma_relative_error", "trace_drift",
                   "coherence_rate_error", "require_time_window"},
    "sweep": {"lambda", "n"},
}


def _line_of(text: str, key: str) -> str:
    pat = re.compile(rf"^\s*(\[\s*)?[\w.]*\b{re.escape(key)}\b")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.match(line):
            return f"line {i}: "
    return ""


def _number(sec, key, value, text, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{_line_of(text, key)}{sec}.{key}: expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{_line_of(text, key)}{sec}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _choice(sec, key, value, allowed, text):
    if value not in allowed:
        raise ConfigError(f"{_line_of(text, key)}{sec}.{key}: {value!r} is not one of "
                          + ", ".join(sorted(allowed)))
    return value


def parse_config(text: str, source: str | None = None) -> JobConfig:
    """Parse and validate a configuration document."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source or '<config>'}: {exc}") from None

    for sec, body in raw.items():
        if sec not in _SCHEMA:
            raise ConfigError(f"{_line_of(text, sec)}unknown section [{sec}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{_line_of(text, sec)}{sec} must be a table")
        for key in body:
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"{_line_of(text, key)}unknown key {sec}.{key}")

    def num(sec, key, default, kind=float):
        body = raw.get(sec, {})
        return _number(sec, key, body[key], text, kind) if key in body else default

    # model
    d = ModelSection()
    mb = raw.get("model", {})
    rule = _choice("model", "rule", mb.get("rule", d.rule), {r.value for r in QuadratureRule}, text)
    ff = mb.get("form_factor", {"family": "flat-cutoff"})
    if not isinstance(ff, dict):
        raise ConfigError(f"{_line_of(text, 'form_factor')}model.form_factor must be a table")
    ff = dict(ff)
    ff.setdefault("family", "flat-cutoff")
    _choice("model.form_factor", "family", ff["family"], {f.value for f in FormFactorFamily}, text)
    for k, v in ff.items():
        if k != "family":
            ff[k] = _number("model.form_factor", k, v, text)
    try:
        FormFactor(ff["family"], {k: v for k, v in ff.items() if k != "family"})
    except ValueError as exc:
        raise ConfigError(f"{_line_of(text, 'form_factor')}model.form_factor: {exc}") from None
    model = ModelSection(
        m=num("model", "m", d.m),
        lam=num("model", "lambda", d.lam),
        n=num("model", "n", d.n, int),
        cutoff=num("model", "cutoff", d.cutoff),
        rule=rule,
        order=num("model", "order", d.order, int),
        form_factor=ff,
    )
    if model.n < 16:
        raise ConfigError(f"{_line_of(text, 'n')}model.n: need at least 16 grid nodes, got {model.n}")
    if model.lam < 0:
        raise ConfigError(f"{_line_of(text, 'lambda')}model.lambda: must be non-negative")
    if not 0 < model.m < model.cutoff:
        raise ConfigError(f"{_line_of(text, 'm')}model.m: must lie inside (0, cutoff)")

    # initial state
    ib = raw.get("initial_state", {})
    kind = _choice("initial_state", "kind", ib.get("kind", "pure-discrete"),
                   {"pure-discrete", "custom-file"}, text)
    path = ib.get("path")
    if kind == "custom-file" and not path:
        raise ConfigError(f"{_line_of(text, 'kind')}initial_state.path: required for custom-file")
    init = InitialStateSection(kind, path)

    # times
    dt = TimesSection()
    tb = raw.get("times", {})
    times = TimesSection(
        start=num("times", "start", dt.start),
        stop=num("times", "stop", dt.stop),
        count=num("times", "count", dt.count, int),
        spacing=_choice("times", "spacing", tb.get("spacing", dt.spacing), {"linear", "log"}, text),
    )
    if times.count < 2:
        raise ConfigError(f"{_line_of(text, 'count')}times.count: need at least 2 samples")
    if not times.stop > times.start >= 0:
        raise ConfigError(f"{_line_of(text, 'stop')}times: need stop > start >= 0")
    if times.spacing == "log" and times.start == 0:
        raise ConfigError(f"{_line_of(text, 'spacing')}times.start: log spacing needs start > 0")

    # outputs
    ob = raw.get("outputs", {})
    out = OutputSection(
        directory=str(ob.get("directory", "out")),
        format=_choice("outputs", "format", ob.get("format", "csv"), {"csv", "structured-text"}, text),
    )

    # thresholds
    dth = Thresholds()
    hb = raw.get("thresholds", {})
    thr = {}
    for key in _SCHEMA["thresholds"]:
        if key == "require_time_window":
            v = hb.get(key, dth.require_time_window)
            if not isinstance(v, bool):
                raise ConfigError(f"{_line_of(text, key)}thresholds.{key}: expected true/false")
            thr[key] = v
        else:
            thr[key] = num("thresholds", key, getattr(dth, key))
    thresholds = Thresholds(**thr)

    # sweep
    sb = raw.get("sweep", {})
    lams, ns = sb.get("lambda", []), sb.get("n", [])
    for key, vals in (("lambda", lams), ("n", ns)):
        if not isinstance(vals, list):
            raise ConfigError(f"{_line_of(text, key)}sweep.{key}: expected a list")
    sweep = SweepSection(
        lam=tuple(_number("sweep", "lambda", v, text) for v in lams),
        n=tuple(_number("sweep", "n", v, text, int) for v in ns),
    )
    if any(v < 16 for v in sweep.n):
        raise ConfigError(f"{_line_of(text, 'n')}sweep.n: need at least 16 grid nodes")
    if any(v < 0 for v in sweep.lam):
        raise ConfigError(f"{_line_of(text, 'lambda')}sweep.lambda: must be non-negative")

    cfg = JobConfig(model, init, times, out, thresholds, sweep, source)
    try:
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg.model_config()
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"model: {exc}") from None
    return cfg


def load_config(path: str | os.PathLike | None) -> JobConfig:
    """Read a config file; ``None`` gives the default desk-scale profile."""
    if path is None:
        return JobConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
