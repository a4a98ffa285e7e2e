"""Experiment configuration: dataclasses loaded from TOML or JSON."""

from __future__ import annotations

import dataclasses
import json
import re
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli

from ..geometry import SolverOptions
from ..qoe import (
    Amplitude,
    ComponentWise,
    ContaminationSpec,
    Dependent,
    FixedValue,
    Geometric,
    Placement,
    QoEConfig,
)

__all__ = [
    "AdjustmentConfig",
    "BahadurConfig",
    "BlockSection",
    "CLTConfig",
    "ConcentrationConfig",
    "ConfigError",
    "ContaminationSection",
    "EXPERIMENTS",
    "FunctionalConfig",
    "GeomOracleConfig",
    "QuantileSection",
    "SampleQuantileConfig",
    "SweepConfig",
    "annotate",
    "build",
    "load_config",
]


class ConfigError(ValueError):
    """A configuration problem, located by field path and, when known, source line."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None, source: str | None = None):
        super().__init__(message)
        self.message, self.field, self.line, self.source = message, field, line, source

    def __str__(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            where += f":{self.line}"
        if self.field:
            where += f": {self.field}"
        return f"{where}: {self.message}"


# ---------------------------------------------------------------- sections


_PLACEMENTS = {
    "worst_case": Placement.WORST_CASE,
    "worst_case_one_per_block": Placement.WORST_CASE,
    "uniform": Placement.UNIFORM,
    "uniform_random": Placement.UNIFORM,
    "prefix": Placement.PREFIX,
}


@dataclass
class BlockSection:
    """Explicit ``k``, or ``c`` and ``beta`` for ``k = floor(c n^beta)``."""

    k: int | None = None
    c: float | None = None
    beta: float | None = None
    beta_star: float = 0.5
    shuffle: bool = False

    def validate(self, path: str) -> None:
        rule_given = self.c is not None or self.beta is not None
        if rule_given and (self.c is None or self.beta is None):
            raise ConfigError("c and beta must be given together", f"{path}.c")
        if rule_given and self.k is not None:
            raise ConfigError("give k or (c, beta), not both", f"{path}.k")
        if self.k is not None and self.k < 1:
            raise ConfigError("must be positive", f"{path}.k")
        if self.c is not None and self.c <= 0:
            raise ConfigError("must be positive", f"{path}.c")
        if self.beta is not None and not 0 < self.beta < 1:
            raise ConfigError("must lie in (0, 1)", f"{path}.beta")
        if not 0 < self.beta_star <= 1:
            raise ConfigError("must lie in (0, 1]", f"{path}.beta_star")

    def to_qoe(self, quantile, default_k: int = 100) -> QoEConfig:
        if self.c is not None:
            return QoEConfig(c=self.c, beta=self.beta, quantile=quantile, beta_star=self.beta_star, shuffle=self.shuffle)
        k = default_k if self.k is None else self.k
        return QoEConfig(k=k, quantile=quantile, beta_star=self.beta_star, shuffle=self.shuffle)


@dataclass
class QuantileSection:
    kind: str = "componentwise"
    alpha: float = 0.5
    u: list[float] | None = None

    def validate(self, path: str) -> None:
        if self.kind not in ("componentwise", "geometric"):
            raise ConfigError(f"unknown quantile kind {self.kind!r}", f"{path}.kind")
        if not 0 < self.alpha < 1:
            raise ConfigError("must lie in (0, 1)", f"{path}.alpha")
        if self.kind == "geometric":
            if self.u is None:
                raise ConfigError("geometric quantile needs u", f"{path}.u")
            if sum(x * x for x in self.u) >= 1.0:
                raise ConfigError("needs |u| < 1", f"{path}.u")

    def to_spec(self):
        if self.kind == "geometric":
            return Geometric(tuple(self.u), SolverOptions())
        return ComponentWise(self.alpha)


@dataclass
class ContaminationSection:
    """``count`` rows, or ``floor(n**rate)``; nothing given means a clean sample."""

    count: int | None = None
    rate: float | None = None
    placement: str = "worst_case"
    adversary: str = "amplitude"
    value: float = 1e9
    signs: str = "positive"
    scale: float = 1.0

    def validate(self, path: str) -> None:
        if self.count is not None and self.rate is not None:
            raise ConfigError("give count or rate, not both", f"{path}.count")
        if self.count is not None and self.count < 0:
            raise ConfigError("must be nonnegative", f"{path}.count")
        if self.rate is not None and not 0 <= self.rate < 1:
            raise ConfigError("must lie in [0, 1)", f"{path}.rate")
        if self.placement not in _PLACEMENTS:
            raise ConfigError(f"unknown placement {self.placement!r}", f"{path}.placement")
        if self.adversary not in ("fixed", "amplitude", "dependent"):
            raise ConfigError(f"unknown adversary {self.adversary!r}", f"{path}.adversary")
        if self.signs not in ("positive", "alternating"):
            raise ConfigError(f"unknown sign pattern {self.signs!r}", f"{path}.signs")

    @property
    def is_clean(self) -> bool:
        return self.rate is None and not self.count

    def to_spec(self) -> ContaminationSpec:
        adv = {
            "fixed": lambda: FixedValue(self.value),
            "amplitude": lambda: Amplitude(self.value, self.signs),
            "dependent": lambda: Dependent(self.scale),
        }[self.adversary]()
        count = 0 if self.count is None and self.rate is None else self.count
        return ContaminationSpec(count=count, rate=self.rate, placement=_PLACEMENTS[self.placement], adversary=adv)


# ---------------------------------------------------------------- experiments


@dataclass
class CLTConfig:
    experiment: str = "clt"
    n: int = 10_000
    replications: int = 2000
    seed: int = 0
    estimator: str = "mean"  # mean | ols | variance | squantile
    dim: int = 1  # data dimension for mean and variance
    p: int = 2  # regressors for ols
    sigma: float = 1.0
    est_alpha: float = 0.5  # level of the squantile base estimator
    blocks: BlockSection = field(default_factory=BlockSection)
    quantile: QuantileSection = field(default_factory=QuantileSection)
    contamination: ContaminationSection = field(default_factory=ContaminationSection)
    rel_tol: float = 0.1
    off_diag_tol: float = 0.1
    ols_target: str = "ols_gamma"  # ols_gamma | sigma_alpha
    raw_error_min: float | None = None
    records: bool = False

    def validate(self, path: str = "") -> None:
        _positive(self, "n", "replications", "dim", "p", "sigma")
        if self.estimator not in ("mean", "ols", "variance", "squantile"):
            raise ConfigError(f"unknown estimator {self.estimator!r}", "estimator")
        if self.ols_target not in ("ols_gamma", "sigma_alpha"):
            raise ConfigError(f"unknown target {self.ols_target!r}", "ols_target")
        if self.quantile.kind != "componentwise":
            raise ConfigError("the CLT experiment uses the component-wise quantile", "quantile.kind")
        if not 0 < self.est_alpha < 1:
            raise ConfigError("must lie in (0, 1)", "est_alpha")


@dataclass
class SweepConfig:
    experiment: str = "sweep"
    n: int = 10_000
    replications: int = 200
    seed: int = 0
    blocks: BlockSection = field(default_factory=BlockSection)
    gammas: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.25, 0.3, 0.4])
    magnitude: float = 1e9
    signs: str = "positive"
    error_scale: float = 10.0  # QoE error bound in units of 1/sqrt(n)
    raw_error_min: float = 1e4
    breakdown_count: int | None = None  # defaults to k // 2 + 1

    def validate(self, path: str = "") -> None:
        _positive(self, "n", "replications", "magnitude", "error_scale")
        if any(not 0 <= g < 1 for g in self.gammas):
            raise ConfigError("every gamma must lie in [0, 1)", "gammas")
        if self.signs not in ("positive", "alternating"):
            raise ConfigError(f"unknown sign pattern {self.signs!r}", "signs")


@dataclass
class GeomOracleConfig:
    experiment: str = "geomq"
    instances: int = 200
    seed: int = 0
    k_min: int = 3
    k_max: int = 7
    u_max: float = 0.7
    grid: int = 400
    pad: float = 0.05
    gap_tol: float = 1e-6  # relative to the point-set scale
    residual_tol: float = 1e-8
    position_tol: float = 1e-3

    def validate(self, path: str = "") -> None:
        _positive(self, "instances", "grid")
        if not 1 <= self.k_min <= self.k_max:
            raise ConfigError("need 1 <= k_min <= k_max", "k_min")
        if not 0 <= self.u_max < 1:
            raise ConfigError("must lie in [0, 1)", "u_max")


@dataclass
class FunctionalConfig:
    experiment: str = "functional"
    k: int = 101
    replications: int = 5000
    seed: int = 0
    times: list[float] = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])
    rel_tol: float = 0.1
    abs_floor: float = 0.0  # tolerance is max(rel_tol * |target|, abs_floor)
    records: bool = False

    def validate(self, path: str = "") -> None:
        _positive(self, "k", "replications")
        if not self.times or any(t <= 0 for t in self.times) or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigError("times must be positive and strictly increasing", "times")


@dataclass
class SampleQuantileConfig:
    experiment: str = "squantile"
    n: int = 10_000
    replications: int = 2000
    seed: int = 0
    alphas: list[float] = field(default_factory=lambda: [0.5, 0.75])
    contamination: ContaminationSection = field(
        default_factory=lambda: ContaminationSection(count=15, placement="uniform", signs="alternating")
    )
    ks_level: float = 0.01
    include_clean: bool = True

    def validate(self, path: str = "") -> None:
        _positive(self, "n", "replications")
        if any(not 0 < a < 1 for a in self.alphas):
            raise ConfigError("every alpha must lie in (0, 1)", "alphas")
        if self.contamination.rate is not None and self.contamination.rate >= 0.5:
            raise ConfigError("the contamination exponent must be below 1/2", "contamination.rate")


@dataclass
class ConcentrationConfig:
    experiment: str = "conc"
    n: int = 5000
    k: int = 50
    d: int = 2
    df: float = 3.0
    nu: float = 0.3
    target_p: float = 0.1  # per-block tail level used to pick eps
    pilot_blocks: int = 20_000
    replications: int = 5000
    seed: int = 0
    taus: list[float] = field(default_factory=lambda: [0.0, 0.1])
    magnitude: float = 1e9
    check_single_block: bool = True

    def validate(self, path: str = "") -> None:
        _positive(self, "n", "k", "d", "df", "pilot_blocks", "replications")
        if self.k > self.n:
            raise ConfigError("need k <= n", "k")
        if not 0 < self.target_p < self.nu < 0.5:
            raise ConfigError("need 0 < target_p < nu < 1/2", "nu")
        if any(t < 0 for t in self.taus):
            raise ConfigError("taus must be nonnegative", "taus")


@dataclass
class AdjustmentConfig:
    experiment: str = "lemv"
    instances: int = 100
    seed: int = 0
    d: int = 2
    k_min: int = 5
    k_max: int = 15
    u_max: float = 0.6
    far: float = 10.0  # spread of the replacement points
    resolve_tol: float = 1e-6

    def validate(self, path: str = "") -> None:
        _positive(self, "instances", "d", "far")
        if not 2 <= self.k_min <= self.k_max:
            raise ConfigError("need 2 <= k_min <= k_max", "k_min")
        if not 0 <= self.u_max < 1:
            raise ConfigError("must lie in [0, 1)", "u_max")


@dataclass
class BahadurConfig:
    experiment: str = "bahadur"
    ks: list[int] = field(default_factory=lambda: [50, 100, 200, 400])
    replications: int = 400
    seed: int = 0
    d: int = 2
    mc_samples: int = 200_000
    fd_step: float = 0.05
    slope_max: float = -0.8
    cond_max: float = 1e6

    def validate(self, path: str = "") -> None:
        _positive(self, "replications", "mc_samples", "fd_step")
        if not 1 <= self.d <= 3:
            raise ConfigError("the check supports 1 <= d <= 3", "d")
        if len(self.ks) < 2 or any(k < 2 for k in self.ks):
            raise ConfigError("need at least two block counts, each >= 2", "ks")


EXPERIMENTS: dict[str, type] = {
    "clt": CLTConfig,
    "sweep": SweepConfig,
    "geomq": GeomOracleConfig,
    "functional": FunctionalConfig,
    "squantile": SampleQuantileConfig,
    "conc": ConcentrationConfig,
    "lemv": AdjustmentConfig,
    "bahadur": BahadurConfig,
}


def _positive(cfg, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) <= 0:
            raise ConfigError("must be positive", name)


# ---------------------------------------------------------------- loading


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError("expected a table", path)
        return build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError("expected a list", path)
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", path)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    raise ConfigError(f"unsupported field type {tp!r}", path)


def build(cls, mapping: dict[str, Any], path: str = ""):
    """Construct dataclass ``cls`` from a plain mapping, rejecting unknown keys."""
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in mapping.items():
        sub = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError("unknown field", sub)
        kwargs[key] = _convert(hints[key], value, sub)
    obj = cls(**kwargs)
    if hasattr(obj, "validate"):
        for f in dataclasses.fields(obj):
            val = getattr(obj, f.name)
            if dataclasses.is_dataclass(val) and hasattr(val, "validate"):
                val.validate(f"{path}.{f.name}" if path else f.name)
        obj.validate(path)
    return obj


def _find_line(text: str, field_path: str) -> int | None:
    key = re.split(r"[.\[]", field_path)[-1] if field_path else ""
    if not key:
        return None
    pattern = re.compile(rf'^\s*"?{re.escape(key)}"?\s*[=:]', re.MULTILINE)
    m = pattern.search(text)
    if m is None:
        section = field_path.split(".")[0]
        m = re.search(rf"^\s*\[{re.escape(section)}\]", text, re.MULTILINE)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_text(text: str, fmt: str, source: str = "<config>") -> dict[str, Any]:
    if fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno, source=source) from None
    else:
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as exc:
            m = re.search(r"line (\d+)", str(exc))
            raise ConfigError(str(exc), line=int(m.group(1)) if m else None, source=source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a table", source=source)
    return data


def annotate(exc: ConfigError, path: str | Path | None) -> ConfigError:
    """Attach the config file name and, if it can be found, the line of ``exc.field``."""
    if path is None or exc.source is not None:
        return exc
    exc.source = str(path)
    if exc.line is None and exc.field:
        try:
            exc.line = _find_line(Path(path).read_text(), exc.field)
        except OSError:
            pass
    return exc


def load_config(path: str | Path | None, experiment: str, overrides: dict[str, Any] | None = None):
    """Load the config for ``experiment`` from ``path`` (TOML, or JSON by extension)."""
    cls = EXPERIMENTS[experiment]
    text, source, data = "", str(path) if path else "<defaults>", {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc.strerror}", source=source) from None
        data = parse_text(text, "json" if p.suffix.lower() == ".json" else "toml", source)
    declared = data.get("experiment", experiment)
    if declared != experiment:
        raise ConfigError(
            f"config is for {declared!r}, not {experiment!r}", "experiment", _find_line(text, "experiment"), source
        )
    data.update(overrides or {})
    try:
        return build(cls, data)
    except ConfigError as exc:
        exc.source = source
        if exc.line is None and exc.field:
            exc.line = _find_line(text, exc.field)
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), source=source) from None
