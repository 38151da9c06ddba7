"""Pipeline configuration: a TOML file plus command-line overrides."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .boost import GbtConfig, config_grid
from .errors import ConfigError
from .orderalpha import DEFAULT_GRID
from .tabular import Schema

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

MAX_REPS = 100_000


@dataclass(frozen=True)
class FrontierConfig:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    rts: str = "VRS"


@dataclass(frozen=True)
class PipelineConfig:
    data_path: str
    schema: Schema
    group_a: str
    group_b: str
    frontiers: tuple[FrontierConfig, ...]
    bootstrap_reps: int = 2000
    bootstrap_level: float = 0.95
    ci_method: str = "basic"
    sd_reps: int = 1000
    sd_level: float = 0.05
    alpha_grid: tuple[float, ...] = DEFAULT_GRID
    gbt_grid: dict = field(default_factory=lambda: {
        "n_estimators": [100, 500, 1000, 5000], "subsample": [0.5, 0.7, 0.9],
        "max_depth": [3, 5, 7, 9], "learning_rate": [0.001, 0.01, 0.1]})
    reg_lambda: float = 1.0
    gamma: float = 0.0
    min_child_cover: int = 1
    logit_penalties: tuple[str, ...] = ("l1", "l2")
    logit_C: tuple[float, ...] = (0.1, 1.0, 10.0)
    k_folds: int = 5
    top_k: int = 30
    profile_k: int = 12
    seed: int = 0
    out: str = "results"
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    # --- validation --------------------------------------------------------------------
    def validate(self) -> None:
        s = self.schema
        if not self.frontiers:
            raise ConfigError("at least one frontier must be configured")
        names = [f.name for f in self.frontiers]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate frontier names: {names}")
        for f in self.frontiers:
            if not f.name.replace("_", "").replace("-", "").isalnum():
                raise ConfigError(f"frontier name {f.name!r} must be alphanumeric (plus - and _)")
            bad_in = [c for c in f.inputs if c not in s.inputs]
            bad_out = [c for c in f.outputs if c not in s.outputs]
            if bad_in or bad_out:
                raise ConfigError(f"frontier {f.name!r} references columns not in the schema: "
                                  f"{bad_in + bad_out}")
            if not f.inputs or not f.outputs:
                raise ConfigError(f"frontier {f.name!r} needs inputs and outputs")
            if f.rts not in ("VRS", "CRS"):
                raise ConfigError(f"frontier {f.name!r}: rts must be VRS or CRS")
        if self.group_a == self.group_b:
            raise ConfigError("the two group labels must differ")
        _in_range("bootstrap.reps", self.bootstrap_reps, 100, MAX_REPS)
        _in_range("sdtest.reps", self.sd_reps, 200, MAX_REPS)
        for key, v in (("bootstrap.level", self.bootstrap_level), ("sdtest.level", self.sd_level)):
            if not 0 < v < 1:
                raise ConfigError(f"{key} must lie in (0, 1), got {v}")
        if self.ci_method not in ("basic", "percentile"):
            raise ConfigError("bootstrap.ci_method must be 'basic' or 'percentile'")
        g = self.alpha_grid
        if len(g) < 10 or any(not 0 < a <= 100 for a in g) or any(b >= a for a, b in zip(g, g[1:])):
            raise ConfigError("outliers alpha grid needs >= 10 strictly descending points in (0, 100]")
        try:
            grid = self.gbt_configs()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"gbt grid: {exc}") from None
        if not grid:
            raise ConfigError("gbt grid is empty")
        if not self.logit_penalties or any(p not in ("l1", "l2") for p in self.logit_penalties):
            raise ConfigError("logit.penalties must be a nonempty subset of ['l1', 'l2']")
        if not self.logit_C or any(c <= 0 for c in self.logit_C):
            raise ConfigError("logit.C values must be positive")
        _in_range("explain.k_folds", self.k_folds, 2, 20)
        _in_range("explain.top_k", self.top_k, 1, 10_000)
        _in_range("explain.profile_k", self.profile_k, 1, 10_000)
        if not s.covariates:
            raise ConfigError("schema lists no covariates for the classification stage")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def gbt_configs(self) -> list[GbtConfig]:
        return config_grid(**{k: tuple(v) for k, v in self.gbt_grid.items()},
                           reg_lambda=self.reg_lambda, gamma=self.gamma,
                           min_child_cover=self.min_child_cover)

    # --- hashing -------------------------------------------------------------------------
    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = self.schema.to_mapping()
        return d

    def section(self, *keys) -> dict:
        d = self.to_dict()
        return {k: d[k] for k in keys}

    def config_hash(self) -> str:
        """Hash of the settings that can change an output.

        ``jobs`` and ``out`` are left out, and so is the data location: the
        data file enters stage keys through its content hash instead.
        """
        d = self.to_dict()
        for k in ("jobs", "out", "data_path"):
            d.pop(k)
        return digest(d)

    def with_overrides(self, **kw) -> "PipelineConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        if "reps" in kw:
            kw["bootstrap_reps"] = kw.pop("reps")
        return replace(self, **kw)


def _in_range(key, v, lo, hi):
    if not isinstance(v, int) or isinstance(v, bool) or not lo <= v <= hi:
        raise ConfigError(f"{key} must be an integer in [{lo}, {hi}], got {v!r}")


def digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def _alpha_grid(section: dict) -> tuple[float, ...]:
    if "alpha_grid" in section:
        return tuple(float(a) for a in section["alpha_grid"])
    start = float(section.get("start", 100.0))
    stop = float(section.get("stop", 50.0))
    step = float(section.get("step", 0.5))
    if step <= 0 or stop >= start:
        raise ConfigError("outliers grid needs start > stop and step > 0")
    n = int(round((start - stop) / step)) + 1
    return tuple(round(start - i * step, 10) for i in range(n))


def load_config(path) -> PipelineConfig:
    """Parse a TOML configuration file; relative data paths resolve against its directory."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping(raw, base_dir=path.parent)


def config_from_mapping(raw: dict, base_dir=".") -> PipelineConfig:
    known = {"seed", "out", "jobs", "data", "groups", "frontiers", "bootstrap", "sdtest",
             "outliers", "gbt", "logit", "explain"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        data = dict(raw["data"])
        groups = raw["groups"]
        fronts = raw["frontiers"]
    except KeyError as exc:
        raise ConfigError(f"config is missing the [{exc.args[0]}] section") from None
    if "path" not in data:
        raise ConfigError("[data] needs a 'path' entry")
    data_path = Path(data.pop("path"))
    if not data_path.is_absolute():
        data_path = Path(base_dir) / data_path
    schema = Schema.from_mapping(data)
    frontiers = []
    for name, f in fronts.items():
        try:
            frontiers.append(FrontierConfig(name, tuple(f["inputs"]), tuple(f["outputs"]),
                                            str(f.get("rts", "VRS")).upper()))
        except KeyError as exc:
            raise ConfigError(f"frontier {name!r} is missing {exc.args[0]!r}") from None
    boot = raw.get("bootstrap", {})
    sd = raw.get("sdtest", {})
    gbt = dict(raw.get("gbt", {}))
    logit = raw.get("logit", {})
    expl = raw.get("explain", {})
    kw = {}
    scalars = {k: gbt.pop(k) for k in ("reg_lambda", "gamma", "min_child_cover") if k in gbt}
    if gbt:
        grid = PipelineConfig.__dataclass_fields__["gbt_grid"].default_factory()
        bad = sorted(set(gbt) - set(grid))
        if bad:
            raise ConfigError(f"unknown [gbt] keys: {bad}")
        grid.update({k: list(v) if isinstance(v, list) else [v] for k, v in gbt.items()})
        kw["gbt_grid"] = grid
    try:
        return PipelineConfig(
            data_path=str(data_path), schema=schema,
            group_a=str(groups["a"]), group_b=str(groups["b"]), frontiers=tuple(frontiers),
            bootstrap_reps=boot.get("reps", 2000), bootstrap_level=float(boot.get("level", 0.95)),
            ci_method=boot.get("ci_method", "basic"),
            sd_reps=sd.get("reps", 1000), sd_level=float(sd.get("level", 0.05)),
            alpha_grid=_alpha_grid(raw.get("outliers", {})),
            reg_lambda=float(scalars.get("reg_lambda", 1.0)), gamma=float(scalars.get("gamma", 0.0)),
            min_child_cover=int(scalars.get("min_child_cover", 1)),
            logit_penalties=tuple(logit.get("penalties", ("l1", "l2"))),
            logit_C=tuple(float(c) for c in logit.get("C", (0.1, 1.0, 10.0))),
            k_folds=expl.get("k_folds", 5), top_k=expl.get("top_k", 30),
            profile_k=expl.get("profile_k", 12),
            seed=raw.get("seed", 0), out=str(raw.get("out", "results")), jobs=raw.get("jobs", 1), **kw)
    except KeyError as exc:
        raise ConfigError(f"[groups] is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _toml_value(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def config_to_toml(cfg: PipelineConfig, data_path: str | None = None) -> str:
    """Render ``cfg`` as TOML that :func:`load_config` reads back to an equal config."""
    s = cfg.schema
    lines = [f"seed = {cfg.seed}", f"out = {_toml_value(cfg.out)}", f"jobs = {cfg.jobs}", "",
             "[data]", f"path = {_toml_value(data_path or cfg.data_path)}",
             f"id = {_toml_value(s.id)}", f"group = {_toml_value(s.group)}"]
    if s.stratum:
        lines.append(f"stratum = {_toml_value(s.stratum)}")
    lines += [f"inputs = {_toml_value(s.inputs)}", f"outputs = {_toml_value(s.outputs)}",
              f"covariates = {_toml_value(s.covariates)}", "",
              "[groups]", f"a = {_toml_value(cfg.group_a)}", f"b = {_toml_value(cfg.group_b)}", ""]
    for f in cfg.frontiers:
        lines += [f"[frontiers.{f.name}]", f"inputs = {_toml_value(f.inputs)}",
                  f"outputs = {_toml_value(f.outputs)}", f"rts = {_toml_value(f.rts)}", ""]
    lines += ["[bootstrap]", f"reps = {cfg.bootstrap_reps}", f"level = {cfg.bootstrap_level!r}",
              f"ci_method = {_toml_value(cfg.ci_method)}", "",
              "[sdtest]", f"reps = {cfg.sd_reps}", f"level = {cfg.sd_level!r}", "",
              "[outliers]", f"alpha_grid = {_toml_value([float(a) for a in cfg.alpha_grid])}", "",
              "[gbt]"]
    lines += [f"{k} = {_toml_value(list(v))}" for k, v in cfg.gbt_grid.items()]
    lines += [f"reg_lambda = {cfg.reg_lambda!r}", f"gamma = {cfg.gamma!r}",
              f"min_child_cover = {cfg.min_child_cover}", "",
              "[logit]", f"penalties = {_toml_value(cfg.logit_penalties)}",
              f"C = {_toml_value([float(c) for c in cfg.logit_C])}", "",
              "[explain]", f"k_folds = {cfg.k_folds}", f"top_k = {cfg.top_k}",
              f"profile_k = {cfg.profile_k}", ""]
    return "\n".join(lines)
