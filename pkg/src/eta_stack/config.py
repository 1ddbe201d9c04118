"""Run configuration: one JSON or YAML document, validated up front.

Two built-in profiles exist. ``paper-nyc`` carries the full level-1 and
level-2 hyperparameters; ``desk`` shrinks the models so the whole
pipeline runs in minutes on one core.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml

from .ingest import FORMATS, NYC_BOX, BoundingBox, OutlierCriteria, SplitSpec
from .joining import REDISTRIBUTE_MODES, SHRINK_MODES
from .learners import L2_DEFAULTS, RegressorSpec
from .synthetic import SyntheticConfig


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    trips: Optional[str] = None
    format: str = "generic"
    weather: Optional[str] = None
    synthetic: dict = field(default_factory=dict)   # SyntheticConfig overrides for prepare --synthetic


@dataclass
class SchemaConfig:
    box: list = field(default_factory=lambda: NYC_BOX.to_list())
    cell_size: float = 50.0


@dataclass
class XAIConfig:
    methods: list = field(default_factory=lambda: ["lime", "shap"])
    lime_samples: int = 5000
    kernel_width: Optional[float] = None
    shap_coalitions: int = 2048
    background_size: int = 100
    bl_background_size: int = 20
    explain_l2: str = "L2-NN"


@dataclass
class JoiningConfig:
    beta: float = 0.5
    shrink: str = "subtractive"
    redistribute: str = "proportional"


@dataclass
class ScenarioConfig:
    ids: list = field(default_factory=lambda: ["SC1", "SC2", "SC3", "SC4"])
    n_per_side: int = 10
    seed: int = 0


@dataclass
class RunConfig:
    profile: str = "paper-nyc"
    seed: int = 0
    out: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    outliers: dict = field(default_factory=lambda: OutlierCriteria().to_dict())
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    split: dict = field(default_factory=lambda: {"mode": "time", "boundary": 1451606400.0, "val_fraction": 0.2})
    l1: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    xai: XAIConfig = field(default_factory=XAIConfig)
    joining: JoiningConfig = field(default_factory=JoiningConfig)
    scenarios: ScenarioConfig = field(default_factory=ScenarioConfig)

    # typed views

    def l1_specs(self) -> list[RegressorSpec]:
        return [_spec(d, self.seed) for d in self.l1]

    def l2_specs(self) -> list[RegressorSpec]:
        return [_spec(d, self.seed) for d in self.l2]

    def split_spec(self) -> SplitSpec:
        d = dict(self.split)
        d.setdefault("seed", self.seed)
        return SplitSpec.from_dict(d)

    def outlier_criteria(self) -> OutlierCriteria:
        return OutlierCriteria.from_dict(self.outliers)

    def box(self) -> BoundingBox:
        return BoundingBox(*self.schema.box)

    def synthetic_config(self) -> SyntheticConfig:
        d = dict(self.data.synthetic)
        d.setdefault("seed", self.seed)
        if "zone_center" in d:
            d["zone_center"] = tuple(d["zone_center"])
        return SyntheticConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Hash of every setting except the output directory."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def validate(self) -> "RunConfig":
        try:
            specs1, specs2 = self.l1_specs(), self.l2_specs()
            self.split_spec()
            self.outlier_criteria()
            self.box()
            self.synthetic_config()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc
        if len(specs1) < 2:
            raise ConfigError("at least two level-1 models are required")
        if not specs2:
            raise ConfigError("at least one level-2 model is required")
        for group in (specs1, specs2):
            names = [s.name for s in group]
            if len(set(names)) != len(names):
                raise ConfigError(f"model names must be unique: {names}")
        if any(s.mask is not None for s in specs2):
            raise ConfigError("level-2 models read the level-1 outputs; masks are not allowed")
        if self.xai.explain_l2 not in [s.name for s in specs2]:
            raise ConfigError(f"xai.explain_l2 {self.xai.explain_l2!r} is not a configured level-2 model")
        bad = [m for m in self.xai.methods if m not in ("lime", "shap")]
        if bad:
            raise ConfigError(f"unknown explanation methods {bad}")
        if self.xai.lime_samples < 16 or self.xai.shap_coalitions < 16:
            raise ConfigError("lime_samples and shap_coalitions must be at least 16")
        if self.xai.background_size < 1 or self.xai.bl_background_size < 1:
            raise ConfigError("background sizes must be positive")
        if self.joining.beta < 0:
            raise ConfigError("joining.beta must be non-negative")
        if self.joining.shrink not in SHRINK_MODES or self.joining.redistribute not in REDISTRIBUTE_MODES:
            raise ConfigError("unknown joining shrink or redistribution mode")
        if self.data.format not in FORMATS:
            raise ConfigError(f"unknown trip format {self.data.format!r}")
        unknown = [s for s in self.scenarios.ids if s not in ("SC1", "SC2", "SC3", "SC4")]
        if unknown or self.scenarios.n_per_side < 1:
            raise ConfigError(f"bad scenario settings: {unknown or self.scenarios.n_per_side}")
        return self


def _spec(d: dict, seed: int) -> RegressorSpec:
    d = dict(d)
    d.setdefault("seed", seed)
    return RegressorSpec.from_dict(d)


def _default_models():
    l1 = [
        {"name": "L1-RF", "family": "random_forest", "params": {}},
        {"name": "L1-XGBoost", "family": "gradient_boosting", "params": {}},
        {"name": "L1-NN", "family": "feedforward_net", "params": {}},
    ]
    l2 = [
        {"name": "L2-MLR", "family": "linear", "params": {}},
        {"name": "L2-RF", "family": "random_forest", "params": dict(L2_DEFAULTS["random_forest"])},
        {"name": "L2-XGBoost", "family": "gradient_boosting", "params": dict(L2_DEFAULTS["gradient_boosting"])},
        {"name": "L2-NN", "family": "feedforward_net", "params": dict(L2_DEFAULTS["feedforward_net"])},
    ]
    return l1, l2


DESK_L1 = {
    "L1-RF": {"n_trees": 50, "max_depth": 12},
    "L1-XGBoost": {"n_trees": 100},
    "L1-NN": {"hidden": [64, 32], "epochs": 10},
}
DESK_L2 = {"L2-RF": {"n_trees": 50, "max_depth": 12}, "L2-XGBoost": {"n_trees": 100},
           "L2-NN": {"epochs": 10}}


def profile(name: str = "paper-nyc") -> RunConfig:
    l1, l2 = _default_models()
    if name == "paper-nyc":
        return RunConfig(profile=name, l1=l1, l2=l2)
    if name == "desk":
        for d in l1:
            d["params"].update(DESK_L1[d["name"]])
        for d in l2:
            d["params"].update(DESK_L2.get(d["name"], {}))
        cfg = RunConfig(profile=name, l1=l1, l2=l2)
        cfg.data.synthetic = {"n_trips": 5000}
        cfg.xai = XAIConfig(lime_samples=2000, shap_coalitions=1024, background_size=25)
        return cfg
    raise ConfigError(f"unknown profile {name!r}; choose paper-nyc or desk")


PROFILES = ("paper-nyc", "desk")


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in out:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(out[k], dict) and isinstance(v, dict) and path + k not in ("outliers", "split", "data.synthetic"):
            out[k] = _merge(out[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def from_dict(d: dict) -> RunConfig:
    """Overlay ``d`` on the profile it names (default ``paper-nyc``)."""
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a mapping")
    base = profile(d.get("profile", "paper-nyc")).to_dict()
    merged = _merge(base, d)
    kinds = {f.name: f.type for f in fields(RunConfig)}
    sub = {"data": DataConfig, "schema": SchemaConfig, "xai": XAIConfig, "joining": JoiningConfig,
           "scenarios": ScenarioConfig}
    try:
        kw = {k: (sub[k](**v) if k in sub else v) for k, v in merged.items() if k in kinds}
        return RunConfig(**kw).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        d = json.loads(text) if p.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc
    return from_dict(d or {})
