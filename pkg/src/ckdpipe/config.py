"""Pipeline configuration: one TOML file, strict keys, lossless echo.

TOML has no null, so an unlimited forest depth is written ``"none"``.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .anneal import SAConfig
from .errors import ConfigError
from .outliers import CuckooConfig
from .preprocess import ImputeConfig
from .resample import SmoteConfig, SplitConfig

MODEL_NAMES = ("logreg", "mlp", "forest", "boost")

# Parameters each model family accepts, fixed or searched.
MODEL_PARAMS = {
    "logreg": {"l2", "lr", "epochs"},
    "mlp": {"hidden", "lr", "epochs", "l2", "batch_size"},
    "forest": {"n_trees", "max_depth", "min_leaf", "max_features"},
    "boost": {"iterations", "depth", "learning_rate", "l2_leaf_reg", "border_count"},
}


@dataclass
class DataSection:
    path: str = "data/chronic_kidney_disease.arff"
    format: str = "arff"
    target: str = "class"
    drop: list = field(default_factory=list)


@dataclass
class RunSection:
    master_seed: int = 0
    out_dir: str = "runs/default"
    n_jobs: int = 1
    leakage_safe: bool = False


@dataclass
class ImputeSection:
    k: int = 5


@dataclass
class CuckooSection:
    enabled: bool = True
    n_nests: int = 25
    pa: float = 0.25
    levy_beta: float = 1.5
    step_scale: float = 0.01
    max_iter: int = 200
    penalty_weight: float = 1000.0


@dataclass
class AnovaSection:
    enabled: bool = True
    alpha: float = 0.05


@dataclass
class AnnealSection:
    enabled: bool = True
    t0: float = 1.0
    cooling: float = 0.95
    max_iter: int = 300
    feature_penalty: float = 0.001
    probe_folds: int = 3


@dataclass
class SplitSection:
    test_fraction: float = 0.2


@dataclass
class SmoteSection:
    enabled: bool = True
    target_per_class: int = 450
    k_neighbors: int = 5


@dataclass
class CvSection:
    folds: int = 5


@dataclass
class ModelSection:
    fixed: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)


SECTIONS = {
    "data": DataSection,
    "run": RunSection,
    "impute": ImputeSection,
    "cuckoo": CuckooSection,
    "anova": AnovaSection,
    "anneal": AnnealSection,
    "split": SplitSection,
    "smote": SmoteSection,
    "cv": CvSection,
}


@dataclass
class PipelineConfig:
    data: DataSection = field(default_factory=DataSection)
    run: RunSection = field(default_factory=RunSection)
    impute: ImputeSection = field(default_factory=ImputeSection)
    cuckoo: CuckooSection = field(default_factory=CuckooSection)
    anova: AnovaSection = field(default_factory=AnovaSection)
    anneal: AnnealSection = field(default_factory=AnnealSection)
    split: SplitSection = field(default_factory=SplitSection)
    smote: SmoteSection = field(default_factory=SmoteSection)
    cv: CvSection = field(default_factory=CvSection)
    models: dict = field(default_factory=dict)

    def to_dict(self):
        out = {name: asdict(getattr(self, name)) for name in SECTIONS}
        out["models"] = {name: asdict(spec) for name, spec in sorted(self.models.items())}
        return copy.deepcopy(out)

    def with_seed(self, seed):
        d = self.to_dict()
        d["run"]["master_seed"] = int(seed)
        return from_dict(d)

    def with_out_dir(self, out_dir):
        d = self.to_dict()
        d["run"]["out_dir"] = str(out_dir)
        return from_dict(d)

    # Module configs are built here so their own invariants are checked at load time.
    def impute_config(self):
        return ImputeConfig(k=self.impute.k)

    def cuckoo_config(self, seed):
        c = self.cuckoo
        return CuckooConfig(c.n_nests, c.pa, c.levy_beta, c.step_scale, c.max_iter, c.penalty_weight, seed)

    def sa_config(self, seed):
        a = self.anneal
        return SAConfig(a.t0, a.cooling, a.max_iter, a.feature_penalty, a.probe_folds, seed)

    def split_config(self, seed):
        return SplitConfig(self.split.test_fraction, seed)

    def smote_config(self, seed):
        return SmoteConfig(self.smote.target_per_class, self.smote.k_neighbors, seed)


def _build_section(name, cls, raw):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in raw.items():
        expected = type(getattr(defaults, key))
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
            raise ConfigError(f"[{name}] {key} must be {expected.__name__}, got {value!r}")
        kwargs[key] = copy.deepcopy(value)
    return cls(**kwargs)


def _build_model(name, raw):
    if name not in MODEL_PARAMS:
        raise ConfigError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")
    spec = _build_section(f"models.{name}", ModelSection, raw)
    allowed = MODEL_PARAMS[name]
    for part in ("fixed", "grid"):
        bad = sorted(set(getattr(spec, part)) - allowed)
        if bad:
            raise ConfigError(f"unknown parameter(s) in [models.{name}.{part}]: {', '.join(bad)}")
    overlap = sorted(set(spec.fixed) & set(spec.grid))
    if overlap:
        raise ConfigError(f"[models.{name}] parameter(s) both fixed and searched: {', '.join(overlap)}")
    for key, values in spec.grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"[models.{name}.grid] {key} must be a non-empty list")
    return spec


def _validate(cfg: PipelineConfig):
    if cfg.data.format not in ("arff", "csv"):
        raise ConfigError(f"data.format must be 'arff' or 'csv', got {cfg.data.format!r}")
    if not 0 <= cfg.run.master_seed < 2**64:
        raise ConfigError("run.master_seed must be an unsigned 64-bit integer")
    if cfg.run.n_jobs < 1:
        raise ConfigError("run.n_jobs must be at least 1")
    if not 0.0 < cfg.anova.alpha < 1.0:
        raise ConfigError("anova.alpha must lie in (0, 1)")
    if cfg.cv.folds < 2:
        raise ConfigError("cv.folds must be at least 2")
    cfg.impute_config()
    cfg.cuckoo_config(0)
    cfg.sa_config(0)
    if cfg.smote.target_per_class < 1 or cfg.smote.k_neighbors < 1:
        raise ConfigError("smote.target_per_class and smote.k_neighbors must be positive")
    # test_fraction is checked by the split stage itself so its error carries that stage tag.


def from_dict(raw) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a table")
    unknown = sorted(set(raw) - set(SECTIONS) - {"models"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    kwargs = {name: _build_section(name, cls, raw.get(name, {})) for name, cls in SECTIONS.items()}
    if "models" in raw:
        models_raw = raw["models"]
    else:
        models_raw = _default_raw()["models"]
    if not isinstance(models_raw, dict):
        raise ConfigError("[models] must be a table")
    kwargs["models"] = {name: _build_model(name, spec) for name, spec in models_raw.items()}
    cfg = PipelineConfig(**kwargs)
    _validate(cfg)
    return cfg


def _default_raw():
    return tomllib.loads(resources.files("ckdpipe").joinpath("default_config.toml").read_text())


def load_config(path=None) -> PipelineConfig:
    """Parse a TOML config; ``None`` loads the shipped default.

    Omitted keys take their defaults; a file without any ``[models]`` table
    gets the shipped model grids.
    """
    if path is None:
        text = resources.files("ckdpipe").joinpath("default_config.toml").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path or 'default config'}: {exc}") from exc
    return from_dict(raw)


def default_config() -> PipelineConfig:
    return load_config(None)
