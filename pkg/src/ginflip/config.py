"""Experiment config files: versioned INI documents with a fixed key schema.

Unknown sections or keys are errors, so a config that parses is fully
understood.  Every sub-component seed defaults to a value derived from the
experiment seed, keeping whole runs reproducible from a single number.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass

from .errors import ConfigError
from .graphs import SplitSpec
from .losses import LossKind
from .metrics import MetricKind
from .rng import derive_seed

CONFIG_VERSION = "1"

_SCHEMA = {
    "experiment": {"version", "seed", "out"},
    "data": {"source", "family", "per_class", "sizes", "directory", "name", "seed"},
    "split": {"train", "valid", "test", "seed"},
    "model": {
        "architecture", "num_layers", "hidden_dim", "mlp_depth", "epsilon",
        "virtual_node", "seed",
    },
    "training": {"epochs", "lr", "batch_size", "metric", "seed"},
    "protocol": {"initial_runs", "cap", "metric"},
}
_ATTACK_KEYS = {
    "attack", "loss", "attack_runs", "candidates_per_layer", "max_combination_size",
    "batch_size", "pool_fraction", "seed", "resample_batch",
}


@dataclass
class DataSpec:
    source: str                 # 'synthetic' | 'tu'
    family: str = ""
    per_class: int = 0
    sizes: tuple[int, int] = (0, 0)
    directory: str = ""
    name: str = ""
    seed: int = 0


@dataclass
class ModelSpec:
    architecture: str = "GIN"
    num_layers: int = 5
    hidden_dim: int = 64
    mlp_depth: int = 2
    epsilon: float = 0.0
    virtual_node: bool = False
    seed: int = 0


@dataclass
class TrainingSpec:
    epochs: int = 30
    lr: float = 1e-3
    batch_size: int = 32
    metric: MetricKind = MetricKind.ACC
    seed: int = 0


@dataclass
class AttackSpec:
    label: str
    attack: str
    loss: str = ""
    attack_runs: int = 5
    candidates_per_layer: int = 10
    max_combination_size: int = 2
    batch_size: int = 32
    pool_fraction: float = 1.0
    seed: int = 0
    resample_batch: bool = False


@dataclass
class ProtocolSpec:
    initial_runs: int = 5
    cap: int = 50
    metric: MetricKind = MetricKind.ACC


@dataclass
class ExperimentConfig:
    seed: int
    out_dir: str
    data: DataSpec
    split: SplitSpec
    model: ModelSpec
    training: TrainingSpec
    attacks: list[AttackSpec]
    protocol: ProtocolSpec


def _parse_bool(text: str, where: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ConfigError(f"{where}: expected a boolean, got {text!r}")


def _parse_sizes(text: str, where: str) -> tuple[int, int]:
    try:
        lo, _, hi = text.partition(":")
        return int(lo), int(hi)
    except ValueError:
        raise ConfigError(f"{where}: expected 'lo:hi', got {text!r}") from None


def parse_sizes(text: str) -> tuple[int, int]:
    return _parse_sizes(text, "sizes")


def load_experiment_config(path: str, seed_override: int | None = None) -> ExperimentConfig:
    """Parse and validate an experiment config.

    ``seed_override`` replaces the [experiment] seed before the per-section
    seed defaults are derived; seeds set explicitly in the file keep their
    values.
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=(";", "#")
    )
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for section in parser.sections():
        if section.startswith("attack."):
            allowed = _ATTACK_KEYS
        elif section in _SCHEMA:
            allowed = _SCHEMA[section]
        else:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")

    if "experiment" not in parser:
        raise ConfigError(f"{path}: missing [experiment] section")
    exp = parser["experiment"]
    if exp.get("version", "") != CONFIG_VERSION:
        raise ConfigError(
            f"{path}: unsupported config version {exp.get('version', '<missing>')!r}"
        )

    def section(name):
        return parser[name] if name in parser else {}

    def get_int(sec, key, default, where):
        raw = sec.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: {key} must be an integer") from None

    def get_float(sec, key, default, where):
        raw = sec.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where}: {key} must be a number") from None

    try:
        seed = int(exp.get("seed", "0"))
    except ValueError:
        raise ConfigError(f"{path}: experiment seed must be an integer") from None
    if seed_override is not None:
        seed = seed_override
    out_dir = exp.get("out", "runs/experiment")

    d = section("data")
    source = d.get("source", "synthetic")
    if source not in ("synthetic", "tu"):
        raise ConfigError(f"{path}: data source must be 'synthetic' or 'tu'")
    data = DataSpec(
        source=source,
        family=d.get("family", "cycles-vs-paths"),
        per_class=get_int(d, "per_class", 200, "[data]"),
        sizes=_parse_sizes(d.get("sizes", "5:12"), "[data] sizes"),
        directory=d.get("directory", ""),
        name=d.get("name", ""),
        seed=get_int(d, "seed", derive_seed(seed, "data"), "[data]"),
    )
    if source == "tu" and (not data.directory or not data.name):
        raise ConfigError(f"{path}: tu data needs 'directory' and 'name'")

    s = section("split")
    split = SplitSpec(
        fractions=(
            get_float(s, "train", 0.8, "[split]"),
            get_float(s, "valid", 0.1, "[split]"),
            get_float(s, "test", 0.1, "[split]"),
        ),
        seed=get_int(s, "seed", derive_seed(seed, "split"), "[split]"),
    )

    m = section("model")
    model = ModelSpec(
        architecture=m.get("architecture", "GIN"),
        num_layers=get_int(m, "num_layers", 5, "[model]"),
        hidden_dim=get_int(m, "hidden_dim", 64, "[model]"),
        mlp_depth=get_int(m, "mlp_depth", 2, "[model]"),
        epsilon=get_float(m, "epsilon", 0.0, "[model]"),
        virtual_node=_parse_bool(m.get("virtual_node", "false"), "[model]"),
        seed=get_int(m, "seed", derive_seed(seed, "model"), "[model]"),
    )
    if model.architecture not in ("GIN", "GCN"):
        raise ConfigError(f"{path}: unknown architecture {model.architecture!r}")

    t = section("training")
    try:
        metric = MetricKind.parse(t.get("metric", "ACC"))
    except Exception:
        raise ConfigError(f"{path}: unknown training metric") from None
    training = TrainingSpec(
        epochs=get_int(t, "epochs", 30, "[training]"),
        lr=get_float(t, "lr", 1e-3, "[training]"),
        batch_size=get_int(t, "batch_size", 32, "[training]"),
        metric=metric,
        seed=get_int(t, "seed", derive_seed(seed, "training"), "[training]"),
    )

    attacks: list[AttackSpec] = []
    for name in parser.sections():
        if not name.startswith("attack."):
            continue
        a = parser[name]
        label = name.split(".", 1)[1]
        kind = a.get("attack", "").strip()
        if kind not in ("RBFA", "PBFA", "IBFA1", "IBFA2"):
            raise ConfigError(f"{path}: [{name}] has unknown attack {kind!r}")
        loss = a.get("loss", "").strip()
        if loss:
            try:
                LossKind.parse(loss)
            except Exception:
                raise ConfigError(f"{path}: [{name}] has unknown loss {loss!r}") from None
        attacks.append(
            AttackSpec(
                label=label,
                attack=kind,
                loss=loss,
                attack_runs=get_int(a, "attack_runs", 5, f"[{name}]"),
                candidates_per_layer=get_int(a, "candidates_per_layer", 10, f"[{name}]"),
                max_combination_size=get_int(a, "max_combination_size", 2, f"[{name}]"),
                batch_size=get_int(a, "batch_size", 32, f"[{name}]"),
                pool_fraction=get_float(a, "pool_fraction", 1.0, f"[{name}]"),
                seed=get_int(a, "seed", derive_seed(seed, "attack", label), f"[{name}]"),
                resample_batch=_parse_bool(a.get("resample_batch", "false"), f"[{name}]"),
            )
        )

    p = section("protocol")
    try:
        pmetric = MetricKind.parse(p.get("metric", training.metric.value))
    except Exception:
        raise ConfigError(f"{path}: unknown protocol metric") from None
    protocol = ProtocolSpec(
        initial_runs=get_int(p, "initial_runs", 5, "[protocol]"),
        cap=get_int(p, "cap", 50, "[protocol]"),
        metric=pmetric,
    )

    return ExperimentConfig(
        seed=seed,
        out_dir=out_dir,
        data=data,
        split=split,
        model=model,
        training=training,
        attacks=attacks,
        protocol=protocol,
    )
