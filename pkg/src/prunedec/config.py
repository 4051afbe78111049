"""Experiment configuration: INI-style ``key = value`` files with sections."""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .codec import CodeName, build_codebook
from .neural import ContractError, validate_layer_dims
from .pruning import PruneMode, PruneSchedule
from .training import DEFAULT_MAX_STEPS, DEFAULT_TRAIN_SNR_DB, TrainConfig

SEED_ENV = "PRUNEDEC_SEED"

DEFAULT_HIDDEN = {CodeName.HAMMING74: (64, 64), CodeName.POLAR168: (256, 256)}

# config key -> section
_SECTIONS = {
    "code": "experiment", "seed": "experiment", "out": "experiment", "threads": "experiment",
    "hidden_dims": "network",
    "learning_rate": "training", "batch_size": "training", "max_steps": "training",
    "patience": "training", "eval_every": "training", "val_batch": "training", "train_snr_db": "training",
    "rate": "pruning", "rounds": "pruning", "output_layer_rate_scale": "pruning", "oneshot_rates": "pruning",
    "snr_db": "evaluation", "b": "evaluation", "decoders": "evaluation", "accuracy_words": "evaluation",
    "n_words": "evaluation", "min_errors": "evaluation", "max_words": "evaluation",
}
_LISTS = {"hidden_dims", "oneshot_rates", "snr_db", "b", "decoders"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    code: CodeName = CodeName.HAMMING74
    seed: int = 0
    out: Path = Path("runs")
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    hidden_dims: tuple[int, ...] | None = None
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_steps: int | None = None
    patience: int = 10
    eval_every: int = 500
    val_batch: int = 10_000
    train_snr_db: float | None = None
    rate: float = 0.2
    rounds: int = 17
    output_layer_rate_scale: float = 0.5
    oneshot_rates: tuple[float, ...] = (0.5, 0.8, 0.9, 0.95)
    snr_db: tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0)
    b: tuple[int, ...] = (2, 3)
    decoders: tuple[str, ...] | None = None
    accuracy_words: int = 100_000
    n_words: int | None = None
    min_errors: int = 100
    max_words: int = 10_000_000

    def __post_init__(self):
        self.code = CodeName(self.code)
        if self.hidden_dims is None:
            self.hidden_dims = DEFAULT_HIDDEN[self.code]
        if self.max_steps is None:
            self.max_steps = DEFAULT_MAX_STEPS[self.code]
        if self.train_snr_db is None:
            self.train_snr_db = DEFAULT_TRAIN_SNR_DB[self.code]
        if self.decoders is None:
            self.decoders = ("hard", *(f"semisoft:{b}" for b in self.b), "ml")
        self.out = Path(self.out)
        self.validate()

    def validate(self):
        try:
            validate_layer_dims(self.layer_dims, build_codebook(self.code).n)
            self.train_config()
            self.schedule()
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if not self.snr_db:
            raise ConfigError("at least one test SNR is required")
        n = build_codebook(self.code).n
        if any(not 0 <= b <= n for b in self.b):
            raise ConfigError(f"semi-soft b must lie in [0, {n}]")
        if any(not 0 < r < 1 for r in self.oneshot_rates):
            raise ConfigError("one-shot rates must lie in (0, 1)")

    @property
    def layer_dims(self) -> tuple[int, ...]:
        n = build_codebook(self.code).n
        return (n, *self.hidden_dims, n)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size, max_steps=self.max_steps,
            patience=self.patience, eval_every=self.eval_every, val_batch=self.val_batch,
            train_ebn0_db=self.train_snr_db, seed=self.seed,
        )

    def schedule(self) -> PruneSchedule:
        return PruneSchedule(PruneMode.ITERATIVE, self.rate, self.rounds, self.output_layer_rate_scale)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["code"] = self.code.value
        d["out"] = str(self.out)
        d = {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}
        return d


def _parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    if key in _LISTS:
        items = [s.strip() for s in raw.split(",") if s.strip()]
        elem = {"hidden_dims": int, "oneshot_rates": float, "snr_db": float, "b": int, "decoders": str}[key]
        return tuple(elem(s) for s in items)
    if key in ("n_words",) and raw.lower() in ("", "auto", "none"):
        return None
    if key == "seed":
        return int(raw, 0)
    return kind(raw)


_KINDS = {
    "code": str, "seed": int, "out": Path, "threads": int, "learning_rate": float, "batch_size": int,
    "max_steps": int, "patience": int, "eval_every": int, "val_batch": int, "train_snr_db": float,
    "rate": float, "rounds": int, "output_layer_rate_scale": float, "accuracy_words": int, "n_words": int,
    "min_errors": int, "max_words": int,
}


def read_config_file(path) -> dict:
    """Parse a config file into a flat ``{key: value}`` dict (unknown keys are errors)."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if _SECTIONS.get(key) != section:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            try:
                values[key] = _parse_value(key, raw, _KINDS.get(key, str))
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return values


def write_config_file(cfg: ExperimentConfig, path) -> Path:
    parser = configparser.ConfigParser(interpolation=None)
    for key, value in cfg.as_dict().items():
        if value is None:
            continue
        section = _SECTIONS[key]
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, ", ".join(map(str, value)) if isinstance(value, list) else str(value))
    path = Path(path)
    with path.open("w") as fh:
        parser.write(fh)
    return path


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge defaults, file values and flag overrides (flags win).

    The seed falls back to ``$PRUNEDEC_SEED`` when neither the file nor a
    flag sets it.
    """
    values = dict(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "seed" not in values and os.environ.get(SEED_ENV):
        try:
            values["seed"] = int(os.environ[SEED_ENV], 0)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} is not an integer") from exc
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
