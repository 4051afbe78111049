"""Training loop with on-the-fly channel samples and early stopping."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import STREAM_TRAIN, STREAM_VALIDATION, ChannelParams, make_rng, sample_batch
from .codec import CodeName, CodeSpec
from .neural import Adam, ContractError, MaskedMlp, bce_loss, forward, loss_and_gradients

log = logging.getLogger(__name__)

DEFAULT_TRAIN_SNR_DB = {CodeName.HAMMING74: 0.0, CodeName.POLAR168: 2.0}
DEFAULT_MAX_STEPS = {CodeName.HAMMING74: 50_000, CodeName.POLAR168: 100_000}


class TrainingDivergedError(RuntimeError):
    def __init__(self, step: int, round_index: int | None = None):
        self.step = step
        self.round_index = round_index
        where = f" (round {round_index})" if round_index is not None else ""
        super().__init__(f"training diverged at step {step}{where}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_steps: int = 50_000
    patience: int = 10
    eval_every: int = 500
    val_batch: int = 10_000
    train_ebn0_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError("learning_rate must be > 0")
        if self.patience < 1:
            raise ContractError("patience must be >= 1")
        for name in ("batch_size", "max_steps", "eval_every", "val_batch"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")

    @classmethod
    def for_code(cls, code: CodeName | str, **overrides) -> "TrainConfig":
        code = CodeName(code)
        base = dict(train_ebn0_db=DEFAULT_TRAIN_SNR_DB[code], max_steps=DEFAULT_MAX_STEPS[code])
        base.update(overrides)
        return cls(**base)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class HistoryRow:
    step: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    checkpoint: MaskedMlp
    steps_run: int
    best_val_loss: float
    history: list[HistoryRow] = field(default_factory=list)

    def write_curve(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "train_loss", "val_loss", "val_accuracy"])
            for row in self.history:
                w.writerow([row.step, repr(row.train_loss), repr(row.val_loss), repr(row.val_accuracy)])
        return path


def validation_set(spec: CodeSpec, cfg: TrainConfig):
    params = ChannelParams.for_code(spec, cfg.train_ebn0_db)
    _, codewords, received = sample_batch(spec, params, cfg.val_batch, make_rng(cfg.seed, STREAM_VALIDATION))
    return codewords, received


def _validate(net: MaskedMlp, codewords, received) -> tuple[float, float]:
    p = forward(net, received)
    acc = float(np.mean(np.all((p >= 0.5) == codewords.astype(bool), axis=1)))
    return bce_loss(p, codewords), acc


def train(net: MaskedMlp, spec: CodeSpec, cfg: TrainConfig, round_index: int | None = None) -> TrainResult:
    """Train a copy of ``net`` and return the best-validation parameters.

    Validation runs at step 0 and every ``cfg.eval_every`` steps; training
    stops once ``cfg.patience`` consecutive evaluations fail to improve the
    best validation loss, or at ``cfg.max_steps``.  The input network is
    not modified.
    """
    if net.n != spec.n:
        raise ContractError(f"network width {net.n} does not match code length {spec.n}")
    net = net.copy()
    params = ChannelParams.for_code(spec, cfg.train_ebn0_db)
    rng = make_rng(cfg.seed, STREAM_TRAIN)
    val_cw, val_rx = validation_set(spec, cfg)
    opt = Adam(net, cfg.learning_rate)

    val_loss, val_acc = _validate(net, val_cw, val_rx)
    history = [HistoryRow(0, math.nan, val_loss, val_acc)]
    best_loss, best_step = val_loss, 0
    best = [a.copy() for a in net.weights + net.biases]
    stale = 0
    window = []
    step = 0
    while step < cfg.max_steps:
        _, cw, rx = sample_batch(spec, params, cfg.batch_size, rng)
        loss, grads = loss_and_gradients(net, rx, cw)
        step += 1
        if not math.isfinite(loss):
            raise TrainingDivergedError(step, round_index)
        opt.step(net, grads)
        window.append(loss)
        if step % cfg.eval_every and step != cfg.max_steps:
            continue
        val_loss, val_acc = _validate(net, val_cw, val_rx)
        if not math.isfinite(val_loss):
            raise TrainingDivergedError(step, round_index)
        history.append(HistoryRow(step, float(np.mean(window)), val_loss, val_acc))
        window = []
        if val_loss < best_loss:
            best_loss, best_step, stale = val_loss, step, 0
            best = [a.copy() for a in net.weights + net.biases]
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    nw = net.num_layers
    net.weights = best[:nw]
    net.biases = best[nw:]
    net.metadata = {
        **net.metadata,
        "train_seed": cfg.seed,
        "train_ebn0_db": cfg.train_ebn0_db,
        "steps": step,
        "best_step": best_step,
        "code": spec.name.value,
    }
    log.debug("trained %s for %d steps, best val loss %.6f at %d", net.layer_dims, step, best_loss, best_step)
    return TrainResult(checkpoint=net, steps_run=step, best_val_loss=best_loss, history=history)
