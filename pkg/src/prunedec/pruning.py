"""Magnitude pruning: one-shot and iterative prune / reset / retrain tickets."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import ChannelParams
from .codec import CodeSpec
from .evaluation import measure_accuracy
from .neural import ContractError, MaskedMlp, init_network, validate_layer_dims
from .training import TrainConfig, TrainResult, train

log = logging.getLogger(__name__)

# Fixed noise stream for per-round accuracy so rounds are compared on the same words.
ACCURACY_STREAM = 100


class DegenerateLayerError(RuntimeError):
    def __init__(self, layer: int):
        self.layer = layer
        super().__init__(f"pruning would leave layer {layer} without weights")


class PruneMode(str, enum.Enum):
    ONESHOT = "oneshot"
    ITERATIVE = "lth"


@dataclass(frozen=True)
class PruneSchedule:
    """``rounds`` counts trajectory entries, the dense baseline included."""

    mode: PruneMode = PruneMode.ITERATIVE
    per_round_rate: float = 0.2
    rounds: int = 17
    output_layer_rate_scale: float = 0.5

    def __post_init__(self):
        if not 0 < self.per_round_rate < 1:
            raise ContractError(f"prune rate must lie in (0, 1), got {self.per_round_rate}")
        if self.rounds < 1:
            raise ContractError(f"rounds must be >= 1, got {self.rounds}")
        if not 0 < self.per_round_rate * self.output_layer_rate_scale < 1:
            raise ContractError("output layer rate must lie in (0, 1)")


@dataclass
class RoundRecord:
    round: int
    pruned_fraction: float
    checkpoint: MaskedMlp
    accuracy: float
    val_loss: float
    result: TrainResult | None = field(default=None, repr=False)


@dataclass
class TicketTrajectory:
    records: list[RoundRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i) -> RoundRecord:
        return self.records[i]

    def closest(self, sparsity: float) -> RoundRecord:
        return min(self.records, key=lambda r: abs(r.pruned_fraction - sparsity))


def _layer_rates(net: MaskedMlp, rate: float, output_layer_rate_scale: float) -> list[float]:
    rates = [rate] * net.num_layers
    rates[-1] = rate * output_layer_rate_scale
    return rates


def magnitude_prune(net: MaskedMlp, rate: float, output_layer_rate_scale: float = 0.5) -> list[np.ndarray]:
    """New masks with the smallest-magnitude surviving weights removed, per layer.

    Each layer drops ``floor(layer_rate * remaining)`` of its unmasked
    weights; equal magnitudes are removed in row-major index order.
    """
    if not 0 < rate < 1:
        raise ContractError(f"prune rate must lie in (0, 1), got {rate}")
    masks = []
    for i, (w, m, r) in enumerate(zip(net.weights, net.masks, _layer_rates(net, rate, output_layer_rate_scale))):
        flat_mask = m.ravel().copy()
        alive = np.flatnonzero(flat_mask)
        count = int(np.floor(r * alive.size))
        if count >= alive.size:
            raise DegenerateLayerError(i)
        order = np.argsort(np.abs(w.ravel()[alive]), kind="stable")
        flat_mask[alive[order[:count]]] = 0.0
        masks.append(flat_mask.reshape(m.shape))
    return masks


def with_masks(net: MaskedMlp, masks: list[np.ndarray]) -> MaskedMlp:
    out = net.copy()
    out.masks = [m.copy() for m in masks]
    return out


def reset_to_init(net: MaskedMlp) -> MaskedMlp:
    """Surviving weights and all biases back to their initial values."""
    out = net.copy()
    out.weights = [np.where(m != 0, w0, w) for w, w0, m in zip(net.weights, net.init_weights, net.masks)]
    out.biases = [b0.copy() for b0 in net.init_biases]
    return out


def _record(round_index: int, result: TrainResult, spec: CodeSpec, cfg: TrainConfig,
            eval_words: int, eval_seed: int) -> RoundRecord:
    params = ChannelParams.for_code(spec, cfg.train_ebn0_db)
    acc = measure_accuracy(result.checkpoint, spec, params, eval_words, eval_seed, stream=(ACCURACY_STREAM,))
    net = result.checkpoint
    return RoundRecord(round_index, net.pruned_fraction(), net, acc.acc_word, result.best_val_loss, result)


def run_lth(spec: CodeSpec, dims, cfg: TrainConfig, schedule: PruneSchedule, *,
            init_seed: int | None = None, eval_words: int = 100_000, eval_seed: int | None = None,
            resume: list[RoundRecord] | None = None,
            on_round: Callable[[RoundRecord], None] | None = None) -> TicketTrajectory:
    """Iterative magnitude pruning with rewinding to the original initialisation.

    Round 0 trains the dense network.  Every later round prunes the previous
    round's trained weights, resets the survivors to their initial values and
    retrains with the same configuration (and therefore the same data).  The
    loop ends after ``schedule.rounds`` entries or when pruning can make no
    further progress.  ``resume`` supplies already completed rounds.
    """
    if schedule.mode is not PruneMode.ITERATIVE:
        raise ContractError("run_lth needs an iterative schedule")
    dims = validate_layer_dims(dims, spec.n)
    init_seed = cfg.seed if init_seed is None else init_seed
    eval_seed = cfg.seed if eval_seed is None else eval_seed
    traj = TicketTrajectory(list(resume or []))

    if not traj.records:
        dense = train(init_network(dims, init_seed), spec, cfg, round_index=0)
        rec = _record(0, dense, spec, cfg, eval_words, eval_seed)
        traj.records.append(rec)
        if on_round:
            on_round(rec)

    while len(traj) < schedule.rounds:
        prev = traj.records[-1].checkpoint
        try:
            masks = magnitude_prune(prev, schedule.per_round_rate, schedule.output_layer_rate_scale)
        except DegenerateLayerError as exc:
            log.info("stopping LTH: %s", exc)
            break
        if sum(m.sum() for m in masks) == prev.remaining_weights():
            log.info("stopping LTH: no weights left to prune at this rate")
            break
        ticket = reset_to_init(with_masks(prev, masks))
        round_index = len(traj)
        result = train(ticket, spec, cfg, round_index=round_index)
        rec = _record(round_index, result, spec, cfg, eval_words, eval_seed)
        log.info("round %d: pruned %.4f, accuracy %.4f", round_index, rec.pruned_fraction, rec.accuracy)
        traj.records.append(rec)
        if on_round:
            on_round(rec)
    return traj


@dataclass
class OneShotResult:
    dense: RoundRecord
    pruned: RoundRecord


def run_oneshot(spec: CodeSpec, dims, cfg: TrainConfig, total_rate: float, *,
                init_seed: int | None = None, eval_words: int = 100_000, eval_seed: int | None = None,
                dense: RoundRecord | None = None, output_layer_rate_scale: float = 1.0) -> OneShotResult:
    """Train dense, prune once to ``total_rate``, rewind and retrain.

    ``dense`` may carry an already trained round-0 record (e.g. shared with
    an LTH run using the same seeds).
    """
    if not 0 < total_rate < 1:
        raise ContractError(f"total rate must lie in (0, 1), got {total_rate}")
    dims = validate_layer_dims(dims, spec.n)
    init_seed = cfg.seed if init_seed is None else init_seed
    eval_seed = cfg.seed if eval_seed is None else eval_seed
    if dense is None:
        dense = _record(0, train(init_network(dims, init_seed), spec, cfg, round_index=0),
                        spec, cfg, eval_words, eval_seed)
    masks = magnitude_prune(dense.checkpoint, total_rate, output_layer_rate_scale)
    ticket = reset_to_init(with_masks(dense.checkpoint, masks))
    result = train(ticket, spec, cfg, round_index=1)
    return OneShotResult(dense, _record(1, result, spec, cfg, eval_words, eval_seed))
