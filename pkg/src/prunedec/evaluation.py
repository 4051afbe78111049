"""Monte Carlo BER and accuracy measurement.

Transmissions are generated in fixed-size chunks, each with its own random
stream keyed by ``(seed, stream, Eb/N0, chunk index)``.  Results therefore
do not depend on the number of worker threads, and different decoders
evaluated with the same seed see exactly the same noise.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .channel import STREAM_EVAL, ChannelParams, make_rng, sample_batch
from .codec import CodeName, CodeSpec, pack_bits
from .decoding import hard_decide, ml_decode, semi_soft_decode
from .neural import ContractError, MaskedMlp, forward

CHUNK_WORDS = 8192
DEFAULT_MIN_ERRORS = 100
DEFAULT_MAX_WORDS = 10_000_000
DEFAULT_ACCURACY_WORDS = 100_000

CSV_COLUMNS = ("ebn0_db", "decoder", "pruned_fraction", "b", "ber", "ber_ci95", "acc_word", "acc_bit", "samples")


@dataclass(frozen=True)
class Decoder:
    """A named map from received channel vectors ``(B, n)`` to codeword bits."""

    name: str
    decode: Callable[[np.ndarray], np.ndarray]
    b: int | None = None
    pruned_fraction: float | None = None

    def __call__(self, received: np.ndarray) -> np.ndarray:
        return self.decode(received)


def hard_decoder(net: MaskedMlp) -> Decoder:
    return Decoder("hard", lambda r: hard_decide(forward(net, r)), None, net.pruned_fraction())


def semisoft_decoder(net: MaskedMlp, spec: CodeSpec, b: int) -> Decoder:
    return Decoder(f"semisoft:{b}", lambda r: semi_soft_decode(forward(net, r), spec, b), b, net.pruned_fraction())


def ml_decoder(spec: CodeSpec) -> Decoder:
    return Decoder("ml", lambda r: ml_decode(r, spec))


def make_decoder(decoder_id: str, spec: CodeSpec, net: MaskedMlp | None = None) -> Decoder:
    """Build a decoder from ``hard``, ``semisoft:<b>`` or ``ml``."""
    kind, _, arg = decoder_id.strip().partition(":")
    if kind == "ml" and not arg:
        return ml_decoder(spec)
    if kind in ("hard", "semisoft"):
        if net is None:
            raise ContractError(f"decoder {decoder_id!r} needs a network checkpoint")
        if kind == "hard" and not arg:
            return hard_decoder(net)
        if kind == "semisoft":
            try:
                b = int(arg)
            except ValueError:
                raise ContractError(f"bad semi-soft decoder {decoder_id!r}") from None
            return semisoft_decoder(net, spec, b)
    raise ContractError(f"unknown decoder {decoder_id!r}")


def ber_on_message_bits(spec: CodeSpec) -> bool:
    """Hamming BER counts message bits; Polar BER counts codeword bits."""
    return spec.name is CodeName.HAMMING74


def decoded_messages(spec: CodeSpec, words: np.ndarray) -> np.ndarray:
    """Messages of decoded words; words outside the codebook fall back to their systematic prefix."""
    idx = spec.message_index[pack_bits(words)]
    msgs = words[:, : spec.k].copy()
    ok = idx >= 0
    msgs[ok] = ((idx[ok, None] >> np.arange(spec.k - 1, -1, -1)) & 1).astype(np.uint8)
    return msgs


@dataclass(frozen=True)
class EvalRow:
    ebn0_db: float
    decoder: str
    pruned_fraction: float | None
    b: int | None
    ber: float
    ber_ci95: float
    acc_word: float
    acc_bit: float
    samples: int
    bit_errors: int | None = None
    total_bits: int | None = None

    def csv_values(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            return repr(float(v)) if isinstance(v, float) else str(v)
        return [fmt(getattr(self, c)) for c in CSV_COLUMNS]

    def schema_tuple(self) -> tuple:
        return tuple(getattr(self, c) for c in CSV_COLUMNS)

    @classmethod
    def from_csv(cls, rec: dict) -> "EvalRow":
        opt_f = lambda s: float(s) if s != "" else None
        opt_i = lambda s: int(s) if s != "" else None
        return cls(
            ebn0_db=float(rec["ebn0_db"]), decoder=rec["decoder"],
            pruned_fraction=opt_f(rec["pruned_fraction"]), b=opt_i(rec["b"]),
            ber=float(rec["ber"]), ber_ci95=float(rec["ber_ci95"]),
            acc_word=float(rec["acc_word"]), acc_bit=float(rec["acc_bit"]),
            samples=int(rec["samples"]),
        )


@dataclass
class EvalReport:
    rows: list[EvalRow]

    def to_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows:
                w.writerow(row.csv_values())
        return path

    @classmethod
    def from_csv(cls, path) -> "EvalReport":
        with Path(path).open(newline="") as fh:
            return cls([EvalRow.from_csv(r) for r in csv.DictReader(fh)])


def ci95(ber: float, total_bits: int) -> float:
    return 1.96 * math.sqrt(ber * (1.0 - ber) / total_bits)


def _snr_key(ebn0_db: float) -> int:
    return int(np.float64(ebn0_db).view(np.uint64))


def _chunk_counts(decoder: Decoder, spec: CodeSpec, params: ChannelParams, rng, words: int):
    messages, codewords, received = sample_batch(spec, params, words, rng)
    decoded = np.asarray(decoder(received), dtype=np.uint8)
    wrong = decoded != codewords
    if ber_on_message_bits(spec):
        ber_errors = int((decoded_messages(spec, decoded) != messages).sum())
    else:
        ber_errors = int(wrong.sum())
    return ber_errors, int(wrong.any(axis=1).sum()), int(wrong.sum())


def measure_ber(decoder: Decoder, spec: CodeSpec, params: ChannelParams, n_words: int | None = None,
                seed: int = 0, *, stream: Sequence[int] = (), min_errors: int = DEFAULT_MIN_ERRORS,
                max_words: int = DEFAULT_MAX_WORDS, threads: int = 1) -> EvalRow:
    """BER, word accuracy and bitwise accuracy of ``decoder`` at one Eb/N0.

    With ``n_words`` given exactly that many transmissions are simulated.
    With ``n_words=None`` chunks are added until at least ``min_errors``
    BER-counted bit errors are seen or ``max_words`` is reached.
    """
    if n_words is not None and n_words < 1:
        raise ContractError(f"n_words must be >= 1, got {n_words}")
    key = (STREAM_EVAL, *stream, _snr_key(params.ebn0_db))
    limit = n_words if n_words is not None else max_words
    n_chunks = -(-limit // CHUNK_WORDS)

    def run(i):
        words = min(CHUNK_WORDS, limit - i * CHUNK_WORDS)
        return words, _chunk_counts(decoder, spec, params, make_rng(seed, *key, i), words)

    total_words = ber_errors = word_errors = cw_bit_errors = 0
    wave = max(1, int(threads))
    pool = ThreadPoolExecutor(max_workers=wave) if wave > 1 else None
    try:
        done = False
        for start in range(0, n_chunks, wave):
            idx = range(start, min(start + wave, n_chunks))
            results = list(pool.map(run, idx)) if pool else [run(i) for i in idx]
            for words, (be, we, cbe) in results:
                total_words += words
                ber_errors += be
                word_errors += we
                cw_bit_errors += cbe
                if n_words is None and ber_errors >= min_errors:
                    done = True
                    break
            if done:
                break
    finally:
        if pool:
            pool.shutdown()

    bits_per_word = spec.k if ber_on_message_bits(spec) else spec.n
    total_bits = total_words * bits_per_word
    ber = ber_errors / total_bits
    return EvalRow(
        ebn0_db=float(params.ebn0_db),
        decoder=decoder.name,
        pruned_fraction=decoder.pruned_fraction,
        b=decoder.b,
        ber=ber,
        ber_ci95=ci95(ber, total_bits),
        acc_word=1.0 - word_errors / total_words,
        acc_bit=1.0 - cw_bit_errors / (total_words * spec.n),
        samples=total_words,
        bit_errors=ber_errors,
        total_bits=total_bits,
    )


def sweep_snr(decoder: Decoder, spec: CodeSpec, snr_list: Sequence[float], n_words: int | None = None,
              seed: int = 0, **kwargs) -> EvalReport:
    """One ``measure_ber`` row per Eb/N0 value, with independent noise per point."""
    if not len(snr_list):
        raise ContractError("snr_list must not be empty")
    return EvalReport([
        measure_ber(decoder, spec, ChannelParams.for_code(spec, snr), n_words, seed, **kwargs)
        for snr in snr_list
    ])


def measure_accuracy(net: MaskedMlp, spec: CodeSpec, params: ChannelParams,
                     n_words: int = DEFAULT_ACCURACY_WORDS, seed: int = 0, **kwargs) -> EvalRow:
    return measure_ber(hard_decoder(net), spec, params, n_words, seed, **kwargs)


@dataclass(frozen=True)
class AccuracyRow:
    round: int
    pruned_fraction: float
    acc_word: float
    acc_bit: float


def accuracy_vs_pruning(trajectory, spec: CodeSpec, params: ChannelParams,
                        n_words: int = DEFAULT_ACCURACY_WORDS, seed: int = 0, **kwargs) -> list[AccuracyRow]:
    """Hard-decision accuracy of every round's checkpoint at one Eb/N0 (same noise for all rounds)."""
    if not len(trajectory):
        raise ContractError("trajectory is empty")
    rows = []
    for rec in trajectory:
        r = measure_accuracy(rec.checkpoint, spec, params, n_words, seed, **kwargs)
        rows.append(AccuracyRow(rec.round, rec.pruned_fraction, r.acc_word, r.acc_bit))
    return rows


def write_accuracy_csv(rows: Sequence[AccuracyRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(AccuracyRow)])
        for r in rows:
            w.writerow([r.round, repr(r.pruned_fraction), repr(r.acc_word), repr(r.acc_bit)])
    return path
