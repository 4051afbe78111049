"""Command-line entry point: ``prunedec {train,lth,oneshot,eval,sweep}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import checkpoint
from .channel import ChannelParams
from .codec import CodeName, build_codebook
from .config import ConfigError, ExperimentConfig, build_config, read_config_file, write_config_file
from .evaluation import (EvalReport, accuracy_vs_pruning, make_decoder, ml_decoder, sweep_snr,
                         write_accuracy_csv)
from .neural import ContractError, init_network
from .plotting import write_ber_svg
from .pruning import RoundRecord, run_lth, run_oneshot
from .training import TrainingDivergedError, train

log = logging.getLogger("prunedec")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
INDEX_COLUMNS = ("round", "pruned_fraction", "val_loss", "accuracy")


class RuntimeFailure(RuntimeError):
    pass


def _eval_kwargs(cfg: ExperimentConfig) -> dict:
    return dict(min_errors=cfg.min_errors, max_words=cfg.max_words, threads=cfg.threads)


def cmd_train(cfg: ExperimentConfig) -> Path:
    spec = build_codebook(cfg.code)
    cfg.out.mkdir(parents=True, exist_ok=True)
    result = train(init_network(cfg.layer_dims, cfg.seed), spec, cfg.train_config())
    path = checkpoint.save(result.checkpoint, cfg.out / "checkpoint.ckpt")
    result.write_curve(cfg.out / "train_curve.csv")
    log.info("wrote %s (%d steps, best val loss %.6f)", path, result.steps_run, result.best_val_loss)
    return path


def _round_paths(out: Path, i: int) -> tuple[Path, Path]:
    return out / "rounds" / f"round_{i:03d}.ckpt", out / "rounds" / f"round_{i:03d}_curve.csv"


def _write_index(records: list[RoundRecord], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INDEX_COLUMNS)
        for r in records:
            w.writerow([r.round, repr(r.pruned_fraction), repr(r.val_loss), repr(r.accuracy)])


def _read_index(out: Path) -> list[RoundRecord]:
    index = out / "index.csv"
    if not index.exists():
        return []
    records = []
    with index.open(newline="") as fh:
        for row in csv.DictReader(fh):
            i = int(row["round"])
            ckpt, _ = _round_paths(out, i)
            records.append(RoundRecord(i, float(row["pruned_fraction"]), checkpoint.load(ckpt),
                                       float(row["accuracy"]), float(row["val_loss"])))
    return records


def _lth_fingerprint(cfg: ExperimentConfig) -> dict:
    # everything that changes what a round computes; ``rounds`` only extends the run
    d = cfg.as_dict()
    for key in ("rounds", "threads", "out", "snr_db", "b", "decoders", "n_words", "min_errors",
                "max_words", "oneshot_rates"):
        d.pop(key)
    return d


def cmd_lth(cfg: ExperimentConfig) -> Path:
    """Run (or resume) an LTH trajectory into ``cfg.out``."""
    spec = build_codebook(cfg.code)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    meta = out / "lth.json"
    fingerprint = _lth_fingerprint(cfg)
    resume = []
    if meta.exists():
        if json.loads(meta.read_text()) != fingerprint:
            raise ConfigError(f"{out} holds a trajectory from a different configuration")
        resume = _read_index(out)[: cfg.rounds]
        if resume:
            log.info("resuming after round %d", resume[-1].round)
    else:
        meta.write_text(json.dumps(fingerprint, sort_keys=True, indent=1) + "\n")

    done = list(resume)

    def persist(rec: RoundRecord):
        ckpt, curve = _round_paths(out, rec.round)
        checkpoint.save(rec.checkpoint, ckpt)
        if rec.result is not None:
            rec.result.write_curve(curve)
        done.append(rec)
        _write_index(done, out / "index.csv")

    traj = run_lth(spec, cfg.layer_dims, cfg.train_config(), cfg.schedule(),
                   eval_words=cfg.accuracy_words, resume=resume, on_round=persist)
    _write_index(traj.records, out / "index.csv")
    rows = accuracy_vs_pruning(traj, spec, ChannelParams.for_code(spec, cfg.train_snr_db),
                               cfg.accuracy_words, cfg.seed, threads=cfg.threads)
    write_accuracy_csv(rows, out / "accuracy.csv")
    return out / "index.csv"


def cmd_oneshot(cfg: ExperimentConfig) -> Path:
    spec = build_codebook(cfg.code)
    cfg.out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train_config()
    dense = None
    rows = []
    for rate in cfg.oneshot_rates:
        res = run_oneshot(spec, cfg.layer_dims, tc, rate, eval_words=cfg.accuracy_words, dense=dense)
        dense = res.dense
        checkpoint.save(res.pruned.checkpoint, cfg.out / f"oneshot_{rate:g}.ckpt")
        rows.append((rate, res.pruned))
    checkpoint.save(dense.checkpoint, cfg.out / "dense.ckpt")
    path = cfg.out / "oneshot.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["total_rate", "pruned_fraction", "val_loss", "accuracy"])
        w.writerow([repr(0.0), repr(dense.pruned_fraction), repr(dense.val_loss), repr(dense.accuracy)])
        for rate, rec in rows:
            w.writerow([repr(float(rate)), repr(rec.pruned_fraction), repr(rec.val_loss), repr(rec.accuracy)])
    return path


def _load_checkpoint(path):
    if path is None:
        return None
    path = Path(path)
    if not path.is_file():
        raise RuntimeFailure(f"checkpoint not found: {path}")
    return checkpoint.load(path)


def cmd_eval(cfg: ExperimentConfig, checkpoint_path=None) -> Path:
    """BER sweep of the configured decoders; writes ``eval.csv`` and ``eval.svg``."""
    spec = build_codebook(cfg.code)
    needs_net = any(d.split(":")[0] != "ml" for d in cfg.decoders)
    if needs_net and checkpoint_path is None:
        raise ConfigError("decoders other than 'ml' need --checkpoint")
    net = _load_checkpoint(checkpoint_path)
    if net is not None and net.n != spec.n:
        raise ConfigError(f"checkpoint width {net.n} does not match {cfg.code.value}")
    rows = []
    for decoder_id in cfg.decoders:
        try:
            decoder = make_decoder(decoder_id, spec, net)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc
        rows += sweep_snr(decoder, spec, cfg.snr_db, cfg.n_words, cfg.seed, **_eval_kwargs(cfg)).rows
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = EvalReport(rows).to_csv(cfg.out / "eval.csv")
    write_ber_svg(rows, cfg.out / "eval.svg", f"{cfg.code.value}: BER vs Eb/N0")
    return path


def cmd_sweep(cfg: ExperimentConfig, trajectory_dir) -> Path:
    """BER of every round of a stored trajectory (hard decisions plus configured semi-soft b) and ML."""
    spec = build_codebook(cfg.code)
    trajectory_dir = Path(trajectory_dir)
    if not (trajectory_dir / "index.csv").is_file():
        raise RuntimeFailure(f"no trajectory index in {trajectory_dir}")
    records = _read_index(trajectory_dir)
    rows = []
    kw = _eval_kwargs(cfg)
    for rec in records:
        ids = ["hard", *(f"semisoft:{b}" for b in cfg.b)]
        for decoder_id in ids:
            decoder = make_decoder(decoder_id, spec, rec.checkpoint)
            rows += sweep_snr(decoder, spec, cfg.snr_db, cfg.n_words, cfg.seed, **kw).rows
    rows += sweep_snr(ml_decoder(spec), spec, cfg.snr_db, cfg.n_words, cfg.seed, **kw).rows
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = EvalReport(rows).to_csv(cfg.out / "sweep.csv")
    write_ber_svg(rows, cfg.out / "sweep.svg", f"{cfg.code.value}: BER at each pruning stage")
    return path


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="INI-style config file; flags override it")
    p.add_argument("--seed", type=lambda s: int(s, 0), help="64-bit unsigned seed (fallback: $PRUNEDEC_SEED)")
    p.add_argument("--threads", type=int, help="Monte Carlo worker threads")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--code", choices=[c.value for c in CodeName])
    p.add_argument("--hidden", type=int, action="append", dest="hidden_dims", help="hidden width (repeatable)")
    p.add_argument("--snr-db", type=float, action="append", dest="snr_db", help="test Eb/N0 in dB (repeatable)")
    p.add_argument("--b", type=int, action="append", help="semi-soft free bits (repeatable)")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--n-words", type=int, dest="n_words", help="fixed words per point (default: adaptive)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prunedec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", help="train a dense decoder")
    _common(p)
    p = sub.add_parser("lth", help="iterative prune/reset/retrain trajectory (resumable)")
    _common(p)
    p.add_argument("--rounds", type=int)
    p.add_argument("--rate", type=float, help="per-round prune fraction")
    p = sub.add_parser("oneshot", help="one-shot prune at one or more total rates")
    _common(p)
    p.add_argument("--rate", type=float, action="append", dest="oneshot_rates", help="total prune fraction (repeatable)")
    p = sub.add_parser("eval", help="BER sweep for hard / semisoft:<b> / ml decoders")
    _common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--decoder", action="append", dest="decoders", help="hard, semisoft:<b> or ml (repeatable)")
    p = sub.add_parser("sweep", help="BER sweep over every round of a trajectory")
    _common(p)
    p.add_argument("--trajectory", type=Path, required=True)
    return parser


_NON_CONFIG = {"command", "config", "verbose", "checkpoint", "trajectory"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_values = read_config_file(args.config) if args.config else {}
        overrides = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
        for key in ("hidden_dims", "snr_db", "b", "decoders", "oneshot_rates"):
            if overrides.get(key) is not None:
                overrides[key] = tuple(overrides[key])
        if overrides.get("b") is not None and overrides.get("decoders") is None and "decoders" not in file_values:
            overrides["decoders"] = ("hard", *(f"semisoft:{b}" for b in overrides["b"]), "ml")
        cfg = build_config(file_values, overrides)
        if args.command == "train":
            result = cmd_train(cfg)
        elif args.command == "lth":
            result = cmd_lth(cfg)
        elif args.command == "oneshot":
            result = cmd_oneshot(cfg)
        elif args.command == "eval":
            result = cmd_eval(cfg, args.checkpoint)
        else:
            result = cmd_sweep(cfg, args.trajectory)
        write_config_file(cfg, cfg.out / f"{args.command}.ini")
    except (ConfigError, ContractError) as exc:
        print(f"prunedec: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeFailure, TrainingDivergedError, OSError, checkpoint.CheckpointError) as exc:
        print(f"prunedec: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
