"""``uniod`` command line: train, score and bench subcommands.

Exit codes: 0 success, 1 usage error, 2 data validation error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import SWEEPS, run_sweep, write_results
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint, save_report
from .config import ConfigError, load_config
from .data import DataError, load_corpus, load_dataset, load_directory
from .evaluate import MetricError, score, write_scores
from .numeric import NumericError
from .train import TrainingError, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat 'key = value' config file; flags override it")
    p.add_argument("--epochs", type=int)
    p.add_argument("--k", type=int, help="number of bandwidths (prefix of the beta list)")
    p.add_argument("--d-star", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--wd", type=float, dest="weight_decay")
    p.add_argument("--seed", type=int)
    p.add_argument("--subsample-copies", type=int)
    p.add_argument("--subsample-ratio", type=float)
    p.add_argument("--include-original", action="store_true", default=None)
    p.add_argument("--loss-reduction", choices=("mean", "sum"))
    p.add_argument("--max-samples", type=int)


_CONFIG_FLAGS = (
    "epochs", "k", "d_star", "learning_rate", "weight_decay", "seed",
    "subsample_copies", "subsample_ratio", "include_original", "loss_reduction", "max_samples",
)


def _config_from(args):
    return load_config(args.config, **{k: getattr(args, k) for k in _CONFIG_FLAGS})


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uniod", description="Universal graph-based outlier detection.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model on a corpus of labeled datasets")
    p.add_argument("--corpus", required=True, help="directory of labeled CSV files")
    p.add_argument("--out", required=True, help="checkpoint path")
    _add_training_flags(p)

    p = sub.add_parser("score", help="score the rows of one CSV file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--label-column")

    p = sub.add_parser("bench", help="ablation sweep over training settings")
    p.add_argument("--corpus", required=True)
    p.add_argument("--test", required=True, help="directory of labeled test CSV files")
    p.add_argument("--sweep", required=True, choices=SWEEPS)
    p.add_argument("--out", required=True, help="results CSV (a .dat twin is written next to it)")
    p.add_argument("--jobs", type=int, default=1, help="train sweep points in parallel (independent seeds)")
    _add_training_flags(p)
    return parser


def cmd_train(args) -> int:
    config = _config_from(args)
    corpus = load_corpus(args.corpus, seed=config.seed)
    params, report = fit(corpus, config, progress=lambda line: print(line, flush=True))
    save_checkpoint(params, args.out, corpus_fingerprint=corpus.fingerprint)
    save_report(Path(str(args.out) + ".report.json"), report.to_dict())
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_score(args) -> int:
    params, header = load_checkpoint(args.model)
    if not header.get("corpus_fingerprint"):
        print("warning: checkpoint carries no corpus fingerprint", file=sys.stderr)
    ds = load_dataset(args.data, label_column=args.label_column)
    report = score(ds, params)
    write_scores(args.out, report, ds.labels)
    if report.auroc is not None:
        print(f"auroc {report.auroc:.6f} auprc {report.auprc:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _config_from(args)
    corpus = load_corpus(args.corpus, seed=config.seed)
    tests = load_directory(args.test)
    results = run_sweep(args.sweep, corpus, tests, config, jobs=args.jobs, progress=print)
    dat = write_results(args.out, args.sweep, results)
    print(f"wrote {args.out} and {dat}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "score": cmd_score, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, TrainingError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, CheckpointError, MetricError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
