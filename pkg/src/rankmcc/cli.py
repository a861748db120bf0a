"""Command line entry points.

Subcommands::

    rankmcc train   -- train one configuration, report test metrics
    rankmcc grid    -- all loss x interaction combinations on one dataset
    rankmcc eval    -- metrics for stored score files against labels
    rankmcc verify  -- randomized checks of the package's math claims
    rankmcc report  -- re-render a stored report csv (csv/md + figure)

Configuration comes from flags and/or a JSON config file (``--config``);
flags override the file. Exit codes: 0 success, 1 usage error, 2
verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .data import DatasetFormatError, load_labels_csv, load_scores_csv
from .losses import LOSS_KINDS
from .metrics import evaluate_scores
from .model import INTERACTION_KINDS, MLP_WIDTHS, save_checkpoint
from .optim import OPTIMIZER_KINDS
from .report import parse_csv, to_csv, to_markdown, write_report
from .train import SELECTION_METRICS, config_from_dict, run_grid, run_train
from .verify import run_verification


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on bad flags; usage errors are 1 here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


class UsageError(ValueError):
    pass


def _add_common_train_flags(p: argparse.ArgumentParser, with_loss: bool) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--data", dest="data_path", help="dataset csv (label,f0,...)")
    p.add_argument("--synth", help="synthetic blobs: n,d0,per_class,std")
    p.add_argument("--split", help="train,val,test fractions (default 0.6,0.2,0.2)")
    if with_loss:
        p.add_argument("--loss", choices=LOSS_KINDS)
        p.add_argument("--interaction", choices=INTERACTION_KINDS)
    p.add_argument("--sigma", type=float, help="pairwise logistic scale")
    p.add_argument("--alpha", type=float, help="rank-smoothing sharpness")
    p.add_argument("--gumbel-samples", type=int, help="perturbed copies to average")
    p.add_argument("--gumbel-scale", type=float, help="perturbation magnitude")
    p.add_argument("--mse-target", type=float, help="regression target for the correct class")
    p.add_argument("--width", type=int, choices=MLP_WIDTHS,
                   help="hidden width of MLP interaction heads")
    p.add_argument("--opt", dest="optimizer", choices=OPTIMIZER_KINDS)
    p.add_argument("--lr", help="learning rate, or 'sweep' for the x3 grid")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--select", dest="selection_metric", choices=SELECTION_METRICS)
    p.add_argument("--out", help="write the report here")
    p.add_argument("--format", choices=("csv", "md"), default="csv")
    p.add_argument("--no-figures", action="store_true",
                   help="skip rendering the figure next to the report")


def build_parser() -> _Parser:
    parser = _Parser(prog="rankmcc", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one configuration")
    _add_common_train_flags(p_train, with_loss=True)
    p_train.add_argument("--checkpoint", help="write the best model here "
                         "(default: <out>.ckpt.json when --out is given)")
    p_train.set_defaults(func=cmd_train)

    p_grid = sub.add_parser("grid", help="full loss x interaction grid")
    _add_common_train_flags(p_grid, with_loss=False)
    p_grid.add_argument("--workers", type=int, default=1,
                        help="thread pool size for independent grid cells")
    p_grid.set_defaults(func=cmd_grid)

    p_eval = sub.add_parser("eval", help="evaluate stored score files")
    p_eval.add_argument("scores", nargs="+", help="score csv files (s0,...,s{n-1})")
    p_eval.add_argument("--labels", required=True, help="label csv file")
    p_eval.add_argument("--k", type=int, action="append",
                        help="cutoffs to report (default 1 and 5)")
    p_eval.add_argument("--out", help="write the metric table here")
    p_eval.add_argument("--format", choices=("csv", "md"), default="csv")
    p_eval.set_defaults(func=cmd_eval)

    p_verify = sub.add_parser("verify", help="randomized checks of math claims")
    p_verify.add_argument("--trials", type=int, default=1000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_report = sub.add_parser("report", help="re-render a stored report")
    p_report.add_argument("input", help="report csv produced by train/grid")
    p_report.add_argument("--out", help="write the rendered report here")
    p_report.add_argument("--format", choices=("csv", "md"), default="md")
    p_report.add_argument("--no-figures", action="store_true")
    p_report.set_defaults(func=cmd_report)

    return parser


def _build_config(args: argparse.Namespace, with_loss: bool):
    doc: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc.update(json.load(fh))

    loss_doc: dict = dict(doc.get("loss", {}))
    if with_loss and args.loss is not None:
        loss_doc["kind"] = args.loss
    for flag, key in (("sigma", "sigma"), ("alpha", "alpha"),
                      ("gumbel_samples", "gumbel_samples"),
                      ("gumbel_scale", "gumbel_scale"),
                      ("mse_target", "mse_target")):
        value = getattr(args, flag)
        if value is not None:
            loss_doc[key] = value
    if loss_doc:
        doc["loss"] = loss_doc

    if args.data_path is not None:
        doc["data_path"] = args.data_path
        doc["synth"] = None
    if args.synth is not None:
        parts = args.synth.split(",")
        if len(parts) != 4:
            raise UsageError("--synth expects n,d0,per_class,std")
        doc["synth"] = [int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])]
        doc["data_path"] = None
    if args.split is not None:
        parts = args.split.split(",")
        if len(parts) != 3:
            raise UsageError("--split expects train,val,test fractions")
        doc["split_fractions"] = [float(v) for v in parts]
    if with_loss and args.interaction is not None:
        doc["interaction"] = args.interaction
    for flag in ("width", "optimizer", "epochs", "batch_size", "seed",
                 "selection_metric"):
        value = getattr(args, flag)
        if value is not None:
            doc[flag] = value
    if args.lr is not None:
        doc["lr"] = args.lr if args.lr == "sweep" else float(args.lr)
    return config_from_dict(doc)


def _emit(report, args) -> None:
    text = to_csv(report) if args.format == "csv" else to_markdown(report)
    sys.stdout.write(text)
    if args.out:
        written = write_report(report, args.out, fmt=args.format,
                               figures=not args.no_figures)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)


def cmd_train(args) -> int:
    config = _build_config(args, with_loss=True)
    outcome = run_train(config)
    _emit(outcome.report, args)
    checkpoint = args.checkpoint
    if checkpoint is None and args.out:
        checkpoint = os.path.splitext(str(args.out))[0] + ".ckpt.json"
    if checkpoint:
        save_checkpoint(outcome.model, checkpoint)
        print(f"wrote {checkpoint}", file=sys.stderr)
    return 0


def cmd_grid(args) -> int:
    config = _build_config(args, with_loss=False)
    report = run_grid(config, workers=args.workers)
    _emit(report, args)
    return 0


def _eval_table(score_files, labels_path, ks):
    labels = load_labels_csv(labels_path)
    header = ["file"]
    for k in ks:
        header += [f"acc@{k}", f"err@{k}", f"ndcg@{k}"]
    header.append("mrr")
    rows = []
    per_file = {}
    for path in score_files:
        scores = load_scores_csv(path)
        if scores.shape[0] != labels.shape[0]:
            raise UsageError(
                f"{path}: {scores.shape[0]} rows but {labels.shape[0]} labels"
            )
        if np.any(labels >= scores.shape[1]):
            raise UsageError(f"{path}: labels exceed the score column count")
        table = evaluate_scores(scores, labels, ks=ks)
        per_file[path] = table
        cells = [os.path.basename(str(path))]
        for k in ks:
            cells += [f"{100 * table[f'acc@{k}']:.2f}", f"{100 * table[f'err@{k}']:.2f}",
                      f"{100 * table[f'ndcg@{k}']:.2f}"]
        cells.append(f"{100 * table['mrr']:.2f}")
        rows.append(cells)
    return header, rows, per_file


def _comparison_lines(score_files, per_file, ks) -> list[str]:
    lines = []
    for metric in [f"acc@{k}" for k in ks] + [f"ndcg@{k}" for k in ks] + ["mrr"]:
        values = [(100 * per_file[p][metric], os.path.basename(str(p)))
                  for p in score_files]
        shown = [(f"{v:.2f}", name) for v, name in values]
        if len({s for s, _ in shown}) == 1:
            lines.append(f"{metric}: tie at {shown[0][0]}")
        else:
            ranked = sorted(shown, key=lambda t: (-float(t[0]), t[1]))
            lines.append(f"{metric}: " + " > ".join(f"{n} ({v})" for v, n in ranked))
    return lines


def cmd_eval(args) -> int:
    ks = tuple(args.k) if args.k else (1, 5)
    header, rows, per_file = _eval_table(args.scores, args.labels, ks)
    if args.format == "md":
        text = ("| " + " | ".join(header) + " |\n"
                + "|" + "|".join(["---"] * len(header)) + "|\n"
                + "".join("| " + " | ".join(r) + " |\n" for r in rows))
    else:
        text = ",".join(header) + "\n" + "".join(",".join(r) + "\n" for r in rows)
    sys.stdout.write(text)
    if len(args.scores) > 1:
        for line in _comparison_lines(args.scores, per_file, ks):
            print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    results = run_verification(args.trials, args.seed)
    for result in results:
        print(result.line())
    if all(r.passed for r in results):
        print(f"all {len(results)} checks passed")
        return 0
    print("verification FAILED", file=sys.stderr)
    return 2


def cmd_report(args) -> int:
    with open(args.input, "r", encoding="utf-8") as fh:
        report = parse_csv(fh.read())
    text = to_csv(report) if args.format == "csv" else to_markdown(report)
    sys.stdout.write(text)
    if args.out:
        written = write_report(report, args.out, fmt=args.format,
                               figures=not args.no_figures)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"rankmcc: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, DatasetFormatError, OSError) as exc:
        print(f"rankmcc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
