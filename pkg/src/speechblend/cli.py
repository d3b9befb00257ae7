"""Command line entry point.

Subcommands::

    speechblend weights   stratum sampling weights as JSON
    speechblend simulate  run the sampling pipeline, print a JSON report
    speechblend sample    run the pipeline, print one JSON line per batch
    speechblend eval wer|bleu|halluc|stitch
    speechblend layout    token ID layout as JSON

Reports go to stdout, logs to stderr. Exit status is 0 on success, 1 on bad
usage or configuration, 2 on bad input data.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

from . import evaluation
from .manifest import STRATIFICATIONS, CorpusStats, ManifestError, corpus_stats, read_manifest
from .prompts import DEFAULT_LANGUAGES, TokenLayout
from .simulate import SimulationConfig, batch_to_json_dict, Pipeline, run_simulation, synthetic_corpus
from .weights import hierarchical_weights, temperature_weights

logger = logging.getLogger("speechblend")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _optional_seconds(value: str) -> Optional[float]:
    if value.lower() in ("none", "off", "disabled"):
        return None
    return float(value)


def _add_corpus_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("corpus")
    g.add_argument("manifests", nargs="*", help="JSONL manifest files")
    g.add_argument("--synthetic", type=int, metavar="N", help="use N synthetic utterances instead of manifests")
    g.add_argument("--dist", default="loguniform:1:40",
                   help="synthetic duration distribution: loguniform:LO:HI, uniform:LO:HI, const:D")
    g.add_argument("--synthetic-langs", default="en", help="comma-separated languages for synthetic records")
    g.add_argument("--skip-invalid", action="store_true", help="skip malformed manifest lines instead of failing")
    g.add_argument("--min-duration", type=float)
    g.add_argument("--max-duration", type=float)
    g.add_argument("--workers", type=int, default=1, help="threads for corpus generation; output is unaffected")


def _add_weight_args(p: argparse.ArgumentParser):
    p.add_argument("--alpha", type=float, default=0.5, help="temperature exponent (language level)")
    p.add_argument("--alpha-dataset", type=float, help="temperature exponent within a language (default: --alpha)")
    p.add_argument("--stratify", choices=STRATIFICATIONS, default="language_then_dataset")


def _add_pipeline_args(p: argparse.ArgumentParser):
    _add_weight_args(p)
    p.add_argument("--num-buckets", type=int, default=31)
    p.add_argument("--batch-duration", type=float, default=360.0, help="batch budget in seconds")
    p.add_argument("--quadratic-duration", type=_optional_seconds, default=20.0,
                   help="seconds, or 'none' to disable the quadratic penalty")
    p.add_argument("--buffer-size", type=int, default=20000)
    p.add_argument("--shuffle-buffer-size", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, help="records to draw (required for infinite_repeat)")
    p.add_argument("--mode", choices=("infinite_repeat", "single_pass"), default="infinite_repeat")
    p.add_argument("--budget-metric", choices=("effective", "raw"), default="effective")
    p.add_argument("--bin-metric", choices=("effective", "duration", "count"), default="effective")
    p.add_argument("--bucket-choice", choices=("uniform", "occupancy"), default="uniform")
    p.add_argument("--bin-sample", type=int, default=100_000, help="draws used to estimate bucket edges")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="speechblend", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("weights", help="stratum sampling weights")
    _add_corpus_args(p)
    _add_weight_args(p)
    p.add_argument("--hours", action="append", default=[], metavar="STRATUM=HOURS",
                   help="hours per stratum, e.g. en=63.4 or en/mls=10 (repeatable)")

    p = sub.add_parser("simulate", help="run the sampling pipeline and report statistics")
    _add_corpus_args(p)
    _add_pipeline_args(p)

    p = sub.add_parser("sample", help="emit batches as JSONL")
    _add_corpus_args(p)
    _add_pipeline_args(p)
    p.add_argument("--ids-only", action="store_true", help="list record ids instead of full records")
    p.add_argument("--max-batches", type=int)

    p = sub.add_parser("eval", help="scoring tools")
    ev = p.add_subparsers(dest="metric", required=True, parser_class=_Parser)
    q = ev.add_parser("wer", help="word error rate with a bootstrap interval")
    q.add_argument("--ref", required=True, help="reference file, one utterance per line")
    q.add_argument("--hyp", required=True, help="hypothesis file, one utterance per line")
    q.add_argument("--no-normalize", action="store_true")
    q.add_argument("--bootstrap", type=int, default=10000, help="replications; 0 disables the interval")
    q.add_argument("--level", type=float, default=0.95)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--workers", type=int, default=1)
    q = ev.add_parser("bleu", help="corpus BLEU")
    q.add_argument("--ref", required=True)
    q.add_argument("--hyp", required=True)
    q.add_argument("--max-n", type=int, default=4)
    q = ev.add_parser("halluc", help="hallucinated characters per minute")
    q.add_argument("--hyp", required=True, help="transcripts of non-speech audio, one per line")
    q.add_argument("--minutes", type=float, required=True, help="total audio duration in minutes")
    q = ev.add_parser("stitch", help="join per-chunk transcripts of a long recording")
    q.add_argument("segments", help="file with one chunk transcript per line")

    p = sub.add_parser("layout", help="token ID layout")
    p.add_argument("--languages", default=",".join(DEFAULT_LANGUAGES))
    p.add_argument("--per-lang-vocab", type=int, default=1024)
    return parser


def _load_corpus(args) -> list:
    if args.synthetic is not None:
        if args.manifests:
            raise UsageError("give either manifests or --synthetic, not both")
        if args.synthetic <= 0:
            raise UsageError("--synthetic must be positive")
        langs = [x for x in args.synthetic_langs.split(",") if x]
        try:
            return synthetic_corpus(args.synthetic, args.dist, args.seed if hasattr(args, "seed") else 0,
                                    langs, workers=args.workers)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if not args.manifests:
        raise UsageError("no manifests given (or use --synthetic N)")
    records = []
    errors: List[ManifestError] = []
    for path in args.manifests:
        try:
            records.extend(read_manifest(path, skip_invalid=args.skip_invalid, errors=errors,
                                         min_duration=args.min_duration, max_duration=args.max_duration))
        except OSError as exc:
            raise DataError(f"{path}: {exc.strerror or exc}") from None
        except ManifestError as exc:
            raise DataError(f"{path}: {exc}") from None
    if errors:
        logger.warning("skipped %d invalid manifest lines", len(errors))
    if not records:
        raise DataError("manifests contain no records")
    return records


def _parse_hours(items: Sequence[str], stratify: str) -> CorpusStats:
    hours = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--hours expects STRATUM=HOURS, got {item!r}")
        try:
            h = float(value)
        except ValueError:
            raise UsageError(f"--hours value is not a number: {item!r}") from None
        if stratify == "language_then_dataset":
            lang, sep, ds = key.partition("/")
            if not sep:
                raise UsageError(f"--hours key must be LANG/DATASET with language_then_dataset, got {key!r}")
            hours[(lang, ds)] = h
        else:
            hours[key] = h
    return CorpusStats.from_hours(hours, stratify)


def _simulation_config(args) -> SimulationConfig:
    try:
        cfg = SimulationConfig(
            alpha=args.alpha,
            alpha_dataset=args.alpha_dataset,
            stratify=args.stratify,
            num_buckets=args.num_buckets,
            batch_duration=args.batch_duration,
            quadratic_duration=args.quadratic_duration,
            buffer_size=args.buffer_size,
            shuffle_buffer_size=args.shuffle_buffer_size,
            seed=args.seed,
            draws=args.draws,
            mode=args.mode,
            budget_metric=args.budget_metric,
            bin_metric=args.bin_metric,
            bucket_choice=args.bucket_choice,
            bin_sample=args.bin_sample,
        )
        cfg.bucketing()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0.0 <= args.alpha <= 1.0 or (args.alpha_dataset is not None and not 0.0 <= args.alpha_dataset <= 1.0):
        raise UsageError("alpha must lie in [0, 1]")
    if args.shuffle_buffer_size < 0:
        raise UsageError("--shuffle-buffer-size must be >= 0")
    return cfg


def _emit(obj, out) -> None:
    out.write(json.dumps(obj, indent=2))
    out.write("\n")


def cmd_weights(args, out) -> None:
    if args.hours:
        if args.manifests or args.synthetic is not None:
            raise UsageError("give either --hours or a corpus, not both")
        stats = _parse_hours(args.hours, args.stratify)
    else:
        stats = corpus_stats(_load_corpus(args), args.stratify)
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError("alpha must lie in [0, 1]")
    try:
        if args.stratify == "language_then_dataset":
            alpha_ds = args.alpha if args.alpha_dataset is None else args.alpha_dataset
            weights = hierarchical_weights(stats, args.alpha, alpha_ds)
        else:
            weights = temperature_weights(stats, args.alpha)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _emit({
        "stratify": args.stratify,
        "alpha": args.alpha,
        "alpha_dataset": args.alpha_dataset,
        "hours": {("/".join(k) if isinstance(k, tuple) else k): h for k, h in stats.hours.items()},
        "weights": weights.to_json_dict(),
    }, out)


def cmd_simulate(args, out) -> None:
    cfg = _simulation_config(args)
    records = _load_corpus(args)
    try:
        report = run_simulation(records, cfg)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    _emit(report, out)


def cmd_sample(args, out) -> None:
    cfg = _simulation_config(args)
    records = _load_corpus(args)
    try:
        pipe = Pipeline(records, cfg)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    for i, batch in enumerate(pipe.batches()):
        if args.max_batches is not None and i >= args.max_batches:
            break
        out.write(json.dumps(batch_to_json_dict(i, batch, args.ids_only), ensure_ascii=False))
        out.write("\n")


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, encoding="utf-8") as f:
            return [line.rstrip("\n") for line in f]
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror or exc}") from None


def _paired(args):
    refs, hyps = _read_lines(args.ref), _read_lines(args.hyp)
    if len(refs) != len(hyps):
        raise DataError(f"{len(refs)} reference lines but {len(hyps)} hypothesis lines")
    return refs, hyps


def cmd_eval(args, out) -> None:
    if args.metric == "wer":
        refs, hyps = _paired(args)
        if not args.no_normalize:
            refs = [evaluation.normalize_eval_text(r) for r in refs]
            hyps = [evaluation.normalize_eval_text(h) for h in hyps]
        total, per = evaluation.corpus_wer(refs, hyps, workers=args.workers)
        report = total.to_json_dict()
        report["utterances"] = len(per)
        if args.bootstrap > 0:
            if total.ref_words == 0:
                raise DataError("references contain no words")
            ci = evaluation.bootstrap_wer_ci([(b.ref_words, b.errors) for b in per],
                                             replications=args.bootstrap, level=args.level, seed=args.seed)
            report["ci"] = ci.to_json_dict()
        _emit(report, out)
    elif args.metric == "bleu":
        refs, hyps = _paired(args)
        tok_refs = [evaluation.tokenize_bleu(r) for r in refs]
        tok_hyps = [evaluation.tokenize_bleu(h) for h in hyps]
        _emit({"bleu": evaluation.corpus_bleu(tok_refs, tok_hyps, args.max_n), "sentences": len(refs)}, out)
    elif args.metric == "halluc":
        if not args.minutes > 0:
            raise UsageError("--minutes must be positive")
        hyps = _read_lines(args.hyp)
        _emit({
            "chars_per_minute": evaluation.hallucination_rate(hyps, args.minutes),
            "characters": sum(len(h.strip()) for h in hyps),
            "minutes": args.minutes,
        }, out)
    elif args.metric == "stitch":
        _emit({"text": evaluation.stitch_long_form(_read_lines(args.segments))}, out)


def cmd_layout(args, out) -> None:
    langs = tuple(x for x in args.languages.split(",") if x)
    try:
        layout = TokenLayout(languages=langs, per_lang_vocab=args.per_lang_vocab)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out.write(layout.to_json())
    out.write("\n")


COMMANDS = {
    "weights": cmd_weights,
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "layout": cmd_layout,
}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    out = out if out is not None else sys.stdout
    try:
        COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"speechblend: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"speechblend: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
