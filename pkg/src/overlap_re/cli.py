"""Command-line entry point: ``overlap-re <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .corpus import TASKS, CorpusError, corpus_stats
from .kb import KBError, load_kb
from .numerics import CheckpointError
from .pipeline import (
    evaluate_checkpoint,
    find_split,
    load_records,
    resolve_kb,
    run_ablation_suite,
    train_from_dir,
    write_records,
)
from .synth import make_synthetic_corpus
from .training import TrainConfig

LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
SPLIT_NAMES = ("train", "dev", "test")

log = logging.getLogger("overlap_re")


class ValidationError(Exception):
    pass


def _existing(path: str | None, what: str, directory: bool | None = None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"{what} {p} does not exist")
    if directory is True and not p.is_dir():
        raise ValidationError(f"{what} {p} is not a directory")
    if directory is False and not p.is_file():
        raise ValidationError(f"{what} {p} is not a file")
    return p


def _split_files(path: Path) -> dict[str, Path]:
    """``{split: file}`` for a dataset directory, or ``{stem: path}`` for one file."""
    if path.is_file():
        return {path.stem: path}
    found = {s: find_split(path, s) for s in SPLIT_NAMES}
    found = {s: p for s, p in found.items() if p is not None}
    if not found:
        raise ValidationError(f"{path} holds none of {', '.join(s + '.jsonl' for s in SPLIT_NAMES)}")
    return found


def _train_config(args) -> TrainConfig:
    overrides = {"seed": args.seed, "task": args.task, "ablation": args.ablate}
    if args.config:
        _existing(args.config, "config file", directory=False)
        return TrainConfig.from_file(args.config, **overrides)
    return TrainConfig(**{k: v for k, v in overrides.items() if v is not None})


def cmd_prepare(args) -> int:
    src = _existing(args.input, "input")
    _existing(args.kb, "knowledge base", directory=False)
    task = TASKS[args.task or "cpi"]
    kb = load_kb(args.kb) if args.kb else (resolve_kb(src) if src.is_dir() else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    per_split = {}
    for split, path in _split_files(src).items():
        records = load_records(path, task, kb)
        write_records(records, out / f"{split}.jsonl")
        per_split[split] = [r.instance for r in records]
        with_tags = sum(bool(r.knowledge.tags) for r in records)
        print(f"{split}: {len(records)} instances, {with_tags} with knowledge-base tags -> {out / (split + '.jsonl')}")
    (out / "stats.txt").write_text(corpus_stats(per_split, task).render(), encoding="utf-8")
    return 0


def cmd_stats(args) -> int:
    src = _existing(args.input, "input")
    task = TASKS[args.task or "cpi"]
    per_split = {split: [r.instance for r in load_records(path, task)] for split, path in _split_files(src).items()}
    table = corpus_stats(per_split, task)
    text = table.render()
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.txt").write_text(text, encoding="utf-8")
        (out / "stats.json").write_text(json.dumps(table.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


def cmd_train(args) -> int:
    data = _existing(args.data, "dataset directory", directory=True)
    _existing(args.kb, "knowledge base", directory=False)
    cfg = _train_config(args)
    result, _ = train_from_dir(data, args.out, cfg, args.kb)
    print(f"best epoch {result.best_epoch}, dev micro-F {result.best_dev_f:.4f}; model written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    model_dir = _existing(args.model, "model directory", directory=True)
    data = _existing(args.data, "evaluation data")
    _existing(args.kb, "knowledge base", directory=False)
    report = evaluate_checkpoint(model_dir, data, args.out, args.kb, args.split)
    print(report.render(), end="")
    return 0


def cmd_ablate(args) -> int:
    data = _existing(args.data, "dataset directory", directory=True)
    _existing(args.kb, "knowledge base", directory=False)
    if args.ablate:
        raise ValidationError("ablate runs every variant; --ablate is not accepted here")
    cfg = _train_config(args)
    run_ablation_suite(data, args.out, cfg, args.kb)
    print((Path(args.out) / "ablation.txt").read_text(encoding="utf-8"), end="")
    return 0


def cmd_synth(args) -> int:
    summary = make_synthetic_corpus(args.seed if args.seed is not None else 7, args.n_docs, args.out)
    inst = summary.instances
    print(
        f"{summary.n_docs} documents, {sum(inst.values())} instances "
        f"(train {inst['train']}, dev {inst['dev']}, test {inst['test']}), "
        f"{summary.kb_rows} knowledge-base rows -> {args.out}"
    )
    return 0


def cmd_gradcheck(args) -> int:
    from .gradaudit import run_audit

    result = run_audit(seed=args.seed if args.seed is not None else 0, max_coords=args.coords)
    print(result.render(), end="")
    return 0 if result.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="overlap-re",
        description="Chemical-protein relation extraction with Gaussian positional pooling and fusion attention.",
    )
    sub = parser.add_subparsers(dest="command", metavar="<command>", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    def common(p, out_required=True, train=False):
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--task", choices=sorted(TASKS), default=None, help="label set (default cpi)")
        if train:
            p.add_argument("--config", help="key = value training configuration file")
            p.add_argument("--seed", type=int, default=None, help="random seed (default 7)")
            p.add_argument("--ablate", default=None, help="comma-separated components to remove: gaussian,title,knowledge")
            p.add_argument("--kb", help="knowledge-base TSV (default: kb.tsv in the dataset directory)")

    p = add("prepare", cmd_prepare, "Turn a corpus file or dataset directory into instances with knowledge sequences.")
    p.add_argument("input", help="corpus .jsonl, BLUE .tsv or a directory with train/dev/test files")
    common(p)
    p.add_argument("--kb", help="knowledge-base TSV")

    p = add("stats", cmd_stats, "Count instances per label and per kind (overlapping/normal).")
    p.add_argument("input", help="corpus .jsonl, prepared .jsonl, BLUE .tsv or a dataset directory")
    common(p, out_required=False)

    p = add("train", cmd_train, "Train a model on <data>/train.* with early stopping on <data>/dev.*.")
    p.add_argument("data", help="dataset directory")
    common(p, train=True)

    p = add("eval", cmd_eval, "Evaluate a trained model and write predictions and a stratified report.")
    p.add_argument("model", help="directory written by train")
    p.add_argument("data", help="split file or dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kb", help="knowledge-base TSV")
    p.add_argument("--split", default="test", choices=SPLIT_NAMES, help="split to use when <data> is a directory")

    p = add("ablate", cmd_ablate, "Train and score the six component-removal variants.")
    p.add_argument("data", help="dataset directory")
    common(p, train=True)

    p = add("synth", cmd_synth, "Write a synthetic overlapping-relation benchmark.")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 7)")
    p.add_argument("--n-docs", type=int, default=200, help="number of documents (at least 50)")

    p = add("gradcheck", cmd_gradcheck, "Compare backprop gradients with central differences.")
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--coords", type=int, default=24, help="coordinates probed per model parameter")
    return parser


def _configure_logging() -> None:
    name = os.environ.get("OVERLAP_RE_LOG", "info").lower()
    level = LOG_LEVELS.get(name, logging.INFO)
    if not log.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(level)
    if name not in LOG_LEVELS:
        log.warning("OVERLAP_RE_LOG=%s not one of %s; using info", name, sorted(LOG_LEVELS))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging()
    try:
        return args.func(args)
    except (ValidationError, CorpusError, KBError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"overlap-re {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
