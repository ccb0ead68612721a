"""End-to-end steps: prepare records, train, evaluate and run the ablation suite."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .corpus import (
    AnnotatedDocument,
    FormatConfig,
    Instance,
    Sentence,
    TaskSpec,
    generate_instances,
    parse_corpus,
    read_blue_tsv,
)
from .evaluation import EvalReport, Prediction, report_from_predictions, write_predictions
from .fusion import COMPONENTS, Example, ModelConfig, RelationModel, featurize
from .kb import KnowledgeBase, KnowledgeSequence, build_knowledge_sequence, load_kb
from .numerics import load_checkpoint, save_checkpoint
from .tokenizer import Vocab, build_vocab
from .training import TrainConfig, train

log = logging.getLogger(__name__)

CHECKPOINT = "model.ckpt"
VOCAB = "vocab.txt"
TRAIN_LOG = "train_log.jsonl"

ABLATION_VARIANTS = (
    ("full", ()),
    ("-gaussian", ("gaussian",)),
    ("-title", ("title",)),
    ("-knowledge", ("knowledge",)),
    ("-title&knowledge", ("title", "knowledge")),
    ("-gaussian&title&knowledge", COMPONENTS),
)


@dataclass
class Record:
    """An instance with the title of its document and its knowledge sequence."""

    instance: Instance
    title: str
    knowledge: KnowledgeSequence

    def to_dict(self) -> dict:
        rec = self.instance.to_dict()
        rec["title"] = self.title
        rec["kb_tags"] = self.knowledge.tags
        rec["sdp_tokens"] = self.knowledge.sdp_tokens
        return rec

    @classmethod
    def from_dict(cls, rec: dict) -> Record:
        return cls(
            Instance.from_dict(rec),
            rec.get("title", ""),
            KnowledgeSequence(list(rec.get("kb_tags", [])), list(rec.get("sdp_tokens", []))),
        )


def _is_corpus(path: Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), None)
    return first is not None and "sentences" in json.loads(first)


def load_records(path, task: TaskSpec, kb: KnowledgeBase | None = None) -> list[Record]:
    """Records from a corpus file, a prepared-record file or a BLUE TSV.

    BLUE rows carry neither titles nor parses, so their knowledge sequence
    holds nothing and their title is empty.
    """
    path = Path(path)
    if path.suffix == ".tsv":
        return [Record(inst, "", KnowledgeSequence([], [])) for inst in read_blue_tsv(path, task)]
    if not _is_corpus(path):
        with open(path, encoding="utf-8") as fh:
            return [Record.from_dict(json.loads(line)) for line in fh if line.strip()]
    records = []
    for doc in parse_corpus(path, FormatConfig(task)):
        for inst in generate_instances(doc, task):
            records.append(Record(inst, doc.title, build_knowledge_sequence(inst, doc, kb)))
    return records


def write_records(records: list[Record], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def find_split(data_dir, split: str) -> Path | None:
    for suffix in (".jsonl", ".tsv"):
        p = Path(data_dir) / f"{split}{suffix}"
        if p.exists():
            return p
    return None


def resolve_kb(data_dir, kb_path=None) -> KnowledgeBase | None:
    if kb_path is not None:
        return load_kb(kb_path)
    default = Path(data_dir) / "kb.tsv"
    return load_kb(default) if default.exists() else None


def _vocab_docs(records: list[Record]) -> list[AnnotatedDocument]:
    return [
        AnnotatedDocument(r.instance.instance_id, r.title, [Sentence(" ".join(r.instance.tokens))], [], [])
        for r in records
    ]


def featurize_all(records: list[Record], vocab: Vocab, task: TaskSpec, max_len: int) -> list[Example]:
    return [featurize(r.instance, r.title, r.knowledge.tokens, vocab, task, max_len) for r in records]


@dataclass
class Dataset:
    train: list[Record]
    dev: list[Record]
    test: list[Record]


def load_dataset(data_dir, task: TaskSpec, kb_path=None) -> Dataset:
    data_dir = Path(data_dir)
    train_path = find_split(data_dir, "train")
    if train_path is None:
        raise FileNotFoundError(f"{data_dir}: no train.jsonl or train.tsv")
    kb = resolve_kb(data_dir, kb_path)
    splits = {}
    for split in ("train", "dev", "test"):
        p = find_split(data_dir, split)
        splits[split] = load_records(p, task, kb) if p is not None else []
    return Dataset(**splits)


def _checkpoint_config(model_config: ModelConfig, config: TrainConfig) -> dict:
    return {"model": model_config.to_dict(), "train": config.to_dict()}


def train_on_dataset(data: Dataset, out_dir, config: TrainConfig, vocab: Vocab | None = None):
    """Train, then write the checkpoint, vocabulary and per-epoch log to ``out_dir``."""
    task = config.task_spec
    if vocab is None:
        vocab = build_vocab(_vocab_docs(data.train), config.vocab_max_size, config.vocab_min_freq)
    train_ex = featurize_all(data.train, vocab, task, config.max_len)
    dev_ex = featurize_all(data.dev, vocab, task, config.max_len)
    log.info("training on %d instances, %d dev, vocab %d", len(train_ex), len(dev_ex), len(vocab))
    result = train(train_ex, dev_ex, config, len(vocab), vocab.pad_id)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        out / CHECKPOINT, result.model.state(),
        _checkpoint_config(result.model.config, config), vocab.digest(),
    )
    vocab.save(out / VOCAB)
    with open(out / TRAIN_LOG, "w", encoding="utf-8", newline="\n") as fh:
        for rec in result.log:
            fh.write(rec.to_json() + "\n")
    return result, vocab


def train_from_dir(data_dir, out_dir, config: TrainConfig, kb_path=None):
    return train_on_dataset(load_dataset(data_dir, config.task_spec, kb_path), out_dir, config)


def load_model(model_dir) -> tuple[RelationModel, Vocab, TrainConfig]:
    model_dir = Path(model_dir)
    params, cfg, digest = load_checkpoint(model_dir / CHECKPOINT)
    vocab = Vocab.load(model_dir / VOCAB)
    if vocab.digest() != digest:
        raise ValueError(f"{model_dir / VOCAB} does not match the vocabulary the checkpoint was trained with")
    train_cfg = TrainConfig(**{k: tuple(v) if k == "ablation" else v for k, v in cfg["train"].items()})
    model = RelationModel(ModelConfig.from_dict(cfg["model"]), params)
    return model, vocab, train_cfg


def predict(model: RelationModel, vocab: Vocab, records: list[Record], task: TaskSpec, max_len: int) -> list[Prediction]:
    examples = featurize_all(records, vocab, task, max_len)
    probs = model.predict_proba(examples, vocab.pad_id)
    return [
        Prediction(r.instance.instance_id, r.instance.label, task.labels[int(k)], r.instance.kind)
        for r, k in zip(records, probs.argmax(axis=1))
    ]


def write_report(report: EvalReport, preds: list[Prediction], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_predictions(preds, out / "predictions.tsv")
    (out / "report.txt").write_text(report.render(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")


def evaluate_model(model, vocab, records: list[Record], task: TaskSpec, max_len: int, out_dir=None) -> EvalReport:
    preds = predict(model, vocab, records, task, max_len)
    report = report_from_predictions(preds, task)
    if out_dir is not None:
        write_report(report, preds, out_dir)
    return report


def evaluate_checkpoint(model_dir, data_path, out_dir, kb_path=None, split: str = "test") -> EvalReport:
    """Evaluate a trained model on a split file, or on ``split`` of a dataset directory."""
    model, vocab, cfg = load_model(model_dir)
    data_path = Path(data_path)
    if data_path.is_dir():
        path = find_split(data_path, split)
        if path is None:
            raise FileNotFoundError(f"{data_path}: no {split}.jsonl or {split}.tsv")
        kb = resolve_kb(data_path, kb_path)
    else:
        path, kb = data_path, (load_kb(kb_path) if kb_path else None)
    records = load_records(path, cfg.task_spec, kb)
    if not records:
        raise ValueError(f"{path}: no instances to evaluate")
    return evaluate_model(model, vocab, records, cfg.task_spec, cfg.max_len, out_dir)


@dataclass
class AblationRow:
    variant: str
    removed: tuple[str, ...]
    report: EvalReport
    best_epoch: int
    best_dev_f: float


def render_ablation(rows: list[AblationRow]) -> str:
    head = f"{'Model':<28}{'P(%)':>8}{'R(%)':>8}{'F(%)':>8}{'Overlap F(%)':>14}{'Normal F(%)':>13}"
    lines = [head]
    for row in rows:
        p, r, f = row.report.micro
        kinds = [
            f"{100 * row.report.by_kind[k][2]:.2f}" if row.report.kind_sizes[k] else "n/a"
            for k in ("overlapping", "normal")
        ]
        lines.append(f"{row.variant:<28}{100 * p:>8.2f}{100 * r:>8.2f}{100 * f:>8.2f}{kinds[0]:>14}{kinds[1]:>13}")
    return "\n".join(lines) + "\n"


def ablation_csv(rows: list[AblationRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "removed", "precision", "recall", "f_score", "overlapping_f", "normal_f", "best_epoch", "best_dev_f"])
    for row in rows:
        p, r, f = row.report.micro
        w.writerow([
            row.variant, "+".join(row.removed), repr(p), repr(r), repr(f),
            repr(row.report.by_kind["overlapping"][2]), repr(row.report.by_kind["normal"][2]),
            row.best_epoch, repr(row.best_dev_f),
        ])
    return buf.getvalue()


def run_ablation_suite(data_dir, out_dir, base_config: TrainConfig, kb_path=None, variants=ABLATION_VARIANTS) -> list[AblationRow]:
    """Train and evaluate each variant with the same seed, budget and vocabulary.

    Scores come from the test split (dev when there is no test split).  Each
    variant's model and report go to ``out_dir/<variant>``; the comparison
    table goes to ``ablation.txt`` and ``ablation.csv``.
    """
    task = base_config.task_spec
    data = load_dataset(data_dir, task, kb_path)
    held_out = data.test or data.dev
    if not held_out:
        raise ValueError(f"{data_dir}: need a test or dev split to score the ablation variants")
    vocab = build_vocab(_vocab_docs(data.train), base_config.vocab_max_size, base_config.vocab_min_freq)
    out = Path(out_dir)
    rows = []
    for name, removed in variants:
        cfg = replace(base_config, ablation=tuple(removed))
        log.info("ablation variant %s", name)
        vdir = out / name.lstrip("-").replace("&", "_")
        result, _ = train_on_dataset(data, vdir, cfg, vocab)
        report = evaluate_model(result.model, vocab, held_out, task, cfg.max_len, vdir)
        rows.append(AblationRow(name, tuple(removed), report, result.best_epoch, result.best_dev_f))
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.txt").write_text(render_ablation(rows), encoding="utf-8")
    (out / "ablation.csv").write_text(ablation_csv(rows), encoding="utf-8")
    return rows
