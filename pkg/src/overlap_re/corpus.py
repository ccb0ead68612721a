"""Annotated documents, masked pair instances and corpus statistics.

Corpus files are JSON lines, one document per line::

    {"doc_id": "...", "title": "...",
     "sentences": [{"text": "...", "dep_edges": [[head, dependent], ...]}],
     "entities": [{"id": "T1", "kind": "Chemical", "sentence": 0,
                   "start": 0, "end": 7, "text": "aspirin"}],
     "relations": [{"chem_id": "T1", "prot_id": "T2", "label": "CPR:4"}]}

Entity offsets are half-open and relative to their sentence.  Dependency
edge indices refer to the tokens produced by :func:`basic_tokenize`.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Iterable

log = logging.getLogger(__name__)

CHEMICAL = "Chemical"
PROTEIN = "Protein"
OVERLAPPING = "overlapping"
NORMAL = "normal"
FALSE = "False"

CHEM_MASK = "@CHEMICAL$"
GENE_MASK = "@GENE$"
DRUG_MASK = "@DRUG$"
# BLUE marks a mention that is both arguments with a fused mask
FUSED_MASKS = ("@CHEM-GENE$", "@DRUG-DRUG$")

_KIND_ALIASES = {
    "chemical": CHEMICAL,
    "chem": CHEMICAL,
    "protein": PROTEIN,
    "gene": PROTEIN,
    "gene-y": PROTEIN,
    "gene-n": PROTEIN,
}

_ATOMIC = [CHEM_MASK, GENE_MASK, DRUG_MASK, *FUSED_MASKS]
_TOKEN_RE = re.compile(
    "|".join(re.escape(a) for a in _ATOMIC) + r"|CPR:\d+|\w+|[^\w\s]"
)
_TAG_RE = re.compile(r"CPR:\d+")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    labels: tuple[str, ...]
    mask1: str
    mask2: str

    @property
    def positive_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.labels if lab != FALSE)

    def label_index(self, label: str) -> int:
        return self.labels.index(label)


CPI = TaskSpec("cpi", ("CPR:3", "CPR:4", "CPR:5", "CPR:6", "CPR:9", FALSE), CHEM_MASK, GENE_MASK)
DDI = TaskSpec("ddi", ("Advice", "Effect", "Mechanism", "Int", FALSE), DRUG_MASK, DRUG_MASK)
TASKS = {"cpi": CPI, "ddi": DDI}


def is_atomic(token: str) -> bool:
    return token in _ATOMIC or bool(_TAG_RE.fullmatch(token))


def basic_tokenize(text: str) -> list[tuple[str, int, int]]:
    """Split on whitespace and punctuation; masks and CPR tags stay whole."""
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


class CorpusError(ValueError):
    """A corpus file failed to parse or validate; ``errors`` lists every problem."""

    def __init__(self, path, errors: list[str]):
        self.path = str(path)
        self.errors = errors
        shown = "\n  ".join(errors[:20])
        more = f"\n  ... {len(errors) - 20} more" if len(errors) > 20 else ""
        super().__init__(f"{path}: {len(errors)} error(s)\n  {shown}{more}")


class InstanceError(ValueError):
    pass


@dataclass
class Sentence:
    text: str


@dataclass
class EntityMention:
    entity_id: str
    kind: str
    sentence_index: int
    char_span: tuple[int, int]
    surface: str


@dataclass
class GoldRelation:
    chem_id: str
    prot_id: str
    label: str


@dataclass
class AnnotatedDocument:
    doc_id: str
    title: str
    sentences: list[Sentence]
    entities: list[EntityMention]
    relations: list[GoldRelation]
    dep_edges: list[tuple[int, int, int]] | None = None

    def entity(self, entity_id: str) -> EntityMention:
        for e in self.entities:
            if e.entity_id == entity_id:
                return e
        raise KeyError(entity_id)

    def edges_for(self, sentence_index: int) -> list[tuple[int, int]]:
        if not self.dep_edges:
            return []
        return [(h, d) for s, h, d in self.dep_edges if s == sentence_index]

    def to_dict(self) -> dict:
        sentences = []
        for i, s in enumerate(self.sentences):
            rec = {"text": s.text}
            if self.dep_edges is not None:
                rec["dep_edges"] = [[h, d] for h, d in self.edges_for(i)]
            sentences.append(rec)
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "sentences": sentences,
            "entities": [
                {
                    "id": e.entity_id,
                    "kind": e.kind,
                    "sentence": e.sentence_index,
                    "start": e.char_span[0],
                    "end": e.char_span[1],
                    "text": e.surface,
                }
                for e in self.entities
            ],
            "relations": [
                {"chem_id": r.chem_id, "prot_id": r.prot_id, "label": r.label}
                for r in self.relations
            ],
        }


@dataclass
class Instance:
    instance_id: str
    tokens: list[str]
    target1_span: tuple[int, int]
    target2_span: tuple[int, int]
    label: str
    kind: str
    doc_id: str
    sentence_index: int | None = None
    arg1_id: str | None = None
    arg2_id: str | None = None
    # character offsets of each token in the source sentence
    offsets: list[tuple[int, int]] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        rec = {
            "instance_id": self.instance_id,
            "doc_id": self.doc_id,
            "tokens": self.tokens,
            "target1_span": list(self.target1_span),
            "target2_span": list(self.target2_span),
            "label": self.label,
            "kind": self.kind,
        }
        if self.sentence_index is not None:
            rec["sentence_index"] = self.sentence_index
            rec["arg1_id"] = self.arg1_id
            rec["arg2_id"] = self.arg2_id
        return rec

    @classmethod
    def from_dict(cls, rec: dict) -> Instance:
        return cls(
            instance_id=rec["instance_id"],
            tokens=list(rec["tokens"]),
            target1_span=tuple(rec["target1_span"]),
            target2_span=tuple(rec["target2_span"]),
            label=rec["label"],
            kind=rec["kind"],
            doc_id=rec["doc_id"],
            sentence_index=rec.get("sentence_index"),
            arg1_id=rec.get("arg1_id"),
            arg2_id=rec.get("arg2_id"),
        )


# parsing

@dataclass(frozen=True)
class FormatConfig:
    task: TaskSpec = CPI
    kind_aliases: dict = field(default_factory=lambda: dict(_KIND_ALIASES))


def _parse_record(rec: dict, cfg: FormatConfig) -> tuple[AnnotatedDocument, list[str]]:
    errors: list[str] = []
    doc_id = str(rec["doc_id"])
    sentences = []
    dep_edges: list[tuple[int, int, int]] = []
    has_edges = False
    for si, s in enumerate(rec["sentences"]):
        text = s["text"] if isinstance(s, dict) else s
        sentences.append(Sentence(text))
        edges = s.get("dep_edges") if isinstance(s, dict) else None
        if edges is None:
            continue
        has_edges = True
        n_tok = len(basic_tokenize(text))
        for edge in edges:
            head, dep = int(edge[0]), int(edge[1])
            if not (0 <= head < n_tok and 0 <= dep < n_tok):
                errors.append(
                    f"doc {doc_id}: dependency edge ({head}, {dep}) outside the "
                    f"{n_tok} tokens of sentence {si}"
                )
            dep_edges.append((si, head, dep))

    entities = []
    seen_ids = set()
    for e in rec.get("entities", []):
        eid = str(e["id"])
        kind = cfg.kind_aliases.get(str(e["kind"]).lower())
        if kind is None:
            errors.append(f"doc {doc_id}: entity {eid} has unknown kind {e['kind']!r}")
            continue
        if eid in seen_ids:
            errors.append(f"doc {doc_id}: duplicate entity id {eid}")
        seen_ids.add(eid)
        si, start, end = int(e["sentence"]), int(e["start"]), int(e["end"])
        if not 0 <= si < len(sentences):
            errors.append(f"doc {doc_id}: entity {eid} refers to missing sentence {si}")
            continue
        text = sentences[si].text
        if not (0 <= start < end <= len(text)):
            errors.append(
                f"doc {doc_id}: entity {eid} span ({start}, {end}) is outside sentence {si}"
            )
            continue
        if "text" in e and text[start:end] != e["text"]:
            errors.append(
                f"doc {doc_id}: entity {eid} text {e['text']!r} does not match "
                f"sentence {si} substring {text[start:end]!r}"
            )
            continue
        entities.append(EntityMention(eid, kind, si, (start, end), text[start:end]))

    kinds = {e.entity_id: e.kind for e in entities}
    relations = []
    for r in rec.get("relations", []):
        chem, prot, label = str(r["chem_id"]), str(r["prot_id"]), str(r["label"])
        if kinds.get(chem) != CHEMICAL or kinds.get(prot) != PROTEIN:
            errors.append(
                f"doc {doc_id}: relation ({chem}, {prot}) must link an existing chemical "
                f"to an existing protein"
            )
            continue
        relations.append(GoldRelation(chem, prot, label))

    doc = AnnotatedDocument(
        doc_id=doc_id,
        title=str(rec.get("title", "")),
        sentences=sentences,
        entities=entities,
        relations=relations,
        dep_edges=dep_edges if has_edges else None,
    )
    return doc, errors


def parse_corpus(path, format_config: FormatConfig = FormatConfig()) -> list[AnnotatedDocument]:
    """Read a JSON-lines corpus, raising :class:`CorpusError` listing every bad record."""
    docs: list[AnnotatedDocument] = []
    errors: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc, problems = _parse_record(rec, format_config)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                errors.append(f"record {lineno}: malformed ({type(exc).__name__}: {exc})")
                continue
            errors.extend(f"record {lineno}: {p}" for p in problems)
            docs.append(doc)
    if errors:
        raise CorpusError(path, errors)
    return docs


def write_corpus(docs: Iterable[AnnotatedDocument], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(json.dumps(doc.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


# instance generation

def _masked_tokens(text: str, targets: list[tuple[int, int, str]]):
    tokens: list[str] = []
    offsets: list[tuple[int, int]] = []
    positions: dict[str, int] = {}
    pos = 0
    for start, end, mask in sorted(targets):
        for tok, s, e in basic_tokenize(text[pos:start]):
            tokens.append(tok)
            offsets.append((pos + s, pos + e))
        positions[mask] = len(tokens)
        tokens.append(mask)
        offsets.append((start, end))
        pos = end
    for tok, s, e in basic_tokenize(text[pos:]):
        tokens.append(tok)
        offsets.append((pos + s, pos + e))
    return tokens, offsets, positions


def _pair_labels(doc: AnnotatedDocument, task: TaskSpec) -> dict[tuple[str, str], set[str]]:
    labels: dict[tuple[str, str], set[str]] = defaultdict(set)
    for r in doc.relations:
        # relation groups outside the evaluated set count as no relation
        labels[(r.chem_id, r.prot_id)].add(r.label if r.label in task.positive_labels else FALSE)
    return labels


def sentence_pairs(doc: AnnotatedDocument, sentence_index: int):
    ents = [e for e in doc.entities if e.sentence_index == sentence_index]
    key = lambda e: (e.char_span, e.entity_id)
    chems = sorted((e for e in ents if e.kind == CHEMICAL), key=key)
    prots = sorted((e for e in ents if e.kind == PROTEIN), key=key)
    return list(product(chems, prots))


def generate_instances(doc: AnnotatedDocument, task: TaskSpec = CPI) -> list[Instance]:
    """One masked instance per chemical-protein pair sharing a sentence."""
    gold = _pair_labels(doc, task)
    out: list[Instance] = []
    for si, sentence in enumerate(doc.sentences):
        pairs = sentence_pairs(doc, si)
        kind = NORMAL if len(pairs) == 1 else OVERLAPPING
        for chem, prot in pairs:
            (cs, ce), (ps, pe) = chem.char_span, prot.char_span
            if cs < pe and ps < ce:
                raise InstanceError(
                    f"doc {doc.doc_id}: entities {chem.entity_id} and {prot.entity_id} overlap"
                )
            labels = gold.get((chem.entity_id, prot.entity_id), {FALSE})
            positive = labels - {FALSE}
            if len(positive) > 1:
                log.warning(
                    "doc %s: pair (%s, %s) has several gold labels %s; dropped",
                    doc.doc_id, chem.entity_id, prot.entity_id, sorted(positive),
                )
                continue
            label = positive.pop() if positive else FALSE
            tokens, offsets, where = _masked_tokens(
                sentence.text, [(cs, ce, task.mask1), (ps, pe, task.mask2)]
            )
            if tokens.count(task.mask1) != 1 or tokens.count(task.mask2) != 1:
                raise InstanceError(
                    f"doc {doc.doc_id}: sentence {si} already contains a mask string"
                )
            t1, t2 = where[task.mask1], where[task.mask2]
            out.append(
                Instance(
                    instance_id=f"{doc.doc_id}.{chem.entity_id}.{prot.entity_id}",
                    tokens=tokens,
                    target1_span=(t1, t1),
                    target2_span=(t2, t2),
                    label=label,
                    kind=kind,
                    doc_id=doc.doc_id,
                    sentence_index=si,
                    arg1_id=chem.entity_id,
                    arg2_id=prot.entity_id,
                    offsets=offsets,
                )
            )
    return out


def generate_all(docs: Iterable[AnnotatedDocument], task: TaskSpec = CPI) -> list[Instance]:
    out = []
    for doc in docs:
        out.extend(generate_instances(doc, task))
    return out


def write_instances(instances: Iterable[Instance], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict(), ensure_ascii=False, sort_keys=True) + "\n")


def read_instances(path) -> list[Instance]:
    with open(path, encoding="utf-8") as fh:
        return [Instance.from_dict(json.loads(line)) for line in fh if line.strip()]


# BLUE-format instances

_BLUE_LABELS = {
    "false": FALSE,
    "ddi-false": FALSE,
    "ddi-advise": "Advice",
    "ddi-effect": "Effect",
    "ddi-mechanism": "Mechanism",
    "ddi-int": "Int",
}
_DDI_SENTENCE_RE = re.compile(r"^(.*\.s\d+)\.p\d+$")


def _normalize_blue_label(label: str, task: TaskSpec) -> str:
    mapped = _BLUE_LABELS.get(label.strip().lower(), label.strip())
    if mapped not in task.labels:
        raise ValueError(f"label {label!r} is not in the {task.name} label set")
    return mapped


def _mask_span(tokens: list[str], mask: str, skip: int | None = None) -> int | None:
    for i, tok in enumerate(tokens):
        if (tok == mask or tok in FUSED_MASKS) and i != skip:
            return i
    return None


def _same_sentence(a: list[str], b: list[str]) -> bool:
    """Whether two masked token lists can come from one sentence.

    Tokens must agree except where a mask on either side stands in for one or
    more tokens on the other, up to the next matching token.
    """
    masks = set(_ATOMIC)
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j] or (a[i] in masks and b[j] in masks):
            i += 1
            j += 1
        elif a[i] in masks or b[j] in masks:
            if b[j] in masks:
                a, b, i, j = b, a, j, i
            nxt = a[i + 1] if i + 1 < len(a) else None
            j += 1
            while j < len(b) and b[j] != nxt and b[j] not in masks:
                j += 1
            i += 1
        else:
            return False
    return i == len(a) and j == len(b)


def assign_kinds(instances: list[Instance]) -> None:
    """Set ``kind`` by grouping instances that share a source sentence."""
    by_doc: dict[str, list[Instance]] = defaultdict(list)
    for inst in instances:
        by_doc[inst.doc_id].append(inst)
    for group in by_doc.values():
        clusters: list[list[Instance]] = []
        keyed: dict[str, list[Instance]] = {}
        for inst in group:
            m = _DDI_SENTENCE_RE.match(inst.instance_id)
            if m:
                keyed.setdefault(m.group(1), []).append(inst)
                continue
            for cluster in clusters:
                if _same_sentence(cluster[0].tokens, inst.tokens):
                    cluster.append(inst)
                    break
            else:
                clusters.append([inst])
        for cluster in clusters + list(keyed.values()):
            kind = NORMAL if len(cluster) == 1 else OVERLAPPING
            for inst in cluster:
                inst.kind = kind


def read_blue_tsv(path, task: TaskSpec = CPI) -> list[Instance]:
    """Convert BLUE ``index<TAB>sentence<TAB>label`` rows into instances."""
    instances = []
    errors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                errors.append(f"line {lineno}: expected 3 tab-separated columns, got {len(parts)}")
                continue
            index, sentence, label = parts
            if lineno == 1 and index == "index":
                continue
            tokens = [t for t, _, _ in basic_tokenize(sentence)]
            t1 = _mask_span(tokens, task.mask1)
            t2 = _mask_span(tokens, task.mask2, skip=t1 if task.mask1 == task.mask2 else None)
            if t1 is None or t2 is None:
                errors.append(f"line {lineno}: missing {task.mask1} or {task.mask2}")
                continue
            if t2 == t1 and tokens[t1] not in FUSED_MASKS:
                errors.append(f"line {lineno}: only one target mask found")
                continue
            try:
                gold = _normalize_blue_label(label, task)
            except ValueError as exc:
                errors.append(f"line {lineno}: {exc}")
                continue
            instances.append(
                Instance(
                    instance_id=index,
                    tokens=tokens,
                    target1_span=(t1, t1),
                    target2_span=(t2, t2),
                    label=gold,
                    kind=OVERLAPPING,
                    doc_id=index.split(".")[0],
                )
            )
    if errors:
        raise CorpusError(path, errors)
    assign_kinds(instances)
    return instances


# statistics

@dataclass
class StatsTable:
    labels: tuple[str, ...]
    label_counts: dict[str, Counter] = field(default_factory=dict)
    kind_counts: dict[str, Counter] = field(default_factory=dict)

    @property
    def splits(self) -> list[str]:
        return list(self.label_counts)

    def total(self, split: str | None = None) -> int:
        if split is None:
            return sum(sum(c.values()) for c in self.label_counts.values())
        return sum(self.label_counts[split].values())

    def label_total(self, label: str) -> int:
        return sum(c[label] for c in self.label_counts.values())

    def kind_total(self, kind: str) -> int:
        return sum(c[kind] for c in self.kind_counts.values())

    def render(self) -> str:
        rows = [["Set", *self.labels]]
        for split in self.splits:
            rows.append([split, *(str(self.label_counts[split][lab]) for lab in self.labels)])
        rows.append(["Total", *(str(self.label_total(lab)) for lab in self.labels)])
        kinds = [["Set", "Overlapping", "Normal", "All"]]
        for split in self.splits:
            c = self.kind_counts[split]
            kinds.append([split, str(c[OVERLAPPING]), str(c[NORMAL]), str(self.total(split))])
        kinds.append(
            ["Total", str(self.kind_total(OVERLAPPING)), str(self.kind_total(NORMAL)), str(self.total())]
        )
        return _grid(rows) + "\n\n" + _grid(kinds) + "\n"

    def to_dict(self) -> dict:
        return {
            split: {
                "labels": {lab: self.label_counts[split][lab] for lab in self.labels},
                OVERLAPPING: self.kind_counts[split][OVERLAPPING],
                NORMAL: self.kind_counts[split][NORMAL],
                "all": self.total(split),
            }
            for split in self.splits
        }


def _grid(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths)))
        for r in rows
    )


def corpus_stats(instances, task: TaskSpec = CPI) -> StatsTable:
    """Label and kind counts; ``instances`` is a list or a mapping split -> list."""
    if not isinstance(instances, dict):
        instances = {"all": list(instances)}
    table = StatsTable(task.labels)
    for split, items in instances.items():
        labels = Counter({lab: 0 for lab in task.labels})
        kinds = Counter({OVERLAPPING: 0, NORMAL: 0})
        for inst in items:
            labels[inst.label] += 1
            kinds[inst.kind] += 1
        table.label_counts[split] = labels
        table.kind_counts[split] = kinds
    return table


def load_instances_any(path, task: TaskSpec = CPI) -> list[Instance]:
    """Instances from a corpus file, a prepared-instance file or a BLUE TSV."""
    path = Path(path)
    if path.suffix == ".tsv":
        return read_blue_tsv(path, task)
    with open(path, encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), None)
    if first is None:
        return []
    if "sentences" in json.loads(first):
        return generate_all(parse_corpus(path, FormatConfig(task)), task)
    return read_instances(path)
