"""Synthetic overlapping-relation benchmark.

Every sentence holds 2-3 chemicals and 2-3 proteins.  Each entity is
immediately followed by a cue word: the word after a chemical names the
relation class it takes part in (or none), the word after a protein says
whether it is a real target.  A pair is positive iff the chemical cue names a
class and the protein cue is positive, so all instances from one sentence
share their words and differ only in which mentions are masked.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import (
    CHEMICAL,
    CPI,
    FALSE,
    PROTEIN,
    AnnotatedDocument,
    EntityMention,
    GoldRelation,
    Instance,
    Sentence,
    generate_instances,
    write_corpus,
)

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class VocabSpec:
    triggers: dict[str, tuple[str, ...]] = field(default_factory=lambda: {
        "CPR:3": ("activates", "upregulates", "induces"),
        "CPR:4": ("inhibits", "blocks", "suppresses"),
        "CPR:5": ("agonizes", "stimulates"),
        "CPR:6": ("antagonizes", "opposes"),
        "CPR:9": ("metabolizes", "substrates"),
    })
    neutral_triggers: tuple[str, ...] = ("accompanies", "precedes", "resembles")
    positive_cues: tuple[str, ...] = ("directly", "potently", "selectively")
    negative_cues: tuple[str, ...] = ("unrelatedly", "independently", "separately")
    fillers: tuple[str, ...] = (
        "the", "in", "of", "and", "with", "cells", "assay", "samples", "rat",
        "human", "tissue", "levels", "dose", "data", "study", "cultured",
    )
    title_words: dict[str, str] = field(default_factory=lambda: {
        "CPR:3": "activation", "CPR:4": "inhibition", "CPR:5": "agonism",
        "CPR:6": "antagonism", "CPR:9": "metabolism", FALSE: "survey",
    })
    root_word: str = "reported"
    # chance that a sentence gets a third chemical (and, independently, a third protein)
    p_third: float = 0.05
    p_neutral: float = 0.2
    p_negative_cue: float = 0.3
    kb_fraction: float = 0.3
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)

    def reserved_words(self) -> set[str]:
        words = set(self.fillers) | set(self.neutral_triggers) | set(self.positive_cues)
        words |= set(self.negative_cues) | set(self.title_words.values()) | {self.root_word}
        for ws in self.triggers.values():
            words |= set(ws)
        return words


@dataclass
class SynthSummary:
    seed: int
    n_docs: int
    documents: dict[str, int]
    instances: dict[str, int]
    labels: dict[str, int]
    kb_rows: int
    oracle_accuracy: float

    def to_dict(self) -> dict:
        return {
            "seed": self.seed, "n_docs": self.n_docs, "documents": self.documents,
            "instances": self.instances, "labels": self.labels, "kb_rows": self.kb_rows,
            "oracle_accuracy": self.oracle_accuracy,
        }


_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z")
_VOWELS = ("a", "e", "i", "o", "u")
_CHEM_ENDINGS = ("mine", "zole", "pril", "stat", "done", "line", "fen", "pam")
_LETTERS = "ABCDEFGHJKLMNPRSTVWXZ"


def _chemical_name(rng: np.random.Generator) -> str:
    n = int(rng.integers(1, 3))
    stem = "".join(rng.choice(_ONSETS) + rng.choice(_VOWELS) for _ in range(n))
    return stem + rng.choice(_CHEM_ENDINGS)


def _protein_name(rng: np.random.Generator) -> str:
    k = int(rng.integers(2, 5))
    return "".join(rng.choice(list(_LETTERS), size=k)) + str(int(rng.integers(1, 10)))


def _names(rng, maker, count: int, taken: set[str]) -> list[str]:
    out = []
    while len(out) < count:
        name = maker(rng)
        if name.lower() not in taken:
            taken.add(name.lower())
            out.append(name)
    return out


def _make_document(doc_id: str, rng: np.random.Generator, spec: VocabSpec, chem_pool, prot_pool):
    n_chem = 3 if rng.random() < spec.p_third else 2
    n_prot = 3 if rng.random() < spec.p_third else 2
    chems = [str(c) for c in rng.choice(chem_pool, size=n_chem, replace=False)]
    prots = [str(p) for p in rng.choice(prot_pool, size=n_prot, replace=False)]
    classes = sorted(spec.triggers)

    entities = []  # (name, kind, cue word, class or None, positive cue)
    for name in chems:
        if rng.random() < spec.p_neutral:
            entities.append((name, CHEMICAL, str(rng.choice(spec.neutral_triggers)), None))
        else:
            cls = classes[int(rng.integers(len(classes)))]
            entities.append((name, CHEMICAL, str(rng.choice(spec.triggers[cls])), cls))
    for name in prots:
        positive = rng.random() >= spec.p_negative_cue
        cues = spec.positive_cues if positive else spec.negative_cues
        entities.append((name, PROTEIN, str(rng.choice(cues)), positive))
    order = rng.permutation(len(entities))
    entities = [entities[i] for i in order]

    words: list[str] = [str(w) for w in rng.choice(spec.fillers, size=int(rng.integers(0, 3)))]
    mention_at: list[int] = []
    cue_at: list[int] = []
    for ent in entities:
        mention_at.append(len(words))
        words.append(ent[0])
        cue_at.append(len(words))
        words.append(ent[2])
        words.extend(str(w) for w in rng.choice(spec.fillers, size=int(rng.integers(2, 4))))
    root = len(words)
    words.append(spec.root_word)
    words.append(".")

    text = " ".join(words)
    starts, pos = [], 0
    for w in words:
        starts.append(pos)
        pos += len(w) + 1

    mentions, chem_ids, prot_ids = [], [], []
    for k, ent in enumerate(entities):
        i = mention_at[k]
        prefix = "C" if ent[1] == CHEMICAL else "P"
        eid = f"{prefix}{len(chem_ids if ent[1] == CHEMICAL else prot_ids) + 1}"
        (chem_ids if ent[1] == CHEMICAL else prot_ids).append((eid, ent))
        mentions.append(EntityMention(eid, ent[1], 0, (starts[i], starts[i] + len(ent[0])), ent[0]))

    relations = []
    for cid, cent in chem_ids:
        for pid, pent in prot_ids:
            if cent[3] is not None and pent[3]:
                relations.append(GoldRelation(cid, pid, cent[3]))

    # every word hangs off the root; mentions hang off their cue word
    edges = []
    for i in range(len(words)):
        if i == root:
            continue
        if i in mention_at:
            edges.append((0, i + 1, i))
        else:
            edges.append((0, root, i))

    label_counts = Counter(r.label for r in relations)
    top = min(label_counts, key=lambda lab: (-label_counts[lab], lab)) if label_counts else FALSE
    title = f"{spec.title_words[top].capitalize()} of {chems[0]} in {str(rng.choice(spec.fillers))} {str(rng.choice(spec.fillers))}"
    doc = AnnotatedDocument(doc_id, title, [Sentence(text)], mentions, relations, sorted(edges))
    return doc


def trigger_oracle(instance: Instance, spec: VocabSpec = VocabSpec()) -> str:
    """Label from the cue words at most two tokens from each masked target."""
    by_word = {w: cls for cls, ws in spec.triggers.items() for w in ws}
    toks = instance.tokens

    def near(span):
        lo, hi = max(0, span[0] - 2), min(len(toks), span[1] + 3)
        return [toks[i] for i in range(lo, hi) if not span[0] <= i <= span[1]]

    classes = {by_word[w] for w in near(instance.target1_span) if w in by_word}
    positive = any(w in spec.positive_cues for w in near(instance.target2_span))
    if len(classes) == 1 and positive:
        return classes.pop()
    return FALSE


def make_synthetic_corpus(seed: int, n_docs: int, out_dir, vocab_spec: VocabSpec | None = None) -> SynthSummary:
    """Write ``train/dev/test.jsonl``, ``kb.tsv`` and ``manifest.json`` into ``out_dir``."""
    if n_docs < 50:
        raise ValueError(f"n_docs must be at least 50, got {n_docs}")
    spec = vocab_spec or VocabSpec()
    rng = np.random.default_rng(seed)
    taken = set(spec.reserved_words())
    chem_pool = _names(rng, _chemical_name, max(60, n_docs // 2), taken)
    prot_pool = _names(rng, _protein_name, max(60, n_docs // 2), taken)

    docs = [_make_document(f"syn{seed}-{i:04d}", rng, spec, chem_pool, prot_pool) for i in range(n_docs)]

    n_train = int(round(spec.split_fractions[0] * n_docs))
    n_dev = int(round(spec.split_fractions[1] * n_docs))
    bounds = {"train": (0, n_train), "dev": (n_train, n_train + n_dev), "test": (n_train + n_dev, n_docs)}

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    instances: dict[str, int] = {}
    labels: Counter = Counter()
    agree = total = 0
    for split in SPLITS:
        lo, hi = bounds[split]
        write_corpus(docs[lo:hi], out / f"{split}.jsonl")
        count = 0
        for doc in docs[lo:hi]:
            for inst in generate_instances(doc, CPI):
                count += 1
                total += 1
                labels[inst.label] += 1
                agree += trigger_oracle(inst, spec) == inst.label
        instances[split] = count
    accuracy = agree / total
    if agree != total:
        raise RuntimeError(f"trigger oracle disagrees with the generated gold on {total - agree} instances")

    kb_rows = []
    for doc in docs:
        for r in doc.relations:
            if rng.random() < spec.kb_fraction:
                kb_rows.append(f"{doc.entity(r.chem_id).surface}\t{doc.entity(r.prot_id).surface}\t{r.label}")
    (out / "kb.tsv").write_text("".join(row + "\n" for row in kb_rows), encoding="utf-8")

    summary = SynthSummary(
        seed=seed,
        n_docs=n_docs,
        documents={s: bounds[s][1] - bounds[s][0] for s in SPLITS},
        instances=instances,
        labels=dict(sorted(labels.items())),
        kb_rows=len(kb_rows),
        oracle_accuracy=accuracy,
    )
    (out / "manifest.json").write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary
