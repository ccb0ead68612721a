"""Corpus-trained subword vocabulary and greedy longest-match tokenizer.

The inventory starts from single characters (word-initial and ``##``
continuation forms) and grows by repeatedly merging the most frequent
adjacent symbol pair; ties go to the lexicographically smallest pair.
Tokenization then segments every word greedily, longest piece first.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .corpus import (
    CHEM_MASK,
    DRUG_MASK,
    FUSED_MASKS,
    GENE_MASK,
    AnnotatedDocument,
    Instance,
    basic_tokenize,
    is_atomic,
)

PAD = "[PAD]"
UNK = "[UNK]"
SEQ_START = "[CLS]"
SEQ_END = "[SEP]"
CONT = "##"

SPECIALS = (PAD, UNK, SEQ_START, SEQ_END, CHEM_MASK, GENE_MASK)
RESERVED = SPECIALS + (DRUG_MASK, *FUSED_MASKS) + tuple(f"CPR:{i}" for i in range(1, 11))


@dataclass
class Vocab:
    tokens: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.token_to_id = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.token_to_id:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            self.token_to_id[tok] = i
        missing = [s for s in SPECIALS if s not in self.token_to_id]
        if missing:
            raise ValueError(f"vocabulary lacks special tokens {missing}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    @property
    def specials(self) -> dict[str, str]:
        return {
            "SEQ_START": SEQ_START, "SEQ_END": SEQ_END, "PAD": PAD,
            "UNK": UNK, "CHEM_MASK": CHEM_MASK, "GENE_MASK": GENE_MASK,
        }

    @property
    def subword_units(self) -> list[str]:
        return [t for t in self.tokens if t not in RESERVED]

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, self.token_to_id[UNK])

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    def dumps(self) -> str:
        return "".join(t + "\n" for t in self.tokens)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> Vocab:
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")])

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()


def _word_counts(docs: Iterable[AnnotatedDocument]) -> Counter:
    counts: Counter = Counter()
    for doc in docs:
        for text in [doc.title, *(s.text for s in doc.sentences)]:
            for tok, _, _ in basic_tokenize(text):
                if not is_atomic(tok):
                    counts[tok] += 1
    return counts


def _join(a: str, b: str) -> str:
    return a + b[len(CONT):]


def build_vocab(docs: list[AnnotatedDocument], max_size: int = 2000, min_freq: int = 2) -> Vocab:
    if max_size <= len(RESERVED):
        raise ValueError(f"max_size must exceed the {len(RESERVED)} reserved tokens, got {max_size}")
    counts = _word_counts(docs)
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")

    words = sorted(counts)
    freqs = [counts[w] for w in words]
    splits = [[w[0]] + [CONT + c for c in w[1:]] for w in words]

    char_freq: Counter = Counter()
    for sym, f in ((s, f) for sp, f in zip(splits, freqs) for s in sp):
        char_freq[sym] += f
    capacity = max_size - len(RESERVED)
    chars = sorted(char_freq, key=lambda s: (-char_freq[s], s))[:capacity]
    inventory = list(RESERVED) + sorted(chars)
    known = set(inventory)

    pair_count: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, (sp, f) in enumerate(zip(splits, freqs)):
        for pair in zip(sp, sp[1:]):
            pair_count[pair] += f
            where[pair].add(wi)
    heap = [(-c, p) for p, c in pair_count.items()]
    heapq.heapify(heap)

    while len(inventory) < max_size and heap:
        neg, pair = heapq.heappop(heap)
        if pair_count.get(pair, 0) != -neg:
            continue
        if -neg < min_freq:
            break
        merged = _join(*pair)
        if merged not in known:
            known.add(merged)
            inventory.append(merged)
        touched: set[tuple[str, str]] = set()
        for wi in sorted(where.pop(pair, ())):
            sp, f = splits[wi], freqs[wi]
            for old in zip(sp, sp[1:]):
                pair_count[old] -= f
                touched.add(old)
            out, i = [], 0
            while i < len(sp):
                if i + 1 < len(sp) and (sp[i], sp[i + 1]) == pair:
                    out.append(merged)
                    i += 2
                else:
                    out.append(sp[i])
                    i += 1
            splits[wi] = out
            for new in zip(out, out[1:]):
                pair_count[new] += f
                where[new].add(wi)
                touched.add(new)
        pair_count.pop(pair, None)
        for p in sorted(touched):
            c = pair_count.get(p, 0)
            if c <= 0:
                pair_count.pop(p, None)
                where.pop(p, None)
            elif p != pair:
                heapq.heappush(heap, (-c, p))
    return Vocab(inventory)


def tokenize_word(word: str, vocab: Vocab) -> list[str]:
    if is_atomic(word):
        return [word] if word in vocab else [UNK]
    pieces = []
    start = 0
    while start < len(word):
        prefix = CONT if start else ""
        end = len(word)
        while end > start and prefix + word[start:end] not in vocab:
            end -= 1
        if end == start:
            pieces.append(UNK)
            start += 1
        else:
            pieces.append(prefix + word[start:end])
            start = end
    return pieces


def tokenize_words(words: Iterable[str], vocab: Vocab) -> tuple[list[str], list[int]]:
    """Subword pieces for pre-split words, plus the source word index of each piece."""
    pieces, owner = [], []
    cache: dict[str, list[str]] = {}
    for wi, word in enumerate(words):
        if word not in cache:
            cache[word] = tokenize_word(word, vocab)
        pieces.extend(cache[word])
        owner.extend([wi] * len(cache[word]))
    return pieces, owner


def tokenize(text: str, vocab: Vocab) -> list[str]:
    return tokenize_words([t for t, _, _ in basic_tokenize(text)], vocab)[0]


def detokenize(tokens: Iterable[str]) -> str:
    words: list[str] = []
    for tok in tokens:
        if tok.startswith(CONT) and words:
            words[-1] += tok[len(CONT):]
        else:
            words.append(tok)
    return " ".join(words)


def subword_instance(instance: Instance, vocab: Vocab) -> Instance:
    """The instance re-expressed in subword pieces, target spans remapped."""
    pieces, owner = tokenize_words(instance.tokens, vocab)
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    for i, wi in enumerate(owner):
        first.setdefault(wi, i)
        last[wi] = i

    def remap(span):
        return first[span[0]], last[span[1]]

    return Instance(
        instance_id=instance.instance_id,
        tokens=pieces,
        target1_span=remap(instance.target1_span),
        target2_span=remap(instance.target2_span),
        label=instance.label,
        kind=instance.kind,
        doc_id=instance.doc_id,
        sentence_index=instance.sentence_index,
        arg1_id=instance.arg1_id,
        arg2_id=instance.arg2_id,
    )
