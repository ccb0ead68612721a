"""Knowledge-base tags and shortest dependency paths for the knowledge sequence."""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field

from .corpus import AnnotatedDocument, Instance, basic_tokenize

KB_TAGS = tuple(f"CPR:{i}" for i in range(3, 10))
USABLE_TAGS = ("CPR:4", "CPR:5", "CPR:6")


class KBError(ValueError):
    pass


def normalize_name(name: str) -> str:
    return re.sub(r"\s+", " ", name.strip()).lower()


@dataclass(frozen=True)
class KnowledgeBase:
    facts: dict[tuple[str, str], frozenset[str]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.facts)


@dataclass(frozen=True)
class KnowledgeSequence:
    tags: list[str]
    sdp_tokens: list[str]

    @property
    def tokens(self) -> list[str]:
        return self.tags + self.sdp_tokens


def load_kb(path) -> KnowledgeBase:
    """Read ``chemical<TAB>protein<TAB>tag`` rows; duplicates collapse."""
    facts: dict[tuple[str, str], set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != 3:
                raise KBError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(cols)}")
            chem, prot, tag = cols
            tag = tag.strip()
            if tag not in KB_TAGS:
                raise KBError(f"{path}:{lineno}: unknown tag {tag!r}")
            facts.setdefault((normalize_name(chem), normalize_name(prot)), set()).add(tag)
    return KnowledgeBase({k: frozenset(v) for k, v in facts.items()})


def lookup_cpr_tags(chemical: str, protein: str, kb: KnowledgeBase) -> list[str]:
    """Usable tags for the pair; empty when absent or ambiguous (several tags survive)."""
    tags = kb.facts.get((normalize_name(chemical), normalize_name(protein)), frozenset())
    kept = sorted(t for t in tags if t in USABLE_TAGS)
    return kept if len(kept) == 1 else []


def _adjacency(edges) -> dict[int, list[int]]:
    adj: dict[int, set[int]] = {}
    for a, b in edges:
        if a == b:
            continue
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    return {k: sorted(v) for k, v in adj.items()}


def shortest_dependency_path(dep_edges, start_token: int, end_token: int) -> list[int]:
    """Shortest undirected path, endpoints included.

    Among equally short paths the lexicographically smallest index sequence
    wins: distances to ``end_token`` come from one BFS, then the walk from
    ``start_token`` always steps to the smallest neighbour one hop closer.
    Disconnected endpoints give ``[]``.
    """
    if start_token == end_token:
        return [start_token]
    adj = _adjacency(dep_edges)
    dist = {end_token: 0}
    queue = deque([end_token])
    while queue:
        node = queue.popleft()
        for nb in adj.get(node, ()):
            if nb not in dist:
                dist[nb] = dist[node] + 1
                queue.append(nb)
    if start_token not in dist:
        return []
    path = [start_token]
    node = start_token
    while node != end_token:
        node = min(nb for nb in adj[node] if dist.get(nb) == dist[node] - 1)
        path.append(node)
    return path


def instance_edges(instance: Instance, doc: AnnotatedDocument) -> list[tuple[int, int]]:
    """Sentence dependency edges carried over to the instance's token positions.

    Sentence tokens that overlap a masked mention collapse onto the mask.
    """
    if instance.sentence_index is None or instance.offsets is None:
        return []
    edges = doc.edges_for(instance.sentence_index)
    if not edges:
        return []
    by_start = {off: i for i, off in enumerate(instance.offsets)}
    masks = [instance.target1_span[0], instance.target2_span[0]]
    mapping = {}
    for ti, (_, s, e) in enumerate(basic_tokenize(doc.sentences[instance.sentence_index].text)):
        for m in masks:
            ms, me = instance.offsets[m]
            if s < me and ms < e:
                mapping[ti] = m
                break
        else:
            if (s, e) in by_start:
                mapping[ti] = by_start[(s, e)]
    out = set()
    for h, d in edges:
        if h in mapping and d in mapping and mapping[h] != mapping[d]:
            out.add((mapping[h], mapping[d]))
    return sorted(out)


def build_knowledge_sequence(instance: Instance, doc: AnnotatedDocument, kb: KnowledgeBase | None) -> KnowledgeSequence:
    tags: list[str] = []
    if kb is not None and instance.arg1_id and instance.arg2_id:
        chem = doc.entity(instance.arg1_id).surface
        prot = doc.entity(instance.arg2_id).surface
        tags = lookup_cpr_tags(chem, prot, kb)
    path = shortest_dependency_path(
        instance_edges(instance, doc), instance.target1_span[0], instance.target2_span[0]
    )
    if len(path) == 1:
        path = []
    return KnowledgeSequence(tags, [instance.tokens[i] for i in path])
