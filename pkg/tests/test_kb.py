import itertools

import pytest
from hypothesis import given, strategies as st

from overlap_re.corpus import generate_instances, parse_corpus
from overlap_re.kb import (
    KBError,
    build_knowledge_sequence,
    instance_edges,
    load_kb,
    lookup_cpr_tags,
    normalize_name,
    shortest_dependency_path,
)


def brute_force_sdp(edges, start, end):
    """Enumerate every simple path; keep the shortest, lexicographically smallest."""
    adj = {}
    for a, b in edges:
        if a != b:
            adj.setdefault(a, set()).add(b)
            adj.setdefault(b, set()).add(a)
    if start == end:
        return [start]
    best = None

    def walk(path):
        nonlocal best
        node = path[-1]
        if node == end:
            if best is None or (len(path), path) < (len(best), best):
                best = list(path)
            return
        for nb in adj.get(node, ()):
            if nb not in path:
                path.append(nb)
                walk(path)
                path.pop()

    walk([start])
    return best or []


class TestLoadKb:
    def test_mini_kb(self, mini_kb_path, mini_manifest):
        kb = load_kb(mini_kb_path)
        assert len(kb) == mini_manifest["kb_keys"]
        assert kb.facts[("aspirin", "ptgs2")] == {"CPR:4"}

    def test_unknown_tag_line(self, tmp_path):
        p = tmp_path / "kb.tsv"
        p.write_text("A\tB\tCPR:4\nA\tC\tCPR:11\n")
        with pytest.raises(KBError, match=r"kb.tsv:2: unknown tag"):
            load_kb(p)

    def test_column_count(self, tmp_path):
        p = tmp_path / "kb.tsv"
        p.write_text("A\tB\n")
        with pytest.raises(KBError, match="3 tab-separated"):
            load_kb(p)

    def test_normalisation(self):
        assert normalize_name("  Tamoxifen   Citrate ") == "tamoxifen citrate"


class TestLookup:
    @pytest.fixture
    def kb(self, mini_kb_path):
        return load_kb(mini_kb_path)

    def test_hit(self, kb):
        assert lookup_cpr_tags("Quinpirole", "DRD2", kb) == ["CPR:5"]

    def test_case_and_space_insensitive(self, kb):
        assert lookup_cpr_tags("  aspirin", "ptgs2 ", kb) == ["CPR:4"]

    def test_unusable_tags_dropped(self, kb):
        assert lookup_cpr_tags("Metformin", "AMPK", kb) == []
        assert lookup_cpr_tags("Midazolam", "CYP3A4", kb) == []

    def test_ambiguous_pair_gives_nothing(self, kb):
        assert lookup_cpr_tags("Haloperidol", "DRD2", kb) == []

    def test_absent_pair(self, kb):
        assert lookup_cpr_tags("Aspirin", "DRD2", kb) == []


class TestShortestPath:
    def test_direct(self):
        assert shortest_dependency_path([(1, 0), (1, 2), (1, 3)], 0, 2) == [0, 1, 2]

    def test_same_token(self):
        assert shortest_dependency_path([(0, 1)], 1, 1) == [1]

    def test_disconnected(self):
        assert shortest_dependency_path([(0, 1), (2, 3)], 0, 3) == []

    def test_tie_goes_to_smallest_indices(self):
        # two routes of length 2 from 0 to 4: via 2 and via 1
        assert shortest_dependency_path([(0, 2), (2, 4), (0, 1), (1, 4)], 0, 4) == [0, 1, 4]

    @given(
        st.integers(2, 8).flatmap(
            lambda n: st.tuples(
                st.just(n),
                st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=14),
                st.integers(0, n - 1),
                st.integers(0, n - 1),
            )
        )
    )
    def test_matches_enumeration(self, case):
        _, edges, a, b = case
        assert shortest_dependency_path(edges, a, b) == brute_force_sdp(edges, a, b)

    def test_all_pairs_small_tree(self):
        edges = [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5), (5, 6)]
        for a, b in itertools.product(range(7), repeat=2):
            assert shortest_dependency_path(edges, a, b) == brute_force_sdp(edges, a, b)


class TestKnowledgeSequence:
    @pytest.fixture
    def docs(self, mini_corpus_path):
        return {d.doc_id: d for d in parse_corpus(mini_corpus_path)}

    def test_tags_then_path(self, docs, mini_kb_path):
        kb = load_kb(mini_kb_path)
        doc = docs["M5"]
        inst = generate_instances(doc)[0]
        assert instance_edges(inst, doc) == [(1, 0), (1, 2), (1, 3)]
        seq = build_knowledge_sequence(inst, doc, kb)
        assert seq.tags == []
        assert seq.sdp_tokens == ["@CHEMICAL$", "activates", "@GENE$"]

    def test_tag_only(self, docs, mini_kb_path):
        kb = load_kb(mini_kb_path)
        doc = docs["M3"]
        by_id = {i.instance_id: i for i in generate_instances(doc)}
        # the knowledge base says antagonist even though this pair is unrelated here
        seq = build_knowledge_sequence(by_id["M3.C2.P1"], doc, kb)
        assert seq.tokens == ["CPR:6"]

    def test_without_kb(self, docs):
        doc = docs["M1"]
        seq = build_knowledge_sequence(generate_instances(doc)[0], doc, None)
        assert seq.tokens == []

    def test_multi_token_mentions_collapse_onto_masks(self):
        from overlap_re.corpus import AnnotatedDocument, EntityMention, Sentence

        text = "Tamoxifen citrate binds estrogen receptor alpha ."
        # basic tokens: 0 Tamoxifen 1 citrate 2 binds 3 estrogen 4 receptor 5 alpha 6 .
        doc = AnnotatedDocument(
            "D", "", [Sentence(text)],
            [EntityMention("C", "Chemical", 0, (0, 17), "Tamoxifen citrate"),
             EntityMention("P", "Protein", 0, (24, 47), "estrogen receptor alpha")],
            [], dep_edges=[(0, 1, 0), (0, 2, 1), (0, 2, 4), (0, 4, 3), (0, 4, 5), (0, 2, 6)],
        )
        inst = generate_instances(doc)[0]
        assert inst.tokens == ["@CHEMICAL$", "binds", "@GENE$", "."]
        seq = build_knowledge_sequence(inst, doc, None)
        assert seq.sdp_tokens == ["@CHEMICAL$", "binds", "@GENE$"]
