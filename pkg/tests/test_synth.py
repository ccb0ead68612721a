import json
from collections import Counter

import pytest

from overlap_re.corpus import CPI, OVERLAPPING, generate_instances, parse_corpus
from overlap_re.kb import build_knowledge_sequence, load_kb
from overlap_re.synth import VocabSpec, make_synthetic_corpus, trigger_oracle


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    summary = make_synthetic_corpus(11, 60, out)
    return out, summary


def read_tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


class TestSynth:
    def test_files(self, synth_dir):
        out, summary = synth_dir
        assert sorted(p.name for p in out.iterdir()) == ["dev.jsonl", "kb.tsv", "manifest.json", "test.jsonl", "train.jsonl"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest == summary.to_dict()
        assert sum(summary.documents.values()) == 60
        assert summary.oracle_accuracy == 1.0

    def test_deterministic(self, synth_dir, tmp_path):
        out, _ = synth_dir
        make_synthetic_corpus(11, 60, tmp_path)
        assert read_tree(tmp_path) == read_tree(out)

    def test_seed_changes_output(self, synth_dir, tmp_path):
        out, _ = synth_dir
        make_synthetic_corpus(12, 60, tmp_path)
        assert read_tree(tmp_path)["train.jsonl"] != read_tree(out)["train.jsonl"]

    def test_every_sentence_overlaps(self, synth_dir):
        out, _ = synth_dir
        for split in ("train", "dev", "test"):
            for doc in parse_corpus(out / f"{split}.jsonl"):
                insts = generate_instances(doc)
                assert len(insts) >= 4
                assert all(i.kind == OVERLAPPING for i in insts)

    def test_oracle_agrees(self, synth_dir):
        out, _ = synth_dir
        spec = VocabSpec()
        for doc in parse_corpus(out / "train.jsonl"):
            for inst in generate_instances(doc):
                assert trigger_oracle(inst, spec) == inst.label

    def test_label_counts(self, synth_dir):
        out, summary = synth_dir
        seen = Counter()
        for split in ("train", "dev", "test"):
            for doc in parse_corpus(out / f"{split}.jsonl"):
                seen.update(i.label for i in generate_instances(doc))
        assert dict(seen) == {k: v for k, v in summary.labels.items() if v}
        assert set(seen) <= set(CPI.labels)

    def test_kb_rows_mostly_match_gold(self, synth_dir):
        out, summary = synth_dir
        kb = load_kb(out / "kb.tsv")
        assert summary.kb_rows > 0
        # names recur across documents, so a fact can disagree with a given sentence
        hits = agree = 0
        for doc in parse_corpus(out / "train.jsonl"):
            for inst in generate_instances(doc):
                tags = build_knowledge_sequence(inst, doc, kb).tags
                if tags:
                    hits += 1
                    agree += tags == [inst.label]
        assert hits > 0
        assert agree / hits > 0.5

    def test_path_runs_through_cues(self, synth_dir):
        out, _ = synth_dir
        doc = parse_corpus(out / "train.jsonl")[0]
        inst = generate_instances(doc)[0]
        sdp = build_knowledge_sequence(inst, doc, None).sdp_tokens
        assert len(sdp) == 5
        assert sdp[0] == "@CHEMICAL$" and sdp[-1] == "@GENE$" and sdp[2] == "reported"

    def test_too_few_documents(self, tmp_path):
        with pytest.raises(ValueError, match="at least 50"):
            make_synthetic_corpus(1, 49, tmp_path)
