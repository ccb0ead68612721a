import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlap_re.corpus import CPI, Instance
from overlap_re.encoder import EncoderConfig
from overlap_re.fusion import (
    ModelConfig,
    RelationModel,
    SequenceClassifier,
    ablate,
    collate,
    featurize,
    forward,
    fusion_attention,
)
from overlap_re.tokenizer import RESERVED, SEQ_END, SEQ_START, Vocab

VARIANTS = [(), ("gaussian",), ("title",), ("knowledge",), ("title", "knowledge"), ("gaussian", "title", "knowledge")]


@pytest.fixture
def vocab():
    return Vocab(list(RESERVED) + ["binds", "inhibits", "receptor", "study", "the", "of"])


def enc_cfg(vocab, **kw):
    base = dict(vocab_size=len(vocab), layers=1, hidden=8, heads=2, ffn=16, max_len=16, dropout=0.0)
    base.update(kw)
    return EncoderConfig(**base)


def three_entity_instances():
    toks_a = ["@CHEMICAL$", "inhibits", "@GENE$", "the", "receptor"]
    toks_b = ["@CHEMICAL$", "inhibits", "the", "receptor", "@GENE$"]
    return (
        Instance("a", toks_a, (0, 0), (2, 2), "CPR:4", "overlapping", "d"),
        Instance("b", toks_b, (0, 0), (4, 4), "False", "overlapping", "d"),
    )


class TestFusionAttention:
    def test_known_weights(self):
        # scores [0, ln 3] give weights [1/4, 3/4]
        u = np.array([[0.0, 0.0], [np.log(3.0), 0.0]])
        out, alpha = fusion_attention(np.array([1.0, 0.0]), u, return_weights=True)
        np.testing.assert_allclose(alpha.data, [0.25, 0.75])
        np.testing.assert_allclose(out.data, 0.75 * u[1])

    def test_unscaled(self):
        u = np.array([[2.0, 0.0], [0.0, 0.0]])
        _, alpha = fusion_attention(np.array([2.0, 0.0]), u, return_weights=True)
        np.testing.assert_allclose(alpha.data[0], np.exp(4) / (np.exp(4) + 1))

    def test_mask(self):
        u = np.eye(3)
        _, alpha = fusion_attention(np.ones(3), u, mask=[True, False, True], return_weights=True)
        np.testing.assert_allclose(alpha.data, [0.5, 0.0, 0.5])

    @given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**31 - 1))
    def test_convex_combination(self, n, d, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(n, d))
        out, alpha = fusion_attention(rng.normal(size=d), u, return_weights=True)
        assert np.isclose(alpha.data.sum(), 1.0)
        assert np.all(alpha.data >= 0)
        assert np.all(out.data <= u.max(0) + 1e-12) and np.all(out.data >= u.min(0) - 1e-12)

    def test_batched(self):
        rng = np.random.default_rng(0)
        q, u = rng.normal(size=(3, 4)), rng.normal(size=(3, 5, 4))
        out = fusion_attention(q, u).data
        for i in range(3):
            np.testing.assert_allclose(out[i], fusion_attention(q[i], u[i]).data)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="does not fit"):
            fusion_attention(np.ones(3), np.ones((4, 2)))

    def test_all_masked(self):
        with pytest.raises(ValueError, match="masked"):
            fusion_attention(np.ones(2), np.ones((2, 2)), mask=[False, False])


class TestConfig:
    @pytest.mark.parametrize("removed,slots", [
        ((), ("title", "ins", "tar1", "tar2", "know")),
        (("gaussian",), ("title", "ins", "know")),
        (("title",), ("ins", "tar1", "tar2", "know")),
        (("knowledge",), ("title", "ins", "tar1", "tar2")),
        (("title", "knowledge"), ("ins", "tar1", "tar2")),
        (("gaussian", "title", "knowledge"), ("ins",)),
    ])
    def test_slots(self, vocab, removed, slots):
        cfg = ModelConfig(enc_cfg(vocab), ablate=removed)
        assert cfg.slots == slots
        assert cfg.fused_width == 8 * len(slots)

    def test_unknown_component(self, vocab):
        with pytest.raises(ValueError, match="unknown ablation"):
            ModelConfig(enc_cfg(vocab), ablate=("syntax",))

    def test_ablate_accumulates(self, vocab):
        cfg = ablate(ablate(ModelConfig(enc_cfg(vocab)), ["title"]), ["gaussian"])
        assert cfg.ablate == ("gaussian", "title")

    def test_dict_roundtrip(self, vocab):
        cfg = ModelConfig(enc_cfg(vocab), ablate=("knowledge",), share_encoder=False)
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestFeaturize:
    def test_framing_and_spans(self, vocab):
        inst, _ = three_entity_instances()
        ex = featurize(inst, "receptor study", ["CPR:4"], vocab)
        assert ex.ins_ids[0] == vocab.token_to_id[SEQ_START]
        assert ex.ins_ids[-1] == vocab.token_to_id[SEQ_END]
        assert ex.span1 == (1, 1) and ex.span2 == (3, 3)
        assert ex.label == CPI.label_index("CPR:4")
        assert len(ex.title_ids) == 4
        assert vocab.tokens[ex.know_ids[1]] == "CPR:4"

    def test_empty_knowledge_is_just_framing(self, vocab):
        inst, _ = three_entity_instances()
        assert len(featurize(inst, "study", [], vocab).know_ids) == 2

    def test_max_len(self, vocab):
        inst, _ = three_entity_instances()
        with pytest.raises(ValueError, match="max_len"):
            featurize(inst, "study", [], vocab, max_len=4)

    def test_collate_masks(self, vocab):
        a, b = three_entity_instances()
        short = Instance("c", ["@CHEMICAL$", "@GENE$"], (0, 0), (1, 1), "False", "normal", "d")
        batch = collate([featurize(a, "", [], vocab), featurize(short, "", [], vocab)], vocab.pad_id)
        assert batch.ins_ids.shape == (2, 7)
        np.testing.assert_array_equal(batch.token_mask[1], [0, 1, 1, 0, 0, 0, 0])
        np.testing.assert_array_equal(batch.distances1[0, 1:6], [0, 1, 2, 3, 4])
        np.testing.assert_array_equal(batch.distances2[0, 1:6], [-2, -1, 0, 1, 2])


class TestModel:
    @pytest.mark.parametrize("removed", VARIANTS)
    def test_forward_shapes(self, vocab, removed):
        model = RelationModel(ModelConfig(enc_cfg(vocab), ablate=removed), seed=1)
        a, b = three_entity_instances()
        batch = collate([featurize(a, "study", ["CPR:4"], vocab), featurize(b, "study", [], vocab)], vocab.pad_id)
        reps = model.represent(batch)
        assert reps.h.shape == (2, model.config.fused_width)
        assert model.logits(batch).shape == (2, len(CPI.labels))
        assert model.params["classifier.weight"].shape == (len(CPI.labels), model.config.fused_width)

    def test_baseline_matches_plain_classifier(self, vocab):
        cfg = enc_cfg(vocab)
        bare = RelationModel(ModelConfig(cfg, ablate=("gaussian", "title", "knowledge")))
        assert bare.num_parameters() == SequenceClassifier(cfg, len(CPI.labels)).num_parameters()

    def test_separate_encoders(self, vocab):
        shared = RelationModel(ModelConfig(enc_cfg(vocab)))
        split = RelationModel(ModelConfig(enc_cfg(vocab), share_encoder=False))
        enc = sum(v.data.size for k, v in shared.params.items() if k.startswith("encoder."))
        assert split.num_parameters() == shared.num_parameters() + 2 * enc

    def test_overlapping_pairs_differ(self, vocab):
        # same sentence, different target pair: the pooled vectors and the output differ
        model = RelationModel(ModelConfig(enc_cfg(vocab)), seed=3)
        toks = ["@CHEMICAL$", "inhibits", "@GENE$", "the", "@GENE$"]
        i1 = Instance("x1", toks, (0, 0), (2, 2), "False", "overlapping", "d")
        i2 = Instance("x2", toks, (0, 0), (4, 4), "False", "overlapping", "d")
        e1, e2 = featurize(i1, "study", [], vocab), featurize(i2, "study", [], vocab)
        assert e1.ins_ids == e2.ins_ids
        r1 = model.represent(collate([e1], vocab.pad_id))
        r2 = model.represent(collate([e2], vocab.pad_id))
        np.testing.assert_array_equal(r1.r_ins.data, r2.r_ins.data)
        np.testing.assert_array_equal(r1.r_tar1.data, r2.r_tar1.data)
        assert not np.allclose(r1.r_tar2.data, r2.r_tar2.data)
        assert not np.allclose(forward(e1, model, vocab.pad_id), forward(e2, model, vocab.pad_id))

    def test_without_gaussian_overlapping_pairs_collide(self, vocab):
        model = RelationModel(ModelConfig(enc_cfg(vocab), ablate=("gaussian",)), seed=3)
        toks = ["@CHEMICAL$", "inhibits", "@GENE$", "the", "@GENE$"]
        e1 = featurize(Instance("x1", toks, (0, 0), (2, 2), "False", "overlapping", "d"), "study", [], vocab)
        e2 = featurize(Instance("x2", toks, (0, 0), (4, 4), "False", "overlapping", "d"), "study", [], vocab)
        np.testing.assert_array_equal(forward(e1, model, vocab.pad_id), forward(e2, model, vocab.pad_id))

    @pytest.mark.parametrize("removed", VARIANTS[1:])
    def test_ablation_keeps_other_slots(self, vocab, removed):
        full = RelationModel(ModelConfig(enc_cfg(vocab)), seed=4)
        part = RelationModel(ModelConfig(enc_cfg(vocab), ablate=removed), seed=4)
        a, b = three_entity_instances()
        batch = collate([featurize(a, "study", ["CPR:4"], vocab), featurize(b, "receptor", [], vocab)], vocab.pad_id)
        rf, rp = full.represent(batch), part.represent(batch)
        assert set(rp.parts) < set(rf.parts)
        for slot, value in rp.parts.items():
            np.testing.assert_array_equal(value.data, rf.parts[slot].data)
        assert rf.h.shape[1] - rp.h.shape[1] == 8 * (len(rf.parts) - len(rp.parts))

    def test_argmax_ignores_logit_shift(self, vocab):
        model = RelationModel(ModelConfig(enc_cfg(vocab)), seed=2)
        a, b = three_entity_instances()
        batch = collate([featurize(a, "", [], vocab), featurize(b, "", [], vocab)], vocab.pad_id)
        before = model.predict_proba(batch.examples, vocab.pad_id)
        model.params["classifier.bias"].data += 5.0
        after = model.predict_proba(batch.examples, vocab.pad_id)
        np.testing.assert_allclose(before, after, atol=1e-12)
        np.testing.assert_array_equal(before.argmax(1), after.argmax(1))

    def test_probabilities(self, vocab):
        model = RelationModel(ModelConfig(enc_cfg(vocab)))
        a, b = three_entity_instances()
        p = model.predict_proba([featurize(a, "", [], vocab), featurize(b, "", [], vocab)], vocab.pad_id)
        np.testing.assert_allclose(p.sum(1), 1.0)
        assert model.predict_proba([], vocab.pad_id).shape == (0, len(CPI.labels))

    def test_batch_matches_single(self, vocab):
        model = RelationModel(ModelConfig(enc_cfg(vocab)), seed=5)
        a, b = three_entity_instances()
        exs = [featurize(a, "receptor study", ["CPR:4"], vocab), featurize(b, "study", [], vocab)]
        both = model.predict_proba(exs, vocab.pad_id)
        for i, e in enumerate(exs):
            np.testing.assert_allclose(both[i], forward(e, model, vocab.pad_id), atol=1e-12)

    def test_state_roundtrip(self, vocab):
        m1 = RelationModel(ModelConfig(enc_cfg(vocab)), seed=1)
        m2 = RelationModel(ModelConfig(enc_cfg(vocab)), params=m1.state(), seed=2)
        for k in m1.params:
            np.testing.assert_array_equal(m1.params[k].data, m2.params[k].data)

    def test_state_mismatch(self, vocab):
        m1 = RelationModel(ModelConfig(enc_cfg(vocab), ablate=("title",)))
        with pytest.raises(ValueError, match="classifier.weight: shape"):
            RelationModel(ModelConfig(enc_cfg(vocab)), params=m1.state())
        m2 = RelationModel(ModelConfig(enc_cfg(vocab), share_encoder=False))
        with pytest.raises(ValueError, match="parameter names differ"):
            RelationModel(ModelConfig(enc_cfg(vocab)), params=m2.state())
