import numpy as np
import pytest
from hypothesis import given, strategies as st

from overlap_re.corpus import CPI
from overlap_re.evaluation import (
    Prediction,
    micro_prf,
    prf_from_counts,
    read_predictions,
    report_from_predictions,
    stratified_eval,
    write_predictions,
)

POS = CPI.positive_labels

# gold, predicted, kind; counts worked out by hand below
FIXTURE = [
    ("CPR:4", "CPR:4", "overlapping"),  # TP
    ("CPR:4", "CPR:3", "overlapping"),  # FP and FN
    ("False", "CPR:5", "overlapping"),  # FP
    ("CPR:6", "False", "overlapping"),  # FN
    ("CPR:9", "CPR:9", "normal"),       # TP
    ("False", "False", "normal"),
    ("CPR:3", "CPR:3", "normal"),       # TP
    ("CPR:5", "False", "normal"),       # FN
]


def fixture_report():
    golds, preds, kinds = zip(*FIXTURE)
    return stratified_eval(list(preds), list(golds), list(kinds), CPI)


class TestCounts:
    def test_worked_example(self):
        p, r, f = prf_from_counts(3, 1, 2)
        assert p == pytest.approx(0.75)
        assert r == pytest.approx(0.6)
        assert f == pytest.approx(2 / 3, abs=1e-4)

    def test_zero_division(self):
        assert prf_from_counts(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_false_never_counts(self):
        assert micro_prf(["False", "False"], ["False", "False"], POS) == (0.0, 0.0, 0.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="predictions"):
            micro_prf(["False"], [], POS)


class TestStratified:
    def test_all(self):
        rep = fixture_report()
        assert rep.kind_counts["all"] == (3, 2, 3)
        np.testing.assert_allclose(rep.micro, (0.6, 0.5, 6 / 11))

    def test_by_kind(self):
        rep = fixture_report()
        assert rep.kind_counts["overlapping"] == (1, 2, 2)
        np.testing.assert_allclose(rep.by_kind["overlapping"], (1 / 3, 1 / 3, 1 / 3))
        assert rep.kind_counts["normal"] == (2, 0, 1)
        np.testing.assert_allclose(rep.by_kind["normal"], (1.0, 2 / 3, 0.8))
        assert rep.kind_sizes == {"overlapping": 4, "normal": 4, "all": 8}

    def test_per_type(self):
        rep = fixture_report()
        expected = {"CPR:3": 2 / 3, "CPR:4": 2 / 3, "CPR:5": 0.0, "CPR:6": 0.0, "CPR:9": 1.0}
        for lab, f in expected.items():
            assert rep.per_type_f[lab] == pytest.approx(f)

    def test_confusion(self):
        rep = fixture_report()
        assert rep.counts.sum() == 8
        idx = CPI.label_index
        assert rep.counts[idx("CPR:4"), idx("CPR:3")] == 1
        assert rep.counts[idx("False"), idx("False")] == 1

    def test_render_and_csv(self):
        rep = fixture_report()
        text = rep.render()
        assert "overlapping" in text and "54.55" in text
        assert rep.to_csv().splitlines()[0].startswith("section,key")

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            stratified_eval(["False"], ["False"], [], CPI)


labels = st.sampled_from(CPI.labels)
rows = st.lists(st.tuples(labels, labels, st.sampled_from(["overlapping", "normal"])), min_size=1, max_size=40)


class TestProperties:
    @given(rows, st.randoms(use_true_random=False))
    def test_permutation_invariant(self, data, rnd):
        shuffled = list(data)
        rnd.shuffle(shuffled)
        g1, p1, _ = zip(*data)
        g2, p2, _ = zip(*shuffled)
        assert micro_prf(p1, g1, POS) == micro_prf(p2, g2, POS)

    @given(rows)
    def test_f_bounded_by_mean(self, data):
        g, p, _ = zip(*data)
        prec, rec, f = micro_prf(p, g, POS)
        assert f <= (prec + rec) / 2 + 1e-12
        assert 0.0 <= f <= 1.0

    @given(rows)
    def test_kind_counts_add_up(self, data):
        g, p, k = zip(*data)
        rep = stratified_eval(list(p), list(g), list(k), CPI)
        total = np.add(rep.kind_counts["overlapping"], rep.kind_counts["normal"])
        assert tuple(total) == rep.kind_counts["all"]

    @given(rows)
    def test_perfect_predictions(self, data):
        g, _, _ = zip(*data)
        p, r, f = micro_prf(g, g, POS)
        if any(x in POS for x in g):
            assert (p, r, f) == (1.0, 1.0, 1.0)


class TestPredictionFiles:
    def test_roundtrip_reproduces_report(self, tmp_path):
        preds = [Prediction(f"i{n}", g, p, k) for n, (g, p, k) in enumerate(FIXTURE)]
        write_predictions(preds, tmp_path / "p.tsv")
        back = read_predictions(tmp_path / "p.tsv")
        assert back == preds
        assert report_from_predictions(back, CPI).render() == fixture_report().render()

    def test_bad_columns(self, tmp_path):
        (tmp_path / "p.tsv").write_text("a\tb\n")
        with pytest.raises(ValueError, match="p.tsv:1"):
            read_predictions(tmp_path / "p.tsv")

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="not in the"):
            report_from_predictions([Prediction("x", "CPR:11", "False", "normal")], CPI)
