import numpy as np
import pytest

from oligoicp.features import (
    MRNA_TRIMERS,
    N_FEATURES,
    SIRNA_TRIMERS,
    SirnaFeaturizer,
    feature_names,
    featurize,
    featurize_records,
    one_hot_features,
    thermo_features,
    trimer_features,
)
from oligoicp.sequences import MrnaContext, SirnaRecord, SirnaSeq, reverse_complement

from naive_features import naive_feature_vector


def make_record(sirna: str, mrna: str | None = None, efficacy: float = 0.5) -> SirnaRecord:
    if mrna is None:
        mrna = "A" * 19 + reverse_complement(sirna) + "G" * 19
    return SirnaRecord(
        sirna=SirnaSeq(sirna), mrna=MrnaContext(mrna), efficacy=efficacy,
        target_id="t", source_id="s",
    )


def random_pair(rng):
    """Consistent (sirna, mrna) strings with random X padding at the edges."""
    sirna = "".join(rng.choice(list("AUCG"), size=19))
    flank5 = "".join(rng.choice(list("AUCG"), size=19))
    flank3 = "".join(rng.choice(list("AUCG"), size=19))
    mrna = flank5 + reverse_complement(sirna) + flank3
    pad5 = int(rng.integers(0, 20))
    pad3 = int(rng.integers(0, 20))
    mrna = "X" * pad5 + mrna[pad5 : 57 - pad3] + "X" * pad3
    return sirna, mrna


class TestOneHot:
    def test_degenerate_sequences(self):
        v = one_hot_features(SirnaSeq("A" * 19), MrnaContext("X" * 57))
        assert v.shape == (361,)
        assert np.array_equal(v[:76], np.tile([1, 0, 0, 0], 19))
        assert np.array_equal(v[76:], np.tile([0, 0, 0, 0, 1], 57))

    def test_first_position_block(self):
        sirna = SirnaSeq("AUCG" * 4 + "AUC")
        v = one_hot_features(sirna, MrnaContext("X" * 57))
        assert list(v[:4]) == [1, 0, 0, 0]
        assert list(v[4:8]) == [0, 1, 0, 0]  # position 2 is U

    def test_row_sums(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            sirna, mrna = random_pair(rng)
            v = one_hot_features(SirnaSeq(sirna), MrnaContext(mrna))
            assert v.sum() == 19 + 57


class TestTrimers:
    def test_all_a_sirna(self):
        v = trimer_features(SirnaSeq("A" * 19), MrnaContext("X" * 57))
        sirna_block = v[:64]
        assert sirna_block[SIRNA_TRIMERS.index("AAA")] == 17
        assert sirna_block.sum() == 17

    def test_all_x_mrna(self):
        v = trimer_features(SirnaSeq("A" * 19), MrnaContext("X" * 57))
        mrna_block = v[64:]
        assert mrna_block[MRNA_TRIMERS.index("XXX")] == 55
        assert mrna_block.sum() == 55

    def test_alternating_au(self):
        # 17 windows: AUA at odd starts (9), UAU at even starts (8)
        v = trimer_features(SirnaSeq("AU" * 9 + "A"), MrnaContext("X" * 57))
        sirna_block = v[:64]
        assert sirna_block[SIRNA_TRIMERS.index("AUA")] == 9
        assert sirna_block[SIRNA_TRIMERS.index("UAU")] == 8
        assert sirna_block.sum() == 17

    def test_window_sums(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            sirna, mrna = random_pair(rng)
            v = trimer_features(SirnaSeq(sirna), MrnaContext(mrna))
            assert v[:64].sum() == 17
            assert v[64:].sum() == 55


class TestThermoVector:
    def test_all_a_entries(self):
        v = thermo_features(SirnaSeq("A" * 19))
        names = [n for n in feature_names() if n.startswith("thermo_")]
        by_name = dict(zip(names, v))
        assert by_name["thermo_dh_all"] == pytest.approx(-111.71, abs=1e-9)
        assert by_name["thermo_ddg_all"] == pytest.approx(0.90, abs=1e-9)
        assert by_name["thermo_a_19"] == 1.0
        assert by_name["thermo_u_all"] == 0.0

    def test_base_multiset_preserves_all_fractions(self):
        a = thermo_features(SirnaSeq("AAUUCCGGAAUUCCGGAAU"))
        b = thermo_features(SirnaSeq("AUAUCCGGAAUUCCGGAAU"))  # interior swap, same multiset
        names = [n for n in feature_names() if n.startswith("thermo_")]
        idx = {n: i for i, n in enumerate(names)}
        for single in ("thermo_u_all", "thermo_g_all"):
            assert a[idx[single]] == b[idx[single]]


class TestFeaturize:
    def test_length_and_blocks(self):
        rec = make_record("ACGUACGUACGUACGUACG")
        v = featurize(rec)
        assert v.shape == (N_FEATURES,)
        assert N_FEATURES == 574
        assert len(feature_names()) == 574

    def test_deterministic(self):
        rec = make_record("ACGUACGUACGUACGUACG")
        assert np.array_equal(featurize(rec), featurize(rec))

    def test_matches_naive_oracle(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            sirna, mrna = random_pair(rng)
            rec = make_record(sirna, mrna)
            got = featurize(rec)
            want = np.array(naive_feature_vector(sirna, mrna))
            np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_featurize_records_shape(self):
        rng = np.random.default_rng(3)
        records = [make_record(*random_pair(rng)) for _ in range(7)]
        m = featurize_records(records)
        assert m.shape == (7, 574)


class TestFeaturizerEstimator:
    def test_transform(self):
        rng = np.random.default_rng(4)
        records = [make_record(*random_pair(rng)) for _ in range(3)]
        est = SirnaFeaturizer()
        out = est.fit(records).transform(records)
        assert out.shape == (3, 574)
        assert list(est.get_feature_names_out()) == feature_names()

    def test_get_params_roundtrip(self):
        est = SirnaFeaturizer(round_gc_enthalpy=True)
        assert est.get_params() == {"round_gc_enthalpy": True}
        clone = SirnaFeaturizer(**est.get_params())
        assert clone.round_gc_enthalpy
