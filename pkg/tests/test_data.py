import numpy as np
import pytest

from oligoicp.data import (
    NoiseProfile,
    build_pool,
    gc_fraction,
    generate_synthetic,
    load_dataset,
    parse_noise_profile,
    planted_efficacy,
    save_dataset,
)
from oligoicp.errors import DatasetParseError, EmptyDatasetError


def write_csv(path, rows, header="sirna,mrna_context,efficacy,target_id,source_id"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")


GOOD_SIRNA = "ACGUACGUACGUACGUACG"
# context consistent with GOOD_SIRNA: 19 A's + revcomp + 19 G's
GOOD_CTX = "A" * 19 + "CGUACGUACGUACGUACGU" + "G" * 19


class TestLoad:
    def test_groups_by_target_and_source(self, tmp_path):
        rows = [
            f"{GOOD_SIRNA},{GOOD_CTX},0.5,T1,A",
            f"{GOOD_SIRNA},{GOOD_CTX},0.6,T2,A",
            f"{GOOD_SIRNA},{GOOD_CTX},0.7,T1,A",
        ]
        write_csv(tmp_path / "d.csv", rows)
        loaded = load_dataset(tmp_path / "d.csv")
        assert len(loaded.records) == 3
        assert loaded.pool.ids() == ("T1/A", "T2/A")
        assert loaded.pool.resolve(["T1/A"]).tolist() == [0, 2]

    def test_twenty_nine_targets_make_twenty_nine_subsets(self, tmp_path):
        rows = [f"{GOOD_SIRNA},{GOOD_CTX},0.5,T{i},srcA" for i in range(29)]
        write_csv(tmp_path / "d.csv", rows)
        loaded = load_dataset(tmp_path / "d.csv")
        assert len(loaded.pool) == 29

    def test_strict_mode_aborts_with_line_number(self, tmp_path):
        short = "ACGUACGUACGUACGUAC"  # 18 nt
        rows = [f"{GOOD_SIRNA},{GOOD_CTX},0.5,T1,A", f"{short},{GOOD_CTX},0.5,T1,A"]
        write_csv(tmp_path / "d.csv", rows)
        with pytest.raises(DatasetParseError) as err:
            load_dataset(tmp_path / "d.csv", strict=True)
        assert err.value.line == 3

    def test_lenient_mode_skips_with_report(self, tmp_path):
        short = "ACGUACGUACGUACGUAC"
        rows = [f"{GOOD_SIRNA},{GOOD_CTX},0.5,T1,A", f"{short},{GOOD_CTX},0.5,T1,A"]
        write_csv(tmp_path / "d.csv", rows)
        loaded = load_dataset(tmp_path / "d.csv", strict=False)
        assert len(loaded.records) == 1
        assert len(loaded.skipped) == 1
        assert loaded.skipped[0].line == 3

    def test_transcript_form(self, tmp_path):
        transcript = "G" * 30 + "CGUACGUACGUACGUACGU" + "C" * 30
        rows = [f"{GOOD_SIRNA},{transcript},31,0.4,T1,A"]
        write_csv(
            tmp_path / "d.csv", rows,
            header="sirna,transcript,binding_start,efficacy,target_id,source_id",
        )
        loaded = load_dataset(tmp_path / "d.csv")
        ctx = loaded.records[0].mrna.bases
        assert len(ctx) == 57
        assert ctx[19:38] == "CGUACGUACGUACGUACGU"

    def test_unknown_header_rejected(self, tmp_path):
        write_csv(tmp_path / "d.csv", ["a,b"], header="foo,bar")
        with pytest.raises(DatasetParseError):
            load_dataset(tmp_path / "d.csv")

    def test_empty_dataset(self, tmp_path):
        write_csv(tmp_path / "d.csv", [])
        with pytest.raises(EmptyDatasetError):
            load_dataset(tmp_path / "d.csv")

    def test_bad_efficacy_reported(self, tmp_path):
        write_csv(tmp_path / "d.csv", [f"{GOOD_SIRNA},{GOOD_CTX},not-a-number,T1,A"])
        with pytest.raises(DatasetParseError, match="efficacy"):
            load_dataset(tmp_path / "d.csv")

    def test_dna_notation_normalized(self, tmp_path):
        dna = GOOD_SIRNA.replace("U", "T")
        write_csv(tmp_path / "d.csv", [f"{dna},{GOOD_CTX},0.5,T1,A"])
        loaded = load_dataset(tmp_path / "d.csv")
        assert loaded.records[0].sirna.bases == GOOD_SIRNA


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        records = generate_synthetic(25, 4, seed=3, x_pad_fraction=0.3)
        save_dataset(records, tmp_path / "d.csv")
        loaded = load_dataset(tmp_path / "d.csv")
        assert loaded.records == records
        # and the bytes are stable under a second save
        save_dataset(loaded.records, tmp_path / "d2.csv")
        assert (tmp_path / "d.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()

    def test_pool_partitions_records(self):
        records = generate_synthetic(40, 7, seed=1)
        pool = build_pool(records)
        combined = np.sort(pool.all_indices())
        assert combined.tolist() == list(range(40))


class TestSynthetic:
    def test_deterministic(self):
        a = generate_synthetic(30, 3, seed=5)
        b = generate_synthetic(30, 3, seed=5)
        assert a == b
        assert a != generate_synthetic(30, 3, seed=6)

    def test_zero_noise_equals_planted_function(self):
        records = generate_synthetic(20, 2, NoiseProfile(kind="homoscedastic", sigma=0.0), seed=0)
        for r in records:
            assert r.efficacy == pytest.approx(planted_efficacy(r.sirna))

    def test_records_are_consistent(self, recwarn):
        generate_synthetic(50, 5, seed=2, x_pad_fraction=0.5)
        assert not recwarn.list  # no complementarity warnings

    def test_two_regime_variance_ratio(self):
        profile = NoiseProfile(kind="two_regime", sigma_low=0.1, sigma_high=0.4)
        records = generate_synthetic(6000, 3, profile, seed=11)
        resid = {True: [], False: []}
        for r in records:
            hi = gc_fraction(r.sirna.bases) >= profile.gc_threshold
            resid[hi].append(r.efficacy - planted_efficacy(r.sirna))
        ratio = np.var(resid[True]) / np.var(resid[False])
        want = (profile.sigma_high / profile.sigma_low) ** 2
        assert ratio == pytest.approx(want, rel=0.10)

    def test_per_target_noise_spread(self):
        profile = NoiseProfile(kind="per_target", sigma_low=0.01, sigma_high=0.5)
        records = generate_synthetic(4000, 4, profile, seed=13)
        by_target: dict[str, list[float]] = {}
        for r in records:
            by_target.setdefault(r.target_id, []).append(
                r.efficacy - planted_efficacy(r.sirna)
            )
        stds = [np.std(by_target[t]) for t in sorted(by_target)]
        assert stds[0] < stds[-1] / 5  # wide planted quality variation

    def test_requires_targets(self):
        with pytest.raises(ValueError):
            generate_synthetic(3, 5)


class TestNoiseProfileParsing:
    def test_parse_forms(self):
        assert parse_noise_profile("homoscedastic:0.25").sigma == 0.25
        two = parse_noise_profile("two_regime:0.05,0.5,0.6")
        assert (two.sigma_low, two.sigma_high, two.gc_threshold) == (0.05, 0.5, 0.6)
        per = parse_noise_profile("per_target:0.02,0.8")
        assert (per.sigma_low, per.sigma_high) == (0.02, 0.8)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            parse_noise_profile("laplace:1.0")
