"""Dataset schema, ingestion, subset grouping, and synthetic fixtures.

CSV schema (UTF-8, header required, '.' decimal)::

    sirna,mrna_context,efficacy,target_id,source_id

or the transcript form, where the context is sliced on load::

    sirna,transcript,binding_start,efficacy,target_id,source_id

Records group into one subset per (target_id, source_id) pair, in first
appearance order.  Efficacy labels are taken as-is; the package never
rescales them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ensemble import Subset, SubsetPool
from .errors import DatasetParseError, EmptyDatasetError, SequenceError
from .sequences import (
    MrnaContext,
    SirnaRecord,
    SirnaSeq,
    build_mrna_context,
    normalize_sirna,
    reverse_complement,
)
from .thermo import duplex_energy_summary

CONTEXT_HEADER = ["sirna", "mrna_context", "efficacy", "target_id", "source_id"]
TRANSCRIPT_HEADER = ["sirna", "transcript", "binding_start", "efficacy", "target_id", "source_id"]


@dataclass(frozen=True)
class SkippedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class LoadedDataset:
    records: list[SirnaRecord]
    pool: SubsetPool
    skipped: list[SkippedRow]

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.efficacy for r in self.records])


def subset_id_for(target_id: str, source_id: str) -> str:
    return f"{target_id}/{source_id}"


def build_pool(records) -> SubsetPool:
    """Group record indices by (target_id, source_id), first-appearance order."""
    groups: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        groups.setdefault(subset_id_for(record.target_id, record.source_id), []).append(i)
    return SubsetPool(
        subsets=tuple(Subset(subset_id=sid, indices=tuple(idx)) for sid, idx in groups.items())
    )


def _parse_row(row: dict, line: int, transcript_form: bool) -> SirnaRecord:
    try:
        sirna = normalize_sirna(row["sirna"])
        if transcript_form:
            try:
                start = int(row["binding_start"])
            except ValueError:
                raise DatasetParseError(line, f"bad binding_start {row['binding_start']!r}") from None
            mrna = build_mrna_context(row["transcript"], start)
        else:
            mrna = MrnaContext(row["mrna_context"].strip().upper().replace("T", "U"))
        try:
            efficacy = float(row["efficacy"])
        except ValueError:
            raise DatasetParseError(line, f"bad efficacy {row['efficacy']!r}") from None
        return SirnaRecord(
            sirna=sirna,
            mrna=mrna,
            efficacy=efficacy,
            target_id=row["target_id"].strip(),
            source_id=row["source_id"].strip(),
        )
    except (SequenceError, ValueError) as exc:
        raise DatasetParseError(line, str(exc)) from None


def load_dataset(path, strict: bool = True) -> LoadedDataset:
    """Load and normalize a dataset CSV.

    Rows that fail normalization abort the load in strict mode; in
    lenient mode they are skipped and reported with their line numbers.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if header == CONTEXT_HEADER:
            transcript_form = False
        elif header == TRANSCRIPT_HEADER:
            transcript_form = True
        else:
            raise DatasetParseError(1, f"unrecognized header {header!r}")
        records: list[SirnaRecord] = []
        skipped: list[SkippedRow] = []
        for line, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                error = DatasetParseError(line, "wrong number of columns")
            else:
                try:
                    records.append(_parse_row(row, line, transcript_form))
                    continue
                except DatasetParseError as exc:
                    error = exc
            if strict:
                raise error
            skipped.append(SkippedRow(line=line, reason=str(error)))
    if not records:
        raise EmptyDatasetError(f"no usable records in {path}")
    return LoadedDataset(records=records, pool=build_pool(records), skipped=skipped)


def save_dataset(records, path) -> None:
    """Write records in the canonical context-form CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONTEXT_HEADER)
        for r in records:
            writer.writerow(
                [r.sirna.bases, r.mrna.bases, repr(float(r.efficacy)), r.target_id, r.source_id]
            )


# --- synthetic data ---

@dataclass(frozen=True)
class NoiseProfile:
    """Label-noise specification for synthetic datasets.

    kinds:
      homoscedastic  constant sigma
      two_regime     sigma_low below the GC threshold, sigma_high at or
                     above it (regimes are feature-determined, so a
                     backend can see them)
      per_target     sigma interpolated geometrically from sigma_low to
                     sigma_high across targets (planted subset-quality
                     variation)
    """

    kind: str = "homoscedastic"
    sigma: float = 0.1
    sigma_low: float = 0.05
    sigma_high: float = 0.5
    gc_threshold: float = 0.5

    def __post_init__(self):
        if self.kind not in ("homoscedastic", "two_regime", "per_target"):
            raise ValueError(f"unknown noise profile kind {self.kind!r}")


def parse_noise_profile(text: str) -> NoiseProfile:
    """Parse CLI notation: ``homoscedastic:0.1``, ``two_regime:0.05,0.5[,thresh]``,
    ``per_target:0.02,0.8``."""
    kind, _, args = text.partition(":")
    parts = [float(p) for p in args.split(",") if p] if args else []
    if kind == "homoscedastic":
        return NoiseProfile(kind=kind, sigma=parts[0] if parts else 0.1)
    if kind == "two_regime":
        profile = NoiseProfile(
            kind=kind,
            sigma_low=parts[0] if len(parts) > 0 else 0.05,
            sigma_high=parts[1] if len(parts) > 1 else 0.5,
            gc_threshold=parts[2] if len(parts) > 2 else 0.5,
        )
        return profile
    if kind == "per_target":
        return NoiseProfile(
            kind=kind,
            sigma_low=parts[0] if len(parts) > 0 else 0.02,
            sigma_high=parts[1] if len(parts) > 1 else 0.8,
        )
    raise ValueError(f"unknown noise profile {text!r}")


def gc_fraction(sirna: str) -> float:
    return sum(1 for ch in sirna if ch in "GC") / len(sirna)


def planted_efficacy(sirna) -> float:
    """The noiseless synthetic efficacy surface.

    A smooth function of GC content, duplex enthalpy, and A/U ends, all
    of which are visible to any backend through the feature vector.
    """
    s = sirna.bases if isinstance(sirna, SirnaSeq) else str(sirna)
    gc = gc_fraction(s)
    dh = duplex_energy_summary(s).dh_all
    dh_n = min(max((dh + 265.0) / 160.0, 0.0), 1.0)
    au_ends = sum(1 for ch in (s[0], s[-1]) if ch in "AU") / 2.0
    return 0.15 + 0.7 * (0.45 * gc + 0.35 * (1.0 - dh_n) + 0.20 * au_ends)


def noise_sigma(profile: NoiseProfile, sirna: str, target_index: int, n_targets: int) -> float:
    """Noise level for one record under a profile."""
    if profile.kind == "homoscedastic":
        return profile.sigma
    if profile.kind == "two_regime":
        return profile.sigma_high if gc_fraction(sirna) >= profile.gc_threshold else profile.sigma_low
    sigmas = np.geomspace(profile.sigma_low, profile.sigma_high, n_targets)
    return float(sigmas[target_index])


def _random_sirna(rng: np.random.Generator) -> str:
    # Per-record GC propensity widens the composition spread so that
    # feature-space neighborhoods carry real signal.
    gc_target = rng.uniform(0.2, 0.8)
    bases = []
    for _ in range(19):
        if rng.random() < gc_target:
            bases.append("G" if rng.random() < 0.5 else "C")
        else:
            bases.append("A" if rng.random() < 0.5 else "U")
    return "".join(bases)


def generate_synthetic(
    n: int,
    n_targets: int,
    noise_profile: NoiseProfile | None = None,
    seed: int = 0,
    x_pad_fraction: float = 0.0,
) -> list[SirnaRecord]:
    """Seeded synthetic records with a planted efficacy surface.

    Contexts are consistent (binding region = reverse complement of the
    siRNA) with random flanks; a fraction get X-padded edges.  Labels
    are ``planted_efficacy + noise`` and deliberately unclipped so the
    noise stays symmetric.
    """
    if not 1 <= n_targets <= n:
        raise ValueError("need n >= n_targets >= 1")
    profile = noise_profile or NoiseProfile()
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        sirna = _random_sirna(rng)
        flank5 = "".join(rng.choice(list("AUCG"), size=19))
        flank3 = "".join(rng.choice(list("AUCG"), size=19))
        mrna = flank5 + reverse_complement(sirna) + flank3
        if x_pad_fraction > 0.0 and rng.random() < x_pad_fraction:
            pad = int(rng.integers(1, 20))
            if rng.random() < 0.5:
                mrna = "X" * pad + mrna[pad:]
            else:
                mrna = mrna[: 57 - pad] + "X" * pad
        target_index = i % n_targets
        sigma = noise_sigma(profile, sirna, target_index, n_targets)
        efficacy = planted_efficacy(sirna) + (rng.normal(0.0, sigma) if sigma > 0 else 0.0)
        records.append(
            SirnaRecord(
                sirna=SirnaSeq(sirna),
                mrna=MrnaContext(mrna),
                efficacy=float(efficacy),
                target_id=f"T{target_index:02d}",
                source_id="synthetic",
            )
        )
    return records
