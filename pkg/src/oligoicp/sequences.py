"""Sequence alphabets, validation, and normalization into canonical records.

Conventions used throughout the package:

* siRNA sequences are the 19-nt antisense strand, written 5'->3', RNA
  alphabet {A, U, C, G}.
* mRNA contexts are 57-nt sense-strand slices, written 5'->3': the 19-nt
  region the siRNA reverse-complements to, plus 19-nt flanks on both
  sides.  Positions that fall outside the source transcript are padded
  with 'X', so X may only appear as a contiguous prefix and/or suffix.
* DNA notation (T) is mapped to U on ingestion.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import (
    AmbiguousLongError,
    BindingOutOfRangeError,
    InvalidSymbolError,
    TooShortError,
)

SIRNA_LENGTH = 19
MRNA_LENGTH = 57
# Offset of the binding region inside the 57-nt context (0-based slice bounds).
BINDING_SLICE = slice(19, 38)

RNA_BASES = "AUCG"
MRNA_SYMBOLS = "AUCGX"

_COMPLEMENT = {"A": "U", "U": "A", "C": "G", "G": "C"}


class ComplementarityWarning(UserWarning):
    """siRNA does not reverse-complement to the context's binding region."""


def _clean(raw: str, alphabet: str, *, what: str) -> str:
    """Uppercase, map T->U, and validate symbols against ``alphabet``."""
    seq = raw.strip().upper().replace("T", "U")
    for ch in seq:
        if ch not in alphabet:
            raise InvalidSymbolError(f"invalid symbol {ch!r} in {what}: {raw!r}")
    return seq


def reverse_complement(seq: str) -> str:
    """Reverse complement of an RNA sequence (A<->U, C<->G)."""
    try:
        return "".join(_COMPLEMENT[ch] for ch in reversed(seq))
    except KeyError as exc:
        raise InvalidSymbolError(f"invalid RNA symbol {exc.args[0]!r} in {seq!r}") from None


def is_self_reverse_complement(seq: str) -> bool:
    """True when ``seq`` equals its own reverse complement.

    Impossible for odd lengths: the center base would have to pair with
    itself and neither A<->U nor C<->G has a fixed point.
    """
    return seq == reverse_complement(seq)


@dataclass(frozen=True)
class SirnaSeq:
    """A validated 19-nt antisense siRNA sequence."""

    bases: str

    def __post_init__(self):
        if len(self.bases) < SIRNA_LENGTH:
            raise TooShortError(
                f"siRNA must be exactly {SIRNA_LENGTH} nt, got {len(self.bases)}"
            )
        if len(self.bases) > SIRNA_LENGTH:
            raise AmbiguousLongError(
                f"siRNA must be exactly {SIRNA_LENGTH} nt, got {len(self.bases)}; "
                "use normalize_sirna for raw inputs"
            )
        for ch in self.bases:
            if ch not in RNA_BASES:
                raise InvalidSymbolError(f"invalid siRNA symbol {ch!r}")

    def __str__(self) -> str:
        return self.bases

    def __len__(self) -> int:
        return len(self.bases)


@dataclass(frozen=True)
class MrnaContext:
    """A validated 57-nt mRNA context; X padding only at the edges."""

    bases: str

    def __post_init__(self):
        if len(self.bases) != MRNA_LENGTH:
            raise InvalidSymbolError(
                f"mRNA context must be exactly {MRNA_LENGTH} nt, got {len(self.bases)}"
            )
        for ch in self.bases:
            if ch not in MRNA_SYMBOLS:
                raise InvalidSymbolError(f"invalid mRNA symbol {ch!r}")
        if "X" in self.bases.strip("X"):
            raise InvalidSymbolError(
                "X symbols are padding and may only form a prefix and/or suffix"
            )

    def __str__(self) -> str:
        return self.bases

    def __len__(self) -> int:
        return len(self.bases)


@dataclass(frozen=True)
class SirnaRecord:
    """One labelled data point: siRNA, its mRNA context, and the efficacy label.

    The binding region (context positions 20..38, 1-based) is expected to
    equal the reverse complement of the siRNA.  Strand orientation is a
    convention, so mismatches only emit :class:`ComplementarityWarning`.
    """

    sirna: SirnaSeq
    mrna: MrnaContext
    efficacy: float
    target_id: str
    source_id: str

    def __post_init__(self):
        if not self.target_id or not self.source_id:
            raise ValueError("target_id and source_id must be non-empty")
        if not math.isfinite(self.efficacy):
            raise ValueError(f"efficacy must be finite, got {self.efficacy!r}")
        binding = self.mrna.bases[BINDING_SLICE]
        expected = reverse_complement(self.sirna.bases)
        for got, want in zip(binding, expected):
            if got != "X" and got != want:
                warnings.warn(
                    f"siRNA does not reverse-complement to the binding region "
                    f"(context {binding!r} vs expected {expected!r})",
                    ComplementarityWarning,
                    stacklevel=2,
                )
                break


def normalize_sirna(raw: str) -> SirnaSeq:
    """Normalize a raw siRNA string into a canonical 19-mer.

    19-nt inputs are taken as-is (after T->U).  Longer inputs are trimmed
    to the first 19 nt after a leading U; longer inputs without a leading
    U are rejected because no trim rule applies to them.  Inputs shorter
    than 19 nt are rejected.
    """
    seq = _clean(raw, RNA_BASES, what="siRNA")
    if len(seq) < SIRNA_LENGTH:
        raise TooShortError(f"siRNA shorter than {SIRNA_LENGTH} nt: {raw!r}")
    if len(seq) == SIRNA_LENGTH:
        return SirnaSeq(seq)
    if seq[0] != "U":
        raise AmbiguousLongError(
            f"siRNA longer than {SIRNA_LENGTH} nt without a leading U: {raw!r}"
        )
    return SirnaSeq(seq[1 : 1 + SIRNA_LENGTH])


def build_mrna_context(transcript: str, binding_start: int) -> MrnaContext:
    """Slice a 57-nt context around a binding site (1-based ``binding_start``).

    The slice covers transcript positions ``binding_start - 19`` through
    ``binding_start + 37`` inclusive; positions outside the transcript are
    filled with 'X'.  The 19-nt binding region itself must lie fully
    inside the transcript.
    """
    seq = _clean(transcript, RNA_BASES, what="transcript")
    if binding_start < 1 or binding_start + SIRNA_LENGTH - 1 > len(seq):
        raise BindingOutOfRangeError(
            f"binding region [{binding_start}, {binding_start + SIRNA_LENGTH - 1}] "
            f"not inside transcript of length {len(seq)}"
        )
    out = []
    for pos in range(binding_start - 19, binding_start + 38):  # 1-based positions
        out.append(seq[pos - 1] if 1 <= pos <= len(seq) else "X")
    return MrnaContext("".join(out))
