"""Nearest-neighbor duplex thermodynamics for 5'->3' RNA sequences.

Dinucleotide stacking values (kcal/mol) and the initiation / end /
symmetry corrections used to summarize duplex stability.  The GC
enthalpy is -14.882 in the source parameter set; it looks like a typo
for -14.88, so :func:`default_tables` takes a flag that rounds it for
sensitivity checks, but the verbatim value is the default.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

from .errors import InvalidSymbolError
from .sequences import is_self_reverse_complement

# Gibbs free-energy change per dinucleotide stack, kcal/mol.
DELTA_G: Mapping[str, float] = MappingProxyType({
    "AA": -0.93, "AU": -1.10, "AC": -2.24, "AG": -2.08,
    "UA": -1.33, "UU": -0.93, "UC": -2.35, "UG": -2.11,
    "CA": -2.11, "CU": -2.08, "CC": -3.26, "CG": -2.36,
    "GA": -2.35, "GU": -2.24, "GC": -3.42, "GG": -3.26,
})

# Enthalpy change per dinucleotide stack, kcal/mol.
DELTA_H: Mapping[str, float] = MappingProxyType({
    "AA": -6.82, "AU": -9.38, "AC": -11.40, "AG": -10.48,
    "UA": -7.69, "UU": -6.82, "UC": -12.44, "UG": -10.44,
    "CA": -10.44, "CU": -10.48, "CC": -13.39, "CG": -10.64,
    "GA": -12.44, "GU": -11.40, "GC": -14.882, "GG": -13.39,
})


@dataclass(frozen=True)
class ThermoTables:
    """Dinucleotide tables plus duplex correction constants (kcal/mol)."""

    delta_g: Mapping[str, float]
    delta_h: Mapping[str, float]
    g_init: float = 4.09
    g_end: float = 0.45
    g_sym: float = 0.43
    h_init: float = 3.61
    h_end: float = 3.72

    def dg(self, dimer: str) -> float:
        try:
            return self.delta_g[dimer]
        except KeyError:
            raise InvalidSymbolError(f"unknown dinucleotide {dimer!r}") from None

    def dh(self, dimer: str) -> float:
        try:
            return self.delta_h[dimer]
        except KeyError:
            raise InvalidSymbolError(f"unknown dinucleotide {dimer!r}") from None


_DEFAULT = ThermoTables(delta_g=DELTA_G, delta_h=DELTA_H)
_ROUNDED_GC = ThermoTables(
    delta_g=DELTA_G,
    delta_h=MappingProxyType({**DELTA_H, "GC": -14.88}),
)


def default_tables(round_gc_enthalpy: bool = False) -> ThermoTables:
    """The standard parameter set; ``round_gc_enthalpy`` swaps GC to -14.88."""
    return _ROUNDED_GC if round_gc_enthalpy else _DEFAULT


@dataclass(frozen=True)
class DuplexEnergies:
    """Whole-duplex energy summary for one sequence.

    ``dg_all`` includes the symmetry correction when the sequence is its
    own reverse complement (possible only for even lengths); ``dh_all``
    carries no symmetry term.  ``ddg_all`` is the 5'/3' terminal-stack
    free-energy asymmetry plus the A/U end correction.
    """

    dg_all: float
    dh_all: float
    ddg_all: float
    au_end_count: int
    self_complementary: bool


def au_end_count(seq: str) -> int:
    """Number of A/U bases among the two terminal positions (0, 1, or 2)."""
    return sum(1 for ch in (seq[0], seq[-1]) if ch in "AU")


def duplex_energy_summary(seq: str, tables: ThermoTables | None = None) -> DuplexEnergies:
    """Compute duplex energy aggregates for an RNA sequence of length >= 2."""
    tables = tables or _DEFAULT
    if len(seq) < 2:
        raise ValueError("duplex energies need at least one dinucleotide stack")
    n_end = au_end_count(seq)
    self_comp = is_self_reverse_complement(seq)
    stack_g = sum(tables.dg(seq[k : k + 2]) for k in range(len(seq) - 1))
    stack_h = sum(tables.dh(seq[k : k + 2]) for k in range(len(seq) - 1))
    dg_all = tables.g_init + tables.g_end * n_end + (tables.g_sym if self_comp else 0.0) + stack_g
    dh_all = tables.h_init + tables.h_end * n_end + stack_h
    ddg_all = tables.dg(seq[:2]) - tables.dg(seq[-2:]) + tables.g_end * n_end
    return DuplexEnergies(
        dg_all=dg_all,
        dh_all=dh_all,
        ddg_all=ddg_all,
        au_end_count=n_end,
        self_complementary=self_comp,
    )
