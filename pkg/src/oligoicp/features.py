"""The 574-dimensional feature vector for an (siRNA, mRNA context) pair.

Layout, in fixed order:

* ``[0:361]``   one-hot encodings: 19 siRNA positions x (A, U, C, G),
  then 57 mRNA positions x (A, U, C, G, X).
* ``[361:550]`` trimer counts: 64 siRNA trimers over the 17 siRNA
  windows, then 125 mRNA trimers over the 55 context windows.  Trimers
  are ordered lexicographically under the alphabet order A < U < C < G
  (< X for the context); the order is an internal convention.
* ``[550:574]`` 24 thermodynamic features of the siRNA alone: terminal
  and interior dinucleotide energies, whole-duplex aggregates, and
  single/dinucleotide indicators.

Counts and indicators are emitted as 64-bit floats with exact integer
values.
"""

from __future__ import annotations

from itertools import product

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .sequences import MRNA_SYMBOLS, RNA_BASES, MrnaContext, SirnaRecord, SirnaSeq
from .thermo import ThermoTables, default_tables, duplex_energy_summary

N_ONE_HOT = 4 * 19 + 5 * 57  # 361
N_TRIMER = 4**3 + 5**3  # 189
N_THERMO = 24
N_FEATURES = N_ONE_HOT + N_TRIMER + N_THERMO  # 574

SIRNA_TRIMERS = ["".join(t) for t in product(RNA_BASES, repeat=3)]
MRNA_TRIMERS = ["".join(t) for t in product(MRNA_SYMBOLS, repeat=3)]

_SIRNA_BASE_IDX = {b: i for i, b in enumerate(RNA_BASES)}
_MRNA_BASE_IDX = {b: i for i, b in enumerate(MRNA_SYMBOLS)}
_SIRNA_TRI_IDX = {t: i for i, t in enumerate(SIRNA_TRIMERS)}
_MRNA_TRI_IDX = {t: i for i, t in enumerate(MRNA_TRIMERS)}

THERMO_FEATURE_NAMES = [
    "ddg_all", "dg_s1_2", "dh_s1_2", "u_1", "g_1",
    "dh_all", "u_all", "uu_1", "g_all", "gg_1", "gc_1", "gg_all",
    "dg_s2_3", "ua_all", "u_2", "c_1", "cc_all",
    "dg_s18_19", "cc_1", "gc_all", "cg_1",
    "dg_s13_14", "uu_all", "a_19",
]


def one_hot_features(sirna: SirnaSeq, mrna: MrnaContext) -> np.ndarray:
    """Concatenated per-position one-hot blocks; always sums to 19 + 57."""
    v = np.zeros(N_ONE_HOT)
    for i, b in enumerate(sirna.bases):
        v[4 * i + _SIRNA_BASE_IDX[b]] = 1.0
    off = 4 * 19
    for j, b in enumerate(mrna.bases):
        v[off + 5 * j + _MRNA_BASE_IDX[b]] = 1.0
    return v


def trimer_features(sirna: SirnaSeq, mrna: MrnaContext) -> np.ndarray:
    """Counts of every possible trimer in each sequence's own alphabet."""
    v = np.zeros(N_TRIMER)
    s = sirna.bases
    for i in range(19 - 2):
        v[_SIRNA_TRI_IDX[s[i : i + 3]]] += 1.0
    m = mrna.bases
    for j in range(57 - 2):
        v[64 + _MRNA_TRI_IDX[m[j : j + 3]]] += 1.0
    return v


def thermo_features(sirna: SirnaSeq, tables: ThermoTables | None = None) -> np.ndarray:
    """The 24 thermodynamic features, in the fixed order of
    :data:`THERMO_FEATURE_NAMES`.

    ``N(k)`` below is the 0/1 indicator of base N at position k (1-based),
    ``NM(k)`` of dinucleotide NM starting at k; ``N(all)`` and ``NM(all)``
    are the corresponding window fractions (over 19 and 18 windows).
    """
    tables = tables or default_tables()
    s = sirna.bases

    def base(k: int, n: str) -> float:
        return 1.0 if s[k - 1] == n else 0.0

    def dimer(k: int, nm: str) -> float:
        return 1.0 if s[k - 1 : k + 1] == nm else 0.0

    def base_all(n: str) -> float:
        return s.count(n) / 19.0

    def dimer_all(nm: str) -> float:
        return sum(1.0 for k in range(1, 19) if s[k - 1 : k + 1] == nm) / 18.0

    def dg(k: int) -> float:
        return tables.dg(s[k - 1 : k + 1])

    def dh(k: int) -> float:
        return tables.dh(s[k - 1 : k + 1])

    e = duplex_energy_summary(s, tables)
    return np.array([
        e.ddg_all, dg(1), dh(1), base(1, "U"), base(1, "G"),
        e.dh_all, base_all("U"), dimer(1, "UU"), base_all("G"), dimer(1, "GG"),
        dimer(1, "GC"), dimer_all("GG"),
        dg(2), dimer_all("UA"), base(2, "U"), base(1, "C"), dimer_all("CC"),
        dg(18), dimer(1, "CC"), dimer_all("GC"), dimer(1, "CG"),
        dg(13), dimer_all("UU"), base(19, "A"),
    ])


def featurize(record: SirnaRecord, tables: ThermoTables | None = None) -> np.ndarray:
    """Full 574-dimensional feature vector for one record."""
    return np.concatenate([
        one_hot_features(record.sirna, record.mrna),
        trimer_features(record.sirna, record.mrna),
        thermo_features(record.sirna, tables),
    ])


def featurize_records(records, tables: ThermoTables | None = None) -> np.ndarray:
    """Feature matrix of shape (n_records, 574)."""
    out = np.empty((len(records), N_FEATURES))
    for i, record in enumerate(records):
        out[i] = featurize(record, tables)
    return out


def feature_names() -> list[str]:
    """Stable column names matching the featurize layout."""
    names = []
    for i in range(1, 20):
        names.extend(f"oh_sirna_{i:02d}_{b}" for b in RNA_BASES)
    for j in range(1, 58):
        names.extend(f"oh_mrna_{j:02d}_{b}" for b in MRNA_SYMBOLS)
    names.extend(f"tri_sirna_{t}" for t in SIRNA_TRIMERS)
    names.extend(f"tri_mrna_{t}" for t in MRNA_TRIMERS)
    names.extend(f"thermo_{n}" for n in THERMO_FEATURE_NAMES)
    return names


class SirnaFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless record-to-vector transformer with a scikit-learn face.

    Parameters
    ----------
    round_gc_enthalpy : bool, default=False
        Use -14.88 instead of the verbatim -14.882 for the GC stacking
        enthalpy (sensitivity checks only).
    """

    def __init__(self, round_gc_enthalpy: bool = False):
        self.round_gc_enthalpy = round_gc_enthalpy

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        """Featurize a sequence of :class:`SirnaRecord` into (n, 574)."""
        tables = default_tables(round_gc_enthalpy=self.round_gc_enthalpy)
        return featurize_records(list(X), tables)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(feature_names(), dtype=object)
