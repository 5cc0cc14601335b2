"""Catalog of hierarchy/grouping structures over daily RV components.

Each structure is defined by a 0/1 aggregation matrix A (uppers from
bottoms), the structural matrix S = [A; I], and the zero-constraint
matrix C = [I | -A]; a vector y of node values is coherent when
C y = 0. Matrices are stored dense with integer entries (n <= 24), so
C S = 0 holds exactly.

Node ordering is fixed: upper block first (RV, then volatility-type
nodes, then temporal nodes), bottom block quantile-major and
time-minor (for example T1PV1..T5PV1, T1PV2..T5PV2, T1PV3..T5PV3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

#: number of intraday segments in the temporal decompositions
N_SEGMENTS = 5
#: number of partial-variance classes in the PV3 decompositions
N_PV = 3

CATALOG = (
    "ST",
    "SSV",
    "STSV",
    "SV-T",
    "T-SV",
    "CTSV",
    "SPV3",
    "STPV3",
    "PV3-T",
    "T-PV3",
    "CTPV3",
)

_SEGS = tuple(f"T{k + 1}" for k in range(N_SEGMENTS))
_SV_CLASSES = ("SV-", "SV+")
_PV_CLASSES = tuple(f"PV{l + 1}" for l in range(N_PV))
_SV_BOTTOMS = tuple(f"{t}{c}" for c in _SV_CLASSES for t in _SEGS)
_PV_BOTTOMS = tuple(f"{t}{c}" for c in _PV_CLASSES for t in _SEGS)

_LAYOUT: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "ST": (("RV",), _SEGS),
    "SSV": (("RV",), _SV_CLASSES),
    "STSV": (("RV",), _SV_BOTTOMS),
    "SV-T": (("RV",) + _SV_CLASSES, _SV_BOTTOMS),
    "T-SV": (("RV",) + _SEGS, _SV_BOTTOMS),
    "CTSV": (("RV",) + _SV_CLASSES + _SEGS, _SV_BOTTOMS),
    "SPV3": (("RV",), _PV_CLASSES),
    "STPV3": (("RV",), _PV_BOTTOMS),
    "PV3-T": (("RV",) + _PV_CLASSES, _PV_BOTTOMS),
    "T-PV3": (("RV",) + _SEGS, _PV_BOTTOMS),
    "CTPV3": (("RV",) + _PV_CLASSES + _SEGS, _PV_BOTTOMS),
}


@dataclass(frozen=True)
class HierarchyStructure:
    """A named hierarchy with its A/S/C matrices and node labels."""

    name: str
    upper_labels: tuple[str, ...]
    bottom_labels: tuple[str, ...]
    A: np.ndarray = field(repr=False)

    @property
    def n_a(self) -> int:
        return len(self.upper_labels)

    @property
    def n_b(self) -> int:
        return len(self.bottom_labels)

    @property
    def n(self) -> int:
        return self.n_a + self.n_b

    @property
    def node_labels(self) -> tuple[str, ...]:
        return self.upper_labels + self.bottom_labels

    @property
    def S(self) -> np.ndarray:
        """Structural matrix [A; I], integer entries."""
        return np.vstack([self.A, np.eye(self.n_b, dtype=np.int64)])

    @property
    def C(self) -> np.ndarray:
        """Zero-constraint matrix [I | -A], integer entries."""
        return np.hstack([np.eye(self.n_a, dtype=np.int64), -self.A])


def _aggregation_row(upper: str, bottoms: tuple[str, ...]) -> np.ndarray:
    if upper == "RV":
        return np.ones(len(bottoms), dtype=np.int64)
    if upper in _SV_CLASSES or upper in _PV_CLASSES:
        return np.array([b.endswith(upper) for b in bottoms], dtype=np.int64)
    if upper in _SEGS:
        return np.array(
            [b == upper or b.startswith(upper + "S") or b.startswith(upper + "P")
             for b in bottoms],
            dtype=np.int64,
        )
    raise DataError(f"no aggregation rule for upper node {upper!r}")


def build_hierarchy(name: str) -> HierarchyStructure:
    """Look up a catalog structure by name (case-insensitive)."""
    key = str(name).upper()
    if key not in _LAYOUT:
        raise DataError(
            f"unknown hierarchy {name!r}; valid names: {', '.join(CATALOG)}"
        )
    upper, bottom = _LAYOUT[key]
    A = np.vstack([_aggregation_row(u, bottom) for u in upper])
    return HierarchyStructure(key, upper, bottom, A)


def coherence_residual(y, structure: HierarchyStructure) -> float:
    """max |C y|: zero iff y lies in the coherent subspace."""
    v = np.asarray(y, dtype=float)
    if v.shape != (structure.n,):
        raise DataError(
            f"value vector shape {v.shape} does not match n={structure.n} "
            f"for {structure.name}"
        )
    return float(np.max(np.abs(structure.C @ v)))


def is_coherent(y, structure: HierarchyStructure, tol: float = 1e-8) -> bool:
    """Coherence test with the scale rule tol * max(1, max |y|)."""
    v = np.asarray(y, dtype=float)
    scale = max(1.0, float(np.max(np.abs(v)))) if v.size else 1.0
    return coherence_residual(v, structure) <= tol * scale


@dataclass(frozen=True)
class NodeSeriesSet:
    """Coherent daily series, one column per hierarchy node."""

    hierarchy: HierarchyStructure
    dates: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (len(self.dates), self.hierarchy.n):
            raise DataError(
                f"values shape {v.shape} does not match "
                f"({len(self.dates)}, {self.hierarchy.n})"
            )
        C = self.hierarchy.C
        resid = np.abs(v @ C.T).max(axis=1) if v.size else np.zeros(0)
        scale = np.maximum(1.0, np.abs(v).max(axis=1)) if v.size else np.ones(0)
        bad = np.nonzero(resid > 1e-10 * scale)[0]
        if bad.size:
            t = int(bad[0])
            raise DataError(
                f"row {t} ({self.dates[t]}) is incoherent: residual {resid[t]:.3e}"
            )
        object.__setattr__(self, "values", v)

    def column(self, label: str) -> np.ndarray:
        try:
            j = self.hierarchy.node_labels.index(label)
        except ValueError:
            raise DataError(
                f"{label!r} is not a node of {self.hierarchy.name}"
            ) from None
        return self.values[:, j]


def assemble_node_series(
    dates, bottom_values, structure: HierarchyStructure, bottom_labels=None
) -> NodeSeriesSet:
    """Build the full coherent node matrix y_t = S b_t from bottom series.

    ``bottom_values`` is a T x n_b matrix whose columns follow
    ``bottom_labels`` (defaults to the structure's own bottom order);
    a label mismatch reports the first offending label.
    """
    b = np.asarray(bottom_values, dtype=float)
    dates = tuple(dates)
    if b.ndim != 2 or b.shape != (len(dates), structure.n_b):
        raise DataError(
            f"bottom values shape {b.shape} does not match "
            f"({len(dates)}, {structure.n_b})"
        )
    if bottom_labels is not None:
        got = tuple(bottom_labels)
        want = structure.bottom_labels
        if got != want:
            first_bad = next(
                (g for g, w in zip(got, want) if g != w),
                got[len(want):][0] if len(got) > len(want) else "<missing>",
            )
            raise DataError(
                f"bottom label mismatch for {structure.name}: "
                f"first offender {first_bad!r}; expected order {list(want)}"
            )
    values = b @ structure.S.T.astype(float)
    return NodeSeriesSet(structure, dates, values)
