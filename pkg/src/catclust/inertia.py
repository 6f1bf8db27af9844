"""Chi-square inertia, standardized residuals, chi-square distances and CA.

Rows or columns with zero margin contribute nothing: their residuals are
exactly 0 instead of NaN.  That keeps every quantity defined when a
category is empty after row filtering.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dataset import ContingencyTable, IndicatorMatrix, crosstab
from .errors import DegenerateTableError

TIE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ResidualTable:
    t: np.ndarray
    r: np.ndarray
    c: np.ndarray

    @property
    def inertia(self) -> float:
        return float(np.sum(self.t * self.t))


@dataclass(frozen=True, eq=False)
class InertiaSummary:
    """Pairwise inertias of all variable pairs and their average."""

    pairwise: np.ndarray
    in_tot: float
    names: tuple[str, ...] = ()

    @property
    def Q(self) -> int:
        return self.pairwise.shape[0]


def _table_counts(nt) -> np.ndarray:
    if isinstance(nt, ContingencyTable):
        return np.asarray(nt.counts, dtype=float)
    return np.asarray(nt, dtype=float)


def _masses(counts: np.ndarray):
    total = counts.sum()
    if total <= 0:
        raise DegenerateTableError("table has zero grand total")
    p = counts / total
    return p, p.sum(axis=1), p.sum(axis=0)


def standardized_residuals(nt) -> ResidualTable:
    """``t_ij = (p_ij - r_i c_j) / sqrt(r_i c_j)``."""
    p, r, c = _masses(_table_counts(nt))
    expected = np.outer(r, c)
    t = np.zeros_like(p)
    nz = expected > 0
    t[nz] = (p[nz] - expected[nz]) / np.sqrt(expected[nz])
    return ResidualTable(t, r, c)


def table_inertia(nt) -> float:
    """Chi-square statistic of the table divided by its grand total."""
    return standardized_residuals(nt).inertia


def row_merge_loss(counts: np.ndarray, a: int, b: int) -> float:
    """Inertia lost by summing rows ``a`` and ``b`` of a table.

    Uses the weighted Ward form ``r_a r_b / (r_a + r_b) * ||profile_a -
    profile_b||^2`` in the chi-square metric, which equals the drop in
    chi-square / n but avoids subtracting two nearly equal inertias.
    """
    counts = np.asarray(counts, dtype=float)
    p, r, c = _masses(counts)
    ra, rb = r[a], r[b]
    if ra == 0 or rb == 0:
        return 0.0
    keep = c > 0
    diff = p[a, keep] / ra - p[b, keep] / rb
    return float(ra * rb / (ra + rb) * np.sum(diff * diff / c[keep]))


def total_inertia(z: IndicatorMatrix) -> InertiaSummary:
    """Average of the inertias of all ``Q(Q-1)/2`` pairwise cross-tables."""
    Q = z.Q
    pairwise = np.zeros((Q, Q))
    for q in range(Q):
        for s in range(q + 1, Q):
            pairwise[q, s] = pairwise[s, q] = table_inertia(crosstab(z, q, s))
    iu = np.triu_indices(Q, 1)
    in_tot = float(np.sum(pairwise[iu]) / (Q * (Q - 1) / 2))
    return InertiaSummary(pairwise, in_tot, tuple(s.name for s in z.schemas))


def chi_square_distances(nt) -> np.ndarray:
    """Chi-square distances between the row profiles of a table."""
    counts = _table_counts(nt)
    rows = counts.sum(axis=1)
    if np.any(rows <= 0):
        bad = int(np.flatnonzero(rows <= 0)[0])
        name = nt.row_labels[bad] if isinstance(nt, ContingencyTable) else str(bad)
        raise DegenerateTableError(f"row {name!r} has zero mass; its profile is undefined")
    p, r, c = _masses(counts)
    keep = c > 0
    if not keep.all():
        warnings.warn(
            f"{int((~keep).sum())} zero-mass column(s) excluded from chi-square distances",
            RuntimeWarning, stacklevel=2,
        )
    prof = p[:, keep] / r[:, None] / np.sqrt(c[keep])
    diff = prof[:, None, :] - prof[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    d = (d + d.T) / 2
    np.fill_diagonal(d, 0.0)
    return d


@dataclass(frozen=True, eq=False)
class CAResult:
    """Correspondence analysis of a two-way table.

    ``singular_values`` holds all of them; the coordinate arrays keep only
    the retained axes.
    """

    singular_values: np.ndarray
    row_coordinates: np.ndarray
    col_coordinates: np.ndarray
    row_masses: np.ndarray
    col_masses: np.ndarray
    U: np.ndarray
    V: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    @property
    def inertia(self) -> float:
        return float(np.sum(self.singular_values ** 2))

    @property
    def dims(self) -> int:
        return self.row_coordinates.shape[1]


def _inv_sqrt(m: np.ndarray) -> np.ndarray:
    out = np.zeros_like(m)
    out[m > 0] = 1.0 / np.sqrt(m[m > 0])
    return out


def correspondence_analysis(nt, dims: int = 2) -> CAResult:
    if dims < 1:
        raise ValueError("dims must be at least 1")
    res = standardized_residuals(nt)
    U, sv, Vt = np.linalg.svd(res.t, full_matrices=False)
    tol = max(res.t.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > max(tol, 1e-14)))
    if dims > rank:
        warnings.warn(
            f"requested {dims} dimensions but the residual matrix has rank {rank}; "
            f"keeping {rank}", RuntimeWarning, stacklevel=2,
        )
        dims = rank
    k = slice(0, dims)
    rows = _inv_sqrt(res.r)[:, None] * U[:, k] * sv[k]
    cols = _inv_sqrt(res.c)[:, None] * Vt.T[:, k] * sv[k]
    labels = (nt.row_labels, nt.col_labels) if isinstance(nt, ContingencyTable) else ((), ())
    return CAResult(sv, rows, cols, res.r, res.c, U, Vt.T, *labels)
