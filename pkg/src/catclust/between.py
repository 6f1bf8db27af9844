"""Between-variable category clustering, observation assignment, and
clustering of the resulting clusters.

Two first-stage methods are provided.  The residual method agglomerates
categories on the ``J x J`` block matrix of standardized residuals. The
resistance method uses complete linkage on pairwise weighted resistance.
Neither method ever puts two categories of one variable in the same
cluster.  Observations are then assigned to the cluster with the lowest
average weighted resistance, with equal fractional shares on ties.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .dataset import NOMINAL, ContingencyTable, Dataset, IndicatorMatrix, VariableSchema, crosstab
from .dendrogram import Merge, MergeTree
from .errors import (
    ConsistencyError,
    DataValidationError,
    InfeasibleClusterCountError,
    SchemaError,
    UsageError,
)
from .inertia import TIE_TOL, chi_square_distances, standardized_residuals, total_inertia
from .linkage import LINKAGES, agglomerate

RESIDUAL = "residual"
RESISTANCE = "resistance"


@dataclass(frozen=True, eq=False)
class ResidualBlockMatrix:
    t: np.ndarray
    block_index: tuple[tuple[int, int], ...]
    indicator: IndicatorMatrix
    in_tot: float

    @property
    def labels(self) -> tuple[str, ...]:
        return self.indicator.all_labels


def residual_block_matrix(z: IndicatorMatrix) -> ResidualBlockMatrix:
    """Assemble all pairwise residual blocks, including the diagonal ones."""
    if z.Q < 2:
        raise UsageError("at least two variables are required")
    off = z.offsets()
    t = np.zeros((z.J, z.J))
    upper_sq = 0.0
    for q in range(z.Q):
        sq = slice(off[q], off[q + 1])
        freq = z.frequencies(q).astype(float)
        t[sq, sq] = standardized_residuals(np.diag(freq)).t
        for s in range(q + 1, z.Q):
            ss = slice(off[s], off[s + 1])
            block = standardized_residuals(crosstab(z, q, s)).t
            t[sq, ss] = block
            t[ss, sq] = block.T
            upper_sq += float(np.sum(block * block))
    in_tot = upper_sq / (z.Q * (z.Q - 1) / 2)
    check = total_inertia(z).in_tot
    if abs(in_tot - check) > 1e-9:
        raise ConsistencyError(f"residual blocks give {in_tot}, pairwise tables {check}")
    return ResidualBlockMatrix(t, z.block_index, z, in_tot)


def _same_variable(z: IndicatorMatrix) -> np.ndarray:
    var = np.array([q for q, _ in z.block_index])
    return var[:, None] == var[None, :]


@dataclass(frozen=True, eq=False)
class ClusterSet:
    """Disjoint groups of categories, at most one per variable each.

    Members are ``(variable, column)`` pairs, where ``column`` indexes
    ``columns[variable]``, the tuple of category positions each column of
    that variable aggregates.
    """

    schemas: tuple[VariableSchema, ...]
    columns: tuple[tuple[tuple[int, ...], ...], ...]
    clusters: tuple[tuple[tuple[int, int], ...], ...]
    method: str
    labels: tuple[str, ...] = ()
    missing_distance: float | None = None

    def __post_init__(self):
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"C{g + 1}" for g in range(len(self.clusters))))
        if len(self.labels) != len(self.clusters):
            raise ConsistencyError("one label per cluster is required")

    @property
    def G(self) -> int:
        return len(self.clusters)

    def member_label(self, member: tuple[int, int]) -> str:
        q, c = member
        return self.schemas[q].label(self.columns[q][c])

    def member_labels(self, g: int) -> list[str]:
        return [self.member_label(m) for m in self.clusters[g]]

    def to_dict(self) -> dict:
        variables = []
        for schema, cols in zip(self.schemas, self.columns):
            entry = schema.to_dict()
            entry["columns"] = [[schema.codes[p] for p in col] for col in cols]
            variables.append(entry)
        clusters = []
        for label, members in zip(self.labels, self.clusters):
            clusters.append({
                "label": label,
                "members": [
                    {"variable": self.schemas[q].name,
                     "codes": [self.schemas[q].codes[p] for p in self.columns[q][c]],
                     "label": self.member_label((q, c))}
                    for q, c in members
                ],
            })
        out = {"method": self.method, "variables": variables, "clusters": clusters}
        if self.missing_distance is not None:
            out["missing_distance"] = self.missing_distance
        return out

    @classmethod
    def from_dict(cls, obj: Mapping) -> "ClusterSet":
        try:
            schemas, columns = [], []
            for v in obj["variables"]:
                schema = VariableSchema(v["name"], v["scale"], tuple(v["categories"]),
                                        v.get("missing_code"))
                schemas.append(schema)
                cols = v.get("columns")
                if cols is None:
                    cols = [[c] for c in schema.codes]
                columns.append(tuple(tuple(schema.position(c) for c in col) for col in cols))
            names = [s.name for s in schemas]
            clusters, labels = [], []
            for k, cl in enumerate(obj["clusters"]):
                members = []
                for m in cl["members"]:
                    q = names.index(m["variable"])
                    pos = tuple(sorted(schemas[q].position(c) for c in m["codes"]))
                    members.append((q, columns[q].index(pos)))
                clusters.append(tuple(members))
                labels.append(str(cl.get("label", f"C{k + 1}")))
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"malformed cluster definitions: {exc!r}") from exc
        return cls(tuple(schemas), tuple(columns), tuple(clusters), str(obj.get("method", "")),
                   tuple(labels), obj.get("missing_distance"))


def _cluster_set(tree: MergeTree, z: IndicatorMatrix, g: int, method: str,
                 missing_distance=None) -> ClusterSet:
    J = z.J
    if not 1 <= g <= J:
        raise InfeasibleClusterCountError(f"number of clusters must be in 1..{J}, got {g}")
    index = z.block_index
    reachable = J - len(tree.merges)
    if g < reachable:
        if g != 1:
            raise InfeasibleClusterCountError(
                f"{g} clusters cannot be formed without joining two categories of one "
                f"variable; the smallest reachable number is {reachable}"
            )
        warnings.warn("G=1 requested: returning the degenerate cluster of all categories",
                      RuntimeWarning, stacklevel=3)
        groups = [list(range(J))]
    else:
        groups = tree.cut(g)
    clusters = tuple(tuple(index[leaf] for leaf in grp) for grp in groups)
    return ClusterSet(z.schemas, z.groups, clusters, method, missing_distance=missing_distance)


def residual_linkage_clustering(tm: ResidualBlockMatrix, linkage: str = "average", g: int = 2):
    """Agglomerate categories on standardized residuals.

    Returns ``(clusters, tree)``.  The tree runs until no legal merge is
    left; the clusters are its cut after ``J - g`` merges.  Heights are
    ``sign(s) * s**2 / (Q(Q-1)/2)`` for linkage similarity ``s``, on a
    descending scale that starts at the average inertia.
    """
    if linkage not in LINKAGES:
        raise UsageError(f"linkage must be one of {LINKAGES}")
    z = tm.indicator
    n_pairs = z.Q * (z.Q - 1) / 2
    raw = agglomerate(-tm.t, linkage, forbidden=_same_variable(z))
    merges = []
    for left, right, value in raw:
        sim = -value
        merges.append(Merge(left, right, math.copysign(sim * sim, sim) / n_pairs,
                            {"similarity": sim}))
    tree = MergeTree(z.all_labels, tuple(merges), "residual_inertia", tm.in_tot)
    return _cluster_set(tree, z, g, RESIDUAL), tree


def pairwise_weighted_resistance(nt, j: int, k: int, row_distances=None, col_distances=None) -> float:
    """Weighted resistance of row category ``j`` and column category ``k``.

    ``(sum_u d_col(u, k) n_ju + sum_v d_row(v, j) n_vk) / I`` with ``I`` the
    grand total.  Distances default to ``|u - v|`` on positions.
    """
    counts = np.asarray(nt.counts if isinstance(nt, ContingencyTable) else nt, dtype=float)
    nr, nc = counts.shape
    if row_distances is None:
        row_distances = np.abs(np.subtract.outer(np.arange(nr), np.arange(nr)))
    if col_distances is None:
        col_distances = np.abs(np.subtract.outer(np.arange(nc), np.arange(nc)))
    total = counts.sum()
    if total <= 0:
        raise UsageError("table has zero grand total")
    num = counts[j, :] @ np.asarray(col_distances)[:, k] + counts[:, k] @ np.asarray(row_distances)[:, j]
    return float(num / total)


def column_distances(schema: VariableSchema, columns: Sequence[Sequence[int]],
                     missing_distance: float | None = None) -> np.ndarray:
    """Cost of changing an answer between two columns of one variable.

    Ordinal columns are ranked in order and cost their rank difference.  A
    column holding only the missing category costs 0 to itself and
    ``missing_distance`` (default: the substantive span) to anything else.
    Nominal columns cost 1 for any change.
    """
    n = len(columns)
    if schema.scale == NOMINAL:
        return 1.0 - np.eye(n)
    miss = schema.missing_position
    ranked = [c for c in range(n) if not (miss is not None and tuple(columns[c]) == (miss,))]
    rank = np.zeros(n)
    rank[ranked] = np.arange(len(ranked))
    d = np.abs(np.subtract.outer(rank, rank))
    span = float(len(ranked) - 1) if missing_distance is None else float(missing_distance)
    for c in range(n):
        if c not in ranked:
            d[c, :] = span
            d[:, c] = span
            d[c, c] = 0.0
    return d


@dataclass(frozen=True, eq=False)
class ResistanceMatrix:
    d: np.ndarray
    forbidden: np.ndarray
    I: int


def resistance_matrix(z: IndicatorMatrix, missing_distance: float | None = None) -> ResistanceMatrix:
    off = z.offsets()
    dists = [column_distances(z.schemas[q], z.groups[q], missing_distance) for q in range(z.Q)]
    d = np.zeros((z.J, z.J))
    for q in range(z.Q):
        for s in range(q + 1, z.Q):
            counts = crosstab(z, q, s).counts.astype(float)
            # entry (j, k): row j of counts against column distances to k, and
            # column k against row distances to j
            block = (counts @ dists[s] + (dists[q] @ counts)) / z.n
            d[off[q]:off[q + 1], off[s]:off[s + 1]] = block
            d[off[s]:off[s + 1], off[q]:off[q + 1]] = block.T
    return ResistanceMatrix(d, _same_variable(z), z.n)


def resistance_linkage_clustering(z: IndicatorMatrix, g: int, linkage: str = "complete",
                                  missing_distance: float | None = None):
    """Agglomerate categories on weighted resistance (complete linkage by default)."""
    if linkage not in LINKAGES:
        raise UsageError(f"linkage must be one of {LINKAGES}")
    rm = resistance_matrix(z, missing_distance)
    raw = agglomerate(rm.d, linkage, forbidden=rm.forbidden)
    merges = tuple(Merge(a, b, v) for a, b, v in raw)
    total = max((m.height for m in merges), default=0.0)
    tree = MergeTree(z.all_labels, merges, "resistance", total)
    return _cluster_set(tree, z, g, RESISTANCE, missing_distance), tree


def _member_columns(schemas, groups, cluster):
    """Normalize members given as ``(q, code)`` or ``(q, codes)`` to columns."""
    out = []
    for q, codes in cluster:
        if isinstance(codes, (int, np.integer)):
            codes = (codes,)
        pos = tuple(sorted(schemas[q].position(c) for c in codes))
        col = next((c for c, grp in enumerate(groups[q]) if set(pos) <= set(grp)), None)
        if col is None:
            raise UsageError(f"{schemas[q].label(pos)} is not a column of variable {schemas[q].name}")
        out.append((q, col))
    return out


def observation_resistance(obs, cluster, schemas, groups=None,
                           missing_distance: float | None = None) -> float:
    """Average weighted resistance of one observation to one cluster.

    ``obs`` holds one code per variable; ``cluster`` lists ``(variable,
    code)`` members.  Variables without a cluster member do not count.
    """
    schemas = tuple(schemas)
    if groups is None:
        groups = [[(p,) for p in range(s.n_categories)] for s in schemas]
    members = _member_columns(schemas, groups, cluster)
    if not members:
        raise UsageError("cluster has no members")
    total = 0.0
    for q, col in members:
        d = column_distances(schemas[q], groups[q], missing_distance)
        pos = schemas[q].position(obs[q])
        own = next(c for c, grp in enumerate(groups[q]) if pos in grp)
        total += d[own, col]
    return total / len(members)


@dataclass(frozen=True, eq=False)
class Assignment:
    """Crisp or fuzzy membership of observations in clusters.

    ``winners[i]`` lists the clusters tied at the minimal resistance for
    observation ``i``; each receives ``1 / len(winners[i])``.
    """

    winners: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    resistances: np.ndarray

    @property
    def n(self) -> int:
        return len(self.winners)

    @property
    def G(self) -> int:
        return len(self.labels)

    def exact_row(self, i: int) -> list[Fraction]:
        row = [Fraction(0)] * self.G
        share = Fraction(1, len(self.winners[i]))
        for g in self.winners[i]:
            row[g] = share
        return row

    @property
    def memberships(self) -> np.ndarray:
        m = np.zeros((self.n, self.G))
        for i, w in enumerate(self.winners):
            m[i, list(w)] = 1.0 / len(w)
        return m

    @property
    def exact_cluster_sizes(self) -> tuple[Fraction, ...]:
        sizes = [Fraction(0)] * self.G
        for w in self.winners:
            share = Fraction(1, len(w))
            for g in w:
                sizes[g] += share
        return tuple(sizes)

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.array([float(s) for s in self.exact_cluster_sizes])

    @property
    def n_fuzzy(self) -> int:
        return sum(1 for w in self.winners if len(w) > 1)


def indicator_for(d: Dataset, clusters: ClusterSet) -> IndicatorMatrix:
    """Code the dataset with the column grouping the clusters were built on."""
    if tuple(s.name for s in d.schemas) != tuple(s.name for s in clusters.schemas):
        raise SchemaError("dataset variables do not match the cluster definitions")
    positions = np.empty_like(d.positions())
    for q, (ds, cs) in enumerate(zip(d.schemas, clusters.schemas)):
        lookup = {}
        for code in ds.codes:
            try:
                lookup[ds.position(code)] = cs.position(code)
            except KeyError:
                pass
        col = d.positions()[:, q]
        for p in np.unique(col):
            if int(p) not in lookup:
                raise DataValidationError(
                    f"variable {ds.name!r}: code {ds.codes[p]} is not covered by the "
                    "cluster definitions", column=ds.name, code=ds.codes[p],
                )
        table = np.zeros(ds.n_categories, dtype=np.int64)
        for p, cp in lookup.items():
            table[p] = cp
        positions[:, q] = table[col]
    return IndicatorMatrix(clusters.schemas, positions, clusters.columns)


def assign_observations(d: Dataset, clusters: ClusterSet) -> Assignment:
    """One pass of nearest-cluster assignment by average weighted resistance."""
    if clusters.G < 1:
        raise UsageError("no clusters to assign to")
    z = indicator_for(d, clusters)
    dists = [column_distances(clusters.schemas[q], clusters.columns[q], clusters.missing_distance)
             for q in range(z.Q)]
    R = np.zeros((z.n, clusters.G))
    for g, members in enumerate(clusters.clusters):
        acc = np.zeros(z.n)
        for q, col in members:
            acc += dists[q][z.column_index(q), col]
        R[:, g] = acc / len(members)
    best = R.min(axis=1, keepdims=True)
    tied = R <= best + TIE_TOL
    winners = tuple(tuple(int(g) for g in np.flatnonzero(row)) for row in tied)
    return Assignment(winners, clusters.labels, R)


def cluster_profile_table(a: Assignment, z: IndicatorMatrix) -> ContingencyTable:
    """``G x J`` table of membership-weighted category counts."""
    if a.n != z.n:
        raise UsageError(f"assignment has {a.n} rows, indicator matrix {z.n}")
    scale = math.lcm(*{len(w) for w in a.winners})
    weights = np.zeros((a.n, a.G), dtype=np.int64)
    for i, w in enumerate(a.winners):
        weights[i, list(w)] = scale // len(w)
    table = (weights.T @ z.matrix()).astype(float) / scale
    return ContingencyTable(table, a.labels, z.all_labels)


def cluster_of_clusters(profile: ContingencyTable, linkage: str = "average") -> MergeTree:
    """Cluster the row profiles of a cluster-by-category table on chi-square distance."""
    if linkage not in LINKAGES:
        raise UsageError(f"linkage must be one of {LINKAGES}")
    rows = profile.row_margins
    keep = np.flatnonzero(rows > 0)
    if len(keep) < len(rows):
        dropped = [profile.row_labels[i] for i in np.flatnonzero(rows <= 0)]
        warnings.warn(f"zero-mass clusters dropped: {dropped}", RuntimeWarning, stacklevel=2)
    if len(keep) < 2:
        raise UsageError("need at least two non-empty clusters")
    sub = ContingencyTable(profile.counts[keep], tuple(profile.row_labels[i] for i in keep),
                           profile.col_labels)
    d = chi_square_distances(sub)
    merges = tuple(Merge(a, b, v) for a, b, v in agglomerate(d, linkage))
    total = max((m.height for m in merges), default=0.0)
    return MergeTree(sub.row_labels, merges, "chi_square_distance", total)
