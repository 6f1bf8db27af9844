"""Within-variable category merging and clustering of the variables.

Stage 1 greedily merges two categories of one variable at a time, always
the pair whose merge lowers the average pairwise inertia the least.
Ordinal variables only merge neighbouring categories; a missing category
may merge with any category of its variable.  Stage 2 clusters the fully
merged variables by average linkage on the pairwise-inertia table.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import (
    NOMINAL,
    ORDINAL_WITH_MISSING,
    IndicatorMatrix,
    crosstab,
    merge_columns,
)
from .dendrogram import BiDendrogram, Merge, MergeTree
from .errors import ConsistencyError, UsageError
from .inertia import TIE_TOL, InertiaSummary, row_merge_loss, total_inertia


@dataclass(frozen=True)
class CandidatePair:
    variable: int
    columns: tuple[int, int]
    loss: float | None = None

    def key(self, z: IndicatorMatrix) -> tuple[int, int, int]:
        a, b = self.columns
        g = z.groups[self.variable]
        return (self.variable, g[a][0], g[b][0])


def _is_pure_missing(group, missing_pos) -> bool:
    return missing_pos is not None and tuple(group) == (missing_pos,)


def enumerate_candidates(z: IndicatorMatrix, schemas=None) -> list[CandidatePair]:
    """Legal merge pairs in tie-break order.

    ``schemas`` defaults to the indicator's own schemas.
    """
    schemas = z.schemas if schemas is None else tuple(schemas)
    out = []
    for q, schema in enumerate(schemas):
        block = z.groups[q]
        ncol = len(block)
        if ncol < 2:
            continue
        if schema.scale == NOMINAL:
            pairs = [(a, b) for a in range(ncol) for b in range(a + 1, ncol)]
        else:
            miss = schema.missing_position if schema.scale == ORDINAL_WITH_MISSING else None
            ranked = [c for c in range(ncol) if not _is_pure_missing(block[c], miss)]
            pairs = list(zip(ranked, ranked[1:]))
            pure = [c for c in range(ncol) if c not in ranked]
            for m in pure:
                pairs.extend((min(m, c), max(m, c)) for c in range(ncol) if c != m)
        for a, b in pairs:
            if block[b][0] < block[a][0]:
                a, b = b, a
            out.append(CandidatePair(q, (a, b)))
    out.sort(key=lambda c: c.key(z))
    return out


def candidate_loss(z: IndicatorMatrix, cand: CandidatePair) -> float:
    """Drop in average inertia caused by merging the candidate pair.

    Only the ``Q - 1`` tables involving the candidate's variable change.
    """
    q = cand.variable
    a, b = cand.columns
    n_pairs = z.Q * (z.Q - 1) / 2
    loss = 0.0
    for s in range(z.Q):
        if s == q:
            continue
        loss += row_merge_loss(crosstab(z, q, s).counts, a, b)
    return loss / n_pairs


def merge_step(z: IndicatorMatrix, schemas=None):
    """Apply the cheapest legal merge.

    Returns ``(chosen CandidatePair with its loss, new IndicatorMatrix,
    new average inertia)``.
    """
    cands = enumerate_candidates(z, schemas)
    if not cands:
        raise UsageError("no merge candidates: every variable is a single column")
    scored = [CandidatePair(c.variable, c.columns, candidate_loss(z, c)) for c in cands]
    best = min(c.loss for c in scored)
    # scored is already in tie-break order
    chosen = next(c for c in scored if c.loss <= best + TIE_TOL)
    z_new = merge_columns(z, chosen.variable, *chosen.columns)
    return chosen, z_new, total_inertia(z_new).in_tot


def _leaf_layout(z: IndicatorMatrix):
    """Leaf index per (variable, column) in (variable, position) order."""
    leaf = {}
    labels = []
    for q in range(z.Q):
        for c in range(z.n_columns(q)):
            leaf[(q, z.groups[q][c])] = len(labels)
            labels.append(z.column_label(q, c))
    return leaf, labels


def within_variable_clustering(z: IndicatorMatrix, schemas=None):
    """Merge until every variable is a single column.

    Returns ``(tree, final_indicator)``.  Tree heights are the cumulative
    inertia loss; each merge also records its own ``loss``, the remaining
    average inertia ``in_tot``, the ``variable`` index and the merged
    ``label``.
    """
    if z.Q < 2:
        raise UsageError("at least two variables are required")
    start = total_inertia(z).in_tot
    node, labels = _leaf_layout(z)
    merges = []
    cumulative = 0.0
    while any(z.n_columns(q) > 1 for q in range(z.Q)):
        chosen, z_next, in_tot = merge_step(z, schemas)
        q = chosen.variable
        ga, gb = (z.groups[q][c] for c in chosen.columns)
        cumulative += max(chosen.loss, 0.0)
        merged = tuple(sorted(ga + gb))
        merges.append(Merge(node[(q, ga)], node[(q, gb)], cumulative, {
            "variable": q,
            "loss": chosen.loss,
            "in_tot": in_tot,
            "label": z.schemas[q].label(merged),
        }))
        node[(q, merged)] = len(labels) + len(merges) - 1
        z = z_next
    return MergeTree(tuple(labels), tuple(merges), "inertia_loss", start), z


def variable_clustering(summary: InertiaSummary) -> MergeTree:
    """Average-linkage clustering of variables on their pairwise inertias.

    The pair with the largest inertia merges first; the merged row is the
    unweighted average of the two rows.  A node's height is the average
    inertia of the reduced table, so the scale descends from the starting
    average inertia to 0 at the final merge.
    """
    Q = summary.Q
    if Q < 2:
        raise UsageError("at least two variables are required")
    W = np.array(summary.pairwise, dtype=float)
    labels = summary.names or tuple(f"V{q + 1}" for q in range(Q))
    active = list(range(Q))
    first = {q: q for q in range(Q)}
    node_of = {q: q for q in range(Q)}
    remaining = summary.in_tot
    merges = []
    while len(active) > 1:
        pairs = [(a, b) for i, a in enumerate(active) for b in active[i + 1:]]
        best = max(W[a, b] for a, b in pairs)
        tied = [(a, b) for a, b in pairs if W[a, b] >= best - TIE_TOL]
        a, b = min(tied, key=lambda p: tuple(sorted((first[p[0]], first[p[1]]))))
        if first[b] < first[a]:
            a, b = b, a
        similarity = W[a, b]
        row = (W[a] + W[b]) / 2
        W[a, :] = row
        W[:, a] = row
        active.remove(b)
        first[a] = min(first[a], first[b])
        k = len(active)
        if k > 1:
            sub = W[np.ix_(active, active)]
            new_remaining = float(np.sum(sub[np.triu_indices(k, 1)]) / (k * (k - 1) / 2))
        else:
            new_remaining = 0.0
        merges.append(Merge(node_of[a], node_of[b], new_remaining, {
            "loss": remaining - new_remaining,
            "similarity": float(similarity),
        }))
        remaining = new_remaining
        node_of[a] = Q + len(merges) - 1
    return MergeTree(tuple(labels), tuple(merges), "remaining_inertia", summary.in_tot)


def assemble_bidendrogram(categories: MergeTree, variables: MergeTree,
                          category_variable=None) -> BiDendrogram:
    """Stack the variable tree on top of the category tree.

    ``category_variable`` gives the variable index of each category leaf;
    by default it is read from the merges, which covers every variable with
    at least two categories.
    """
    if abs(categories.total - variables.total) > 1e-9:
        raise ConsistencyError(
            f"scale mismatch: categories start at {categories.total}, "
            f"variables at {variables.total}"
        )
    roots = categories.roots()
    if len(roots) != variables.n_leaves:
        raise ConsistencyError(
            f"category tree has {len(roots)} roots for {variables.n_leaves} variables"
        )
    if category_variable is None:
        category_variable = [None] * categories.n_leaves
        for m in categories.merges:
            q = m.info.get("variable")
            if q is None:
                continue
            for leaf in categories.members(m.left) + categories.members(m.right):
                category_variable[leaf] = q
        if None in category_variable:
            raise ConsistencyError("cannot infer the variable of every category leaf")
    groups = [None] * variables.n_leaves
    for r in roots:
        qs = {category_variable[leaf] for leaf in categories.members(r)}
        if len(qs) != 1:
            raise ConsistencyError("a category subtree spans several variables")
        groups[qs.pop()] = r
    return BiDendrogram(categories, variables, tuple(groups), len(categories.merges), shared=True)
