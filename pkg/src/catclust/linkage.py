"""Agglomerative clustering on a dissimilarity matrix with forbidden pairs.

A merge of clusters A and B is illegal when any element of A and any
element of B form a forbidden pair.  Average linkage is the plain mean over
all cross pairs; complete linkage is the maximum.  Among candidate merges
whose linkage is within ``TIE_TOL`` of the best, the pair whose smallest
leaf indices are lexicographically smallest wins, so leaves should be
indexed in the desired tie-break order.
"""
from __future__ import annotations

import numpy as np

from .inertia import TIE_TOL

LINKAGES = ("average", "complete")


def agglomerate(dist, linkage: str = "average", forbidden=None, max_merges: int | None = None):
    """Return ``[(left, right, value), ...]`` with node ids ``L + k``.

    Runs until one cluster remains, no legal merge exists, or
    ``max_merges`` merges were made.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    d = np.asarray(dist, dtype=float)
    L = d.shape[0]
    if d.shape != (L, L):
        raise ValueError("dissimilarity matrix must be square")
    F = np.zeros((L, L), dtype=bool) if forbidden is None else np.asarray(forbidden, dtype=bool)
    F = F | F.T

    # cluster-level state, indexed by slot; slot i initially holds leaf i
    total = d.copy()
    worst = d.copy()
    size = np.ones(L)
    blocked = F.copy()
    np.fill_diagonal(blocked, True)
    alive = np.ones(L, dtype=bool)
    node_of = list(range(L))
    first_leaf = list(range(L))

    merges = []
    limit = L - 1 if max_merges is None else min(max_merges, L - 1)
    while len(merges) < limit:
        idx = np.flatnonzero(alive)
        sub_block = blocked[np.ix_(idx, idx)]
        if linkage == "average":
            value = total[np.ix_(idx, idx)] / np.outer(size[idx], size[idx])
        else:
            value = worst[np.ix_(idx, idx)]
        legal = ~sub_block & np.triu(np.ones_like(sub_block), 1).astype(bool)
        if not legal.any():
            break
        best = value[legal].min()
        ai, bi = np.nonzero(legal & (value <= best + TIE_TOL))
        cand = []
        for x, y in zip(ai, bi):
            a, b = idx[x], idx[y]
            ka, kb = sorted((first_leaf[a], first_leaf[b]))
            cand.append(((ka, kb), a, b))
        _, a, b = min(cand)
        if first_leaf[b] < first_leaf[a]:
            a, b = b, a
        merges.append((node_of[a], node_of[b], float(value[np.searchsorted(idx, a),
                                                            np.searchsorted(idx, b)])))
        # slot a becomes the merged cluster
        total[a, :] += total[b, :]
        total[:, a] = total[a, :]
        worst[a, :] = np.maximum(worst[a, :], worst[b, :])
        worst[:, a] = worst[a, :]
        blocked[a, :] |= blocked[b, :]
        blocked[:, a] = blocked[a, :]
        blocked[a, a] = True
        size[a] += size[b]
        alive[b] = False
        node_of[a] = L + len(merges) - 1
        first_leaf[a] = min(first_leaf[a], first_leaf[b])
    return merges
