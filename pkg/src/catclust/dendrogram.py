"""Merge trees, bi-dendrograms and their structured/Newick serializations.

Node ids follow the usual agglomerative convention: leaves are
``0..L-1`` and the k-th merge creates node ``L + k``.  A tree may be a
forest (the within-variable category tree ends with one root per
variable).

Structured format (JSON)::

    {"leaves": [{"id": 0, "label": "A1"}, ...],
     "merges": [{"left": 0, "right": 1, "height": 0.0123, ...}, ...],
     "scale": {"kind": "inertia_loss", "total": 0.2215}}

Extra keys on a merge (``loss``, ``similarity``, ``variable``...) are kept
verbatim.  Heights are written with full ``repr`` precision so that import
reproduces the tree exactly.
"""
from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConsistencyError, TreeFormatError

# kind -> True when the scale descends from the leaves toward the root
SCALE_KINDS = {
    "inertia_loss": False,
    "remaining_inertia": True,
    "resistance": False,
    "chi_square_distance": False,
    "residual_inertia": True,
}

INERTIA_KINDS = ("inertia_loss", "remaining_inertia", "residual_inertia")


class TreeReversalWarning(UserWarning):
    """A child node sits beyond its parent on the tree's scale."""


def fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    info: Mapping = field(default_factory=dict, compare=True)


@dataclass(frozen=True)
class MergeTree:
    labels: tuple[str, ...]
    merges: tuple[Merge, ...]
    kind: str
    total: float

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "merges", tuple(self.merges))
        if self.kind not in SCALE_KINDS:
            raise TreeFormatError(f"unknown scale kind {self.kind!r}", field="scale.kind")
        L = len(self.labels)
        used = set()
        for k, m in enumerate(self.merges):
            for child in (m.left, m.right):
                if not 0 <= child < L + k or child in used:
                    raise TreeFormatError(
                        f"merge {k}: node {child} is not an available node",
                        field=f"merges[{k}]",
                    )
                used.add(child)
            if m.left == m.right:
                raise TreeFormatError(f"merge {k}: node merged with itself", field=f"merges[{k}]")

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def descending(self) -> bool:
        return SCALE_KINDS[self.kind]

    @property
    def base_height(self) -> float:
        """Height at which leaves sit on this tree's scale."""
        return self.total if self.descending else 0.0

    @property
    def heights(self) -> tuple[float, ...]:
        return tuple(m.height for m in self.merges)

    def children(self, node: int):
        if node < self.n_leaves:
            return None
        m = self.merges[node - self.n_leaves]
        return m.left, m.right

    def height(self, node: int) -> float:
        if node < self.n_leaves:
            return self.base_height
        return self.merges[node - self.n_leaves].height

    def members(self, node: int) -> list[int]:
        stack, out = [node], []
        while stack:
            v = stack.pop()
            ch = self.children(v)
            if ch is None:
                out.append(v)
            else:
                stack.extend(ch)
        return sorted(out)

    def roots(self, n_merges: int | None = None) -> list[int]:
        """Active nodes after the first ``n_merges`` merges, by smallest leaf."""
        k = len(self.merges) if n_merges is None else n_merges
        active = set(range(self.n_leaves))
        for i, m in enumerate(self.merges[:k]):
            active -= {m.left, m.right}
            active.add(self.n_leaves + i)
        return sorted(active, key=lambda v: self.members(v)[0])

    def cut(self, n_clusters: int) -> list[list[int]]:
        """Leaf groups after ``n_leaves - n_clusters`` merges."""
        k = self.n_leaves - n_clusters
        if k < 0 or k > len(self.merges):
            raise ValueError(
                f"cannot cut a tree of {self.n_leaves} leaves and {len(self.merges)} "
                f"merges into {n_clusters} clusters"
            )
        return [self.members(v) for v in self.roots(k)]

    def leaf_order(self, node: int | None = None, n_merges: int | None = None) -> list[int]:
        """Left-to-right leaf order; the subtree with the smaller leaf goes left."""
        limit = self.n_leaves + (len(self.merges) if n_merges is None else n_merges)
        starts = [node] if node is not None else self.roots(n_merges)
        out = []
        for start in starts:
            stack = [start]
            while stack:
                v = stack.pop()
                ch = self.children(v) if v < limit else None
                if ch is None:
                    out.extend(self.members(v) if v >= self.n_leaves else [v])
                    continue
                a, b = sorted(ch, key=lambda u: self.members(u)[0])
                stack.extend((b, a))
        return out

    def to_dict(self) -> dict:
        merges = []
        for m in self.merges:
            entry = {"left": m.left, "right": m.right, "height": m.height}
            entry.update(m.info)
            merges.append(entry)
        return {
            "leaves": [{"id": i, "label": lab} for i, lab in enumerate(self.labels)],
            "merges": merges,
            "scale": {"kind": self.kind, "total": self.total},
        }

    @classmethod
    def from_dict(cls, obj) -> "MergeTree":
        if not isinstance(obj, Mapping):
            raise TreeFormatError("tree document must be an object", field="<root>")
        for key in ("leaves", "merges", "scale"):
            if key not in obj:
                raise TreeFormatError(f"missing field {key!r}", field=key)
        leaves = obj["leaves"]
        if not isinstance(leaves, list):
            raise TreeFormatError("'leaves' must be a list", field="leaves")
        labels = []
        for i, leaf in enumerate(leaves):
            if not isinstance(leaf, Mapping) or "label" not in leaf or "id" not in leaf:
                raise TreeFormatError("leaf needs 'id' and 'label'", field=f"leaves[{i}]")
            if leaf["id"] != i:
                raise TreeFormatError(f"leaf id {leaf['id']!r} out of order", field=f"leaves[{i}].id")
            labels.append(str(leaf["label"]))
        merges = []
        if not isinstance(obj["merges"], list):
            raise TreeFormatError("'merges' must be a list", field="merges")
        for k, m in enumerate(obj["merges"]):
            if not isinstance(m, Mapping):
                raise TreeFormatError("merge must be an object", field=f"merges[{k}]")
            for key in ("left", "right", "height"):
                if key not in m:
                    raise TreeFormatError(f"missing {key!r}", field=f"merges[{k}].{key}")
            try:
                left, right = int(m["left"]), int(m["right"])
                height = float(m["height"])
            except (TypeError, ValueError):
                raise TreeFormatError("non-numeric merge entry", field=f"merges[{k}]") from None
            info = {key: v for key, v in m.items() if key not in ("left", "right", "height")}
            merges.append(Merge(left, right, height, info))
        scale = obj["scale"]
        if not isinstance(scale, Mapping) or "kind" not in scale or "total" not in scale:
            raise TreeFormatError("scale needs 'kind' and 'total'", field="scale")
        try:
            total = float(scale["total"])
        except (TypeError, ValueError):
            raise TreeFormatError("scale total must be a number", field="scale.total") from None
        return cls(tuple(labels), tuple(merges), str(scale["kind"]), total)


_PLAIN_LABEL = re.compile(r"^[A-Za-z0-9_]+$")


def _newick_label(label: str) -> str:
    if _PLAIN_LABEL.match(label):
        return label
    return "'" + label.replace("'", "''") + "'"


def to_newick(t: MergeTree) -> str:
    """One semicolon-terminated Newick tree per root, newline separated."""
    sign = -1.0 if t.descending else 1.0
    reversals = []

    def branch(parent: int, child: int) -> str:
        length = sign * (t.height(parent) - t.height(child))
        if length < 0:
            reversals.append((parent, child, length))
            length = 0.0
        return fmt(length)

    def write(v: int) -> str:
        ch = t.children(v)
        if ch is None:
            return _newick_label(t.labels[v])
        a, b = sorted(ch, key=lambda u: t.members(u)[0])
        return f"({write(a)}:{branch(v, a)},{write(b)}:{branch(v, b)})"

    lines = [write(r) + ";" for r in t.roots()]
    for parent, child, length in reversals:
        warnings.warn(
            f"height reversal between node {parent} and child {child} "
            f"({fmt(length)}); branch clamped to 0",
            TreeReversalWarning, stacklevel=2,
        )
    return "\n".join(lines) + "\n"


def parse_newick(text: str, kind: str = "inertia_loss", total: float | None = None) -> MergeTree:
    """Parse binary Newick trees written by :func:`to_newick`.

    Leaves are numbered in order of appearance; merges are ordered by
    height along the scale direction.
    """
    descending = SCALE_KINDS[kind]
    labels: list[str] = []
    nodes: list[tuple] = []  # (kind, payload...) per internal node, postorder
    i = 0
    s = text.strip()

    def parse_label():
        nonlocal i
        if s[i] == "'":
            j, buf = i + 1, []
            while True:
                if j >= len(s):
                    raise TreeFormatError("unterminated quoted label", field=f"char {i}")
                if s[j] == "'":
                    if j + 1 < len(s) and s[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(s[j])
                j += 1
            i = j + 1
            return "".join(buf)
        j = i
        while j < len(s) and s[j] not in ",():;":
            j += 1
        lab = s[i:j].strip()
        i = j
        return lab

    def parse_length():
        nonlocal i
        if i < len(s) and s[i] == ":":
            j = i + 1
            while j < len(s) and s[j] not in ",();":
                j += 1
            try:
                val = float(s[i + 1:j])
            except ValueError:
                raise TreeFormatError("bad branch length", field=f"char {i}") from None
            i = j
            return val
        return 0.0

    def parse_node():
        # returns (node handle, depth above leaves measured along the scale)
        nonlocal i
        if s[i] == "(":
            i += 1
            left, ldepth = parse_node()
            llen = parse_length()
            if s[i] != ",":
                raise TreeFormatError("only binary trees are supported", field=f"char {i}")
            i += 1
            right, rdepth = parse_node()
            rlen = parse_length()
            if s[i] != ")":
                raise TreeFormatError("expected ')'", field=f"char {i}")
            i += 1
            depth = ldepth + llen
            nodes.append((left, right, depth))
            return ("n", len(nodes) - 1), depth
        labels.append(parse_label())
        return ("l", len(labels) - 1), 0.0

    while i < len(s):
        parse_node()
        if i >= len(s) or s[i] != ";":
            raise TreeFormatError("expected ';'", field=f"char {i}")
        i += 1
        while i < len(s) and s[i].isspace():
            i += 1

    L = len(labels)
    base = 0.0
    if descending:
        base = total if total is not None else max([d for *_, d in nodes], default=0.0)
    sign = -1.0 if descending else 1.0
    order = sorted(range(len(nodes)), key=lambda k: (nodes[k][2], k))
    new_id = {}
    merges = []
    for k in order:
        left, right, depth = nodes[k]
        ids = [c[1] if c[0] == "l" else new_id[c[1]] for c in (left, right)]
        new_id[k] = L + len(merges)
        merges.append(Merge(ids[0], ids[1], base + sign * depth))
    if total is None:
        total = base if descending else max([m.height for m in merges], default=0.0)
    return MergeTree(tuple(labels), tuple(merges), kind, total)


def export_tree(t: MergeTree, format: str = "structured") -> bytes:
    if format == "structured":
        return (json.dumps(t.to_dict(), indent=2) + "\n").encode("ascii")
    if format == "newick":
        return to_newick(t).encode("ascii", errors="backslashreplace")
    raise ValueError(f"unknown tree format {format!r}")


def import_tree(data) -> MergeTree:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as exc:
        raise TreeFormatError(f"not valid JSON: {exc}", field="<root>") from exc
    return MergeTree.from_dict(obj)


@dataclass(frozen=True, eq=False)
class BiDendrogram:
    """Two stacked trees.

    Upper leaf ``i`` stands for node ``groups[i]`` of the lower tree, which
    must be one of the lower roots after ``lower_merges`` merges.  When
    ``shared`` is true both trees are drawn on one common axis.
    """

    lower: MergeTree
    upper: MergeTree | None
    groups: tuple[int, ...]
    lower_merges: int
    shared: bool = True
    sizes: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(int(g) for g in self.groups))
        if self.upper is None:
            object.__setattr__(self, "shared", False)
        elif len(self.groups) != self.upper.n_leaves:
            raise ConsistencyError(
                f"{len(self.groups)} groups for {self.upper.n_leaves} upper leaves"
            )
        if not 0 <= self.lower_merges <= len(self.lower.merges):
            raise ConsistencyError(f"lower_merges {self.lower_merges} out of range")
        roots = set(self.lower.roots(self.lower_merges))
        if set(self.groups) != roots or len(set(self.groups)) != len(self.groups):
            raise ConsistencyError("groups must map one-to-one onto lower roots")
        if self.sizes is not None and len(self.sizes) != len(self.groups):
            raise ConsistencyError("one size per group is required")
        if self.shared and not math.isclose(self.lower.total, self.upper.total,
                                            rel_tol=0, abs_tol=1e-9):
            raise ConsistencyError(
                f"shared scale requires equal totals ({self.lower.total} vs {self.upper.total})"
            )

    @property
    def scale_kind(self) -> str:
        return self.lower.kind

    def _range(self, trees: Sequence[MergeTree]) -> tuple[float, float]:
        vals = [0.0]
        for t in trees:
            vals.append(t.total)
            vals.extend(t.heights)
        return min(vals), max(vals)

    @property
    def shared_scale(self) -> tuple[float, float]:
        trees = [self.lower, self.upper] if self.shared else [self.lower]
        return self._range(trees)

    @property
    def upper_scale(self) -> tuple[float, float] | None:
        if self.upper is None:
            return None
        return self.shared_scale if self.shared else self._range([self.upper])

    def to_dict(self) -> dict:
        out = {
            "lower": self.lower.to_dict(),
            "upper": None if self.upper is None else self.upper.to_dict(),
            "groups": list(self.groups),
            "lower_merges": self.lower_merges,
            "shared": self.shared,
        }
        if self.sizes is not None:
            out["sizes"] = [float(x) for x in self.sizes]
        return out

    @classmethod
    def from_dict(cls, obj) -> "BiDendrogram":
        if not isinstance(obj, Mapping):
            raise TreeFormatError("bi-dendrogram document must be an object", field="<root>")
        for key in ("lower", "upper", "groups", "lower_merges"):
            if key not in obj:
                raise TreeFormatError(f"missing field {key!r}", field=key)
        try:
            lower = MergeTree.from_dict(obj["lower"])
        except TreeFormatError as exc:
            raise TreeFormatError(str(exc), field=f"lower.{exc.field}") from exc
        upper = None
        if obj["upper"] is not None:
            try:
                upper = MergeTree.from_dict(obj["upper"])
            except TreeFormatError as exc:
                raise TreeFormatError(str(exc), field=f"upper.{exc.field}") from exc
        sizes = obj.get("sizes")
        try:
            return cls(lower, upper, tuple(obj["groups"]), int(obj["lower_merges"]),
                       bool(obj.get("shared", True)),
                       None if sizes is None else tuple(float(x) for x in sizes))
        except (ConsistencyError, TypeError, ValueError) as exc:
            raise TreeFormatError(str(exc), field="groups") from exc
