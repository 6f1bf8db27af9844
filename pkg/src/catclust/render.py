"""Static SVG rendering of bi-dendrograms.

The lower tree (categories) occupies the bottom panel and the upper tree
(variables or cluster profiles) sits above it, with each upper leaf drawn
from the horizontal centre of the lower subtree it stands for.  Trees on a
descending scale are drawn with their axis inverted so that leaves always
start at the bottom of their panel.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

from .dendrogram import INERTIA_KINDS, BiDendrogram, MergeTree

LEAF_SPACING = 22.0
PANEL_HEIGHT = 260.0
MARGIN_LEFT = 70.0
MARGIN_RIGHT = 20.0
MARGIN_TOP = 30.0
LABEL_BAND = 60.0
GAP = 40.0
HANG = 0.04  # fraction of the panel height a hanging leaf drops below its parent


@dataclass(frozen=True)
class RenderOptions:
    percent_axis: bool = False
    hanging: bool = False
    threshold: float | None = None
    show_labels: bool = True
    show_sizes: bool = True
    title: str | None = None


def _n(x: float) -> str:
    return f"{x:.2f}"


class _Panel:
    """Maps tree heights to y pixels for one panel."""

    def __init__(self, tree: MergeTree, lo: float, hi: float, top: float):
        self.tree = tree
        self.lo, self.hi = lo, hi
        if self.hi - self.lo <= 0:
            self.hi = self.lo + 1.0
        self.top = top
        self.bottom = top + PANEL_HEIGHT

    def y(self, h: float) -> float:
        frac = (h - self.lo) / (self.hi - self.lo)
        if self.tree.descending:
            frac = 1.0 - frac
        return self.bottom - frac * PANEL_HEIGHT

    def display(self, node: int, limit: int) -> float:
        """Display height of a node, clamped so parents never sit below children."""
        t = self.tree
        if node < t.n_leaves or node >= limit:
            return self.y(t.base_height)
        a, b = t.children(node)
        return min(self.y(t.height(node)), self.display(a, limit), self.display(b, limit))


def _axis(panel: _Panel, total: float, percent: bool, kind: str) -> list[str]:
    out = [f'<line class="axis" x1="{_n(MARGIN_LEFT - 10)}" y1="{_n(panel.top)}" '
           f'x2="{_n(MARGIN_LEFT - 10)}" y2="{_n(panel.bottom)}" stroke="black"/>']
    if percent and kind in INERTIA_KINDS and total > 0:
        ticks = [(total * p / 100, f"{p}%") for p in (0, 25, 50, 75, 100)]
    else:
        ticks = [(panel.lo + (panel.hi - panel.lo) * i / 4, f"{panel.lo + (panel.hi - panel.lo) * i / 4:.4g}")
                 for i in range(5)]
    for value, text in ticks:
        y = panel.y(value)
        out.append(f'<line class="tick" x1="{_n(MARGIN_LEFT - 14)}" y1="{_n(y)}" '
                   f'x2="{_n(MARGIN_LEFT - 10)}" y2="{_n(y)}" stroke="black"/>')
        out.append(f'<text class="tick-label" x="{_n(MARGIN_LEFT - 16)}" y="{_n(y + 3)}" '
                   f'font-size="9" text-anchor="end">{escape(text)}</text>')
    return out


def _draw_tree(panel: _Panel, xs: dict[int, float], start_nodes, limit: int,
               hanging: bool, leaf_y=None) -> list[str]:
    """Draw every merge below ``limit`` reachable from ``start_nodes``.

    ``xs`` must hold x positions for leaves; internal positions are filled
    in.  ``leaf_y`` overrides the y where leaf stems start.
    """
    t = panel.tree
    out = []
    drop = HANG * PANEL_HEIGHT

    def place(v):
        if v in xs:
            return xs[v]
        a, b = t.children(v)
        xs[v] = (place(a) + place(b)) / 2
        return xs[v]

    def stem_bottom(v, parent_y):
        if v < t.n_leaves or v >= limit:
            if hanging:
                return parent_y + drop
            return leaf_y if leaf_y is not None else panel.y(t.base_height)
        return panel.display(v, limit)

    def walk(v):
        if v < t.n_leaves or v >= limit:
            return
        a, b = t.children(v)
        walk(a)
        walk(b)
        y = panel.display(v, limit)
        xa, xb = place(a), place(b)
        for x, child in ((xa, a), (xb, b)):
            out.append(f'<line class="branch" x1="{_n(x)}" y1="{_n(stem_bottom(child, y))}" '
                       f'x2="{_n(x)}" y2="{_n(y)}" stroke="black"/>')
        out.append(f'<line class="branch" x1="{_n(xa)}" y1="{_n(y)}" x2="{_n(xb)}" '
                   f'y2="{_n(y)}" stroke="black"/>')

    for v in start_nodes:
        place(v)
        walk(v)
    return out


def _size_text(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return f"{x:.1f}"


def render_bidendrogram(b: BiDendrogram, options: RenderOptions | None = None) -> str:
    """Render a bi-dendrogram (or a lower tree alone when ``b.upper`` is None)."""
    opt = options or RenderOptions()
    lower, upper = b.lower, b.upper
    limit = lower.n_leaves + b.lower_merges

    if upper is not None:
        upper_leaves = upper.leaf_order()
        group_order = [b.groups[u] for u in upper_leaves]
    else:
        group_order = list(b.groups)
    leaves = []
    for g in group_order:
        leaves.extend(lower.leaf_order(g, n_merges=b.lower_merges))

    width = MARGIN_LEFT + MARGIN_RIGHT + LEAF_SPACING * max(len(leaves), 1)
    has_upper = upper is not None
    lower_top = MARGIN_TOP + ((PANEL_HEIGHT + GAP) if has_upper else 0.0)
    height = lower_top + PANEL_HEIGHT + LABEL_BAND

    lo, hi = b.shared_scale
    lp = _Panel(lower, lo, hi, lower_top)
    xs = {leaf: MARGIN_LEFT + LEAF_SPACING * (i + 0.5) for i, leaf in enumerate(leaves)}

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_n(width)}" height="{_n(height)}" '
        f'viewBox="0 0 {_n(width)} {_n(height)}" font-family="sans-serif">',
    ]
    if opt.title:
        parts.append(f'<text class="title" x="{_n(width / 2)}" y="16" font-size="12" '
                     f'text-anchor="middle">{escape(opt.title)}</text>')

    parts.append('<g class="lower-tree">')
    parts.extend(_axis(lp, lower.total, opt.percent_axis, lower.kind))
    parts.extend(_draw_tree(lp, xs, group_order, limit, opt.hanging))
    label_y = lp.bottom + 10
    if opt.show_labels:
        for leaf in leaves:
            x = xs[leaf]
            y = label_y
            if opt.hanging:
                parent = _parent_y(lp, leaf, limit)
                y = min(label_y, parent + HANG * PANEL_HEIGHT + 10)
            parts.append(f'<text class="leaf" x="{_n(x)}" y="{_n(y)}" font-size="9" '
                         f'text-anchor="end" transform="rotate(-90 {_n(x)} {_n(y)})">'
                         f'{escape(lower.labels[leaf])}</text>')
    if opt.hanging:
        y0 = lp.y(0.0)
        parts.append(f'<line class="zero-line" x1="{_n(MARGIN_LEFT)}" y1="{_n(y0)}" '
                     f'x2="{_n(width - MARGIN_RIGHT)}" y2="{_n(y0)}" stroke="blue" '
                     f'stroke-dasharray="1,3"/>')
    if opt.threshold is not None:
        yt = lp.y(opt.threshold)
        parts.append(f'<line class="threshold" x1="{_n(MARGIN_LEFT)}" y1="{_n(yt)}" '
                     f'x2="{_n(width - MARGIN_RIGHT)}" y2="{_n(yt)}" stroke="gray" '
                     f'stroke-dasharray="6,4"/>')
    if opt.show_sizes and b.sizes is not None:
        for size, g in zip(b.sizes, b.groups):
            x = xs[g] if g in xs else MARGIN_LEFT
            y = lp.display(g, limit) - 6
            parts.append(f'<text class="size" x="{_n(x)}" y="{_n(y)}" font-size="9" '
                         f'text-anchor="middle">{_size_text(size)}</text>')
    parts.append('</g>')

    if has_upper:
        ulo, uhi = b.upper_scale
        up = _Panel(upper, ulo, uhi, MARGIN_TOP)
        uxs = {u: xs[g] for u, g in enumerate(b.groups)}
        parts.append('<g class="upper-tree">')
        parts.extend(_axis(up, upper.total, opt.percent_axis and b.shared, upper.kind))
        parts.extend(_draw_tree(up, uxs, upper.roots(), len(upper.merges) + upper.n_leaves,
                                False, leaf_y=up.bottom))
        for u in upper_leaves:
            x = uxs[u]
            parts.append(f'<line class="connector" x1="{_n(x)}" y1="{_n(up.bottom)}" '
                         f'x2="{_n(x)}" y2="{_n(lp.display(b.groups[u], limit))}" '
                         f'stroke="lightgray"/>')
            parts.append(f'<text class="upper-leaf" x="{_n(x + 3)}" y="{_n(up.bottom + 12)}" '
                         f'font-size="9">{escape(upper.labels[u])}</text>')
        parts.append('</g>')
    parts.append('</svg>')
    return "\n".join(parts) + "\n"


def _parent_y(panel: _Panel, leaf: int, limit: int) -> float:
    t = panel.tree
    for k, m in enumerate(t.merges[: limit - t.n_leaves]):
        if leaf in (m.left, m.right):
            return panel.display(t.n_leaves + k, limit)
    return panel.y(t.base_height)


def render_tree(t: MergeTree, options: RenderOptions | None = None) -> str:
    """Render a single tree (or forest) without an upper panel."""
    b = BiDendrogram(t, None, tuple(t.roots()), len(t.merges), shared=False)
    return render_bidendrogram(b, options)

