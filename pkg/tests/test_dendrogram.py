import json
import re
import warnings

import numpy as np
import pytest

from catclust.dataset import IndicatorMatrix
from catclust.dendrogram import (
    BiDendrogram,
    Merge,
    MergeTree,
    TreeReversalWarning,
    export_tree,
    import_tree,
    parse_newick,
    to_newick,
)
from catclust.errors import ConsistencyError, TreeFormatError
from catclust.inertia import total_inertia
from catclust.render import RenderOptions, render_bidendrogram, render_tree
from catclust.within import assemble_bidendrogram, variable_clustering, within_variable_clustering

from oracles import random_dataset


def _four():
    # ((A,B),(C,D)) on an ascending scale
    return MergeTree(("A", "B", "C", "D"),
                     (Merge(0, 1, 0.1), Merge(2, 3, 0.25), Merge(4, 5, 0.5)),
                     "inertia_loss", 0.5)


def _random_bidendrogram(rng):
    d = random_dataset(rng, q_range=(3, 4), jq_range=(3, 4))
    z = IndicatorMatrix.from_dataset(d)
    cats, _ = within_variable_clustering(z)
    return assemble_bidendrogram(cats, variable_clustering(total_inertia(z)))


def _clades(t):
    return {frozenset(t.labels[v] for v in t.members(t.n_leaves + k)): round(m.height, 9)
            for k, m in enumerate(t.merges)}


class TestMergeTree:
    def test_members_roots_cut(self):
        t = _four()
        assert t.members(6) == [0, 1, 2, 3]
        assert t.roots(1) == [4, 2, 3]
        assert t.cut(2) == [[0, 1], [2, 3]]
        assert t.cut(4) == [[0], [1], [2], [3]]
        with pytest.raises(ValueError):
            t.cut(0)

    def test_leaf_order_puts_smaller_leaf_left(self):
        t = MergeTree(("A", "B", "C"), (Merge(2, 0, 0.1), Merge(1, 3, 0.2)), "inertia_loss", 0.2)
        assert t.leaf_order() == [0, 2, 1]
        # a forest lists roots by smallest leaf
        assert t.leaf_order(n_merges=1) == [0, 2, 1]

    def test_base_height(self):
        assert _four().base_height == 0.0
        t = MergeTree(("A", "B"), (Merge(0, 1, 0.0),), "remaining_inertia", 0.3)
        assert t.descending and t.base_height == 0.3
        assert t.height(0) == 0.3

    @pytest.mark.parametrize("merges", [
        (Merge(0, 5, 0.1),),
        (Merge(0, 0, 0.1),),
        (Merge(0, 1, 0.1), Merge(0, 2, 0.2)),
    ])
    def test_invalid_merges(self, merges):
        with pytest.raises(TreeFormatError) as err:
            MergeTree(("A", "B", "C"), merges, "inertia_loss", 1.0)
        assert err.value.field.startswith("merges[")

    def test_unknown_kind(self):
        with pytest.raises(TreeFormatError) as err:
            MergeTree(("A", "B"), (), "furlongs", 1.0)
        assert err.value.field == "scale.kind"


class TestNewick:
    def test_two_leaves(self):
        t = MergeTree(("A", "B"), (Merge(0, 1, 0.25),), "inertia_loss", 0.25)
        assert to_newick(t) == "(A:0.25,B:0.25);\n"

    def test_nested_branch_lengths(self):
        assert to_newick(_four()) == "((A:0.1,B:0.1):0.4,(C:0.25,D:0.25):0.25);\n"

    def test_descending_scale_lengths_are_positive(self):
        t = MergeTree(("A", "B", "C"), (Merge(0, 1, 0.2), Merge(3, 2, 0.0)),
                      "remaining_inertia", 0.3)
        assert to_newick(t) == "((A:0.1,B:0.1):0.2,C:0.3);\n"

    def test_label_quoting(self):
        t = MergeTree(("A1+2", "it's"), (Merge(0, 1, 1.0),), "inertia_loss", 1.0)
        text = to_newick(t)
        assert text == "('A1+2':1,'it''s':1);\n"
        assert parse_newick(text).labels == ("A1+2", "it's")

    def test_reversal_clamped(self):
        t = MergeTree(("A", "B", "C"), (Merge(0, 1, 0.5), Merge(3, 2, 0.3)), "resistance", 0.5)
        with pytest.warns(TreeReversalWarning, match="clamped"):
            text = to_newick(t)
        assert "(A:0.5,B:0.5):0," in text

    def test_forest_one_line_per_root(self):
        text = to_newick(MergeTree(("A", "B", "C"), (Merge(0, 1, 0.1),), "inertia_loss", 0.1))
        assert text.splitlines() == ["(A:0.1,B:0.1);", "C;"]

    def test_round_trip(self, rng):
        for _ in range(5):
            t = _random_bidendrogram(rng).lower
            back = parse_newick(to_newick(t), t.kind, t.total)
            assert sorted(back.labels) == sorted(t.labels)
            assert _clades(back) == _clades(t)
            assert sorted(back.heights) == pytest.approx(sorted(t.heights), abs=1e-9)

    def test_parse_errors(self):
        with pytest.raises(TreeFormatError):
            parse_newick("(A,B,C);")
        with pytest.raises(TreeFormatError):
            parse_newick("(A:0.1,B:x);")
        with pytest.raises(TreeFormatError):
            parse_newick("(A:1,B:1)")


class TestStructured:
    def test_exact_round_trip(self, rng):
        t = _random_bidendrogram(rng).lower
        raw = export_tree(t)
        back = import_tree(raw)
        assert back == t
        assert export_tree(back) == raw

    def test_extras_kept(self):
        t = MergeTree(("A", "B"), (Merge(0, 1, 0.1, {"loss": 0.1, "variable": "X"}),),
                      "inertia_loss", 0.1)
        obj = json.loads(export_tree(t))
        assert obj["merges"][0] == {"left": 0, "right": 1, "height": 0.1, "loss": 0.1,
                                    "variable": "X"}
        assert obj["scale"] == {"kind": "inertia_loss", "total": 0.1}

    @pytest.mark.parametrize("doc, field", [
        ("[]", "<root>"),
        ('{"leaves": [], "merges": []}', "scale"),
        ('{"leaves": [{"id": 1, "label": "A"}], "merges": [], '
         '"scale": {"kind": "resistance", "total": 0}}', "leaves[0].id"),
        ('{"leaves": [{"id": 0, "label": "A"}, {"id": 1, "label": "B"}], '
         '"merges": [{"left": 0, "height": 1}], "scale": {"kind": "resistance", "total": 0}}',
         "merges[0].right"),
        ('{"leaves": [], "merges": [], "scale": {"kind": "resistance", "total": "x"}}',
         "scale.total"),
        ("{not json", "<root>"),
    ])
    def test_field_errors(self, doc, field):
        with pytest.raises(TreeFormatError) as err:
            import_tree(doc)
        assert err.value.field == field

    def test_format_name(self):
        with pytest.raises(ValueError):
            export_tree(_four(), format="xml")


class TestBiDendrogramModel:
    def test_round_trip(self, rng):
        b = _random_bidendrogram(rng)
        b2 = BiDendrogram.from_dict(json.loads(json.dumps(b.to_dict())))
        assert b2.to_dict() == b.to_dict()

    def test_groups_must_match_roots(self):
        t = _four()
        up = MergeTree(("X", "Y"), (Merge(0, 1, 0.5),), "inertia_loss", 0.5)
        BiDendrogram(t, up, (4, 5), 2)
        with pytest.raises(ConsistencyError):
            BiDendrogram(t, up, (4, 2), 2)
        with pytest.raises(ConsistencyError):
            BiDendrogram(t, up, (4, 5), 4)
        with pytest.raises(ConsistencyError):
            BiDendrogram(t, up, (4, 5), 2, sizes=(1.0,))

    def test_nested_field_path(self, rng):
        doc = _random_bidendrogram(rng).to_dict()
        del doc["upper"]["scale"]
        with pytest.raises(TreeFormatError) as err:
            BiDendrogram.from_dict(doc)
        assert err.value.field == "upper.scale"


class TestRender:
    def test_deterministic_and_complete(self, rng):
        b = _random_bidendrogram(rng)
        svg = render_bidendrogram(b)
        assert svg == render_bidendrogram(b)
        assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")
        assert svg.count('class="leaf"') == b.lower.n_leaves
        assert svg.count('class="upper-leaf"') == b.upper.n_leaves
        assert svg.count('class="connector"') == b.upper.n_leaves
        # two vertical stems plus one bar per merge
        n_merges = len(b.lower.merges) + len(b.upper.merges)
        assert svg.count('class="branch"') == 3 * n_merges

    def test_leaf_labels_follow_leaf_order(self):
        svg = render_tree(MergeTree(("A", "B", "C"), (Merge(2, 0, 0.1), Merge(1, 3, 0.2)),
                                    "inertia_loss", 0.2))
        assert re.findall(r'class="leaf"[^>]*>([^<]*)<', svg) == ["A", "C", "B"]

    def test_percent_axis(self, rng):
        svg = render_bidendrogram(_random_bidendrogram(rng), RenderOptions(percent_axis=True))
        assert ">100%<" in svg and ">0%<" in svg

    def test_threshold_and_hanging(self, rng):
        b = _random_bidendrogram(rng)
        plain = render_bidendrogram(b)
        assert 'class="threshold"' not in plain and 'class="zero-line"' not in plain
        svg = render_bidendrogram(b, RenderOptions(threshold=0.01, hanging=True))
        assert svg.count('class="threshold"') == 1
        assert svg.count('class="zero-line"') == 1

    def test_fractional_sizes(self):
        t = _four()
        b = BiDendrogram(t, None, (4, 5), 2, sizes=(3.5, 2.0))
        svg = render_bidendrogram(b)
        assert re.findall(r'class="size"[^>]*>([^<]*)<', svg) == ["3.5", "2"]

    def test_descending_axis_inverted(self):
        # a loss of 0.8 out of 1.0 leaves 0.2 remaining
        up = MergeTree(("A", "B"), (Merge(0, 1, 0.8),), "inertia_loss", 1.0)
        down = MergeTree(("A", "B"), (Merge(0, 1, 0.2),), "remaining_inertia", 1.0)
        low = MergeTree(("A", "B"), (Merge(0, 1, 0.2),), "inertia_loss", 1.0)

        def bar_y(svg):
            # the horizontal bar is the only branch with y1 == y2
            for x1, y1, x2, y2 in re.findall(
                    r'class="branch" x1="([\d.]+)" y1="([\d.]+)" x2="([\d.]+)" y2="([\d.]+)"', svg):
                if y1 == y2 and x1 != x2:
                    return float(y1)

        def stem_bottom(svg):
            return max(float(y) for y in re.findall(r'class="branch"[^>]* y1="([\d.]+)"', svg))

        s_up, s_down = render_tree(up), render_tree(down)
        # leaves sit at the panel bottom and both bars sit at the same place
        assert stem_bottom(s_up) == pytest.approx(stem_bottom(s_down))
        assert bar_y(s_up) == pytest.approx(bar_y(s_down))
        assert bar_y(render_tree(low)) > bar_y(s_down)

    def test_no_warnings(self, rng):
        b = _random_bidendrogram(rng)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            render_bidendrogram(b, RenderOptions(percent_axis=True, threshold=0.0))


def test_heights_array_roundtrip_precision():
    h = float(np.nextafter(0.1, 1.0))
    t = MergeTree(("A", "B"), (Merge(0, 1, h),), "inertia_loss", h)
    assert import_tree(export_tree(t)).heights == (h,)
