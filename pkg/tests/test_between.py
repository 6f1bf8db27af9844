import itertools
import warnings
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from catclust.between import (
    Assignment,
    ClusterSet,
    assign_observations,
    cluster_of_clusters,
    cluster_profile_table,
    column_distances,
    indicator_for,
    observation_resistance,
    pairwise_weighted_resistance,
    residual_block_matrix,
    residual_linkage_clustering,
    resistance_linkage_clustering,
    resistance_matrix,
)
from catclust.dataset import ContingencyTable, Dataset, IndicatorMatrix, VariableSchema, crosstab
from catclust.errors import InfeasibleClusterCountError, SchemaError, UsageError
from catclust.inertia import chi_square_distances, total_inertia
from catclust.linkage import agglomerate

from oracles import TABLE_BC, naive_agglomerate, random_dataset

FIVE = (1, 2, 3, 4, 5)


def _five(names, missing=False):
    if missing:
        return tuple(VariableSchema(n, "ordinal_with_missing", FIVE, 9) for n in names)
    return tuple(VariableSchema(n, "ordinal", FIVE) for n in names)


class TestLinkage:
    @pytest.mark.parametrize("linkage", ["average", "complete"])
    def test_matches_naive_oracle(self, rng, linkage):
        for _ in range(25):
            L = int(rng.integers(3, 10))
            x = rng.normal(size=(L, 2))
            d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
            groups = rng.integers(0, 3, size=L)
            forbidden = groups[:, None] == groups[None, :]
            np.fill_diagonal(forbidden, False)
            merges = agglomerate(d, linkage, forbidden)
            want = naive_agglomerate(d, linkage, forbidden)
            assert len(merges) == len(want)
            members = {i: (i,) for i in range(L)}
            for k, ((a, b, v), (wa, wb, wv)) in enumerate(zip(merges, want)):
                assert (members[a], members[b]) == (wa, wb)
                assert v == pytest.approx(wv, abs=1e-12)
                members[L + k] = tuple(sorted(members[a] + members[b]))

    def test_ties_go_to_smallest_leaves(self):
        d = np.ones((4, 4))
        merges = agglomerate(d, "average")
        assert merges[0][:2] == (0, 1)
        # key of ({0,1}, 2) is (0, 2), which beats (2, 3)
        assert merges[1][:2] == (4, 2)

    def test_max_merges_and_validation(self):
        d = np.arange(16.0).reshape(4, 4)
        d = d + d.T
        assert len(agglomerate(d, "complete", max_merges=2)) == 2
        with pytest.raises(ValueError):
            agglomerate(d, "single")
        with pytest.raises(ValueError):
            agglomerate(np.ones((2, 3)))


class TestResidualBlocks:
    def test_structure(self, rng):
        d = random_dataset(rng, q_range=(3, 4))
        z = IndicatorMatrix.from_dataset(d)
        tm = residual_block_matrix(z)
        assert_allclose(tm.t, tm.t.T)
        off = z.offsets()
        for q in range(z.Q):
            r = z.frequencies(q) / z.n
            block = tm.t[off[q]:off[q + 1], off[q]:off[q + 1]]
            for j, k in itertools.permutations(range(z.n_columns(q)), 2):
                assert block[j, k] == pytest.approx(-np.sqrt(r[j] * r[k]), abs=1e-14)
        upper = sum(np.sum(tm.t[off[q]:off[q + 1], off[s]:off[s + 1]] ** 2)
                    for q in range(z.Q) for s in range(q + 1, z.Q))
        assert upper / (z.Q * (z.Q - 1) / 2) == pytest.approx(total_inertia(z).in_tot, abs=1e-12)
        assert tm.labels == z.all_labels


class TestResidualClustering:
    def test_merges_and_heights(self, rng):
        d = random_dataset(rng, q_range=(3, 4), n_max=80)
        z = IndicatorMatrix.from_dataset(d)
        tm = residual_block_matrix(z)
        cs, tree = residual_linkage_clustering(tm, "average", z.J)
        n_pairs = z.Q * (z.Q - 1) / 2
        for m in tree.merges:
            s = m.info["similarity"]
            assert m.height == pytest.approx(np.sign(s) * s * s / n_pairs)
        assert tree.kind == "residual_inertia" and tree.total == tm.in_tot
        assert cs.G == z.J and all(len(c) == 1 for c in cs.clusters)

    def test_first_merge_is_strongest_residual(self, rng):
        d = random_dataset(rng, q_range=(3, 3), n_max=80)
        z = IndicatorMatrix.from_dataset(d)
        tm = residual_block_matrix(z)
        _, tree = residual_linkage_clustering(tm, "complete", z.J)
        var = np.array([q for q, _ in z.block_index])
        t = np.where(var[:, None] == var[None, :], -np.inf, tm.t)
        m = tree.merges[0]
        assert m.info["similarity"] == pytest.approx(t.max())
        assert t[m.left, m.right] == pytest.approx(t.max())

    def test_cluster_counts(self, rng):
        d = random_dataset(rng, q_range=(3, 4), n_max=80)
        z = IndicatorMatrix.from_dataset(d)
        tm = residual_block_matrix(z)
        _, full = residual_linkage_clustering(tm, "average", z.J)
        reachable = z.J - len(full.merges)
        for g in range(reachable, z.J + 1):
            cs, _ = residual_linkage_clustering(tm, "average", g)
            assert cs.G == g
            covered = sorted(m for c in cs.clusters for m in c)
            assert covered == sorted(z.block_index)
        if reachable > 2:
            with pytest.raises(InfeasibleClusterCountError, match="smallest reachable"):
                residual_linkage_clustering(tm, "average", reachable - 1)
        with pytest.raises(InfeasibleClusterCountError):
            residual_linkage_clustering(tm, "average", 0)
        with pytest.raises(InfeasibleClusterCountError):
            residual_linkage_clustering(tm, "average", z.J + 1)

    def test_single_cluster_is_degenerate(self, rng):
        z = IndicatorMatrix.from_dataset(random_dataset(rng))
        with pytest.warns(RuntimeWarning, match="degenerate"):
            cs, _ = residual_linkage_clustering(residual_block_matrix(z), "average", 1)
        assert cs.G == 1 and len(cs.clusters[0]) == z.J

    def test_bad_linkage(self, rng):
        z = IndicatorMatrix.from_dataset(random_dataset(rng))
        with pytest.raises(UsageError):
            residual_linkage_clustering(residual_block_matrix(z), "ward", 2)


class TestWeightedResistance:
    def test_role_symmetry(self, rng):
        for _ in range(20):
            t = rng.integers(0, 20, size=(4, 5))
            t[0, 0] += 1
            for j, k in itertools.product(range(4), range(5)):
                assert pairwise_weighted_resistance(t, j, k) == pytest.approx(
                    pairwise_weighted_resistance(t.T, k, j))

    def test_all_mass_at_cell(self):
        t = np.zeros((5, 5))
        t[2, 3] = 40
        assert pairwise_weighted_resistance(t, 2, 3) == 0.0

    def test_hand_sums(self):
        # C1..C4 answers moving to C5 and B1..B4 answers moving to B5
        num = (4 * 13 + 3 * 17 + 2 * 7 + 1 * 26) + (4 * 3 + 3 * 12 + 2 * 2 + 1 * 18)
        assert num == 213
        got = pairwise_weighted_resistance(ContingencyTable(TABLE_BC), 4, 4)
        assert got == pytest.approx(213 / 2107, rel=1e-14)

    def test_zero_table(self):
        with pytest.raises(UsageError):
            pairwise_weighted_resistance(np.zeros((2, 2)), 0, 0)

    def test_column_distances(self):
        s = VariableSchema("A", "ordinal_with_missing", FIVE, 9)
        d = column_distances(s, [(0,), (1, 2), (3,), (4,), (5,)])
        assert_allclose(d[:4, :4], np.abs(np.subtract.outer(range(4), range(4))))
        assert d[4, 4] == 0 and np.all(d[4, :4] == 3) and np.all(d[:4, 4] == 3)
        d = column_distances(s, [(p,) for p in range(6)], missing_distance=2.5)
        assert d[5, 0] == 2.5 and d[5, 5] == 0
        nom = column_distances(VariableSchema("R", "nominal", (1, 2, 3)), [(0,), (1,), (2,)])
        assert_allclose(nom, 1 - np.eye(3))

    def test_matrix_entries(self, rng):
        d = random_dataset(rng, scales=("ordinal",), q_range=(3, 3))
        z = IndicatorMatrix.from_dataset(d)
        rm = resistance_matrix(z)
        off = z.offsets()
        for q, s in itertools.combinations(range(3), 2):
            nt = crosstab(z, q, s)
            for j, k in itertools.product(range(z.n_columns(q)), range(z.n_columns(s))):
                assert rm.d[off[q] + j, off[s] + k] == pytest.approx(
                    pairwise_weighted_resistance(nt, j, k), abs=1e-14)
        assert_allclose(rm.d, rm.d.T)
        assert rm.I == z.n and np.all(rm.d >= 0)


class TestResistanceClustering:
    def test_complete_linkage_bound(self, rng):
        for _ in range(10):
            d = random_dataset(rng, q_range=(3, 4), n_max=60)
            z = IndicatorMatrix.from_dataset(d)
            rm = resistance_matrix(z)
            _, tree = resistance_linkage_clustering(z, z.J)
            legal = np.where(rm.forbidden, np.inf, rm.d)
            np.fill_diagonal(legal, np.inf)
            assert tree.merges[0].height == pytest.approx(legal.min())
            for k, m in enumerate(tree.merges):
                members = tree.members(tree.n_leaves + k)
                worst = max(rm.d[i, j] for i, j in itertools.combinations(members, 2))
                assert worst <= m.height + 1e-12

    def test_cluster_set_metadata(self, rng):
        z = IndicatorMatrix.from_dataset(random_dataset(rng))
        cs, tree = resistance_linkage_clustering(z, z.J, missing_distance=1.5)
        assert cs.method == "resistance" and cs.missing_distance == 1.5
        assert tree.kind == "resistance"


class TestObservationResistance:
    def test_examples(self):
        schemas = _five("ABC")
        assert observation_resistance((2, 3, 4), [(0, 1), (1, 5), (2, 5)], schemas) == pytest.approx(4 / 3)
        assert observation_resistance((1, 5, 5), [(0, 1), (1, 5), (2, 5)], schemas) == 0
        assert observation_resistance((5, 1, 1), [(0, 1)], schemas) == 4

    def test_missing_responses(self):
        schemas = _five("AB", missing=True)
        assert observation_resistance((9, 9), [(0, 9), (1, 9)], schemas) == 0
        assert observation_resistance((9, 3), [(0, 2)], schemas) == 4
        assert observation_resistance((2, 3), [(1, 9)], schemas, missing_distance=1) == 1

    def test_merged_member(self):
        schemas = _five("AB")
        groups = [[(0, 1), (2,), (3,), (4,)], [(p,) for p in range(5)]]
        assert observation_resistance((5, 1), [(0, (1, 2))], schemas, groups) == 3

    def test_empty_cluster(self):
        with pytest.raises(UsageError):
            observation_resistance((1, 1), [], _five("AB"))


def _toy_clusters():
    schemas = _five("AB")
    columns = tuple(tuple((p,) for p in range(5)) for _ in schemas)
    clusters = (((0, 0), (1, 0)), ((0, 4), (1, 4)))
    return ClusterSet(schemas, columns, clusters, "residual")


class TestAssignment:
    def test_tie_splits_equally(self):
        cs = _toy_clusters()
        d = Dataset(cs.schemas, np.array([[1, 1], [3, 3], [5, 4], [2, 4]]))
        a = assign_observations(d, cs)
        assert a.winners == ((0,), (0, 1), (1,), (0, 1))
        assert a.exact_row(1) == [Fraction(1, 2), Fraction(1, 2)]
        assert_allclose(a.memberships[1], [0.5, 0.5])
        assert a.exact_cluster_sizes == (Fraction(2), Fraction(2))
        assert a.n_fuzzy == 2
        assert_allclose(a.resistances[0], [0, 4])

    def test_three_way_split_is_exact(self):
        schemas = _five("AB")
        columns = tuple(tuple((p,) for p in range(5)) for _ in schemas)
        cs = ClusterSet(schemas, columns, (((0, 0),), ((0, 4),), ((1, 2),)), "residual")
        a = assign_observations(Dataset(schemas, np.array([[3, 1], [1, 3]])), cs)
        assert a.winners[0] == (0, 1, 2)
        assert sum(a.exact_row(0)) == 1
        assert sum(a.exact_cluster_sizes) == 2

    def test_relabeling_is_equivariant(self, rng):
        d = random_dataset(rng, n_max=60, q_range=(3, 4))
        z = IndicatorMatrix.from_dataset(d)
        _, full = resistance_linkage_clustering(z, z.J)
        g = max(z.J - 6, z.J - len(full.merges))
        cs, _ = resistance_linkage_clustering(z, g)
        perm = rng.permutation(cs.G)
        shuffled = ClusterSet(cs.schemas, cs.columns, tuple(cs.clusters[p] for p in perm),
                              cs.method, tuple(cs.labels[p] for p in perm))
        a, b = assign_observations(d, cs), assign_observations(d, shuffled)
        assert_allclose(b.memberships, a.memberships[:, perm])

    def test_definitions_must_cover_codes(self):
        cs = _toy_clusters()
        d = Dataset(_five("AB", missing=True), np.array([[9, 1]]))
        with pytest.raises(Exception, match="not covered"):
            indicator_for(d, cs)
        d = Dataset(_five("AC"), np.array([[1, 1]]))
        with pytest.raises(SchemaError):
            indicator_for(d, cs)


class TestProfiles:
    def test_crisp_matches_brute_force(self, rng):
        d = random_dataset(rng, n_max=60)
        z = IndicatorMatrix.from_dataset(d)
        G = 3
        winners = tuple((int(g),) for g in rng.integers(0, G, size=z.n))
        a = Assignment(winners, ("C1", "C2", "C3"), np.zeros((z.n, G)))
        table = cluster_profile_table(a, z)
        m = z.matrix()
        for g in range(G):
            rows = [i for i in range(z.n) if winners[i] == (g,)]
            assert_allclose(table.counts[g], m[rows].sum(axis=0))
        assert table.counts.sum() == z.n * z.Q
        assert_allclose(table.row_margins, z.Q * a.cluster_sizes)

    def test_fuzzy_split_adds_half_row(self, rng):
        d = random_dataset(rng, n_max=30)
        z = IndicatorMatrix.from_dataset(d)
        crisp = tuple((i % 2,) for i in range(z.n))
        a1 = Assignment(crisp, ("C1", "C2"), np.zeros((z.n, 2)))
        fuzzy = ((0, 1),) + crisp[1:]
        a2 = Assignment(fuzzy, ("C1", "C2"), np.zeros((z.n, 2)))
        delta = cluster_profile_table(a2, z).counts - cluster_profile_table(a1, z).counts
        row = z.matrix()[0]
        assert_allclose(delta[0], -row / 2)
        assert_allclose(delta[1], row / 2)

    def test_single_cluster(self, rng):
        d = random_dataset(rng)
        z = IndicatorMatrix.from_dataset(d)
        a = Assignment(((0,),) * z.n, ("C1",), np.zeros((z.n, 1)))
        freq = np.concatenate([z.frequencies(q) for q in range(z.Q)])
        assert_allclose(cluster_profile_table(a, z).counts[0], freq)

    def test_size_mismatch(self, rng):
        z = IndicatorMatrix.from_dataset(random_dataset(rng))
        with pytest.raises(UsageError):
            cluster_profile_table(Assignment(((0,),), ("C1",), np.zeros((1, 1))), z)


class TestClusterOfClusters:
    def test_two_clusters(self):
        counts = np.array([[3.0, 1, 2], [1, 4, 1]])
        tree = cluster_of_clusters(ContingencyTable(counts, ("C1", "C2"), tuple("abc")))
        assert len(tree.merges) == 1
        assert tree.merges[0].height == pytest.approx(chi_square_distances(counts)[0, 1])
        assert tree.kind == "chi_square_distance"

    def test_duplicated_profile(self):
        counts = np.array([[3.0, 1, 2], [1, 4, 1], [6, 2, 4]])
        tree = cluster_of_clusters(ContingencyTable(counts, ("C1", "C2", "C3"), tuple("abc")))
        assert tree.merges[0].height == pytest.approx(0, abs=1e-15)
        assert {tree.merges[0].left, tree.merges[0].right} == {0, 2}

    def test_zero_rows_dropped(self):
        counts = np.array([[3.0, 1], [0, 0], [1, 4]])
        with pytest.warns(RuntimeWarning, match="C2"):
            tree = cluster_of_clusters(ContingencyTable(counts, ("C1", "C2", "C3"), ("a", "b")))
        assert tree.labels == ("C1", "C3")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(UsageError):
                cluster_of_clusters(ContingencyTable(counts[:2], ("C1", "C2"), ("a", "b")))


class TestClusterSet:
    def test_round_trip(self, rng):
        z = IndicatorMatrix.from_dataset(random_dataset(rng))
        cs, _ = resistance_linkage_clustering(z, z.J)
        back = ClusterSet.from_dict(cs.to_dict())
        assert back.clusters == cs.clusters and back.columns == cs.columns
        assert back.schemas == cs.schemas and back.labels == cs.labels

    def test_member_labels(self):
        cs = _toy_clusters()
        assert cs.member_labels(1) == ["A5", "B5"]
        assert cs.labels == ("C1", "C2")

    def test_malformed(self):
        with pytest.raises(SchemaError):
            ClusterSet.from_dict({"variables": [], "clusters": [{"members": [{"variable": "X"}]}]})
