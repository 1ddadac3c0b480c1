import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from src.core.errors import HierarchyError, InvalidBasisError
from src.hierarchy.structure import build_from_edges, check_basis, partition, rebase

FIGURE_S = np.array([
    [1, 1, 1, 1],
    [1, 1, 0, 0],
    [0, 0, 1, 1],
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 1, 0],
    [0, 0, 0, 1],
], dtype=float)


def bareiss_determinant(matrix):
    """Exact integer determinant by fraction-free elimination"""
    a = [[int(round(v)) for v in row] for row in matrix]
    n = len(a)
    sign, previous = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // previous
        previous = a[k][k]
    return sign * a[n - 1][n - 1]


class TestBuildFromEdges:
    def test_three_level_summing_matrix(self, three_level):
        assert three_level.labels == ("Total", "A", "B", "AA", "AB", "BA", "BB")
        assert_array_equal(three_level.s_matrix, FIGURE_S)
        assert three_level.basis_labels == ["AA", "AB", "BA", "BB"]
        assert three_level.levels == ("0", "1", "1", "2", "2", "2", "2")

    def test_two_level(self, two_level):
        assert_array_equal(two_level.s_matrix, [[1, 1], [1, 0], [0, 1]])
        assert two_level.basis_labels == ["Y", "Z"]

    def test_single_node(self):
        h = build_from_edges([], nodes=["Solo"])
        assert (h.n, h.m) == (1, 1)
        assert_array_equal(h.s_matrix, [[1.0]])
        assert h.constraint_matrix.shape == (0, 1)

    def test_constraint_matrix_annihilates_s(self, three_level, tree_factory, rng):
        assert np.max(np.abs(three_level.constraint_matrix @ three_level.s_matrix)) <= 1e-12
        for _ in range(20):
            h = tree_factory(rng)
            assert np.max(np.abs(h.constraint_matrix @ h.s_matrix), initial=0.0) <= 1e-12
            assert_array_equal(h.s_matrix[list(h.basis_indices)], np.eye(h.m))

    def test_s_matrix_is_read_only(self, three_level):
        with pytest.raises(ValueError):
            three_level.s_matrix[0, 0] = 5.0

    @pytest.mark.parametrize("edges, message", [
        ([("A", "B"), ("B", "A")], "Cycle"),
        ([("T", "A"), ("T", "B"), ("A", "C"), ("B", "C")], "Duplicate"),
        ([("T", "A"), ("U", "B")], "multiple roots"),
        ([("T", "A,B")], "commas"),
        ([], "Empty"),
    ])
    def test_malformed_edges(self, edges, message):
        with pytest.raises(HierarchyError, match=message):
            build_from_edges(edges)

    def test_level_groups(self, three_level):
        groups = three_level.level_groups()
        assert list(groups) == ["0", "1", "2"]
        assert groups["2"] == [3, 4, 5, 6]

    def test_coherence_residual(self, three_level, rng):
        coherent = three_level.aggregate(rng.normal(size=(4, 3)))
        assert three_level.coherence_residual(coherent) <= 1e-12
        coherent[0, 0] += 1.0
        assert three_level.coherence_residual(coherent) == pytest.approx(1.0)


class TestCheckBasis:
    def test_bottom_basis_is_valid(self, three_level):
        assert check_basis(three_level, [3, 4, 5, 6]).valid

    def test_dependent_candidate(self, three_level):
        outcome = check_basis(three_level, three_level.indices_of(["Total", "A", "AA", "AB"]))
        assert not outcome.valid
        assert "rank deficiency 1" in outcome.reason
        assert outcome.describe_witness() == "A - AA - AB = 0"

    def test_mixed_level_candidate_is_valid(self, three_level):
        assert check_basis(three_level, three_level.indices_of(["Total", "A", "AA", "BA"])).valid

    def test_two_level_alternative_basis(self, two_level):
        assert check_basis(two_level, [0, 1]).valid

    def test_all_candidates_match_exact_determinants(self, three_level):
        candidates = list(itertools.combinations(range(7), 4))
        assert len(candidates) == 35
        for candidate in candidates:
            expected = bareiss_determinant(FIGURE_S[list(candidate)]) != 0
            assert check_basis(three_level, candidate).valid == expected, candidate

    @pytest.mark.parametrize("candidate, message", [
        ([3, 4, 5], "Wrong cardinality"),
        ([3, 3, 5, 6], "Repeated"),
        ([3, 4, 5, 9], "out of range"),
    ])
    def test_malformed_candidates(self, three_level, candidate, message):
        with pytest.raises(InvalidBasisError, match=message):
            check_basis(three_level, candidate)


class TestRebase:
    def test_two_level_rebase(self, two_level):
        rebased = rebase(two_level, [0, 1])
        assert_array_equal(rebased.s_matrix, [[1, 0], [0, 1], [1, -1]])
        assert rebased.basis_indices == (0, 1)
        assert rebased.bottom_indices == (1, 2)

    def test_identity_rebase(self, three_level):
        assert_array_equal(rebase(three_level, [3, 4, 5, 6]).s_matrix, three_level.s_matrix)

    def test_rebase_preserves_coherent_space(self, three_level, rng):
        basis = three_level.indices_of(["Total", "A", "AA", "BA"])
        rebased = rebase(three_level, basis)
        y = three_level.aggregate(rng.normal(size=(4, 100)))
        assert_allclose(rebased.s_matrix @ y[basis], y, atol=1e-10)

    def test_invalid_basis_rejected(self, three_level):
        with pytest.raises(InvalidBasisError, match="A - AA - AB = 0"):
            rebase(three_level, three_level.indices_of(["Total", "A", "AA", "AB"]))

    def test_structural_weights_survive_rebase(self, three_level):
        rebased = rebase(three_level, three_level.indices_of(["Total", "A", "AA", "BA"]))
        assert_array_equal(rebased.bottom_s_matrix, three_level.s_matrix)


class TestPartition:
    def test_top_immutable(self, three_level):
        sel = partition(three_level, ["Total"])
        labels = three_level.labels
        assert [labels[i] for i in sel.basis] == ["AA", "AB", "BA", "Total"]
        assert [labels[i] for i in sel.determined] == ["A", "B", "BB"]
        assert sel.k == 1
        assert_array_equal(sel.s1, [[1, 1, 0], [-1, -1, 0], [-1, -1, -1]])
        assert_array_equal(sel.s2, [[0], [1], [1]])

    def test_stacking_reproduces_partitioned_s(self, three_level):
        for immutable in ([], ["Total"], ["A", "BB"], ["Total", "A", "BA"]):
            sel = partition(three_level, immutable)
            free = sel.hierarchy.m - sel.k
            expected = np.vstack([
                np.hstack([sel.s1, sel.s2]),
                np.hstack([np.eye(free), np.zeros((free, sel.k))]),
                np.hstack([np.zeros((sel.k, free)), np.eye(sel.k)]),
            ])
            assert_array_equal(sel.stacked_s(), expected)
            assert sorted(sel.order) == list(range(7))

    def test_empty_immutable_keeps_bottom_basis(self, two_level):
        sel = partition(two_level, [])
        assert sel.basis == (1, 2)
        assert sel.k == 0
        assert_array_equal(sel.s1, [[1, 1]])
        assert sel.s2.shape == (1, 0)

    def test_redundant_immutable_set(self, three_level):
        with pytest.raises(InvalidBasisError, match="Total - A - B = 0"):
            partition(three_level, ["Total", "A", "B"])

    def test_unknown_label(self, three_level):
        with pytest.raises(HierarchyError, match="Unknown series label"):
            partition(three_level, ["Nope"])

    def test_preferred_order_changes_completion(self, three_level):
        sel = partition(three_level, ["Total"], preferred_order=[1, 3, 5, 2, 4, 6])
        assert [three_level.labels[i] for i in sel.basis] == ["A", "AA", "BA", "Total"]
