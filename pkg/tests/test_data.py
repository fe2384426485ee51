"""Count-table and tree ingestion, rescaling, and count propagation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmclust.data import (
    CountMatrix,
    PhyloTree,
    match_leaves,
    parse_count_table,
    parse_newick,
    propagate_tree_counts,
    rescale_counts,
)
from dmclust.errors import IngestionError


def make_matrix(counts, samples=None, features=None):
    counts = np.asarray(counts)
    samples = samples or ["s%d" % i for i in range(counts.shape[0])]
    features = features or ["f%d" % j for j in range(counts.shape[1])]
    return CountMatrix(counts, samples, features)


# ---------------------------------------------------------------------------
# CountMatrix and the TSV parser


class TestCountMatrix:
    def test_valid_matrix_readback(self):
        m = make_matrix([[3, 1], [0, 5]])
        assert m.n_samples == 2 and m.n_features == 2
        assert m.row_totals.tolist() == [4, 5]

    def test_negative_entry_names_cell(self):
        with pytest.raises(IngestionError, match="s1.*f0"):
            make_matrix([[3, 1], [-1, 5]])

    def test_zero_sum_row_names_sample(self):
        with pytest.raises(IngestionError, match="s1"):
            make_matrix([[3, 1], [0, 0]])

    def test_non_integer_rejected(self):
        with pytest.raises(IngestionError, match="non-integer"):
            make_matrix(np.array([[1.5, 1.0], [1.0, 1.0]]))

    def test_integral_floats_accepted(self):
        m = make_matrix(np.array([[2.0, 1.0], [0.0, 3.0]]))
        assert m.counts.dtype == np.int64

    def test_duplicate_names_rejected(self):
        with pytest.raises(IngestionError, match="duplicate sample"):
            make_matrix([[1, 2], [3, 4]], samples=["a", "a"])
        with pytest.raises(IngestionError, match="duplicate feature"):
            make_matrix([[1, 2], [3, 4]], features=["x", "x"])

    def test_name_length_mismatch(self):
        with pytest.raises(IngestionError):
            make_matrix([[1, 2], [3, 4]], samples=["only-one"])


class TestParseCountTable:
    def test_basic_with_corner_label(self):
        text = "sample\tf0\tf1\ns0\t3\t1\ns1\t0\t5\n"
        m = parse_count_table(text)
        assert m.counts.tolist() == [[3, 1], [0, 5]]
        assert m.row_totals.tolist() == [4, 5]
        assert m.feature_names == ["f0", "f1"]
        assert m.sample_names == ["s0", "s1"]

    def test_header_without_corner_label(self):
        m = parse_count_table("f0\tf1\ns0\t3\t1\ns1\t0\t5\n")
        assert m.feature_names == ["f0", "f1"]
        assert m.counts.tolist() == [[3, 1], [0, 5]]

    def test_negative_cell_cites_cell(self):
        with pytest.raises(IngestionError, match="s1.*f1"):
            parse_count_table("f0\tf1\ns0\t1\t1\ns1\t2\t-1\n")

    def test_non_integer_cell_cites_cell(self):
        with pytest.raises(IngestionError, match="'x'.*s0.*f1"):
            parse_count_table("f0\tf1\ns0\t1\tx\ns1\t2\t1\n")

    def test_zero_sum_row_names_sample(self):
        with pytest.raises(IngestionError, match="'s1'"):
            parse_count_table("f0\tf1\ns0\t1\t1\ns1\t0\t0\n")

    def test_ragged_row_rejected(self):
        with pytest.raises(IngestionError, match="row 3"):
            parse_count_table("f0\tf1\ns0\t1\t1\ns1\t2\n")

    def test_too_short_input(self):
        with pytest.raises(IngestionError):
            parse_count_table("f0\tf1\n")

    def test_tsv_roundtrip(self):
        m = make_matrix([[3, 1, 0], [0, 5, 2]])
        back = parse_count_table(m.to_tsv())
        assert np.array_equal(back.counts, m.counts)
        assert back.sample_names == m.sample_names
        assert back.feature_names == m.feature_names

    @given(st.data())
    @settings(max_examples=50, deadline=None)
    def test_tsv_roundtrip_property(self, data):
        d = data.draw(st.integers(min_value=2, max_value=5))
        row = st.lists(
            st.integers(min_value=0, max_value=50), min_size=d, max_size=d
        ).filter(lambda r: sum(r) > 0)
        rows = data.draw(st.lists(row, min_size=1, max_size=6))
        m = make_matrix(rows)
        back = parse_count_table(m.to_tsv())
        assert np.array_equal(back.counts, m.counts)


# ---------------------------------------------------------------------------
# Rescaling


class TestRescaleCounts:
    def test_exact_division(self):
        m = make_matrix([[100, 50], [200, 0]])
        out = rescale_counts(m, 50)
        assert out.counts.tolist() == [[2, 1], [4, 0]]

    def test_scale_one_is_identity(self):
        m = make_matrix([[3, 1], [0, 5]])
        out = rescale_counts(m, 1)
        assert np.array_equal(out.counts, m.counts)

    def test_round_half_up(self):
        # 25/50 = 0.5 -> 1, 74/50 = 1.48 -> 1, 75/50 = 1.5 -> 2
        m = make_matrix([[25, 74, 75]])
        assert rescale_counts(m, 50).counts.tolist() == [[1, 1, 2]]

    def test_auto_scale_is_max_total_over_300(self):
        counts = np.zeros((2, 2), dtype=np.int64)
        counts[0] = [15000, 0]
        counts[1] = [300, 0]
        m = make_matrix(counts)
        out = rescale_counts(m, "auto")  # scale = 15000/300 = 50
        assert out.counts.tolist() == [[300, 0], [6, 0]]

    def test_zero_row_rejected_with_advice(self):
        m = make_matrix([[1, 1], [400, 400]])
        with pytest.raises(IngestionError, match="scale"):
            rescale_counts(m, 50)

    def test_nonpositive_scale_rejected(self):
        m = make_matrix([[1, 1]])
        with pytest.raises(IngestionError):
            rescale_counts(m, 0)

    def test_names_preserved(self):
        m = make_matrix([[100, 100]], samples=["x"], features=["a", "b"])
        out = rescale_counts(m, 50)
        assert out.sample_names == ["x"] and out.feature_names == ["a", "b"]


# ---------------------------------------------------------------------------
# Newick parsing and PhyloTree


class TestParseNewick:
    def test_smallest_tree(self):
        t = parse_newick("(A,B);")
        assert t.n_internal == 1
        assert sorted(t.leaf_names) == ["A", "B"]

    def test_two_level_tree(self):
        t = parse_newick("((A,B),(C,D));")
        assert t.n_internal == 3
        assert len(t.children[t.root]) == 2
        assert sorted(t.leaf_names) == ["A", "B", "C", "D"]

    def test_multifurcation(self):
        t = parse_newick("(A,B,C,D);")
        assert t.n_internal == 1
        assert len(t.children[t.root]) == 4

    def test_branch_lengths_discarded(self):
        t = parse_newick("((A:0.1,B:0.22)inner:0.3,C:1):0;")
        assert t.n_internal == 2
        assert sorted(t.leaf_names) == ["A", "B", "C"]

    def test_unary_chain_collapsed(self):
        t = parse_newick("((A,B));")
        assert t.n_internal == 1
        assert sorted(t.leaf_names) == ["A", "B"]

    def test_single_leaf_rejected(self):
        with pytest.raises(IngestionError):
            parse_newick("((A));")

    def test_unbalanced_parentheses(self):
        with pytest.raises(IngestionError, match="offset"):
            parse_newick("((A,B);")
        with pytest.raises(IngestionError, match="offset"):
            parse_newick("(A,B));")

    def test_duplicate_leaf_rejected(self):
        with pytest.raises(IngestionError, match="duplicate leaf"):
            parse_newick("(A,A);")

    def test_empty_and_garbage_input(self):
        with pytest.raises(IngestionError):
            parse_newick(";")
        with pytest.raises(IngestionError):
            parse_newick("(A,B)")  # missing terminator
        with pytest.raises(IngestionError, match="offset"):
            parse_newick("(A,B)(C,D);")

    def test_roundtrip_topology(self):
        for text in ["(A,B);", "((A,B),(C,D));", "((A,B,C),D,(E,F));"]:
            t = parse_newick(text)
            again = parse_newick(t.to_newick())
            assert again.to_newick() == t.to_newick()

    def test_deep_tree_no_recursion_limit(self):
        n = 3000  # a caterpillar this deep overflows a recursive parser
        text = "(" * (n - 1) + "L0"
        for i in range(1, n):
            text += ",L%d)" % i
        text += ";"
        t = parse_newick(text)
        assert t.n_leaves == n
        assert parse_newick(t.to_newick()).n_leaves == n


class TestPhyloTree:
    def test_star(self):
        t = PhyloTree.star(["A", "B", "C"])
        assert t.n_internal == 1 and t.n_leaves == 3
        assert t.leaf_names == ["A", "B", "C"]

    def test_node_paths_are_root_based(self):
        t = parse_newick("((A,B),C);")
        paths = t.node_paths()
        assert paths[0] == "root"
        assert all(p.startswith("root") for p in paths)
        assert len(set(paths)) == len(paths)

    def test_two_roots_rejected(self):
        with pytest.raises(IngestionError, match="root"):
            PhyloTree([-1, -1], [(), ()], ["A", "B"])


# ---------------------------------------------------------------------------
# Count propagation


class TestPropagateTreeCounts:
    def test_star_tree_reproduces_rows(self):
        m = make_matrix([[2, 3, 5], [1, 0, 4]], features=["A", "B", "C"])
        tc = propagate_tree_counts(m, PhyloTree.star(["A", "B", "C"]))
        assert np.array_equal(tc.branch_counts, m.counts)
        assert np.array_equal(tc.node_totals[:, 0], m.row_totals)

    def test_nested_tree_example(self):
        m = make_matrix([[2, 3, 5]], features=["A", "B", "C"])
        tc = propagate_tree_counts(m, parse_newick("((A,B),C);"))
        # internal nodes in preorder: root, then (A,B)
        assert tc.branch_counts[0].tolist() == [5, 5, 2, 3]
        assert tc.node_totals[0].tolist() == [10, 5]
        tc.check()

    def test_column_order_mismatch_resolved_by_name(self):
        m = make_matrix([[2, 3, 5]], features=["C", "A", "B"])
        tc = propagate_tree_counts(m, parse_newick("((A,B),C);"))
        assert tc.branch_counts[0].tolist() == [8, 2, 3, 5]

    def test_zero_column_propagates_zero(self):
        m = make_matrix([[2, 0, 5]], features=["A", "B", "C"])
        tc = propagate_tree_counts(m, parse_newick("((A,B),C);"))
        assert tc.branch_counts[0].tolist() == [2, 5, 2, 0]

    def test_root_totals_equal_row_sums(self):
        rng = np.random.default_rng(5)
        counts = rng.integers(0, 30, size=(4, 6))
        counts[:, 0] += 1
        m = make_matrix(counts)
        tree = parse_newick("((f0,f1),(f2,(f3,f4)),f5);")
        tc = propagate_tree_counts(m, tree)
        assert np.array_equal(tc.node_totals[:, 0], m.row_totals)
        tc.check()

    def test_leaf_mismatch_lists_names(self):
        m = make_matrix([[1, 2]], features=["A", "X"])
        with pytest.raises(IngestionError, match="B") as err:
            propagate_tree_counts(m, parse_newick("(A,B);"))
        assert "X" in str(err.value)
