"""Count tables, phylogenetic trees, and the count propagation between them.

Samples are rows, taxa (OTUs) are columns.  Trees are rooted, with every
internal node holding at least two children after construction; unary chains
produced by pruning or sloppy Newick exports are collapsed on ingestion.
"""

import numpy as np

from .errors import IngestionError

__all__ = [
    "CountMatrix",
    "PhyloTree",
    "TreeCounts",
    "parse_count_table",
    "parse_newick",
    "rescale_counts",
    "propagate_tree_counts",
    "match_leaves",
]


class CountMatrix:
    """A non-negative integer count table with named samples and features.

    Parameters
    ----------
    counts : array_like of int, shape (n_samples, n_features)
    sample_names : sequence of str
    feature_names : sequence of str
    """

    def __init__(self, counts, sample_names, feature_names):
        counts = np.asarray(counts)
        if counts.ndim != 2:
            raise IngestionError("count matrix must be two-dimensional")
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.floor(counts)):
                raise IngestionError("count matrix contains non-integer values")
            counts = counts.astype(np.int64)
        counts = counts.astype(np.int64)
        if np.any(counts < 0):
            i, j = np.argwhere(counts < 0)[0]
            raise IngestionError(
                "negative count at sample %r, feature %r"
                % (list(sample_names)[i], list(feature_names)[j])
            )
        sample_names = [str(s) for s in sample_names]
        feature_names = [str(f) for f in feature_names]
        if len(sample_names) != counts.shape[0]:
            raise IngestionError("sample name count does not match row count")
        if len(feature_names) != counts.shape[1]:
            raise IngestionError("feature name count does not match column count")
        for names, what in ((sample_names, "sample"), (feature_names, "feature")):
            if len(set(names)) != len(names):
                dup = sorted({n for n in names if names.count(n) > 1})
                raise IngestionError("duplicate %s name(s): %s" % (what, ", ".join(dup)))
        row_sums = counts.sum(axis=1)
        if np.any(row_sums == 0):
            i = int(np.argmin(row_sums))
            raise IngestionError("sample %r has zero total count" % sample_names[i])
        self.counts = counts
        self.sample_names = sample_names
        self.feature_names = feature_names

    @property
    def n_samples(self):
        return self.counts.shape[0]

    @property
    def n_features(self):
        return self.counts.shape[1]

    @property
    def row_totals(self):
        return self.counts.sum(axis=1)

    def __repr__(self):
        return "CountMatrix(%d samples x %d features)" % self.counts.shape

    def to_tsv(self):
        """Serialize to a tab-separated table (header row of feature names,
        first column of sample names)."""
        lines = ["\t".join(["sample"] + self.feature_names)]
        for name, row in zip(self.sample_names, self.counts):
            lines.append(name + "\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def parse_count_table(text):
    """Parse a TSV count table into a :class:`CountMatrix`.

    The first row holds feature names (optionally preceded by a corner
    label), the first column holds sample names.  Cells must be
    non-negative integers; errors name the offending row and column.
    """
    rows = [line.split("\t") for line in text.splitlines() if line.strip() != ""]
    if len(rows) < 2:
        raise IngestionError("count table needs a header row and at least one sample row")
    header, body = rows[0], rows[1:]
    width = len(body[0])
    for r, fields in enumerate(body):
        if len(fields) != width:
            raise IngestionError(
                "row %d has %d fields, expected %d" % (r + 2, len(fields), width)
            )
    if len(header) == width:
        feature_names = [h.strip() for h in header[1:]]  # corner label present
    elif len(header) == width - 1:
        feature_names = [h.strip() for h in header]
    else:
        raise IngestionError(
            "header has %d fields but data rows have %d" % (len(header), width)
        )
    sample_names = [fields[0].strip() for fields in body]
    counts = np.empty((len(body), width - 1), dtype=np.int64)
    for r, fields in enumerate(body):
        for c, cell in enumerate(fields[1:]):
            try:
                value = int(cell)
            except ValueError:
                raise IngestionError(
                    "non-integer count %r at sample %r, feature %r"
                    % (cell, sample_names[r], feature_names[c])
                ) from None
            if value < 0:
                raise IngestionError(
                    "negative count at sample %r, feature %r"
                    % (sample_names[r], feature_names[c])
                )
            counts[r, c] = value
    return CountMatrix(counts, sample_names, feature_names)


def rescale_counts(m, scale="auto"):
    """Divide all counts by ``scale`` and round half-up to integers.

    ``scale="auto"`` uses (max row total) / 300.  Returns a new
    :class:`CountMatrix`; raises if any row would round to all zeros.
    """
    if scale == "auto":
        scale = m.counts.sum(axis=1).max() / 300.0
    scale = float(scale)
    if not scale > 0:
        raise IngestionError("rescaling factor must be positive, got %r" % scale)
    scaled = np.floor(m.counts / scale + 0.5).astype(np.int64)  # round half-up
    if np.any(scaled.sum(axis=1) == 0):
        i = int(np.argmin(scaled.sum(axis=1)))
        raise IngestionError(
            "sample %r rescales to an all-zero row (scale %g too large)"
            % (m.sample_names[i], scale)
        )
    return CountMatrix(scaled, list(m.sample_names), list(m.feature_names))


class PhyloTree:
    """A rooted tree over named leaves.

    Internal nodes all have >= 2 children: single-child chains are collapsed
    when the tree is built, so node counts over the collapsed edge are
    preserved.  Nodes are indexed 0..n_nodes-1 with internal nodes listed in
    preorder by :attr:`internal_nodes`.
    """

    def __init__(self, parent, children, names):
        self.parent = np.asarray(parent, dtype=np.int64)
        self.children = [tuple(ch) for ch in children]
        self.names = list(names)  # leaf name, or internal label / "" if unnamed
        roots = np.flatnonzero(self.parent < 0)
        if len(roots) != 1:
            raise IngestionError("tree must have exactly one root")
        self.root = int(roots[0])
        self.leaves = [i for i in self._preorder() if not self.children[i]]
        self.internal_nodes = [i for i in self._preorder() if self.children[i]]
        self.leaf_names = [self.names[i] for i in self.leaves]
        if len(set(self.leaf_names)) != len(self.leaf_names):
            dup = sorted({n for n in self.leaf_names if self.leaf_names.count(n) > 1})
            raise IngestionError("duplicate leaf name(s): %s" % ", ".join(dup))
        for i in self.internal_nodes:
            if len(self.children[i]) < 2:
                raise IngestionError("internal node with a single child survived collapse")

    def _preorder(self):
        order, stack = [], [self.root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children[node]))
        return order

    @property
    def n_leaves(self):
        return len(self.leaves)

    @property
    def n_internal(self):
        return len(self.internal_nodes)

    def node_paths(self):
        """Human-readable path labels for internal nodes, e.g. ``root/1/0``."""
        path = {self.root: "root"}
        for i in self._preorder():
            for k, ch in enumerate(self.children[i]):
                path[ch] = "%s/%d" % (path[i], k)
        return [path[i] for i in self.internal_nodes]

    def to_newick(self):
        rendered = {}
        stack = [(self.root, False)]
        while stack:  # explicit stack: trees can be deeper than Python recursion allows
            node, expanded = stack.pop()
            if not self.children[node]:
                rendered[node] = self.names[node]
            elif expanded:
                inner = ",".join(rendered[ch] for ch in self.children[node])
                rendered[node] = "(%s)%s" % (inner, self.names[node])
            else:
                stack.append((node, True))
                stack.extend((ch, False) for ch in reversed(self.children[node]))
        return rendered[self.root] + ";"

    @classmethod
    def star(cls, leaf_names):
        """Star tree: a single internal root with every leaf as a child."""
        n = len(leaf_names)
        parent = [-1] + [0] * n
        children = [tuple(range(1, n + 1))] + [()] * n
        return cls(parent, children, [""] + list(leaf_names))


def parse_newick(text):
    """Parse a Newick string into a :class:`PhyloTree`.

    Branch lengths are accepted and discarded (only the topology matters
    here).  Unary internal nodes are collapsed.  Errors report the character
    offset of the problem.  The parser is iterative, so arbitrarily deep
    trees are fine.
    """
    s = text.strip()
    if not s.endswith(";"):
        raise IngestionError("newick string must end with ';'")
    s = s[:-1]
    pos = 0

    def error(msg):
        raise IngestionError("newick parse error at offset %d: %s" % (pos, msg))

    def read_label():
        nonlocal pos
        start = pos
        while pos < len(s) and s[pos] not in "(),:":
            pos += 1
        label = s[start:pos].strip()
        if pos < len(s) and s[pos] == ":":  # skip branch length
            pos += 1
            start = pos
            while pos < len(s) and s[pos] not in "(),":
                pos += 1
            if s[start:pos].strip() == "":
                error("expected a branch length after ':'")
        return label

    nodes = []  # [child ids, name]; children are always created before parents
    stack = []  # open internal nodes: lists of completed child ids
    current = None
    while pos < len(s):
        c = s[pos]
        if c == "(":
            if current is not None:
                error("unexpected '(' after a complete subtree")
            stack.append([])
            pos += 1
        elif c == ",":
            if current is None or not stack:
                error("expected a subtree before ','")
            stack[-1].append(current)
            current = None
            pos += 1
        elif c == ")":
            if current is None or not stack:
                error("expected a subtree before ')'")
            kids = stack.pop()
            kids.append(current)
            pos += 1
            nodes.append([kids, read_label()])
            current = len(nodes) - 1
        else:
            if current is not None:
                error("unexpected text after a complete subtree")
            label = read_label()
            if label == "":
                error("expected a leaf name")
            nodes.append([[], label])
            current = len(nodes) - 1
    if stack:
        error("unbalanced '('")
    if current is None:
        error("empty tree")
    root = current

    # collapse unary chains: children precede parents, so one forward pass
    # with id forwarding suffices
    forward = list(range(len(nodes)))
    for idx, (kids, _) in enumerate(nodes):
        kids[:] = [forward[k] for k in kids]
        if len(kids) == 1:
            forward[idx] = kids[0]
    root = forward[root]
    if not nodes[root][0]:
        raise IngestionError("tree has a single leaf and no internal structure")

    # re-index nodes reachable from the root, preorder
    index = {}
    order = []
    walk = [root]
    while walk:
        idx = walk.pop()
        index[idx] = len(order)
        order.append(idx)
        walk.extend(reversed(nodes[idx][0]))
    parent = [-1] * len(order)
    children = [tuple(index[k] for k in nodes[idx][0]) for idx in order]
    names = [nodes[idx][1] for idx in order]
    for i, ch in enumerate(children):
        for k in ch:
            parent[k] = i
    return PhyloTree(parent, children, names)


def match_leaves(tree, m):
    """Map tree leaves to count-matrix columns by name.

    Returns an int array ``cols`` with ``cols[i]`` the matrix column of the
    i-th leaf in ``tree.leaves`` order.  Raises listing any names present on
    one side only.
    """
    col_of = {name: j for j, name in enumerate(m.feature_names)}
    missing = [n for n in tree.leaf_names if n not in col_of]
    extra = [n for n in m.feature_names if n not in set(tree.leaf_names)]
    if missing or extra:
        parts = []
        if missing:
            parts.append("tree leaves missing from table: %s" % ", ".join(missing[:10]))
        if extra:
            parts.append("table features missing from tree: %s" % ", ".join(extra[:10]))
        raise IngestionError("; ".join(parts))
    return np.array([col_of[n] for n in tree.leaf_names], dtype=np.int64)


class TreeCounts:
    """Per-sample counts pushed up a tree.

    ``branch_counts[i, b]`` is the count of sample i entering branch b, where
    branches are grouped by owning internal node: branches of internal node j
    (in :attr:`PhyloTree.internal_nodes` order) occupy the slice
    ``node_offsets[j]:node_offsets[j+1]``, in child order.  ``node_totals``
    holds the per-node totals (the count entering the node itself).
    """

    def __init__(self, branch_counts, node_totals, node_offsets, child_counts, node_labels):
        self.branch_counts = np.asarray(branch_counts, dtype=np.int64)
        self.node_totals = np.asarray(node_totals, dtype=np.int64)
        self.node_offsets = np.asarray(node_offsets, dtype=np.int64)
        self.child_counts = np.asarray(child_counts, dtype=np.int64)
        self.node_labels = list(node_labels)

    @property
    def n_samples(self):
        return self.branch_counts.shape[0]

    @property
    def n_nodes(self):
        return len(self.child_counts)

    def check(self):
        """Verify the within-node sum identity; raises on violation."""
        for j in range(self.n_nodes):
            sl = slice(self.node_offsets[j], self.node_offsets[j + 1])
            if not np.array_equal(self.branch_counts[:, sl].sum(axis=1), self.node_totals[:, j]):
                raise IngestionError(
                    "branch counts of node %s do not sum to its total" % self.node_labels[j]
                )


def propagate_tree_counts(m, tree):
    """Accumulate leaf counts up ``tree`` for every sample of ``m``.

    Each leaf count flows to every ancestor; an internal node's total equals
    the sum of its branch counts.  Returns a :class:`TreeCounts`.
    """
    cols = match_leaves(tree, m)
    n = m.n_samples
    node_tot = np.zeros((n, len(tree.parent)), dtype=np.int64)
    for leaf, col in zip(tree.leaves, cols):
        node_tot[:, leaf] = m.counts[:, col]
    # children precede parents nowhere in general, so accumulate bottom-up
    for node in reversed(tree._preorder()):
        for ch in tree.children[node]:
            node_tot[:, node] += node_tot[:, ch]
    internal = tree.internal_nodes
    child_counts = np.array([len(tree.children[j]) for j in internal], dtype=np.int64)
    node_offsets = np.concatenate([[0], np.cumsum(child_counts)])
    branch = np.empty((n, int(node_offsets[-1])), dtype=np.int64)
    for jj, j in enumerate(internal):
        for k, ch in enumerate(tree.children[j]):
            branch[:, node_offsets[jj] + k] = node_tot[:, ch]
    labels = tree.node_paths()
    tc = TreeCounts(branch, node_tot[:, internal], node_offsets, child_counts, labels)
    tc.check()
    return tc
