"""Sparse node similarities and preferences (self-similarities).

Two nodes are merge candidates when they carry the same stemmed name, come
from different saplings and share at least one of their top-k tags. Pairs
that are not candidates are simply absent from the matrix.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from folkgather.errors import InputError

logger = logging.getLogger(__name__)

TOP_K = 40
DIVISOR = 4.0

UNIFORM_MEAN = 'uniform_mean'
EXPERT_BOOSTED = 'expert_boosted'


def top_tags(node, k=TOP_K):
    """The k most frequent tags of a node, count descending, ties by name."""
    return node.tags.ranked()[:k]


def node_similarity(a, b, k=TOP_K, divisor=DIVISOR):
    """min(1, shared top-k tags / divisor)."""
    shared = len(set(top_tags(a, k)) & set(top_tags(b, k)))
    return min(1.0, shared / divisor)


@dataclass(frozen=True)
class PreferenceStrategy:
    mode: str = UNIFORM_MEAN
    expert_multiplier: float = 2.0

    def __post_init__(self):
        if self.mode not in (UNIFORM_MEAN, EXPERT_BOOSTED):
            raise InputError(f"unknown preference mode '{self.mode}'")
        if self.expert_multiplier < 0:
            raise InputError(f"expert multiplier must be >= 0, got {self.expert_multiplier}")


class SimilarityMatrix:
    """Symmetric sparse similarities between candidate nodes plus per-node preferences.

    Row/column i refers to self.nodes[i]; self.index maps node_id -> i.
    """

    def __init__(self, nodes, entries, preferences=None):
        self.nodes = list(nodes)
        self.index = {node.node_id: i for i, node in enumerate(self.nodes)}
        self.entries = sparse.csr_matrix(entries, shape=(len(self.nodes), len(self.nodes)))
        self.entries.sort_indices()
        if preferences is None:
            preferences = np.zeros(len(self.nodes))
        self.preferences = np.asarray(preferences, dtype=float)

    @property
    def n(self):
        return len(self.nodes)

    @property
    def nnz(self):
        return self.entries.nnz

    def mean_similarity(self):
        if not self.entries.nnz:
            raise InputError("similarity matrix has no entries")
        return float(self.entries.data.mean())

    def candidates(self, i):
        """Column indices of stored entries in row i, ascending."""
        lo, hi = self.entries.indptr[i], self.entries.indptr[i + 1]
        return self.entries.indices[lo:hi]

    def with_preferences(self, preferences):
        return SimilarityMatrix(self.nodes, self.entries, preferences)

    def scaled(self, factor):
        """Similarities and preferences both multiplied by factor."""
        return SimilarityMatrix(self.nodes, self.entries * factor, self.preferences * factor)

    def __repr__(self):
        return f"SimilarityMatrix(n={self.n}, entries={self.nnz})"


def build_similarity(nodes, k=TOP_K, divisor=DIVISOR):
    """Compute the candidate similarities among the given nodes.

    Nodes are indexed in the order given. Only same-name groups are compared.
    """
    nodes = list(nodes)
    tops = [set(top_tags(node, k)) for node in nodes]
    groups = {}
    for i, node in enumerate(nodes):
        groups.setdefault(node.name, []).append(i)

    rows, cols, vals = [], [], []
    for members in groups.values():
        for a_pos, i in enumerate(members):
            for j in members[a_pos + 1:]:
                if nodes[i].sapling_id == nodes[j].sapling_id:
                    continue
                value = min(1.0, len(tops[i] & tops[j]) / divisor)
                if value > 0:
                    rows.extend((i, j))
                    cols.extend((j, i))
                    vals.extend((value, value))
    entries = sparse.coo_matrix((vals, (rows, cols)), shape=(len(nodes), len(nodes))).tocsr()
    matrix = SimilarityMatrix(nodes, entries)
    logger.info(f"Similarity matrix: {matrix.n} node(s), {matrix.nnz // 2} candidate pair(s)")
    return matrix


def assign_preferences(matrix, strategy, expert_nodes=()):
    """Return a copy of matrix with preferences set from the mean stored similarity.

    uniform_mean gives every node the mean; expert_boosted gives nodes in
    expert_nodes (node ids) multiplier * mean.
    """
    mean = matrix.mean_similarity()
    preferences = np.full(matrix.n, mean)
    if strategy.mode == EXPERT_BOOSTED:
        experts = set(expert_nodes)
        for i, node in enumerate(matrix.nodes):
            if node.node_id in experts:
                preferences[i] = strategy.expert_multiplier * mean
    logger.debug(f"Preferences: mode={strategy.mode}, mean={mean:.6g}")
    return matrix.with_preferences(preferences)


def swap_preferences(matrix, expert_nodes, percent, rng):
    """Swap the preferences of percent% of expert nodes with as many random novice nodes."""
    experts = [i for i, node in enumerate(matrix.nodes) if node.node_id in expert_nodes]
    novices = [i for i, node in enumerate(matrix.nodes) if node.node_id not in expert_nodes]
    count = min(int(round(len(experts) * percent / 100.0)), len(novices))
    preferences = matrix.preferences.copy()
    if count:
        picked_experts = rng.choice(experts, size=count, replace=False)
        picked_novices = rng.choice(novices, size=count, replace=False)
        preferences[picked_experts], preferences[picked_novices] = \
            matrix.preferences[picked_novices], matrix.preferences[picked_experts]
    logger.debug(f"Swapped preferences of {count} expert/novice node pair(s)")
    return matrix.with_preferences(preferences)


def write_matrix(matrix, path):
    """Dump `i j s` lines for every stored entry and `pref j p` lines (node ids)."""
    coo = matrix.entries.tocoo()
    triples = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    with open(path, 'w', encoding='utf-8') as f:
        for i, j, s in triples:
            f.write(f"{matrix.nodes[i].node_id} {matrix.nodes[j].node_id} {s:.10g}\n")
        for j, p in enumerate(matrix.preferences):
            f.write(f"pref {matrix.nodes[j].node_id} {p:.10g}\n")
    return path
