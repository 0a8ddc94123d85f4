"""Evaluation of learned trees against a reference taxonomy, review exports
and robustness sweeps.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field
from typing import List, Tuple

import numpy as np
import pandas as pd
from scipy.stats import ttest_rel

from folkgather.core import run_strategy, snowball
from folkgather.errors import InputError
from folkgather.folksonomy import FolkNode, Folksonomy, render_tree
from folkgather.similarity import swap_preferences

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['seed', 'strategy', 'depth', 'lp', 'to', 'to_all_terms',
                  'node_count', 'pct_expert']


def _tree(learned):
    tree = learned.popular if isinstance(learned, Folksonomy) else learned
    if tree is None:
        raise InputError("learned folksonomy has no tree to evaluate")
    return tree


def lexical_precision(learned, reference):
    """Share of distinct learned labels that also name a reference concept."""
    labels = _tree(learned).labels()
    if not labels:
        raise InputError("learned tree is empty")
    return len(labels & reference.names) / len(labels)


class LabelGraph:
    """Parent -> child adjacency over labels, with reachability queries."""

    def __init__(self, edges, labels=()):
        self.down = {}
        self.up = {}
        for parent, child in edges:
            self.down.setdefault(parent, set()).add(child)
            self.up.setdefault(child, set()).add(parent)
        self.labels = set(labels) | set(self.down) | set(self.up)

    @staticmethod
    def _reach(adjacency, start):
        seen = set()
        queue = deque([start])
        while queue:
            for nxt in adjacency.get(queue.popleft(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen

    def cotopy(self, term):
        """The term plus all its ancestors and descendants."""
        return {term} | self._reach(self.up, term) | self._reach(self.down, term)


def _jaccard(a, b):
    union = a | b
    return len(a & b) / len(union) if union else 1.0


def taxonomic_overlap(learned, reference, all_terms=False):
    """Mean Jaccard of semantic cotopies, restricted to the shared vocabulary.

    With all_terms the Jaccard sum is divided by the number of learned labels
    instead of the number of shared ones.
    """
    tree = _tree(learned)
    labels = tree.labels()
    shared = labels & reference.names
    if not shared:
        raise InputError("learned tree and reference share no terms")
    learned_graph = LabelGraph(tree.edges(), labels)
    reference_graph = LabelGraph(reference.edges, reference.names)
    total = 0.0
    for term in sorted(shared):
        total += _jaccard(learned_graph.cotopy(term) & shared,
                          reference_graph.cotopy(term) & shared)
    return total / (len(labels) if all_terms else len(shared))


@dataclass
class EvalReport:
    seed: str
    strategy: str
    depth: int
    lp: float
    to: float
    to_all_terms: float
    node_count: int
    pct_expert: float = 0.0


def evaluate(learned, reference, seed=None, strategy=None, pct_expert=0.0):
    """Compute an EvalReport; TO is 0 when no term is shared (LP is then 0 too)."""
    tree = _tree(learned)
    lp = lexical_precision(tree, reference)
    if lp > 0:
        to = taxonomic_overlap(tree, reference)
        to_all = taxonomic_overlap(tree, reference, all_terms=True)
    else:
        logger.warning(f"Tree '{tree.label}' shares no term with the reference; TO set to 0")
        to = to_all = 0.0
    return EvalReport(seed=seed if seed is not None else tree.label, strategy=strategy or '',
                      depth=tree.depth(), lp=lp, to=to, to_all_terms=to_all,
                      node_count=tree.size(), pct_expert=pct_expert)


def reports_table(reports):
    return pd.DataFrame([asdict(r) for r in reports], columns=REPORT_COLUMNS)


def pivot_reports(table):
    """One row per seed with depth/LP/TO/%EXP columns per strategy, plus an average row."""
    wide = table.pivot(index='seed', columns='strategy',
                       values=['depth', 'lp', 'to', 'pct_expert'])
    wide.columns = [f"{metric}_{strategy}" for metric, strategy in wide.columns]
    wide.loc['average'] = wide.mean(numeric_only=True)
    return wide


def write_reports(reports, path):
    reports_table(reports).to_csv(path, index=False, float_format='%.6f')
    return path


def compare_strategies(first, second):
    """Paired t-test over per-seed scores; returns t, p and degrees of freedom."""
    first, second = np.asarray(first, dtype=float), np.asarray(second, dtype=float)
    if len(first) != len(second) or len(first) < 2:
        raise InputError("paired comparison needs two equally long lists of >= 2 scores")
    result = ttest_rel(second, first)
    return {'t': float(result.statistic), 'p': float(result.pvalue), 'df': len(first) - 1,
            'mean_first': float(first.mean()), 'mean_second': float(second.mean())}


# --- tree reduction for review ----------------------------------------------

def copy_tree(node):
    clone = FolkNode(node.label, node.members, node.exemplar)
    for child in node.children:
        clone.add_child(copy_tree(child))
    return clone


def _leaves_by_path(root):
    found = {}
    stack = [(root, (root.label,))]
    while stack:
        node, path = stack.pop()
        if not node.children and node is not root:
            found.setdefault(path, []).append(node)
        for child in node.children:
            stack.append((child, path + (child.label,)))
    return found


def _detach(node):
    node.parent.children.remove(node)
    node.parent = None


@dataclass
class ReducedPair:
    first: FolkNode
    second: FolkNode
    removed: int
    original_nodes: int
    segments_first: List[Tuple[tuple, FolkNode]] = field(default_factory=list)
    segments_second: List[Tuple[tuple, FolkNode]] = field(default_factory=list)

    @property
    def reduction(self):
        return self.removed / self.original_nodes if self.original_nodes else 0.0


def segment_tree(tree, max_children=10):
    """Split a tree into subtrees with at most max_children children per node.

    Overflowing children go to continuation segments rooted at a copy of their
    parent; each segment carries the label path above its root.
    """
    segments = []

    def visit(node, path):
        groups = [node.children[k:k + max_children]
                  for k in range(0, len(node.children), max_children)]
        clone = FolkNode(node.label, node.members, node.exemplar)
        for child in (groups[0] if groups else []):
            clone.add_child(visit(child, path + (node.label,)))
        for group in groups[1:]:
            extra = FolkNode(node.label, node.members, node.exemplar)
            for child in group:
                extra.add_child(visit(child, path + (node.label,)))
            segments.append((path, extra))
        return clone

    segments.insert(0, ((), visit(tree, ())))
    return segments


def reduce_tree_pair(first, second, max_children=10):
    """Drop leaves with the same label path from both trees until none remain,
    then segment both trees for review.
    """
    if max_children < 1:
        raise InputError("max_children must be >= 1")
    a, b = copy_tree(_tree(first)), copy_tree(_tree(second))
    if a.label != b.label:
        logger.warning(f"Reducing trees with different roots '{a.label}' and '{b.label}'")
    original = a.size() + b.size()
    removed = 0
    while True:
        leaves_a, leaves_b = _leaves_by_path(a), _leaves_by_path(b)
        matched = 0
        for path in sorted(set(leaves_a) & set(leaves_b)):
            pairs = min(len(leaves_a[path]), len(leaves_b[path]))
            for node in leaves_a[path][:pairs] + leaves_b[path][:pairs]:
                _detach(node)
            matched += pairs
        if not matched:
            break
        removed += 2 * matched
    logger.info(f"Tree reduction removed {removed} of {original} node(s)")
    return ReducedPair(a, b, removed, original,
                       segment_tree(a, max_children), segment_tree(b, max_children))


def review_export(pair, seed, first_strategy, second_strategy):
    """Human-review items: one per segment of each reduced tree."""
    items = []
    for strategy, segments in ((first_strategy, pair.segments_first),
                               (second_strategy, pair.segments_second)):
        for k, (path, segment) in enumerate(segments, start=1):
            items.append({
                'question_id': f"{seed}-{strategy}-{k:03d}",
                'source_strategy': strategy,
                'context': ' > '.join(path),
                'subtree': '\n'.join(render_tree(segment)),
            })
    return items


# --- robustness sweeps ------------------------------------------------------

@dataclass
class SweepResult:
    axis: str
    points: List[Tuple[float, float]]

    def table(self):
        return pd.DataFrame(self.points, columns=[self.axis, 'to'])


def _check_increasing(values, what):
    values = list(values)
    if any(b <= a for a, b in zip(values, values[1:])):
        raise InputError(f"{what} must be strictly increasing, got {values}")
    return values


def _score(outcome, reference):
    return evaluate(outcome.folksonomy, reference).to if outcome.tree is not None else 0.0


def _run_points(score_point, values, config):
    """Score every sweep point, up to config.threads at a time, in value order.

    Each point runs single-threaded; RAP output does not depend on threads.
    """
    point_config = config.replaced(threads=1)
    if config.threads > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=min(config.threads, len(values))) as pool:
            scores = list(pool.map(lambda v: score_point(v, point_config), values))
    else:
        scores = [score_point(v, point_config) for v in values]
    return [(float(v), s) for v, s in zip(values, scores)]


def preference_sweep(corpus, seed, expert_users, multipliers, config, reference):
    """TO of an expert-boosted run for each preference multiplier."""
    multipliers = _check_increasing(multipliers, 'multipliers')
    sample = snowball(corpus, seed, config.max_rounds)

    def score_point(x, point_config):
        outcome = run_strategy(corpus, seed, 'm3', expert_users, point_config, sample=sample,
                               multiplier=x)
        to = _score(outcome, reference)
        logger.info(f"Preference sweep x={x}: TO={to:.4f}")
        return to

    return SweepResult('preference_multiplier', _run_points(score_point, multipliers, config))


def swap_sweep(corpus, seed, expert_users, percents, config, reference, rng_seed=0):
    """TO of an expert-boosted run after swapping percent% of expert preferences with novices.

    Every point draws from its own generator seeded with rng_seed.
    """
    if not expert_users:
        raise InputError("swap sweep needs a nonempty expert set")
    percents = _check_increasing(percents, 'percents')
    if any(not 0 <= p <= 100 for p in percents):
        raise InputError("swap percents must lie in [0, 100]")
    experts = set(expert_users)
    sample = snowball(corpus, seed, config.max_rounds)

    def score_point(percent, point_config):
        rng = np.random.default_rng(rng_seed)

        def transform(matrix):
            expert_nodes = {n.node_id for n in matrix.nodes if n.owner in experts}
            return swap_preferences(matrix, expert_nodes, percent, rng)

        outcome = run_strategy(corpus, seed, 'm3', experts, point_config, sample=sample,
                               preference_transform=transform)
        to = _score(outcome, reference)
        logger.info(f"Swap sweep {percent}%: TO={to:.4f}")
        return to

    return SweepResult('swap_percent', _run_points(score_point, percents, config))


def write_sweep(result, path):
    result.table().to_csv(path, index=False, float_format='%.6f')
    return path

