"""Expertise features computed from a user's saplings.

Features come in three groups:
  user-level     variety, twigs, balance, disparity, conflicts
  sapling-level  structure, uniqueness, agreement (aggregated per user by mean and max)
  root-level     how much users agree on the children of the user's root names
"""

import itertools
import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict

import numpy as np
import pandas as pd
from scipy.spatial.distance import jensenshannon
from scipy.stats import entropy

from folkgather.errors import InputError

logger = logging.getLogger(__name__)

COVERAGE_LEVELS = (30, 50, 70)

USER_COLUMNS = [
    'user_variety',
    'user_num_twigs',
    'user_balance',
    'user_disparity',
    'user_disparity_normalized',
    'user_num_conflicts',
]

# Depth first: ties in the rankers keep column order.
SAPLING_FIELDS = [
    'depth',
    'variety',
    'balance',
    'breadth',
    'num_nodes',
    'num_leaves',
    'leaf_ratio',
    'num_children_of_root',
    'unique_twig_ratio',
    'unique_term_ratio',
    'duplicate_child_ratio',
    'num_conflicts',
    'agreement',
]

ROOT_FIELDS = [
    'num_creators',
    'num_unique_children',
    'coverage_30',
    'coverage_50',
    'coverage_70',
]

FEATURE_COLUMNS = (
    USER_COLUMNS
    + [f"sapling_{f}_{agg}" for f in SAPLING_FIELDS for agg in ('mean', 'max')]
    + [f"root_{f}_{agg}" for f in ROOT_FIELDS for agg in ('mean', 'max')]
)


@dataclass
class UserFeatures:
    variety: int
    num_twigs: int
    balance: float
    disparity: float
    disparity_normalized: float
    num_conflicts: int


@dataclass
class SaplingFeatures:
    variety: int
    balance: float
    depth: int
    breadth: int
    num_nodes: int
    num_leaves: int
    leaf_ratio: float
    num_children_of_root: int
    unique_twig_ratio: float
    unique_term_ratio: float
    duplicate_child_ratio: float
    num_conflicts: int
    agreement: float


@dataclass
class RootDiversity:
    root_name: str
    num_creators: int
    num_unique_children: int
    coverage_30: float
    coverage_50: float
    coverage_70: float


# --- user-level -------------------------------------------------------------

def user_balance(sapling_sizes):
    """Normalized entropy of sapling sizes; 0.0 for a single sapling."""
    sizes = list(sapling_sizes)
    if not sizes:
        raise InputError("user_balance needs at least one sapling size")
    if any(s <= 0 for s in sizes):
        raise InputError(f"sapling sizes must be positive, got {sizes}")
    if len(sizes) == 1:
        return 0.0
    value = entropy(np.asarray(sizes, dtype=float)) / math.log(len(sizes))
    return float(min(1.0, max(0.0, value)))


def _aligned(bag_a, bag_b):
    vocab = sorted(set(bag_a.entries) | set(bag_b.entries))
    p = np.array([bag_a.entries.get(t, 0) for t in vocab], dtype=float)
    q = np.array([bag_b.entries.get(t, 0) for t in vocab], dtype=float)
    return p, q


def js_divergence(bag_a, bag_b):
    """Jensen-Shannon divergence (natural log) between two tag bags."""
    p, q = _aligned(bag_a, bag_b)
    # scipy returns the distance, the square root of the divergence
    return float(jensenshannon(p, q) ** 2)


def user_disparity(tag_bags, node_count=None):
    """Sum of pairwise JS divergences and that sum divided by the node count.

    `node_count` defaults to one node per bag. Empty bags are skipped.
    """
    bags = [b for b in tag_bags if b.total()]
    if len(bags) < len(tag_bags):
        logger.debug(f"Disparity: skipped {len(tag_bags) - len(bags)} empty tag bag(s)")
    if len(bags) < 2:
        return 0.0, 0.0
    disparity = sum(js_divergence(a, b) for a, b in itertools.combinations(bags, 2))
    nodes = node_count if node_count is not None else len(tag_bags)
    return disparity, (disparity / nodes if nodes else 0.0)


def _reversed_pairs(twig_set):
    """Unordered name pairs {a, b} with both a->b and b->a present."""
    return {frozenset((a, b)) for a, b in twig_set if a != b and (b, a) in twig_set}


def count_conflicts(saplings):
    """Number of name pairs attached in both directions across the saplings."""
    twigs = set()
    for sapling in saplings:
        twigs.update(sapling.twigs())
    return len(_reversed_pairs(twigs))


# --- sapling-level ----------------------------------------------------------

def sapling_variety(sapling):
    return sum(level * n for level, n in enumerate(sapling.level_sizes(), start=1))


def level_balance(children_counts):
    """Normalized entropy of the children counts of one level's nodes.

    A level with a single node or no children at all counts as balanced.
    """
    counts = np.asarray(children_counts, dtype=float)
    if len(counts) < 2 or counts.sum() == 0:
        return 1.0
    return float(entropy(counts) / math.log(len(counts)))


def sapling_balance(sapling):
    """Mean of level_balance over all levels of the sapling."""
    by_level = {}
    for node in sapling.nodes.values():
        by_level.setdefault(node.depth_level, []).append(len(node.children))
    terms = [level_balance(by_level[level]) for level in sorted(by_level)]
    return float(min(1.0, max(0.0, sum(terms) / len(terms))))


def twig_agreement(corpus):
    """Map each (parent name, child name) twig to the number of distinct users creating it."""
    owners = {}
    for sapling in corpus.saplings.values():
        for twig in sapling.twigs():
            owners.setdefault(twig, set()).add(sapling.owner)
    return {twig: len(users) for twig, users in owners.items()}


def _duplicate_child_ratio(sapling):
    total = len(sapling.nodes) - 1
    if total <= 0:
        return 0.0
    duplicated = 0
    for node in sapling.nodes.values():
        names = Counter(sapling.nodes[c].name for c in node.children)
        duplicated += sum(n for n in names.values() if n > 1)
    return duplicated / total


def sapling_features(sapling, agreement_index, user_twigs):
    """Compute SaplingFeatures; `user_twigs` is the owner's twig set across saplings."""
    sizes = sapling.level_sizes()
    twigs = sapling.twigs()
    num_nodes = len(sapling.nodes)
    num_leaves = len(sapling.leaves())
    if twigs:
        support = [agreement_index.get(t, 1) for t in twigs]
        agreement = float(np.mean(support))
        unique_twig_ratio = len(set(twigs)) / len(twigs)
    else:
        agreement = 0.0
        unique_twig_ratio = 1.0
    names = [n.name for n in sapling.nodes.values()]
    conflicts = sum(1 for a, b in set(twigs) if a != b and (b, a) in user_twigs)
    return SaplingFeatures(
        variety=sapling_variety(sapling),
        balance=sapling_balance(sapling),
        depth=len(sizes),
        breadth=max(sizes),
        num_nodes=num_nodes,
        num_leaves=num_leaves,
        leaf_ratio=num_leaves / num_nodes,
        num_children_of_root=len(sapling.root_node.children),
        unique_twig_ratio=unique_twig_ratio,
        unique_term_ratio=len(set(names)) / num_nodes,
        duplicate_child_ratio=_duplicate_child_ratio(sapling),
        num_conflicts=conflicts,
        agreement=agreement,
    )


def user_features(saplings):
    sizes = [len(s) for s in saplings]
    disparity, normalized = user_disparity([s.root_node.tags for s in saplings],
                                           node_count=sum(sizes))
    return UserFeatures(
        variety=len(saplings),
        num_twigs=sum(n - 1 for n in sizes),
        balance=user_balance(sizes),
        disparity=disparity,
        disparity_normalized=normalized,
        num_conflicts=count_conflicts(saplings),
    )


# --- root diversity ---------------------------------------------------------

def _child_occurrences(corpus):
    """Root name -> (Counter of child names, set of creators)."""
    index = {}
    for sapling in corpus.saplings.values():
        root = sapling.root_node
        children, creators = index.setdefault(root.name, (Counter(), set()))
        creators.add(sapling.owner)
        for child_id in root.children:
            children[sapling.nodes[child_id].name] += 1
    return index


def coverage(child_counts, q):
    """Percentage of most frequent distinct children needed to cover q% of occurrences."""
    if not child_counts:
        return 0.0
    ordered = sorted(child_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    total = sum(child_counts.values())
    cumulative = 0
    for k, (_, count) in enumerate(ordered, start=1):
        cumulative += count
        if cumulative * 100 >= q * total:
            return 100.0 * k / len(ordered)
    return 100.0


def _diversity(root_name, children, creators):
    cov = {q: coverage(children, q) for q in COVERAGE_LEVELS}
    return RootDiversity(
        root_name=root_name,
        num_creators=len(creators),
        num_unique_children=len(children),
        coverage_30=cov[30],
        coverage_50=cov[50],
        coverage_70=cov[70],
    )


def root_diversity(corpus, root_name, index=None):
    """Child-agreement statistics for all roots carrying root_name."""
    index = index if index is not None else _child_occurrences(corpus)
    if root_name not in index:
        raise InputError(f"'{root_name}' is not a root name in the corpus")
    children, creators = index[root_name]
    return _diversity(root_name, children, creators)


# --- aggregation ------------------------------------------------------------

def _aggregate(prefix, records, fields):
    row = {}
    for field in fields:
        values = [getattr(r, field) for r in records]
        row[f"{prefix}_{field}_mean"] = float(np.mean(values))
        row[f"{prefix}_{field}_max"] = float(np.max(values))
    return row


def _user_row(corpus, user_id, agreement_index, diversity):
    saplings = corpus.saplings_of(user_id)
    uf = user_features(saplings)
    user_twigs = set()
    for s in saplings:
        user_twigs.update(s.twigs())
    row = {f"user_{k}": v for k, v in asdict(uf).items()}
    row.update(_aggregate('sapling',
                          [sapling_features(s, agreement_index, user_twigs) for s in saplings],
                          SAPLING_FIELDS))
    row.update(_aggregate('root', [diversity[s.root_node.name] for s in saplings],
                          ROOT_FIELDS))
    return row


def extract_features(corpus, threads=1):
    """Return one feature row per user (DataFrame indexed by user_id, FEATURE_COLUMNS order)."""
    agreement_index = twig_agreement(corpus)
    occurrences = _child_occurrences(corpus)
    diversity = {name: _diversity(name, children, creators)
                 for name, (children, creators) in occurrences.items()}

    users = sorted(u for u, profile in corpus.users.items() if profile.saplings)
    skipped = len(corpus.users) - len(users)
    if skipped:
        logger.debug(f"Skipped {skipped} user(s) without saplings")

    def row_for(user_id):
        return _user_row(corpus, user_id, agreement_index, diversity)

    if threads > 1 and len(users) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row_for, users))
    else:
        rows = [row_for(u) for u in users]

    table = pd.DataFrame(rows, index=pd.Index(users, name='user_id'), columns=FEATURE_COLUMNS)
    logger.info(f"Extracted {len(FEATURE_COLUMNS)} feature(s) for {len(users)} user(s)")
    return table


def write_features(table, path):
    table.to_csv(path, float_format='%.10g')
    return path


def read_features(path):
    try:
        table = pd.read_csv(path, index_col='user_id', dtype={'user_id': str})
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: cannot read feature table ({e})")
    table.index = table.index.astype(str)
    return table
