"""Synthetic sapling corpora with planted experts and a ground-truth taxonomy.

Experts copy deep, faithful subtrees of the ground truth. Novices build
shallow saplings: they skip levels (grandchildren hung on the root), use
vague roots and add unrelated children.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from folkgather.errors import InputError
from folkgather.model import ReferenceTaxonomy, corpus_from_records, stem

logger = logging.getLogger(__name__)

_FALLBACK_VOCABULARY = {
    'concepts': [f"concept {k}" for k in range(60)],
    'vague_roots': ['misc', 'stuff'],
    'tag_words': [f"word{k}" for k in range(20)],
}


def load_vocabulary():
    """Read the packaged vocabulary.json, falling back to generated names."""
    vocab_file = Path(__file__).parent / 'vocabulary.json'
    try:
        with open(vocab_file, 'r', encoding='utf-8') as f:
            data = json.load(f)
        return {key: list(data[key]) for key in _FALLBACK_VOCABULARY}
    except (FileNotFoundError, json.JSONDecodeError, KeyError):
        logger.warning(f"Could not load vocabulary file: {vocab_file}")
        return dict(_FALLBACK_VOCABULARY)


@dataclass
class SyntheticSpec:
    truth_size: int = 30
    max_truth_depth: int = 5
    num_experts: int = 10
    num_novices: int = 40
    expert_depth: Tuple[int, int] = (3, 4)
    novice_depth: int = 2
    saplings_per_user: Tuple[int, int] = (1, 3)
    vagueness: float = 0.2          # chance a novice sapling gets a vague root
    level_skip: float = 0.5         # chance a novice child is taken from two levels down
    noise: float = 0.1              # chance per novice sapling of an unrelated child
    expert_keep: float = 0.8        # chance an expert keeps each optional truth child
    tags_per_node: Tuple[int, int] = (3, 8)
    tag_pool: int = 10
    rng_seed: int = 0

    def validate(self, vocabulary_size):
        if self.truth_size < 2 or self.truth_size > vocabulary_size:
            raise InputError(f"truth_size must be in [2, {vocabulary_size}]")
        lo, hi = self.expert_depth
        if lo < 3 or hi < lo:
            raise InputError(f"expert depth range must start at >= 3, got {self.expert_depth}")
        if hi > self.max_truth_depth:
            raise InputError(f"expert depth {hi} exceeds ground-truth depth {self.max_truth_depth}")
        if not 1 <= self.novice_depth <= 2:
            raise InputError(f"novice depth must be 1 or 2, got {self.novice_depth}")
        if self.num_experts < 0 or self.num_novices < 0:
            raise InputError("user counts must be >= 0")
        for name in ('vagueness', 'level_skip', 'noise', 'expert_keep'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InputError(f"{name} must be a probability, got {value}")
        return self

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown synthetic spec key(s): {', '.join(sorted(unknown))}")
        values = dict(data)
        for key in ('expert_depth', 'saplings_per_user', 'tags_per_node'):
            if key in values:
                values[key] = tuple(values[key])
        return cls(**values)


class TruthTree:
    """Ground-truth concept tree over raw names."""

    def __init__(self, names, parent):
        self.names = names          # index -> raw name
        self.parent = parent        # index -> parent index (-1 for the root)
        self.children = [[] for _ in names]
        for i, p in enumerate(parent):
            if p >= 0:
                self.children[p].append(i)
        self.level = [1] * len(names)
        for i in range(1, len(names)):
            self.level[i] = self.level[parent[i]] + 1

    @property
    def root(self):
        return 0

    def subtree_depth(self, i):
        return 1 + max((self.subtree_depth(c) for c in self.children[i]), default=0)

    def descendants_at(self, i, distance):
        frontier = [i]
        for _ in range(distance):
            frontier = [c for node in frontier for c in self.children[node]]
        return frontier

    def reference(self):
        edges = [(stem(self.names[p]), stem(self.names[i]))
                 for i, p in enumerate(self.parent) if p >= 0]
        return ReferenceTaxonomy(edges)


def build_truth(spec, vocabulary, rng):
    """Grow a tree breadth-first with 2-3 children per node up to max_truth_depth."""
    order = rng.permutation(len(vocabulary['concepts']))[:spec.truth_size]
    names = [vocabulary['concepts'][k] for k in order]
    parent = [-1]
    level = [1]
    frontier = [0]
    while len(parent) < spec.truth_size and frontier:
        next_frontier = []
        for node in frontier:
            if level[node] >= spec.max_truth_depth:
                continue
            for _ in range(int(rng.integers(2, 4))):
                if len(parent) >= spec.truth_size:
                    break
                parent.append(node)
                level.append(level[node] + 1)
                next_frontier.append(len(parent) - 1)
        frontier = next_frontier
    return TruthTree(names[:len(parent)], parent)


class _SaplingWriter:
    """Builds sapling records in the corpus schema."""

    def __init__(self, sapling_id, spec, pools, rng):
        self.sapling_id = sapling_id
        self.spec = spec
        self.pools = pools
        self.rng = rng
        self.nodes = []

    def add(self, raw_name, concept):
        lo, hi = self.spec.tags_per_node
        pool = self.pools[concept]
        count = int(self.rng.integers(lo, hi + 1))
        picked = self.rng.choice(len(pool), size=min(count, len(pool)), replace=False)
        tags = {pool[k]: int(self.rng.integers(1, 6)) for k in sorted(picked)}
        self.nodes.append({'id': len(self.nodes), 'name': raw_name, 'tags': tags, 'children': []})
        return len(self.nodes) - 1

    def link(self, parent, child):
        self.nodes[parent]['children'].append(child)

    def record(self):
        return {'sapling_id': self.sapling_id, 'root': 0, 'nodes': self.nodes}


def _tag_pools(names, vocabulary, spec, rng):
    words = vocabulary['tag_words']
    pools = {}
    for name in names:
        picked = rng.choice(len(words), size=min(spec.tag_pool - 1, len(words)), replace=False)
        pools[name] = [name] + [f"{name} {words[k]}" for k in sorted(picked)]
    return pools


def _expert_sapling(writer, truth, spec, rng):
    lo, hi = spec.expert_depth
    deep_enough = [i for i in range(len(truth.names)) if truth.subtree_depth(i) >= lo]
    start = int(rng.choice(deep_enough))
    depth = int(rng.integers(lo, min(hi, truth.subtree_depth(start)) + 1))

    def copy(node, level, must):
        slot = writer.add(truth.names[node], truth.names[node])
        if level >= depth:
            return slot
        kids = truth.children[node]
        keep_path = [c for c in kids if truth.subtree_depth(c) >= depth - level]
        forced = keep_path[0] if must and keep_path else None
        for child in kids:
            if child == forced or rng.random() < spec.expert_keep:
                writer.link(slot, copy(child, level + 1, child == forced))
        return slot

    copy(start, 1, True)


def _novice_sapling(writer, truth, spec, vocabulary, rng):
    internal = [i for i in range(len(truth.names)) if truth.children[i]]
    vague = rng.random() < spec.vagueness
    if vague:
        root_name = str(rng.choice(vocabulary['vague_roots']))
        root_concept = truth.names[int(rng.integers(len(truth.names)))]
        root = writer.add(root_name, root_concept)
        picks = rng.choice(len(truth.names), size=min(int(rng.integers(2, 5)), len(truth.names)),
                           replace=False)
        for k in sorted(picks):
            writer.link(root, writer.add(truth.names[k], truth.names[k]))
        return

    start = int(rng.choice(internal))
    root = writer.add(truth.names[start], truth.names[start])
    if spec.novice_depth < 2:
        return
    candidates = list(truth.children[start])
    skipped = truth.descendants_at(start, 2)
    chosen = []
    for child in candidates:
        if skipped and rng.random() < spec.level_skip:
            chosen.append(int(rng.choice(skipped)))
        else:
            chosen.append(child)
    for node in dict.fromkeys(chosen):
        writer.link(root, writer.add(truth.names[node], truth.names[node]))
    if rng.random() < spec.noise:
        outsider = int(rng.integers(len(truth.names)))
        writer.link(root, writer.add(truth.names[outsider], truth.names[outsider]))


def generate_synthetic(spec=None):
    """Return (records, labels, reference) for a synthetic corpus.

    records follow the corpus JSON schema, labels map user_id -> expert/novice,
    and reference is the ground truth as a ReferenceTaxonomy. Fully determined
    by spec.rng_seed.
    """
    spec = spec or SyntheticSpec()
    vocabulary = load_vocabulary()
    spec.validate(len(vocabulary['concepts']))
    rng = np.random.default_rng(spec.rng_seed)

    truth = build_truth(spec, vocabulary, rng)
    if truth.subtree_depth(truth.root) < spec.expert_depth[0]:
        raise InputError("ground truth is too shallow for the expert depth range")
    pools = _tag_pools(truth.names, vocabulary, spec, rng)

    users = [(f"expert{k:03d}", 'expert') for k in range(spec.num_experts)] + \
            [(f"novice{k:03d}", 'novice') for k in range(spec.num_novices)]
    order = rng.permutation(len(users))
    records, labels = [], {}
    for position, k in enumerate(order):
        _, label = users[k]
        user_id = f"u{position:04d}"
        labels[user_id] = label
        lo, hi = spec.saplings_per_user
        saplings = []
        for s in range(int(rng.integers(lo, hi + 1))):
            writer = _SaplingWriter(f"{user_id}-s{s}", spec, pools, rng)
            if label == 'expert':
                _expert_sapling(writer, truth, spec, rng)
            else:
                _novice_sapling(writer, truth, spec, vocabulary, rng)
            saplings.append(writer.record())
        records.append({'user_id': user_id, 'saplings': saplings})

    logger.info(f"Generated {len(records)} user(s) ({spec.num_experts} expert(s)), "
                f"ground truth of {len(truth.names)} concept(s), "
                f"seed term '{stem(truth.names[truth.root])}'")
    return records, labels, truth.reference()


def seed_term(reference):
    """Ground-truth root name (the natural seed term for a synthetic corpus)."""
    roots = reference.roots
    if len(roots) != 1:
        raise InputError(f"expected a single ground-truth root, found {len(roots)}")
    return roots[0]


def generate_corpus(spec=None):
    """Like generate_synthetic but returns an ingested Corpus instead of records."""
    records, labels, reference = generate_synthetic(spec)
    return corpus_from_records(records), labels, reference
