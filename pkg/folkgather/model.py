"""Annotation data model: saplings, users, corpora and reference taxonomies.

Also holds the normalization steps applied at ingestion time: stemming,
tree-ification of raw directory graphs and tag propagation.
"""

import functools
import logging
import re
from collections import Counter, deque

from nltk.stem import PorterStemmer

from folkgather.errors import InputError

logger = logging.getLogger(__name__)

_porter = PorterStemmer(mode=PorterStemmer.ORIGINAL_ALGORITHM)

# Anything that is not a word character, plus underscore, becomes a space.
_PUNCT = re.compile(r'[^\w\s]|_')

LABELS = ('expert', 'novice', 'unlabeled')


def _stem_token(token):
    """Porter-stem a single token until it stops changing."""
    previous = None
    while token != previous:
        previous, token = token, _porter.stem(token)
    return token


@functools.lru_cache(maxsize=None)
def stem(term):
    """Normalize a name or tag: lowercase, punctuation to spaces, stem, rejoin.

    Stemming is applied to a fixpoint per token, so stem(stem(x)) == stem(x).
    """
    if not term:
        return ''
    text = _PUNCT.sub(' ', term.lower())
    tokens = (_stem_token(t) for t in text.split())
    return ' '.join(t for t in tokens if t)


class TagBag:
    """Multiset of stemmed tags (tag -> count)."""

    def __init__(self, counts=None):
        self.entries = Counter()
        if counts:
            for tag, count in counts.items():
                self.add(tag, count)

    def add(self, tag, count=1):
        if count < 1:
            raise InputError(f"tag count for '{tag}' must be >= 1, got {count}")
        self.entries[tag] += int(count)

    def update(self, other):
        self.entries.update(other.entries)

    def copy(self):
        bag = TagBag()
        bag.entries = Counter(self.entries)
        return bag

    def total(self):
        return sum(self.entries.values())

    def distribution(self):
        """Return tag -> probability; empty dict for an empty bag."""
        total = self.total()
        if not total:
            return {}
        return {tag: count / total for tag, count in self.entries.items()}

    def ranked(self):
        """Tags by count descending, ties by name ascending."""
        return sorted(self.entries, key=lambda t: (-self.entries[t], t))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, TagBag) and self.entries == other.entries

    def __repr__(self):
        return f"TagBag({dict(self.entries)!r})"


class SaplingNode:
    """One node of a sapling (a collection or a set)."""

    def __init__(self, node_id, name, raw_name, own_tags, owner, sapling_id,
                 source_id=None):
        self.node_id = node_id
        self.name = name                # stemmed, lowercased
        self.raw_name = raw_name
        self.own_tags = own_tags        # tags attached directly to this node
        self.tags = own_tags.copy()     # own tags plus descendants' (after propagation)
        self.owner = owner
        self.sapling_id = sapling_id
        self.source_id = source_id      # id used in the input file
        self.depth_level = 1            # root = 1
        self.parent = None
        self.children = []
        self.is_expert_node = False     # set from the classifier's expert list

    def is_root(self):
        return self.parent is None

    def __repr__(self):
        return (f"SaplingNode(id={self.node_id}, name={self.name!r}, "
                f"level={self.depth_level}, sapling={self.sapling_id})")


class Sapling:
    """A rooted tree of SaplingNodes created by one user."""

    def __init__(self, sapling_id, owner, root, nodes, unreachable=0):
        self.sapling_id = sapling_id
        self.owner = owner
        self.root = root                # node_id of the root
        self.nodes = nodes              # node_id -> SaplingNode, BFS order
        self.unreachable = unreachable  # nodes dropped by treeify

    @property
    def root_node(self):
        return self.nodes[self.root]

    def depth(self):
        return max(n.depth_level for n in self.nodes.values())

    def level_sizes(self):
        """Return [n_1, n_2, ..., n_L]."""
        sizes = Counter(n.depth_level for n in self.nodes.values())
        return [sizes[level] for level in range(1, self.depth() + 1)]

    def twigs(self):
        """Parent-child name pairs, one per edge."""
        return [(self.nodes[n.parent].name, n.name)
                for n in self.nodes.values() if n.parent is not None]

    def leaves(self):
        return [n for n in self.nodes.values() if not n.children]

    def __len__(self):
        return len(self.nodes)

    def __repr__(self):
        return (f"Sapling(id={self.sapling_id!r}, owner={self.owner!r}, "
                f"root={self.root_node.name!r}, nodes={len(self.nodes)})")


class UserProfile:
    """A user and the saplings they created."""

    def __init__(self, user_id, saplings=None, label='unlabeled'):
        if label not in LABELS:
            raise InputError(f"unknown label '{label}' for user {user_id}")
        self.user_id = user_id
        self.saplings = list(saplings or [])
        self.label = label

    def __repr__(self):
        return (f"UserProfile(user_id={self.user_id!r}, "
                f"saplings={len(self.saplings)}, label={self.label})")


class Corpus:
    """Users, saplings and a global node index.

    Treated as read-only once ingestion finishes.
    """

    def __init__(self):
        self.users = {}
        self.saplings = {}
        self.nodes = {}
        self._roots_by_name = None

    def add_sapling(self, sapling):
        if sapling.sapling_id in self.saplings:
            raise InputError(f"duplicate sapling_id '{sapling.sapling_id}'")
        user = self.users.get(sapling.owner)
        if user is None:
            user = self.users[sapling.owner] = UserProfile(sapling.owner)
        user.saplings.append(sapling.sapling_id)
        self.saplings[sapling.sapling_id] = sapling
        self.nodes.update(sapling.nodes)
        self._roots_by_name = None

    def saplings_of(self, user_id):
        return [self.saplings[sid] for sid in self.users[user_id].saplings]

    def roots_named(self, name):
        """Saplings whose root carries the given stemmed name, in corpus order."""
        if self._roots_by_name is None:
            index = {}
            for sapling in self.saplings.values():
                index.setdefault(sapling.root_node.name, []).append(sapling)
            self._roots_by_name = index
        return list(self._roots_by_name.get(name, []))

    def mark_experts(self, expert_users):
        """Flag every node owned by an expert user."""
        expert_users = set(expert_users)
        for node in self.nodes.values():
            node.is_expert_node = node.owner in expert_users
        for user_id, user in self.users.items():
            if user_id in expert_users:
                user.label = 'expert'

    def summary(self):
        return {
            'users': len(self.users),
            'saplings': len(self.saplings),
            'nodes': len(self.nodes),
        }

    def __repr__(self):
        s = self.summary()
        return f"Corpus(users={s['users']}, saplings={s['saplings']}, nodes={s['nodes']})"


class RawGraph:
    """A directory as found in the input: possibly multi-parent or cyclic."""

    def __init__(self, sapling_id, owner, root, names, tags=None, children=None):
        self.sapling_id = sapling_id
        self.owner = owner
        self.root = root
        self.names = names                # source id -> raw name
        self.tags = tags or {}            # source id -> {raw tag: count}
        self.children = children or {}    # source id -> [source ids]


def _normalize_tags(raw_tags):
    bag = TagBag()
    for tag, count in (raw_tags or {}).items():
        stemmed = stem(str(tag))
        if stemmed:
            bag.add(stemmed, count)
    return bag


def treeify(raw_graph, allocate=None):
    """Convert a raw directory graph into a Sapling by breadth-first traversal.

    Each node keeps the first parent that reaches it; edges to visited nodes
    are dropped; nodes unreachable from the root are dropped and counted.
    `allocate` maps a source id to a global node id (identity by default).
    """
    if raw_graph.root not in raw_graph.names:
        raise InputError(
            f"sapling '{raw_graph.sapling_id}': root {raw_graph.root} is not a declared node")
    allocate = allocate or (lambda source_id: source_id)

    def make(source_id, level):
        raw_name = raw_graph.names[source_id]
        name = stem(raw_name)
        if not name:
            raise InputError(
                f"sapling '{raw_graph.sapling_id}': node {source_id} "
                f"name {raw_name!r} is empty after normalization")
        node = SaplingNode(allocate(source_id), name, raw_name,
                           _normalize_tags(raw_graph.tags.get(source_id)),
                           raw_graph.owner, raw_graph.sapling_id, source_id)
        node.depth_level = level
        return node

    root = make(raw_graph.root, 1)
    by_source = {raw_graph.root: root}
    nodes = {root.node_id: root}
    queue = deque([raw_graph.root])
    while queue:
        source_id = queue.popleft()
        parent = by_source[source_id]
        for child_id in raw_graph.children.get(source_id, []):
            if child_id not in raw_graph.names:
                raise InputError(
                    f"sapling '{raw_graph.sapling_id}': node {source_id} "
                    f"has undeclared child id {child_id}")
            if child_id in by_source:
                continue
            child = make(child_id, parent.depth_level + 1)
            child.parent = parent.node_id
            parent.children.append(child.node_id)
            by_source[child_id] = child
            nodes[child.node_id] = child
            queue.append(child_id)

    unreachable = len(raw_graph.names) - len(nodes)
    if unreachable:
        logger.warning(
            f"Sapling '{raw_graph.sapling_id}': dropped {unreachable} unreachable node(s)")
    return Sapling(raw_graph.sapling_id, raw_graph.owner, root.node_id, nodes,
                   unreachable=unreachable)


def propagate_tags(sapling):
    """Give every node the union of its own tags and all descendants' tags.

    Recomputed from own tags each time, so applying it twice is a no-op.
    """
    order = list(sapling.nodes.values())
    for node in reversed(order):
        bag = node.own_tags.copy()
        for child_id in node.children:
            bag.update(sapling.nodes[child_id].tags)
        node.tags = bag
    return sapling


def _require(condition, locator, message):
    if not condition:
        raise InputError(f"{locator}: {message}")


def raw_graph_from_record(user_id, sapling_record, locator):
    """Validate one sapling object of the corpus schema and wrap it."""
    _require(isinstance(sapling_record, dict), locator, "sapling must be an object")
    sapling_id = sapling_record.get('sapling_id')
    _require(isinstance(sapling_id, str) and sapling_id, locator,
             "sapling_id must be a non-empty string")
    nodes = sapling_record.get('nodes')
    _require(isinstance(nodes, list) and nodes, locator,
             f"sapling '{sapling_id}' has no nodes")
    root = sapling_record.get('root')
    _require(isinstance(root, int), locator, f"sapling '{sapling_id}' root must be an integer")

    names, tags, children = {}, {}, {}
    for node in nodes:
        _require(isinstance(node, dict), locator, f"sapling '{sapling_id}': node must be an object")
        node_id = node.get('id')
        _require(isinstance(node_id, int), locator,
                 f"sapling '{sapling_id}': node id must be an integer")
        _require(node_id not in names, locator,
                 f"sapling '{sapling_id}': duplicate node id {node_id}")
        name = node.get('name')
        _require(isinstance(name, str), locator,
                 f"sapling '{sapling_id}': node {node_id} name must be a string")
        node_tags = node.get('tags', {})
        _require(isinstance(node_tags, dict) and all(
            isinstance(c, int) and c >= 1 for c in node_tags.values()), locator,
            f"sapling '{sapling_id}': node {node_id} tags must map strings to counts >= 1")
        node_children = node.get('children', [])
        _require(isinstance(node_children, list) and all(
            isinstance(c, int) for c in node_children), locator,
            f"sapling '{sapling_id}': node {node_id} children must be integers")
        names[node_id] = name
        tags[node_id] = node_tags
        children[node_id] = node_children

    for node_id, kids in children.items():
        for child_id in kids:
            _require(child_id in names, locator,
                     f"sapling '{sapling_id}': node {node_id} has undeclared child id {child_id}")
    _require(root in names, locator, f"sapling '{sapling_id}': root {root} is not a declared node")
    return RawGraph(sapling_id, user_id, root, names, tags, children)


class CorpusBuilder:
    """Accumulates validated user records into a Corpus with global node ids."""

    def __init__(self):
        self.corpus = Corpus()
        self._next_id = 0

    def _allocate(self, _source_id):
        node_id = self._next_id
        self._next_id += 1
        return node_id

    def add_record(self, record, locator):
        _require(isinstance(record, dict), locator, "record must be a JSON object")
        user_id = record.get('user_id')
        _require(isinstance(user_id, str) and user_id, locator,
                 "user_id must be a non-empty string")
        saplings = record.get('saplings')
        _require(isinstance(saplings, list), locator, "saplings must be a list")
        _require(user_id not in self.corpus.users, locator, f"duplicate user_id '{user_id}'")
        for sapling_record in saplings:
            raw = raw_graph_from_record(user_id, sapling_record, locator)
            if raw.sapling_id in self.corpus.saplings:
                raise InputError(f"{locator}: duplicate sapling_id '{raw.sapling_id}'")
            sapling = treeify(raw, allocate=self._allocate)
            propagate_tags(sapling)
            self.corpus.add_sapling(sapling)
        if user_id not in self.corpus.users:
            self.corpus.users[user_id] = UserProfile(user_id)

    def build(self):
        return self.corpus


def corpus_from_records(records):
    """Build a corpus from already-parsed user records (record index locators)."""
    builder = CorpusBuilder()
    for index, record in enumerate(records, start=1):
        builder.add_record(record, f"record {index}")
    return builder.build()


class ReferenceTaxonomy:
    """Acyclic parent -> child graph over stemmed names."""

    def __init__(self, edges):
        self.edges = set(edges)
        self.children = {}
        self.parents = {}
        for parent, child in sorted(self.edges):
            self.children.setdefault(parent, []).append(child)
            self.parents.setdefault(child, []).append(parent)
        self.names = set(self.children) | set(self.parents)
        self._check_acyclic()

    @property
    def roots(self):
        return sorted(n for n in self.names if n not in self.parents)

    def _check_acyclic(self):
        state = {}
        for start in sorted(self.names):
            if start in state:
                continue
            stack = [(start, iter(self.children.get(start, [])))]
            state[start] = 'open'
            while stack:
                name, it = stack[-1]
                child = next(it, None)
                if child is None:
                    state[name] = 'done'
                    stack.pop()
                elif state.get(child) == 'open':
                    raise InputError(f"reference taxonomy has a cycle through '{child}'")
                elif child not in state:
                    state[child] = 'open'
                    stack.append((child, iter(self.children.get(child, []))))

    def __len__(self):
        return len(self.names)

    def __repr__(self):
        return f"ReferenceTaxonomy(names={len(self.names)}, edges={len(self.edges)})"


def load_reference_taxonomy(path):
    """Read `parent<TAB>child` lines ('#' comments) into a ReferenceTaxonomy."""
    edges = []
    try:
        f = open(path, 'r', encoding='utf-8')
    except OSError as e:
        raise InputError(f"{path}: cannot read reference taxonomy ({e.strerror})")
    with f:
        try:
            lines = list(f)
        except UnicodeDecodeError as e:
            raise InputError(f"{path}: reference taxonomy is not valid UTF-8 ({e.reason})")
    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].rstrip('\n')
        if not line.strip():
            continue
        parts = line.split('\t')
        if len(parts) != 2:
            raise InputError(f"{path}: line {lineno}: expected 'parent<TAB>child'")
        parent, child = stem(parts[0]), stem(parts[1])
        if not parent or not child:
            raise InputError(f"{path}: line {lineno}: empty name after normalization")
        edges.append((parent, child))
    taxonomy = ReferenceTaxonomy(edges)
    logger.info(f"Loaded reference taxonomy: {len(taxonomy.names)} name(s), "
                f"{len(taxonomy.edges)} edge(s)")
    return taxonomy


def write_reference_taxonomy(taxonomy, path):
    with open(path, 'w', encoding='utf-8') as f:
        for parent, child in sorted(taxonomy.edges):
            f.write(f"{parent}\t{child}\n")
    return path
