"""Learned folksonomies: assembly from a RAP assignment, ranking, export and rendering."""

import json
import logging

from folkgather.errors import InputError, InvariantError
from folkgather.rap import parent_clusters

logger = logging.getLogger(__name__)


class FolkNode:
    """One exemplar cluster in a learned tree."""

    def __init__(self, label, members=None, exemplar=None):
        self.label = label
        self.members = list(members or [])   # dicts {user, sapling, node}
        self.exemplar = exemplar             # node id of the exemplar, if known
        self.children = []
        self.parent = None

    def add_child(self, child):
        child.parent = self
        self.children.append(child)
        return child

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def depth(self):
        return 1 + max((c.depth() for c in self.children), default=0)

    def size(self):
        return sum(1 for _ in self.walk())

    def saplings(self):
        return {m['sapling'] for node in self.walk() for m in node.members}

    def labels(self):
        return {node.label for node in self.walk()}

    def edges(self):
        """(parent label, child label) pairs."""
        return {(node.label, child.label) for node in self.walk() for child in node.children}

    def owners(self):
        """Users contributing a member node."""
        return {member.get('user') for member in self.members} - {None}

    def sort_key(self):
        return (self.label, self.exemplar if self.exemplar is not None else -1)

    def __repr__(self):
        return f"FolkNode({self.label!r}, members={len(self.members)}, children={len(self.children)})"


class Folksonomy:
    """A ranked forest of learned trees."""

    def __init__(self, trees, seed=None, strategy=None):
        self.seed = seed
        self.strategy = strategy
        self.trees = rank_trees(trees)
        self.popular = popular_tree(self.trees, seed)

    def member_count(self):
        return sum(len(n.members) for tree in self.trees for n in tree.walk())

    def __repr__(self):
        return f"Folksonomy(seed={self.seed!r}, trees={len(self.trees)})"


def rank_trees(trees):
    """Most distinct saplings first; ties by root label, then exemplar id."""
    return sorted(trees, key=lambda t: (-len(t.saplings()), t.sort_key()))


def popular_tree(trees, seed=None):
    """The tree aggregating the most saplings among trees that contain the seed label."""
    pool = [t for t in trees if seed is None or seed in t.labels()]
    if not pool:
        return None
    return rank_trees(pool)[0]


def _member(node):
    return {'user': node.owner, 'sapling': node.sapling_id, 'node': node.node_id}


def assemble_folksonomy(assignment, problem, seed=None, strategy=None):
    """Build one FolkNode per exemplar; its parent is the exemplar of its members' parents."""
    nodes = problem.matrix.nodes
    ex = assignment.exemplar_of
    clusters = assignment.clusters()
    folk = {}
    for e, members in clusters.items():
        folk[e] = FolkNode(nodes[e].name,
                           [_member(nodes[m]) for m in sorted(members, key=lambda m: nodes[m].node_id)],
                           exemplar=nodes[e].node_id)
        labels = {nodes[m].name for m in members}
        if len(labels) > 1:
            raise InvariantError(f"cluster {nodes[e].node_id} mixes labels {sorted(labels)}")

    roots = []
    for e in clusters:
        parents = parent_clusters(ex, problem.parents, e)
        if len(parents) > 1 or e in parents:
            raise InvariantError(f"cluster {nodes[e].node_id} has parent clusters "
                                 f"{sorted(nodes[p].node_id for p in parents)}")
        if parents:
            folk[parents.pop()].add_child(folk[e])
        else:
            roots.append(folk[e])

    seen = sum(tree.size() for tree in roots)
    if seen != len(clusters):
        raise InvariantError("exemplar-parent links contain a cycle")
    for node in folk.values():
        node.children.sort(key=FolkNode.sort_key)

    result = Folksonomy(roots, seed=seed, strategy=strategy)
    popular = result.popular
    logger.info(f"Assembled {len(roots)} tree(s) from {len(clusters)} cluster(s)"
                + (f"; popular tree '{popular.label}' spans {len(popular.saplings())} "
                   f"sapling(s), depth {popular.depth()}" if popular else ""))
    return result


# --- export -----------------------------------------------------------------

def tree_to_dict(node):
    return {
        'label': node.label,
        'exemplar': node.exemplar,
        'members': node.members,
        'children': [tree_to_dict(c) for c in node.children],
    }


def tree_from_dict(data):
    if not isinstance(data, dict) or 'label' not in data:
        raise InputError("folksonomy node must be an object with a label")
    node = FolkNode(data['label'], data.get('members', []), data.get('exemplar'))
    if node.exemplar is None and node.members:
        node.exemplar = node.members[0].get('node')
    for child in data.get('children', []):
        node.add_child(tree_from_dict(child))
    return node


def folksonomy_to_dict(folksonomy):
    trees = []
    for tree in folksonomy.trees:
        entry = tree_to_dict(tree)
        entry['saplings'] = len(tree.saplings())
        entry['popular'] = tree is folksonomy.popular
        trees.append(entry)
    return {'seed': folksonomy.seed, 'strategy': folksonomy.strategy, 'trees': trees}


def write_folksonomy(folksonomy, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(folksonomy_to_dict(folksonomy), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def read_folksonomy(path):
    """Read a folksonomy export (or a bare tree object) back into a Folksonomy."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except (OSError, ValueError) as e:
        raise InputError(f"{path}: cannot read folksonomy ({e})")
    if isinstance(data, dict) and 'trees' in data:
        trees = [tree_from_dict(t) for t in data['trees']]
        flagged = [t for t, raw in zip(trees, data['trees']) if raw.get('popular')]
        result = Folksonomy(trees, seed=data.get('seed'), strategy=data.get('strategy'))
        if flagged:
            result.popular = flagged[0]
        return result
    tree = tree_from_dict(data)
    return Folksonomy([tree], seed=tree.label)


def render_tree(node, indent=0):
    """Indented text: one line per node, label followed by its member count."""
    lines = [f"{'  ' * indent}{node.label} ({len(node.members)})"]
    for child in node.children:
        lines.extend(render_tree(child, indent + 1))
    return lines


def render_folksonomy(folksonomy):
    lines = []
    for tree in folksonomy.trees:
        marker = '* ' if tree is folksonomy.popular else ''
        lines.append(f"{marker}[{len(tree.saplings())} sapling(s), {tree.size()} node(s), "
                     f"depth {tree.depth()}]")
        lines.extend(render_tree(tree, indent=1))
    return '\n'.join(lines) + '\n'


def write_tree_edges(tree, path):
    """Write a tree's label edges in the reference taxonomy format."""
    with open(path, 'w', encoding='utf-8') as f:
        for parent, child in sorted(tree.edges()):
            f.write(f"{parent}\t{child}\n")
    return path
