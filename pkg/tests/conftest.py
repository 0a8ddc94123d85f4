"""Shared corpus builders for the test suite."""

import pytest

from folkgather.config import RunConfig
from folkgather.model import corpus_from_records


def sapling_record(sapling_id, root_name, root_tags, children=()):
    """Root plus direct children; children are (name, tags) or (name, tags, grandchildren)."""
    nodes = [{'id': 0, 'name': root_name, 'tags': dict(root_tags), 'children': []}]

    def add(parent, spec):
        name, tags = spec[0], spec[1]
        node_id = len(nodes)
        nodes.append({'id': node_id, 'name': name, 'tags': dict(tags), 'children': []})
        nodes[parent]['children'].append(node_id)
        for grandchild in (spec[2] if len(spec) > 2 else ()):
            add(node_id, grandchild)

    for child in children:
        add(0, child)
    return {'sapling_id': sapling_id, 'root': 0, 'nodes': nodes}


def tags(*names):
    return {name: 1 for name in names}


def africa_records():
    """Three novice 'africa' saplings and two expert 'holiday' saplings.

    Only the first africa sapling has a 'christmas' child. Similarities
    (divisor 4): africa roots 1 vs 0.75 for the christmas one, kenya pairs
    0.75/0.75/0.25, holiday/christmas/easter pairs between the experts 1.
    """
    k1 = tags('k1', 'k2', 'k3', 'k4', 'k5', 'k6')
    k2 = tags('k1', 'k2', 'k3', 'm1')
    k3 = tags('k4', 'k5', 'k6', 'm1')
    shared_root = tags('r1', 'r2', 'r3')
    expert_children = [('christmas', tags('x1', 'x2', 'x3', 'x4')),
                       ('easter', tags('y1', 'y2', 'y3', 'y4'))]
    return [
        {'user_id': 'n1', 'saplings': [
            sapling_record('n1-a', 'Africa', tags('a1'),
                           [('Kenya', k1), ('Christmas', tags('c1'))])]},
        {'user_id': 'n2', 'saplings': [
            sapling_record('n2-a', 'africa', shared_root,
                           [('kenya', k2), ('egypt', tags('e1'))])]},
        {'user_id': 'n3', 'saplings': [
            sapling_record('n3-a', 'africa', shared_root,
                           [('egypt', tags('e2')), ('kenya', k3)])]},
        {'user_id': 'x1', 'saplings': [
            sapling_record('x1-h', 'holiday', tags('h1', 'h2', 'h3', 'h4'), expert_children)]},
        {'user_id': 'x2', 'saplings': [
            sapling_record('x2-h', 'Holidays', tags('h1', 'h2', 'h3', 'h4'), expert_children)]},
    ]


AFRICA_EXPERTS = {'x1', 'x2'}


@pytest.fixture
def africa_corpus():
    return corpus_from_records(africa_records())


@pytest.fixture
def config():
    return RunConfig(threads=1)


@pytest.fixture
def flat_pair_records():
    """Two identical saplings a -> {b, c} from different users."""
    children = [('b', tags('b1', 'b2', 'b3', 'b4')), ('c', tags('c1', 'c2', 'c3', 'c4'))]
    return [
        {'user_id': 'u1', 'saplings': [sapling_record('s1', 'a', tags('a1', 'a2', 'a3', 'a4'),
                                                      children)]},
        {'user_id': 'u2', 'saplings': [sapling_record('s2', 'a', tags('a1', 'a2', 'a3', 'a4'),
                                                      children)]},
    ]


def ale_records():
    """A lone 'ale' sapling and a chain ale -> beer -> ale from another user."""
    hops = tags('h1', 'h2', 'h3', 'h4')
    return [
        {'user_id': 'a', 'saplings': [sapling_record('sa', 'ale', hops)]},
        {'user_id': 'b', 'saplings': [
            sapling_record('sb', 'ale', hops, [('beer', tags('b1', 'b2'), [('ale', hops)])])]},
    ]
