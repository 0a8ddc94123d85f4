"""Tests for folksonomy assembly, ranking and export."""

import json

import numpy as np
import pytest

from folkgather.errors import InputError, InvariantError
from folkgather.folksonomy import (
    FolkNode, Folksonomy, assemble_folksonomy, popular_tree, rank_trees, read_folksonomy,
    render_folksonomy, tree_from_dict, write_folksonomy, write_tree_edges,
)
from folkgather.model import corpus_from_records
from folkgather.rap import AssignmentMatrix, RapProblem
from folkgather.similarity import build_similarity
from tests.conftest import sapling_record, tags


def _problem(records):
    corpus = corpus_from_records(records)
    matrix = build_similarity(corpus.nodes.values())
    return RapProblem(matrix.with_preferences(np.full(matrix.n, 0.5)))


def _tree(label, sapling_ids, *children):
    node = FolkNode(label, [{'user': s, 'sapling': s, 'node': i}
                            for i, s in enumerate(sapling_ids)], exemplar=0)
    for child in children:
        node.add_child(child)
    return node


class TestAssemble:

    def test_full_merge_builds_one_tree(self, flat_pair_records):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.array([0, 1, 2, 0, 1, 2])), problem,
                                   seed='a')
        assert len(folk.trees) == 1
        tree = folk.popular
        assert tree.label == 'a'
        assert [c.label for c in tree.children] == ['b', 'c']
        assert tree.saplings() == {'s1', 's2'}
        assert tree.edges() == {('a', 'b'), ('a', 'c')}

    def test_members_record_owner(self, flat_pair_records):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.array([0, 1, 2, 0, 1, 2])), problem)
        root = folk.trees[0]
        assert root.members == [{'user': 'u1', 'sapling': 's1', 'node': 0},
                                {'user': 'u2', 'sapling': 's2', 'node': 3}]
        assert root.owners() == {'u1', 'u2'}

    def test_singletons_give_one_tree_per_sapling(self, flat_pair_records):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.arange(6)), problem, seed='a')
        assert len(folk.trees) == 2
        assert all(t.size() == 3 for t in folk.trees)

    def test_cycle_raises(self):
        records = [
            {'user_id': 'u1', 'saplings': [
                sapling_record('s1', 'x', tags('t1'), [('y', tags('t2'))])]},
            {'user_id': 'u2', 'saplings': [
                sapling_record('s2', 'y', tags('t2'), [('x', tags('t1'))])]},
        ]
        with pytest.raises(InvariantError):
            assemble_folksonomy(AssignmentMatrix(np.array([0, 1, 1, 0])), _problem(records))


class TestRanking:

    def test_most_saplings_first(self):
        small = _tree('b', ['s1'])
        large = _tree('a', ['s2', 's3'])
        assert rank_trees([small, large]) == [large, small]

    def test_ties_by_label(self):
        first, second = _tree('a', ['s1']), _tree('b', ['s2'])
        assert rank_trees([second, first]) == [first, second]

    def test_popular_requires_seed(self):
        big = _tree('europe', ['s1', 's2', 's3'])
        small = _tree('africa', ['s4'], _tree('kenya', ['s4']))
        assert popular_tree([big, small], 'kenya') is small
        assert popular_tree([big, small], 'asia') is None
        assert popular_tree([big, small]) is big

    def test_depth_and_size(self):
        tree = _tree('a', ['s1'], _tree('b', ['s1'], _tree('c', ['s1'])), _tree('d', ['s1']))
        assert tree.depth() == 3
        assert tree.size() == 4
        assert [n.label for n in tree.walk()] == ['a', 'b', 'c', 'd']


class TestExport:

    def test_written_folksonomy_reads_back(self, flat_pair_records, tmp_path):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.array([0, 1, 2, 0, 1, 2])), problem,
                                   seed='a', strategy='m1')
        loaded = read_folksonomy(write_folksonomy(folk, tmp_path / 'f.json'))
        assert loaded.seed == 'a'
        assert loaded.strategy == 'm1'
        assert loaded.popular.edges() == folk.popular.edges()
        assert loaded.popular.exemplar == 0

    def test_popular_flag_written(self, flat_pair_records, tmp_path):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.arange(6)), problem, seed='a')
        data = json.loads(write_folksonomy(folk, tmp_path / 'f.json').read_text(encoding='utf-8'))
        assert [t['popular'] for t in data['trees']] == [True, False]

    def test_bare_tree_object(self, tmp_path):
        path = tmp_path / 'tree.json'
        path.write_text(json.dumps({'label': 'anim', 'children': [{'label': 'bird'}]}),
                        encoding='utf-8')
        folk = read_folksonomy(path)
        assert folk.seed == 'anim'
        assert folk.popular.edges() == {('anim', 'bird')}

    def test_exemplar_defaults_to_first_member(self):
        node = tree_from_dict({'label': 'a', 'members': [{'user': 'u', 'sapling': 's', 'node': 7}]})
        assert node.exemplar == 7
        assert node.owners() == {'u'}

    def test_node_without_label(self):
        with pytest.raises(InputError):
            tree_from_dict({'children': []})

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / 'f.json'
        path.write_text('{not json', encoding='utf-8')
        with pytest.raises(InputError):
            read_folksonomy(path)

    def test_render(self, flat_pair_records):
        problem = _problem(flat_pair_records)
        folk = assemble_folksonomy(AssignmentMatrix(np.array([0, 1, 2, 0, 1, 2])), problem,
                                   seed='a')
        assert render_folksonomy(folk) == (
            "* [2 sapling(s), 3 node(s), depth 2]\n"
            "  a (2)\n"
            "    b (2)\n"
            "    c (2)\n")

    def test_edges_file(self, tmp_path):
        tree = _tree('a', ['s1'], _tree('c', ['s1']), _tree('b', ['s1']))
        path = write_tree_edges(tree, tmp_path / 'edges.tsv')
        assert path.read_text(encoding='utf-8') == "a\tb\na\tc\n"

    def test_empty_folksonomy_has_no_popular(self):
        assert Folksonomy([], seed='a').popular is None
