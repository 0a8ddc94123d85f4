"""Tests for the annotation model: stemming, tree-ification, propagation, corpora."""

import numpy as np
import pytest

from folkgather.errors import InputError
from folkgather.model import (
    Corpus, RawGraph, ReferenceTaxonomy, TagBag, corpus_from_records, load_reference_taxonomy,
    propagate_tags, stem, treeify, write_reference_taxonomy,
)
from tests.conftest import sapling_record, tags


def _raw(children, names=None, root=0, tag_map=None):
    names = names or {i: f"n{i}" for i in set(children) | {c for v in children.values() for c in v}}
    return RawGraph('s', 'u', root, names, tag_map or {}, children)


class TestStem:
    """Porter stemming with lowercasing and punctuation removal."""

    def test_plural(self):
        assert stem("Reptiles") == "reptil"

    def test_already_stemmed(self):
        assert stem("africa") == "africa"

    def test_known_stems(self):
        assert stem("invertebrates") == "invertebr"
        assert stem("christmas") == "christma"
        assert stem("holiday") == "holidai"

    def test_punctuation_becomes_space(self):
        assert stem("Cape_Town!") == stem("cape town")

    def test_idempotent(self):
        for word in ("Reptiles", "invertebrates", "generalizations", "holidays", "cape town"):
            assert stem(stem(word)) == stem(word)

    def test_empty(self):
        assert stem("") == ""
        assert stem("!!!") == ""


class TestTagBag:

    def test_ranked_breaks_ties_by_name(self):
        bag = TagBag({'b': 2, 'a': 2, 'c': 5})
        assert bag.ranked() == ['c', 'a', 'b']

    def test_distribution_sums_to_one(self):
        bag = TagBag({'a': 1, 'b': 3})
        assert bag.distribution() == {'a': 0.25, 'b': 0.75}

    def test_empty_distribution(self):
        assert TagBag().distribution() == {}

    def test_rejects_zero_count(self):
        with pytest.raises(InputError):
            TagBag({'a': 0})


class TestTreeify:
    """Breadth-first conversion of raw directory graphs."""

    def test_simple_tree_levels(self):
        sapling = treeify(_raw({0: [1, 2]}, names={0: 'africa', 1: 'kenya', 2: 'egypt'}))
        assert [n.depth_level for n in sapling.nodes.values()] == [1, 2, 2]
        assert sapling.level_sizes() == [1, 2]

    def test_first_parent_wins(self):
        # 3 is reachable from 1 and 2; BFS reaches it from 1 first
        sapling = treeify(_raw({0: [1, 2], 1: [3], 2: [3]}))
        assert sapling.nodes[3].parent == 1
        assert sapling.nodes[2].children == []

    def test_cycle_is_broken(self):
        sapling = treeify(_raw({0: [1], 1: [0]}))
        assert len(sapling) == 2
        assert sapling.nodes[0].parent is None

    def test_unreachable_dropped(self):
        sapling = treeify(_raw({0: [1], 5: []}))
        assert sapling.unreachable == 1
        assert 5 not in sapling.nodes

    def test_missing_root(self):
        with pytest.raises(InputError):
            treeify(RawGraph('s', 'u', 9, {0: 'a'}, {}, {}))

    def test_empty_name_after_normalization(self):
        with pytest.raises(InputError):
            treeify(_raw({0: [1]}, names={0: 'ok', 1: '???'}))


class TestPropagateTags:

    def test_root_gets_descendant_tags(self):
        graph = _raw({0: [1], 1: [2]}, tag_map={0: {'a': 1}, 1: {'b': 2}, 2: {'a': 3}})
        sapling = propagate_tags(treeify(graph))
        assert sapling.nodes[0].tags.entries == {'a': 4, 'b': 2}
        assert sapling.nodes[1].tags.entries == {'b': 2, 'a': 3}
        assert sapling.nodes[0].own_tags.entries == {'a': 1}

    def test_idempotent(self):
        graph = _raw({0: [1, 2]}, tag_map={1: {'x': 1}, 2: {'y': 1}})
        sapling = propagate_tags(treeify(graph))
        before = sapling.nodes[0].tags.copy()
        propagate_tags(sapling)
        assert sapling.nodes[0].tags == before

    def test_tag_counts_are_conserved(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            size = int(rng.integers(2, 12))
            children = {}
            for i in range(1, size):
                children.setdefault(int(rng.integers(0, i)), []).append(i)
            tag_map = {i: {f"t{int(rng.integers(0, 5))}": int(rng.integers(1, 4))}
                       for i in range(size)}
            sapling = propagate_tags(treeify(_raw(children, names={i: f"n{i}" for i in range(size)},
                                                  tag_map=tag_map)))
            own = TagBag()
            for node in sapling.nodes.values():
                own.update(node.own_tags)
            assert sapling.root_node.tags == own
            for node in sapling.nodes.values():
                below = node.own_tags.copy()
                for child_id in node.children:
                    below.update(sapling.nodes[child_id].tags)
                assert node.tags == below


class TestCorpus:

    def test_single_sapling(self):
        corpus = corpus_from_records([{'user_id': 'u', 'saplings': [
            sapling_record('s', 'africa', {}, [('kenya', {}), ('egypt', {})])]}])
        assert corpus.summary() == {'users': 1, 'saplings': 1, 'nodes': 3}

    def test_global_node_ids(self):
        corpus = corpus_from_records([
            {'user_id': 'u1', 'saplings': [sapling_record('s1', 'a', {}, [('b', {})])]},
            {'user_id': 'u2', 'saplings': [sapling_record('s2', 'a', {}, [('b', {})])]},
        ])
        assert sorted(corpus.nodes) == [0, 1, 2, 3]
        assert corpus.saplings['s2'].root == 2

    def test_roots_named_in_corpus_order(self, africa_corpus):
        roots = africa_corpus.roots_named('africa')
        assert [s.sapling_id for s in roots] == ['n1-a', 'n2-a', 'n3-a']

    def test_duplicate_sapling_id(self):
        record = sapling_record('dup', 'a', {})
        with pytest.raises(InputError):
            corpus_from_records([{'user_id': 'u1', 'saplings': [record]},
                                 {'user_id': 'u2', 'saplings': [record]}])

    def test_duplicate_user(self):
        with pytest.raises(InputError):
            corpus_from_records([{'user_id': 'u', 'saplings': []},
                                 {'user_id': 'u', 'saplings': []}])

    def test_dangling_child(self):
        record = {'sapling_id': 's', 'root': 0,
                  'nodes': [{'id': 0, 'name': 'a', 'children': [7]}]}
        with pytest.raises(InputError, match="undeclared child"):
            corpus_from_records([{'user_id': 'u', 'saplings': [record]}])

    def test_bad_tag_count(self):
        record = sapling_record('s', 'a', {'t': 0})
        with pytest.raises(InputError):
            corpus_from_records([{'user_id': 'u', 'saplings': [record]}])

    def test_user_without_saplings_kept(self):
        corpus = corpus_from_records([{'user_id': 'lurker', 'saplings': []}])
        assert 'lurker' in corpus.users
        assert corpus.summary()['saplings'] == 0

    def test_mark_experts(self, africa_corpus):
        africa_corpus.mark_experts({'x1'})
        flagged = {n.owner for n in africa_corpus.nodes.values() if n.is_expert_node}
        assert flagged == {'x1'}
        assert africa_corpus.users['x1'].label == 'expert'

    def test_empty_corpus(self):
        assert Corpus().summary() == {'users': 0, 'saplings': 0, 'nodes': 0}


class TestReferenceTaxonomy:

    def test_load_stems_names(self, tmp_path):
        path = tmp_path / 'ref.tsv'
        path.write_text("# animals\nAnimals\tReptiles\nreptiles\tsnakes\n", encoding='utf-8')
        ref = load_reference_taxonomy(path)
        assert ('anim', 'reptil') in ref.edges
        assert ref.roots == ['anim']

    def test_cycle_rejected(self):
        with pytest.raises(InputError, match="cycle"):
            ReferenceTaxonomy([('a', 'b'), ('b', 'c'), ('c', 'a')])

    def test_malformed_line(self, tmp_path):
        path = tmp_path / 'ref.tsv'
        path.write_text("just one column\n", encoding='utf-8')
        with pytest.raises(InputError):
            load_reference_taxonomy(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_reference_taxonomy(tmp_path / 'nope.tsv')

    def test_undecodable_bytes(self, tmp_path):
        path = tmp_path / 'ref.tsv'
        path.write_bytes(b'anim\tbird\n\xff\tfish\n')
        with pytest.raises(InputError, match="UTF-8"):
            load_reference_taxonomy(path)

    def test_write_then_load(self, tmp_path):
        ref = ReferenceTaxonomy([('anim', 'bird'), ('anim', 'reptil')])
        path = write_reference_taxonomy(ref, tmp_path / 'ref.tsv')
        assert load_reference_taxonomy(path).edges == ref.edges
