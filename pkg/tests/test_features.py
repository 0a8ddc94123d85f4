"""Tests for expertise features."""

import math
from collections import Counter

import pandas as pd
import pytest

from folkgather.errors import InputError
from folkgather.features import (
    FEATURE_COLUMNS, count_conflicts, coverage, extract_features, js_divergence, level_balance,
    read_features, root_diversity, sapling_balance, sapling_features, sapling_variety,
    twig_agreement, user_balance, user_disparity, user_features, write_features,
)
from folkgather.model import TagBag, corpus_from_records
from tests.conftest import africa_records, sapling_record, tags


def _corpus(*saplings_by_user):
    return corpus_from_records([
        {'user_id': user, 'saplings': list(saplings)} for user, saplings in saplings_by_user])


class TestUserBalance:

    def test_worked_example(self):
        assert user_balance([9, 1]) == pytest.approx(0.4690, abs=1e-4)

    def test_equal_sizes(self):
        assert user_balance([4, 4, 4]) == pytest.approx(1.0)

    def test_single_sapling(self):
        assert user_balance([7]) == 0.0

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            user_balance([])


class TestDisparity:

    def test_disjoint_bags_ln2(self):
        a, b = TagBag({'x': 3}), TagBag({'y': 5})
        assert js_divergence(a, b) == pytest.approx(math.log(2), abs=1e-9)

    def test_identical_bags_zero(self):
        a = TagBag({'x': 1, 'y': 2})
        assert js_divergence(a, a.copy()) == pytest.approx(0.0, abs=1e-12)

    def test_user_disparity_pairs(self):
        bags = [TagBag({'x': 1}), TagBag({'y': 1}), TagBag({'z': 1})]
        total, normalized = user_disparity(bags, node_count=6)
        assert total == pytest.approx(3 * math.log(2))
        assert normalized == pytest.approx(total / 6)

    def test_single_bag(self):
        assert user_disparity([TagBag({'x': 1})]) == (0.0, 0.0)

    def test_empty_bags_skipped(self):
        total, _ = user_disparity([TagBag({'x': 1}), TagBag(), TagBag({'y': 1})])
        assert total == pytest.approx(math.log(2))


class TestLevelBalance:

    def test_worked_example(self):
        assert level_balance([3, 3, 1, 2]) == pytest.approx(0.94553, abs=1e-5)

    def test_single_node_level(self):
        assert level_balance([5]) == 1.0

    def test_leaf_level(self):
        assert level_balance([0, 0, 0]) == 1.0

    def test_sapling_balance_averages_levels(self):
        corpus = _corpus(('u', [sapling_record('s', 'r', {}, [
            ('a', {}, [('a1', {}), ('a2', {})]),
            ('b', {}),
        ])]))
        sapling = corpus.saplings['s']
        # level 1: [2] -> 1; level 2: [2, 0] -> 0; level 3: [0, 0] -> 1
        assert sapling_balance(sapling) == pytest.approx(2 / 3)


class TestSaplingFeatures:

    def _sapling(self):
        corpus = _corpus(('u', [sapling_record('s', 'r', {}, [
            ('a', {}, [('x', {}), ('x', {})]),
            ('b', {}),
        ])]))
        return corpus, corpus.saplings['s']

    def test_variety_weights_levels(self):
        _, sapling = self._sapling()
        # levels (1, 2, 2): 1*1 + 2*2 + 3*2
        assert sapling_variety(sapling) == 11

    def test_structure(self):
        corpus, sapling = self._sapling()
        f = sapling_features(sapling, twig_agreement(corpus), set(sapling.twigs()))
        assert f.depth == 3
        assert f.breadth == 2
        assert f.num_nodes == 5
        assert f.num_leaves == 3
        assert f.leaf_ratio == pytest.approx(0.6)
        assert f.num_children_of_root == 2
        assert f.unique_twig_ratio == pytest.approx(3 / 4)
        assert f.unique_term_ratio == pytest.approx(4 / 5)
        assert f.duplicate_child_ratio == pytest.approx(2 / 4)
        assert f.agreement == pytest.approx(1.0)

    def test_single_node_sapling(self):
        corpus = _corpus(('u', [sapling_record('s', 'r', {})]))
        sapling = corpus.saplings['s']
        f = sapling_features(sapling, twig_agreement(corpus), set())
        assert f.depth == 1
        assert f.agreement == 0.0
        assert f.balance == 1.0


class TestConflicts:

    def test_reversed_twig_counted_once(self):
        corpus = _corpus(('u', [
            sapling_record('s1', 'animals', {}, [('birds', {})]),
            sapling_record('s2', 'birds', {}, [('animals', {})]),
            sapling_record('s3', 'animals', {}, [('birds', {})]),
        ]))
        assert count_conflicts(corpus.saplings_of('u')) == 1

    def test_no_conflicts(self, africa_corpus):
        assert count_conflicts(africa_corpus.saplings_of('n1')) == 0


class TestAgreement:

    def test_counts_distinct_users(self):
        corpus = _corpus(
            ('u1', [sapling_record('s1', 'a', {}, [('b', {})]),
                    sapling_record('s2', 'a', {}, [('b', {})])]),
            ('u2', [sapling_record('s3', 'a', {}, [('b', {}), ('c', {})])]),
        )
        index = twig_agreement(corpus)
        assert index[('a', 'b')] == 2
        assert index[('a', 'c')] == 1


class TestCoverage:

    @pytest.mark.parametrize("k", [1, 2, 3, 7, 10, 13])
    def test_flat_distribution_closed_form(self, k):
        counts = Counter({f"c{i}": 1 for i in range(k)})
        needed = -(-7 * k // 10)
        assert coverage(counts, 70) == 100.0 * needed / k

    def test_skewed(self):
        counts = Counter({'a': 8, 'b': 1, 'c': 1})
        assert coverage(counts, 70) == pytest.approx(100 / 3)
        assert coverage(counts, 50) == pytest.approx(100 / 3)

    def test_empty(self):
        assert coverage(Counter(), 30) == 0.0

    def test_root_diversity(self, africa_corpus):
        d = root_diversity(africa_corpus, 'africa')
        assert d.num_creators == 3
        assert d.num_unique_children == 3
        # kenya 3, egypt 2, christma 1
        assert d.coverage_50 == pytest.approx(100 / 3)
        assert d.coverage_70 == pytest.approx(200 / 3)

    def test_unknown_root(self, africa_corpus):
        with pytest.raises(InputError):
            root_diversity(africa_corpus, 'europe')


class TestUserFeatures:

    def test_counts(self, africa_corpus):
        f = user_features(africa_corpus.saplings_of('n1'))
        assert f.variety == 1
        assert f.num_twigs == 2
        assert f.balance == 0.0
        assert f.disparity == 0.0


class TestExtractFeatures:

    def test_columns_and_index(self, africa_corpus):
        table = extract_features(africa_corpus)
        assert list(table.columns) == FEATURE_COLUMNS
        assert sorted(table.index) == ['n1', 'n2', 'n3', 'x1', 'x2']
        assert table.loc['x1', 'sapling_depth_max'] == 2

    def test_threads_do_not_change_values(self, africa_corpus):
        single = extract_features(africa_corpus, threads=1)
        parallel = extract_features(africa_corpus, threads=4)
        assert single.equals(parallel)

    def test_users_without_saplings_skipped(self):
        corpus = corpus_from_records([
            {'user_id': 'a', 'saplings': [sapling_record('s', 'r', tags('t1'))]},
            {'user_id': 'b', 'saplings': []},
        ])
        assert list(extract_features(corpus).index) == ['a']

    def test_csv_written_and_read(self, africa_corpus, tmp_path):
        table = extract_features(africa_corpus)
        loaded = read_features(write_features(table, tmp_path / 'f.csv'))
        assert list(loaded.columns) == FEATURE_COLUMNS
        assert list(loaded.index) == list(table.index)
        assert loaded['sapling_num_nodes_mean'].tolist() == table['sapling_num_nodes_mean'].tolist()

    def test_renaming_users_and_tags_keeps_values(self):
        users = {'n1': 'zed', 'n2': 'yan', 'n3': 'xia', 'x1': 'bob', 'x2': 'amy'}
        records = africa_records()
        for record in records:
            record['user_id'] = users[record['user_id']]
            for sapling in record['saplings']:
                for node in sapling['nodes']:
                    node['tags'] = {f"tag{t}": n for t, n in node['tags'].items()}
        original = extract_features(corpus_from_records(africa_records()))
        renamed = extract_features(corpus_from_records(records))
        renamed = renamed.loc[[users[u] for u in original.index]]
        pd.testing.assert_frame_equal(renamed.reset_index(drop=True),
                                      original.reset_index(drop=True))
