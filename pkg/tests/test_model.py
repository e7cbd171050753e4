import numpy as np
import pytest

from lndmv.corpus import Sentence
from lndmv.errors import TreeError
from lndmv.model import (CONTINUE, LEFT, RIGHT, STOP, CountTable, DmvParams, ParseTree,
                         ValenceConfig, init_km, init_random, init_uniform, km_counts,
                         mle_from_trees, normalize, tree_counts)


def sent(toks, heads=None):
    toks = np.array(toks)
    return Sentence(toks, toks.copy(), None if heads is None else tuple(heads))


def _counts_1d(values, lam):
    t = CountTable.zeros(len(values), ValenceConfig(1, 1))
    t.root[:] = values
    return normalize(t, lam).root


@pytest.mark.parametrize("values,lam,expected", [
    ([2, 2], 0.0, [0.5, 0.5]),
    ([0, 0], 1.0, [0.5, 0.5]),
    ([3, 1], 0.0, [0.75, 0.25]),
    ([0, 0], 0.0, [0.5, 0.5]),  # empty context falls back to uniform
])
def test_normalize(values, lam, expected):
    np.testing.assert_allclose(_counts_1d(values, lam), expected)


def test_normalize_rejects_negative_smoothing():
    with pytest.raises(ValueError):
        normalize(CountTable.zeros(2, ValenceConfig()), -1.0)


def test_uniform():
    p = init_uniform(4)
    np.testing.assert_allclose(p.child, 0.25)
    np.testing.assert_allclose(p.decision, 0.5)
    np.testing.assert_allclose(init_uniform(1).root, [1.0])


def test_random_init_is_seeded_and_normalized():
    vc = ValenceConfig(3, 2)
    a, b, c = init_random(5, vc, 7), init_random(5, vc, 7), init_random(5, vc, 8)
    a.check(1e-9)
    assert a == b
    assert not np.array_equal(a.child, c.child)
    assert a.child.shape == (5, 2, 3, 5) and a.decision.shape == (5, 2, 2, 2)


def test_km_two_tokens_single_candidate():
    p = init_km([sent([0, 1])], 2)
    np.testing.assert_allclose(p.child[0, RIGHT, :, 1], 1.0)
    np.testing.assert_allclose(p.child[1, LEFT, :, 0], 1.0)


def test_km_harmonic_weights_three_tokens():
    c = km_counts([sent([0, 1, 2])], 3)
    z = 1.0 + 0.5 + 1.0 / 3.0  # parents of token C: B (dist 1), A (dist 2), ROOT (1/n)
    np.testing.assert_allclose(c.child[1, RIGHT, 0, 2], 1.0 / z)
    np.testing.assert_allclose(c.child[0, RIGHT, 0, 2], 0.5 / z)
    np.testing.assert_allclose(c.child[1, RIGHT, 0, 2] / c.child[0, RIGHT, 0, 2], 2.0)
    # each dependent spreads exactly one unit of parent mass
    total = c.root.sum() + c.child[:, :, 0].sum()
    np.testing.assert_allclose(total, 3.0)


def test_km_positive_on_every_attachment_the_corpus_allows():
    corpus = [sent([0, 1, 2]), sent([2, 1]), sent([1, 0, 3, 2])]
    p = init_km(corpus, 4)
    for s in corpus:
        t = s.token_ids
        for a in range(len(t)):
            assert p.root[t[a]] > 0
            for h in range(len(t)):
                if h != a:
                    assert p.child[t[h], RIGHT if a > h else LEFT, :, t[a]].min() > 0
    assert np.all(p.decision[:, :, :, STOP] > 0)
    p.check()


def test_parse_tree_validation():
    ParseTree((1, -1, 1)).validate(3)
    with pytest.raises(TreeError):
        ParseTree((-1, -1)).validate()  # two roots
    with pytest.raises(TreeError):
        ParseTree((1, 0, -1)).validate()  # cycle
    with pytest.raises(TreeError):
        ParseTree((2, 3, -1, 2)).validate()  # crossing arcs
    assert ParseTree.from_conll((2, 0)).heads == (1, -1)
    assert ParseTree((1, -1)).to_conll() == (2, 0)


def test_dependents_nearest_first():
    t = ParseTree((2, 2, -1, 2, 2))
    assert t.dependents(2) == ([1, 0], [3, 4])


def test_tree_counts_follow_valence():
    # head 1 with left children at 0 and right children 2, 3 (nearest first)
    c = tree_counts(ParseTree((1, -1, 1, 1)), np.array([0, 1, 2, 3]), CountTable.zeros(4, ValenceConfig(2, 2)))
    assert c.root[1] == 1
    assert c.child[1, LEFT, 0, 0] == 1
    assert c.child[1, RIGHT, 0, 2] == 1 and c.child[1, RIGHT, 1, 3] == 1
    assert c.decision[1, RIGHT, 0, CONTINUE] == 1 and c.decision[1, RIGHT, 1, CONTINUE] == 1
    assert c.decision[1, RIGHT, 1, STOP] == 1  # stop after 2 children: valence capped at 1
    assert c.decision[1, LEFT, 1, STOP] == 1
    assert c.decision[0, LEFT, 0, STOP] == 1 and c.decision[0, RIGHT, 0, STOP] == 1


def test_mle_relative_frequencies():
    # token 0 heads two right children: one token 1 then one token 2 (nearest first)
    corpus = [sent([0, 1, 2], [0, 1, 1]), sent([0, 1], [0, 1])]
    p = mle_from_trees(corpus, 3, ValenceConfig(1, 2))
    np.testing.assert_allclose(p.child[0, RIGHT, 0], [0, 2 / 3, 1 / 3])
    np.testing.assert_allclose(p.root, [1, 0, 0])
    # never continued from token 1 on the right: CONTINUE prob 0 with lam=0
    assert p.decision[1, RIGHT, 0, CONTINUE] == 0
    q = mle_from_trees(corpus, 3, ValenceConfig(1, 2), lam=0.5)
    assert q.root.min() > 0 and q.child.min() > 0 and q.decision.min() > 0


def test_mle_with_supplied_trees_and_bad_tree():
    corpus = [sent([0, 1])]
    p = mle_from_trees(corpus, 2, trees=[ParseTree((-1, 0))])
    assert p.root[0] == 1
    with pytest.raises(TreeError, match="sentence 0"):
        mle_from_trees(corpus, 2, trees=[ParseTree((-1, -1))])


def test_check_flags_bad_tables():
    p = init_uniform(3)
    p.child[0, 0, 0, 0] = 0.9
    with pytest.raises(ValueError):
        p.check()


def test_count_table_arithmetic():
    a = CountTable.zeros(2, ValenceConfig())
    a.root[:] = [1, 2]
    b = a + a
    np.testing.assert_array_equal(b.root, [2, 4])
    a += b
    np.testing.assert_array_equal(a.root, [3, 6])
