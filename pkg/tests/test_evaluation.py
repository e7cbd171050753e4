import numpy as np
import pytest

from lndmv.corpus import Sentence
from lndmv.evaluation import dda, evaluate, parse_corpus, score_heads
from lndmv.model import ParseTree, init_uniform


def test_identical_trees():
    t = ParseTree((1, -1, 1))
    assert dda(t, t.to_conll()) == 1.0
    assert dda(t, t) == 1.0


def test_nine_of_ten():
    gold = [0] + [1] * 9
    pred = list(gold)
    pred[5] = 3
    assert dda(pred, gold) == pytest.approx(0.9)


def test_length_mismatch():
    with pytest.raises(ValueError):
        dda([0, 1, 1, 1, 1], [0, 1, 1, 1])


def test_single_token_sentence_scores_one():
    s = Sentence(np.array([0]), np.array([0]), (0,))
    assert evaluate(init_uniform(2), [s]).dda_all == 1.0


def test_micro_average_and_short_subset(tmp_path):
    corpus = [Sentence(np.zeros(2, int), np.zeros(2, int), (0, 1)),
              Sentence(np.zeros(11, int), np.zeros(11, int), (0,) + (1,) * 10)]
    preds = [(2, 0), (0,) + (1,) * 10]
    r = score_heads(preds, corpus)
    assert r.dda_all == pytest.approx(11 / 13)
    assert r.dda_le10 == 0.0 and r.tokens_le10 == 2
    r.write_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[-1].startswith("all,13,11,")
    assert "DDA (all)" in r.to_text()


def test_requires_gold_heads():
    with pytest.raises(ValueError):
        evaluate(init_uniform(1), [Sentence(np.array([0]), np.array([0]))])
    with pytest.raises(ValueError):
        evaluate(init_uniform(1), [])


def test_parse_corpus_gives_valid_trees():
    corpus = [Sentence(np.array([0, 1, 0]), np.array([0, 1, 0]))]
    [t] = parse_corpus(init_uniform(2), corpus)
    assert t.is_valid(3)
