"""Directed dependency accuracy."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

from . import chart
from .model import DmvParams, ParseTree


def dda(pred, gold) -> float:
    """Fraction of positions whose predicted head equals the gold head.

    Both arguments are either ParseTree objects or CoNLL head lists
    (0 = root, 1-based); a ParseTree is converted before comparing.
    """
    p = pred.to_conll() if isinstance(pred, ParseTree) else tuple(pred)
    g = gold.to_conll() if isinstance(gold, ParseTree) else tuple(gold)
    if len(p) != len(g):
        raise ValueError(f"length mismatch: predicted {len(p)} heads, gold {len(g)}")
    if not g:
        raise ValueError("empty sentence")
    return sum(a == b for a, b in zip(p, g)) / len(g)


@dataclass
class SentenceScore:
    index: int
    length: int
    correct: int
    pred_heads: tuple


@dataclass
class EvalReport:
    dda_all: float
    dda_le10: float
    tokens_scored: int
    tokens_le10: int
    sentences: list = field(default_factory=list, repr=False)

    def to_text(self):
        le10 = f"{self.dda_le10:.4f}" if self.tokens_le10 else "n/a"
        return (f"sentences      {len(self.sentences)}\n"
                f"tokens         {self.tokens_scored}\n"
                f"DDA (all)      {self.dda_all:.4f}\n"
                f"DDA (len<=10)  {le10}\n")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sentence", "length", "correct", "dda"])
            for s in self.sentences:
                w.writerow([s.index, s.length, s.correct, repr(s.correct / s.length)])
            w.writerow(["all", self.tokens_scored, sum(s.correct for s in self.sentences),
                        repr(self.dda_all)])


def score_heads(pred_heads, corpus) -> EvalReport:
    """Micro-averaged DDA of predicted CoNLL heads against the corpus gold heads."""
    if len(corpus) == 0:
        raise ValueError("cannot evaluate an empty corpus")
    if len(pred_heads) != len(corpus):
        raise ValueError(f"{len(pred_heads)} predictions for {len(corpus)} sentences")
    records = []
    for i, (pred, sent) in enumerate(zip(pred_heads, corpus)):
        if sent.gold_heads is None:
            raise ValueError(f"sentence {i} has no gold heads")
        pred = tuple(pred)
        if len(pred) != len(sent.gold_heads):
            raise ValueError(f"sentence {i}: length mismatch")
        correct = sum(a == b for a, b in zip(pred, sent.gold_heads))
        records.append(SentenceScore(i, len(pred), correct, pred))
    tot = sum(r.length for r in records)
    cor = sum(r.correct for r in records)
    short = [r for r in records if r.length <= 10]
    tot10 = sum(r.length for r in short)
    cor10 = sum(r.correct for r in short)
    return EvalReport(cor / tot, cor10 / tot10 if tot10 else 0.0, tot, tot10, records)


def parse_corpus(params: DmvParams, corpus):
    logs = chart._log_tables(params)
    return [chart.viterbi(s, params, logs=logs, fallback=True)[0] for s in corpus]


def evaluate(params: DmvParams, corpus) -> EvalReport:
    """Viterbi-parse every sentence and score it against its gold heads."""
    if len(corpus) == 0:
        raise ValueError("cannot evaluate an empty corpus")
    if any(s.gold_heads is None for s in corpus):
        raise ValueError("every sentence needs gold heads")
    trees = parse_corpus(params, corpus)
    return score_heads([t.to_conll() for t in trees], corpus)
