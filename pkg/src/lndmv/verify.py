"""Self-check suite: chart vs brute-force enumeration, and backprop vs finite differences."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import chart
from .model import CountTable, DmvParams, ValenceConfig
from .neural import NeuralConfig, NeuralModel, gradient_check

ORACLE_TOL = 1e-9
GRAD_TOL = 1e-4


def random_params(m, vcfg, rng, sharpness=None):
    """Random valid tables; ``sharpness`` > 1 makes them peaked (Dirichlet-like)."""
    if sharpness is None:
        sharpness = rng.choice([0.5, 1.0, 3.0])

    def table(shape):
        w = np.exp(sharpness * rng.normal(size=shape))
        return w / w.sum(axis=-1, keepdims=True)

    return DmvParams(table(m), table((m, 2, vcfg.Vc, m)), table((m, 2, vcfg.Vd, 2)))


def random_case(rng, max_len=6, max_vocab=5):
    m = int(rng.integers(1, max_vocab + 1))
    vcfg = ValenceConfig(int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    n = int(rng.integers(1, max_len + 1))
    return rng.integers(0, m, size=n), random_params(m, vcfg, rng)


def _max_count_dev(a: CountTable, b: CountTable):
    return max(float(np.max(np.abs(a.root - b.root))), float(np.max(np.abs(a.child - b.child))),
               float(np.max(np.abs(a.decision - b.decision))))


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self):
        return bool(self.value < self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<34} max {self.value:.3e}  (tol {self.tolerance:.0e})"


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_text(self):
        return "\n".join(c.line() for c in self.checks)


def oracle_deviations(n_cases=200, seed=0, max_len=6, max_vocab=5):
    """Largest chart-vs-enumeration deviations over random cases.

    Inside and Viterbi are compared as relative errors of probabilities,
    counts as absolute differences.  ``viterbi_tree`` is the gap between
    the oracle's best score and the score of the tree Viterbi returned.
    """
    rng = np.random.default_rng(seed)
    dev = {"inside": 0.0, "viterbi_score": 0.0, "viterbi_tree": 0.0, "counts": 0.0,
           "parent_mass": 0.0}
    for _ in range(n_cases):
        toks, params = random_case(rng, max_len, max_vocab)
        o = chart.oracle(toks, params)
        counts, lz = chart.expected_counts(toks, params)
        dev["inside"] = max(dev["inside"], abs(math.expm1(lz - o["log_prob"])))
        tree, score = chart.viterbi(toks, params)
        dev["viterbi_score"] = max(dev["viterbi_score"], abs(math.expm1(score - o["best_score"])))
        attained = chart.tree_log_prob(tree, toks, params)
        dev["viterbi_tree"] = max(dev["viterbi_tree"], abs(math.expm1(attained - o["best_score"])))
        dev["counts"] = max(dev["counts"], _max_count_dev(counts, o["counts"]))
        post = chart.arc_posteriors(toks, params)
        dev["parent_mass"] = max(dev["parent_mass"], float(np.max(np.abs(post.sum(axis=1) - 1))))
    return dev


def gradient_fixture(seed=0, m=12, n_tags=4, vcfg=ValenceConfig(2, 2), hidden=40):
    rng = np.random.default_rng(seed)
    token_tag = np.arange(m) % n_tags
    cfg = NeuralConfig(d_word_in=8, d_tag_in=4, d_val=3, k=6, k_tag=3, hidden=hidden,
                       init_scale=0.5, seed=seed)
    model = NeuralModel(token_tag, n_tags, vcfg, cfg)
    counts = CountTable.zeros(m, vcfg)
    counts.child[...] = rng.poisson(0.4, counts.child.shape)
    counts.decision[...] = rng.poisson(1.5, counts.decision.shape)
    return model, counts


def run_checks(n_cases=200, seed=0, inject_fault=False, grad_samples=1000) -> VerifyReport:
    dev = oracle_deviations(n_cases, seed)
    report = VerifyReport([
        CheckResult("inside vs enumeration (rel)", dev["inside"], ORACLE_TOL),
        CheckResult("viterbi score vs argmax (rel)", dev["viterbi_score"], ORACLE_TOL),
        CheckResult("viterbi tree attains max (rel)", dev["viterbi_tree"], ORACLE_TOL),
        CheckResult("expected counts vs enumeration", dev["counts"], ORACLE_TOL),
        CheckResult("parent posterior mass", dev["parent_mass"], ORACLE_TOL),
    ])
    worst = 0.0
    for hidden in (40, 9):  # 9 = k + k_tag: no projection layer
        model, counts = gradient_fixture(seed, hidden=hidden)
        worst = max(worst, gradient_check(model, counts, 1e-5, grad_samples // 2, seed=seed,
                                          corrupt=inject_fault))
    report.checks.append(CheckResult("backprop vs finite differences", worst, GRAD_TOL))
    return report
