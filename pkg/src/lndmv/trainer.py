"""EM drivers: soft EM and hard EM over tabular parameters, and batched
hard EM with a persistent neural rule network.
"""
from __future__ import annotations

import csv
import enum
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import chart
from .evaluation import evaluate
from .model import (CountTable, DmvParams, ValenceConfig, init_km, init_random, init_uniform,
                    mle_from_trees, normalize, tree_counts)
from .neural import NeuralConfig, NeuralModel, export_params, fit

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    SOFT_TABULAR = "soft"
    HARD_TABULAR = "hard"
    HARD_NEURAL = "neural"


@dataclass
class TrainConfig:
    mode: Mode = Mode.SOFT_TABULAR
    max_iters: int = 50
    ll_tol: float = 1e-6
    lam: float = 0.1
    em_batch: int = 1000
    seed: int = 0
    n_jobs: int = 1
    # epochs of network fitting on the initial grammar's parses before batched EM (0 = off)
    warm_start_epochs: int = 10

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.em_batch < 1:
            raise ValueError("em_batch must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


@dataclass
class IterRecord:
    iteration: int
    ll_per_token: float
    val_dda: Optional[float] = None
    seconds: float = 0.0


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    @property
    def ll(self):
        return [r.ll_per_token for r in self.records]

    def write_csv(self, path, timing=False):
        """Write the trace; wall time is left blank unless ``timing``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "ll_per_token", "val_dda", "seconds"])
            for r in self.records:
                w.writerow([r.iteration, repr(r.ll_per_token),
                            "" if r.val_dda is None else repr(r.val_dda),
                            f"{r.seconds:.3f}" if timing else ""])


# -- E-steps ---------------------------------------------------------------


def _chunks(n, k):
    k = max(1, min(k, n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [(bounds[i], bounds[i + 1]) for i in range(k)]


def _run_chunks(fn, corpus, n_jobs):
    parts = _chunks(len(corpus), n_jobs)
    if len(parts) == 1:
        return [fn(corpus)]
    with ThreadPoolExecutor(len(parts)) as ex:
        # results come back in chunk order, so the merge below is deterministic
        return list(ex.map(lambda ab: fn(corpus[ab[0]:ab[1]]), parts))


def soft_estep(corpus, params: DmvParams, n_jobs: int = 1):
    """Summed expected counts and total log-likelihood."""
    logs = chart._log_tables(params)

    def work(part):
        counts = CountTable.zeros(params.m, params.vcfg)
        ll = 0.0
        for sent in part:
            _, lp = chart.expected_counts(sent, params, logs=logs, counts=counts)
            ll += lp
        return counts, ll

    results = _run_chunks(work, corpus, n_jobs)
    counts, ll = results[0]
    for c, l in results[1:]:
        counts += c
        ll += l
    return counts, ll


def hard_estep(corpus, params: DmvParams, n_jobs: int = 1):
    """Viterbi trees, their rule counts and total log-score."""
    logs = chart._log_tables(params)

    def work(part):
        counts = CountTable.zeros(params.m, params.vcfg)
        trees, score = [], 0.0
        for sent in part:
            tree, s = chart.viterbi(sent, params, logs=logs, fallback=True)
            tree_counts(tree, sent.token_ids, counts)
            trees.append(tree)
            score += s
        return counts, score, trees

    results = _run_chunks(work, corpus, n_jobs)
    counts, score, trees = results[0]
    trees = list(trees)
    for c, s, t in results[1:]:
        counts += c
        score += s
        trees.extend(t)
    return counts, score, trees


def _n_tokens(corpus):
    return sum(len(s) for s in corpus)


def _val_dda(params, val_corpus):
    if val_corpus is None:
        return None
    return evaluate(params, val_corpus).dda_all


# -- drivers ---------------------------------------------------------------


def soft_em(corpus, params0: DmvParams, cfg: TrainConfig = TrainConfig(), val_corpus=None,
            on_iteration: Optional[Callable] = None):
    """Classical EM with inside-outside expected counts.

    The trace entry of iteration t holds the log-likelihood of the parameters
    that entered iteration t; with ``lam=0`` that sequence never decreases.
    """
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    n_tok = _n_tokens(corpus)
    params = params0
    trace = TrainTrace()
    prev = None
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        counts, ll = soft_estep(corpus, params, cfg.n_jobs)
        params = normalize(counts, cfg.lam)
        ll /= n_tok
        trace.records.append(IterRecord(it, ll, _val_dda(params, val_corpus), time.perf_counter() - t0))
        log.info("soft EM iter %d  ll/token %.6f", it, ll)
        if on_iteration is not None:
            on_iteration(it, params, None)
        if prev is not None and abs(ll - prev) < cfg.ll_tol:
            break
        prev = ll
    return params, trace


def hard_em_tabular(corpus, params0: DmvParams, cfg: TrainConfig = TrainConfig(), val_corpus=None,
                    on_iteration: Optional[Callable] = None):
    """Viterbi EM: counts from the single best tree per sentence."""
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    n_tok = _n_tokens(corpus)
    params = params0
    trace = TrainTrace()
    prev = None
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        counts, score, _ = hard_estep(corpus, params, cfg.n_jobs)
        params = normalize(counts, cfg.lam)
        score /= n_tok
        trace.records.append(IterRecord(it, score, _val_dda(params, val_corpus), time.perf_counter() - t0))
        log.info("hard EM iter %d  viterbi score/token %.6f", it, score)
        if on_iteration is not None:
            on_iteration(it, params, None)
        if prev is not None and abs(score - prev) < cfg.ll_tol:
            break
        prev = score
    return params, trace


def cyclic_batches(n, size, rng):
    """Endless stream of index batches over a fresh permutation each pass."""
    order = rng.permutation(n)
    pos = 0
    while True:
        batch = []
        while len(batch) < size:
            if pos == n:
                order = rng.permutation(n)
                pos = 0
            take = min(size - len(batch), n - pos)
            batch.extend(order[pos:pos + take].tolist())
            pos += take
        yield batch


def hard_em_neural(corpus, model: NeuralModel, params0: DmvParams, cfg: TrainConfig = TrainConfig(),
                   ncfg: Optional[NeuralConfig] = None, val_corpus=None,
                   on_iteration: Optional[Callable] = None):
    """Batched hard EM; the same network (weights and velocity) is trained throughout.

    Each iteration Viterbi-parses the next ``em_batch`` sentences with the
    current grammar, fits the network on those counts and re-exports the
    grammar.  ROOT counts are summed over all iterations.
    """
    if len(corpus) == 0:
        raise ValueError("empty training corpus")
    ncfg = ncfg or model.cfg
    batch = cfg.em_batch
    if batch > len(corpus):
        log.warning("em_batch %d exceeds corpus size %d; clamping", batch, len(corpus))
        batch = len(corpus)
    rng = np.random.default_rng(cfg.seed)
    vcfg = params0.vcfg
    root_counts = np.zeros(params0.m)
    params = params0
    if cfg.warm_start_epochs > 0:
        counts, _, _ = hard_estep(corpus, params0, cfg.n_jobs)
        fit(model, counts, ncfg, epochs=cfg.warm_start_epochs)
        root_counts += counts.root
        params = export_params(model, None, vcfg, root_counts, cfg.lam)
    trace = TrainTrace()
    batches = cyclic_batches(len(corpus), batch, rng)
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        idx = next(batches)
        sents = [corpus[i] for i in idx]
        counts, score, _ = hard_estep(sents, params, cfg.n_jobs)
        root_counts += counts.root
        fit(model, counts, ncfg)
        params = export_params(model, None, vcfg, root_counts, cfg.lam)
        score /= _n_tokens(sents)
        trace.records.append(IterRecord(it, score, _val_dda(params, val_corpus), time.perf_counter() - t0))
        log.info("neural hard EM iter %d  batch score/token %.6f", it, score)
        if on_iteration is not None:
            on_iteration(it, params, model)
    return model, params, trace


def train(corpus, params0: DmvParams, cfg: TrainConfig, model: Optional[NeuralModel] = None,
          val_corpus=None, on_iteration=None):
    """Dispatch on ``cfg.mode``; returns (params, trace, model_or_None)."""
    if cfg.mode is Mode.SOFT_TABULAR:
        params, trace = soft_em(corpus, params0, cfg, val_corpus, on_iteration)
        return params, trace, None
    if cfg.mode is Mode.HARD_TABULAR:
        params, trace = hard_em_tabular(corpus, params0, cfg, val_corpus, on_iteration)
        return params, trace, None
    if model is None:
        raise ValueError("neural mode needs a NeuralModel")
    model, params, trace = hard_em_neural(corpus, model, params0, cfg, model.cfg, val_corpus,
                                          on_iteration)
    return params, trace, model


# -- initialization --------------------------------------------------------

INIT_SCHEMES = ("km", "uniform", "random", "trees", "tabular")


def init_params(scheme: str, corpus, lexicon, vcfg=None, seed: int = 0, trees=None,
                lam: float = 0.1, tabular_iters: int = 100):
    """Starting grammar for one of the initialization schemes.

    ``trees`` supplies the parses for ``"trees"``.  ``"tabular"`` runs soft EM
    from KM to convergence and takes the MLE of its Viterbi parses.
    """
    vcfg = vcfg or ValenceConfig()
    if scheme == "km":
        return init_km(corpus, lexicon, vcfg)
    if scheme == "uniform":
        return init_uniform(lexicon, vcfg)
    if scheme == "random":
        return init_random(lexicon, vcfg, seed)
    if scheme == "trees":
        if trees is None:
            raise ValueError("'trees' initialization needs parse trees")
        return mle_from_trees(corpus, lexicon, vcfg, lam, trees)
    if scheme == "tabular":
        params, _ = soft_em(corpus, init_km(corpus, lexicon, vcfg),
                            TrainConfig(max_iters=tabular_iters, lam=lam))
        _, _, parsed = hard_estep(corpus, params)
        return mle_from_trees(corpus, lexicon, vcfg, lam, parsed)
    raise ValueError(f"unknown initialization {scheme!r}; expected one of {INIT_SCHEMES}")
