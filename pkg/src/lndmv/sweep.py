"""Grid sweep over lexicalization cutoff, training-set size and seed."""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .corpus import build_lexicon, encode
from .evaluation import evaluate
from .model import ValenceConfig
from .neural import NeuralConfig, NeuralModel
from .trainer import INIT_SCHEMES, Mode, TrainConfig, init_params, train

ENGLISH_CUTOFFS = (100000, 500, 200, 100, 80, 70, 60, 50, 40)
CHINESE_CUTOFFS = (100000, 100, 70, 50, 40, 30, 20, 12, 10)
DEFAULT_SEEDS = (0, 1, 2)
COLUMNS = ("cutoff", "vocab_size", "corpus_size", "seed", "init", "mode", "hidden",
           "dda_val", "dda_test", "seconds", "status")

_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"mode", "seed"}
_NEURAL_KEYS = {f.name for f in fields(NeuralConfig)} - {"seed"}


@dataclass
class SweepSpec:
    cutoffs: list = field(default_factory=lambda: list(ENGLISH_CUTOFFS))
    corpus_sizes: list = field(default_factory=lambda: ["all"])  # int or "all"
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    mode: str = "soft"
    init: str = "km"
    hidden: list = field(default_factory=lambda: [None])  # neural hidden sizes; None = config default
    overrides: dict = field(default_factory=dict)
    shuffle_seed: int = 0
    valence: tuple = (2, 2)

    def __post_init__(self):
        for name in ("cutoffs", "corpus_sizes", "seeds", "hidden"):
            if not list(getattr(self, name)):
                raise ValueError(f"{name} must be non-empty")
        if any(int(c) < 1 for c in self.cutoffs):
            raise ValueError("cutoffs must be positive")
        for s in self.corpus_sizes:
            if s != "all" and int(s) < 1:
                raise ValueError("corpus sizes must be positive or 'all'")
        self.mode = Mode(self.mode).value
        if self.init not in INIT_SCHEMES or self.init == "trees":
            raise ValueError(f"sweep init must be one of km, uniform, random, tabular; got {self.init!r}")
        unknown = set(self.overrides) - _TRAIN_KEYS - _NEURAL_KEYS
        if unknown:
            raise ValueError(f"unknown override(s): {sorted(unknown)}")
        if self.mode != "neural" and (set(self.overrides) & _NEURAL_KEYS - _TRAIN_KEYS
                                      or any(h is not None for h in self.hidden)):
            raise ValueError("neural settings given for a non-neural mode")

    @property
    def n_cells(self):
        return len(self.cutoffs) * len(self.corpus_sizes) * len(self.seeds) * len(self.hidden)


def _prefix(raw, size, order):
    n = len(raw) if size == "all" else min(int(size), len(raw))
    return [raw[i] for i in order[:n]]


def run_cell(train_raw, val_raw, test_raw, spec: SweepSpec, cutoff, size, seed, hidden):
    """Train and evaluate one grid cell; failures become a status string."""
    row = {"cutoff": cutoff, "vocab_size": "", "corpus_size": len(train_raw), "seed": seed,
           "init": spec.init, "mode": spec.mode, "hidden": "" if hidden is None else hidden,
           "dda_val": "", "dda_test": "", "seconds": "", "status": "ok"}
    t0 = time.perf_counter()
    try:
        lex = build_lexicon(train_raw, cutoff)
        row["vocab_size"] = lex.m
        corpus = encode(train_raw, lex)
        vcfg = ValenceConfig(*spec.valence)
        tcfg = TrainConfig(mode=spec.mode, seed=seed,
                           **{k: v for k, v in spec.overrides.items() if k in _TRAIN_KEYS})
        params0 = init_params(spec.init, corpus, lex, vcfg, seed=seed, lam=tcfg.lam)
        model = None
        if tcfg.mode is Mode.HARD_NEURAL:
            nkw = {k: v for k, v in spec.overrides.items() if k in _NEURAL_KEYS}
            if hidden is not None:
                nkw["hidden"] = hidden
            model = NeuralModel.for_lexicon(lex, vcfg, NeuralConfig(seed=seed, **nkw))
        params, _, _ = train(corpus, params0, tcfg, model)
        if val_raw:
            row["dda_val"] = evaluate(params, encode(val_raw, lex)).dda_all
        row["dda_test"] = evaluate(params, encode(test_raw, lex)).dda_all
    except Exception as exc:  # recorded per row; the sweep goes on
        row["status"] = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
    row["seconds"] = round(time.perf_counter() - t0, 3)
    return row


def _cell_job(args):
    return run_cell(*args)


def average_rows(rows, n_seeds):
    """One ``seed='mean'`` row for the given per-seed rows of one grid point."""
    ok = [r for r in rows if r["status"] == "ok"]
    base = dict(rows[0], seed="mean")

    def mean(key):
        vals = [r[key] for r in ok if r[key] != ""]
        return sum(vals) / len(vals) if vals else ""

    for key in ("dda_val", "dda_test", "seconds"):
        base[key] = mean(key)
    base["vocab_size"] = ok[0]["vocab_size"] if ok else rows[0]["vocab_size"]
    base["status"] = "ok" if len(ok) == n_seeds else f"partial {len(ok)}/{n_seeds}" if ok else "failed"
    return base


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return v


def run_sweep(spec: SweepSpec, train_raw, test_raw, val_raw=None, out_path=None, jobs: int = 1,
              on_row=None):
    """Run the whole grid; returns all rows (per-seed rows then the averages per grid point).

    Training-set prefixes come from one shuffle seeded by ``spec.shuffle_seed``,
    so larger sizes contain the smaller ones.  Rows are written in grid order
    by this process only, whatever ``jobs`` is.
    """
    order = np.random.default_rng(spec.shuffle_seed).permutation(len(train_raw))
    groups, jobs_args = [], []
    for cutoff in spec.cutoffs:
        for size in spec.corpus_sizes:
            part = _prefix(train_raw, size, order)
            for hidden in spec.hidden:
                groups.append(len(spec.seeds))
                for seed in spec.seeds:
                    jobs_args.append((part, val_raw, test_raw, spec, int(cutoff), size, seed, hidden))

    fh = open(out_path, "w", newline="") if out_path else None
    writer = csv.DictWriter(fh, fieldnames=COLUMNS) if fh else None
    if writer:
        writer.writeheader()

    def emit(row):
        if writer:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
            fh.flush()
        if on_row:
            on_row(row)

    rows, averaged = [], []
    try:
        if jobs > 1:
            ex = ProcessPoolExecutor(jobs)
            results = ex.map(_cell_job, jobs_args)
        else:
            ex = None
            results = map(_cell_job, jobs_args)
        pending = []
        g = 0
        for row in results:
            rows.append(row)
            pending.append(row)
            emit(row)
            if len(pending) == groups[g]:
                averaged.append(average_rows(pending, groups[g]))
                pending, g = [], g + 1
        if ex is not None:
            ex.shutdown()
        for row in averaged:
            emit(row)
    finally:
        if fh:
            fh.close()
    return rows + averaged
