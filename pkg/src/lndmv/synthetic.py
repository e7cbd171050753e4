"""A near-deterministic word-level DMV used as a shipped benchmark.

Every CHILD and DECISION distribution puts ``p_mode`` (>= 0.95) on one
outcome; the rest of a CHILD row is spread over other words with the mode's
POS tag, so noise varies the words but not the syntax.  ROOT is uniform over
the verbs so that the corpus is not one repeated sentence.
"""
from __future__ import annotations

from importlib import resources

import numpy as np

from .corpus import Lexicon, RawSentence, read_conll, write_conll
from .model import CONTINUE, LEFT, RIGHT, STOP, DmvParams, ValenceConfig

SHIPPED_SEED = 20170907
SHIPPED_P_MODE = 0.98
SHIPPED_SIZES = {"train": 2000, "val": 500, "test": 500}


def _words(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


def make_grammar(seed: int = SHIPPED_SEED, p_mode: float = SHIPPED_P_MODE):
    """Return ``(lexicon, params)`` of the generating grammar (Vc = Vd = 2)."""
    if p_mode < 0.95 or p_mode > 1:
        raise ValueError("p_mode must lie in [0.95, 1]")
    rng = np.random.default_rng(seed)
    inventory = {
        "V": _words("v", 8), "N": _words("n", 12), "D": ["the", "a"],
        "J": _words("j", 4), "P": _words("p", 3), "R": _words("r", 3),
    }
    tags = tuple(sorted(inventory))
    tokens = tuple((w, t) for t in tags for w in inventory[t])
    # generation-only lexicon: no POS-fallback tokens
    lex_tokens = tuple((None, t) for t in tags) + tokens
    lex = Lexicon(tags, lex_tokens, 1)
    ids = {tok: lex.token_of(*tok) for tok in tokens}
    by_tag = {t: [ids[(w, t)] for w in inventory[t]] for t in tags}
    m = lex.m
    vcfg = ValenceConfig(2, 2)

    def pick(tag, subset=None):
        pool = by_tag[tag] if subset is None else [by_tag[tag][i] for i in subset]
        return int(pool[rng.integers(len(pool))])

    # (head, direction) -> mode child, or None for "stop at valence 0"
    frame = {}
    for i, v in enumerate(by_tag["V"]):
        frame[v, LEFT] = pick("N")
        frame[v, RIGHT] = pick("N") if i < 6 else pick("R")
    for i, n in enumerate(by_tag["N"]):
        frame[n, LEFT] = pick("D") if i % 3 else pick("J")
        frame[n, RIGHT] = pick("P") if i < 3 else None
    for i, j in enumerate(by_tag["J"]):
        frame[j, LEFT] = pick("D") if i % 2 == 0 else None
        frame[j, RIGHT] = None
    for p in by_tag["P"]:
        frame[p, LEFT] = None
        frame[p, RIGHT] = pick("N", range(3, 12))

    root = np.zeros(m)
    root[by_tag["V"]] = 1.0 / len(by_tag["V"])
    child = np.zeros((m, 2, vcfg.Vc, m))
    decision = np.zeros((m, 2, vcfg.Vd, 2))
    tag_of = {ids[tok]: tok[1] for tok in tokens}
    for h in range(m):
        for d in (LEFT, RIGHT):
            mode_child = frame.get((h, d))
            # valence 0: continue iff the frame has a child; valence >= 1: stop
            decision[h, d, 0] = [1 - p_mode, p_mode] if mode_child is not None else [p_mode, 1 - p_mode]
            decision[h, d, 1] = [p_mode, 1 - p_mode]
            if mode_child is None:
                # only reached through noise: a word of a leaf-ish class
                mode_child = by_tag["D"][h % 2] if d == LEFT else by_tag["R"][h % 3]
            same = [t for t in by_tag[tag_of[mode_child]] if t != mode_child]
            for v in range(vcfg.Vc):
                child[h, d, v, mode_child] = p_mode
                child[h, d, v, same] = (1 - p_mode) / len(same)
    for h in range(len(tags)):  # fallback tokens never occur; keep rows valid
        child[h, :, :, :] = 1.0 / m
        decision[h, :, :, :] = [1.0, 0.0]
    return lex, DmvParams(root, child, decision).check()


def sample_tree(params: DmvParams, rng, max_len=None, max_tries=1000):
    """Draw (token ids, 0-based heads with -1 for root) from the generative story."""
    Vc = params.child.shape[2]
    Vd = params.decision.shape[2]
    m = params.m
    for _ in range(max_tries):
        nodes = []  # (token, parent node index)

        def grow(node):
            tok = nodes[node][0]
            sides = []
            for d in (LEFT, RIGHT):
                kids = []
                k = 0
                while rng.random() < params.decision[tok, d, min(k, Vd - 1), CONTINUE]:
                    c = int(rng.choice(m, p=params.child[tok, d, min(k, Vc - 1)]))
                    nodes.append((c, node))
                    kids.append(len(nodes) - 1)
                    k += 1
                    if len(nodes) > 60:
                        raise OverflowError
                sides.append(kids)
            return [grow_order(c) for c in sides[LEFT]], [grow_order(c) for c in sides[RIGHT]]

        def grow_order(node):
            left, right = grow(node)
            seq = []
            for sub in reversed(left):  # nearest-first -> linear order
                seq.extend(sub)
            seq.append(node)
            for sub in right:
                seq.extend(sub)
            return seq

        r = int(rng.choice(m, p=params.root))
        nodes.append((r, -1))
        try:
            order = grow_order(0)
        except OverflowError:
            continue
        if max_len is not None and len(order) > max_len:
            continue
        pos = {node: i for i, node in enumerate(order)}
        toks = [nodes[node][0] for node in order]
        heads = [pos[nodes[node][1]] if nodes[node][1] >= 0 else -1 for node in order]
        return toks, heads
    raise RuntimeError("could not sample a tree within the length limit")


def sample_corpus(lexicon: Lexicon, params: DmvParams, n: int, seed: int, max_len=10,
                  punct=True) -> list:
    """RawSentences with gold heads; a final '.' attached to the root if ``punct``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        toks, heads = sample_tree(params, rng, max_len)
        forms = [lexicon.tokens[t][0] for t in toks]
        pos = [lexicon.tokens[t][1] for t in toks]
        gold = [h + 1 for h in heads]
        if punct:
            forms.append(".")
            pos.append(".")
            gold.append(heads.index(-1) + 1)
        out.append(RawSentence(forms, pos, gold))
    return out


def write_benchmark(directory, seed: int = SHIPPED_SEED, sizes=SHIPPED_SIZES):
    """Write train/val/test CoNLL files of the benchmark into ``directory``."""
    import os

    lex, params = make_grammar(seed)
    paths = {}
    for k, (split, n) in enumerate(sizes.items()):
        raw = sample_corpus(lex, params, n, seed + k + 1)
        path = os.path.join(directory, f"synthetic_{split}.conll")
        write_conll(path, raw, [s.gold_heads for s in raw])
        paths[split] = path
    return paths


def shipped_path(split: str = "train"):
    """Path of a packaged benchmark split ('train', 'val' or 'test')."""
    if split not in SHIPPED_SIZES:
        raise ValueError(f"unknown split {split!r}")
    return str(resources.files("lndmv") / "data" / f"synthetic_{split}.conll")


def load_shipped(split: str = "train"):
    return read_conll(shipped_path(split))
