"""Exact inference for the extended DMV over projective trees.

Split-head chart in the log domain.  For head ``h`` and its right side:

* ``A[h, j, v]``   h has generated children covering (h, j], valence state v,
                   not yet stopped;
* ``IR[h, c, v]``  h has just generated child c at valence v, c's left half
                   (sealed) included;
* ``SR[h, j]``     right half of h covering [h, j], sealed with STOP.

The left side mirrors it with ``B``, ``IL`` and ``SL``.  Valence states run
over ``0..V-1`` with ``V = max(Vc, Vd)``; table lookups cap them separately.
``outside`` is the exact adjoint of ``inside`` and accumulates posterior rule
counts directly.

The brute-force functions at the bottom (``enumerate_projective_trees``,
``tree_log_prob``) share no code with the chart and serve as its oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
from numba import njit

from .errors import TreeError
from .model import CONTINUE, LEFT, RIGHT, STOP, CountTable, DmvParams, ParseTree

NEG_INF = -np.inf


@njit(cache=True, inline="always")
def _lae(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True, nogil=True)
def _inside(toks, lroot, lchild, ldec):
    n = toks.shape[0]
    Vc = lchild.shape[2]
    Vd = ldec.shape[2]
    V = max(Vc, Vd)
    A = np.full((n, n, V), -np.inf)
    B = np.full((n, n, V), -np.inf)
    IR = np.full((n, n, V), -np.inf)
    IL = np.full((n, n, V), -np.inf)
    SR = np.full((n, n), -np.inf)
    SL = np.full((n, n), -np.inf)
    for h in range(n):
        A[h, h, 0] = 0.0
        B[h, h, 0] = 0.0
        SR[h, h] = ldec[toks[h], RIGHT, 0, STOP]
        SL[h, h] = ldec[toks[h], LEFT, 0, STOP]
    for w in range(1, n):
        for h in range(n - w):
            j = h + w
            th = toks[h]
            for v in range(V):
                acc = -np.inf
                for m in range(h, j):
                    acc = _lae(acc, A[h, m, v] + SL[j, m + 1])
                IR[h, j, v] = acc + ldec[th, RIGHT, min(v, Vd - 1), CONTINUE] \
                    + lchild[th, RIGHT, min(v, Vc - 1), toks[j]]
        for h in range(w, n):
            i = h - w
            th = toks[h]
            for v in range(V):
                acc = -np.inf
                for m in range(i + 1, h + 1):
                    acc = _lae(acc, B[h, m, v] + SR[i, m - 1])
                IL[h, i, v] = acc + ldec[th, LEFT, min(v, Vd - 1), CONTINUE] \
                    + lchild[th, LEFT, min(v, Vc - 1), toks[i]]
        for h in range(n - w):
            j = h + w
            for c in range(h + 1, j + 1):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    A[h, j, vn] = _lae(A[h, j, vn], IR[h, c, v] + SR[c, j])
            acc = -np.inf
            for v in range(V):
                acc = _lae(acc, A[h, j, v] + ldec[toks[h], RIGHT, min(v, Vd - 1), STOP])
            SR[h, j] = acc
        for h in range(w, n):
            i = h - w
            for c in range(i, h):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    B[h, i, vn] = _lae(B[h, i, vn], IL[h, c, v] + SL[c, i])
            acc = -np.inf
            for v in range(V):
                acc = _lae(acc, B[h, i, v] + ldec[toks[h], LEFT, min(v, Vd - 1), STOP])
            SL[h, i] = acc
    logz = -np.inf
    for r in range(n):
        logz = _lae(logz, lroot[toks[r]] + SL[r, 0] + SR[r, n - 1])
    return A, B, IR, IL, SR, SL, logz


@njit(cache=True, nogil=True)
def _outside(toks, lroot, lchild, ldec, A, B, IR, IL, SR, SL, logz,
             c_root, c_child, c_dec, arcs):
    """Propagate outside scores; add posterior counts into c_* and arcs[dep, head+1]."""
    n = toks.shape[0]
    Vc = lchild.shape[2]
    Vd = ldec.shape[2]
    V = max(Vc, Vd)
    oA = np.full((n, n, V), -np.inf)
    oB = np.full((n, n, V), -np.inf)
    oIR = np.full((n, n, V), -np.inf)
    oIL = np.full((n, n, V), -np.inf)
    oSR = np.full((n, n), -np.inf)
    oSL = np.full((n, n), -np.inf)
    for r in range(n):
        tr = toks[r]
        oSL[r, 0] = _lae(oSL[r, 0], lroot[tr] + SR[r, n - 1])
        oSR[r, n - 1] = _lae(oSR[r, n - 1], lroot[tr] + SL[r, 0])
        p = math.exp(lroot[tr] + SL[r, 0] + SR[r, n - 1] - logz)
        c_root[tr] += p
        arcs[r, 0] += p
    for w in range(n - 1, -1, -1):
        # sealed halves of width w
        for h in range(n - w):
            j = h + w
            th = toks[h]
            if oSR[h, j] > -np.inf:
                for v in range(V):
                    vd = min(v, Vd - 1)
                    val = oSR[h, j] + ldec[th, RIGHT, vd, STOP]
                    oA[h, j, v] = _lae(oA[h, j, v], val)
                    c_dec[th, RIGHT, vd, STOP] += math.exp(val + A[h, j, v] - logz)
        for h in range(w, n):
            i = h - w
            th = toks[h]
            if oSL[h, i] > -np.inf:
                for v in range(V):
                    vd = min(v, Vd - 1)
                    val = oSL[h, i] + ldec[th, LEFT, vd, STOP]
                    oB[h, i, v] = _lae(oB[h, i, v], val)
                    c_dec[th, LEFT, vd, STOP] += math.exp(val + B[h, i, v] - logz)
        if w == 0:
            continue
        # open items of width w
        for h in range(n - w):
            j = h + w
            for c in range(h + 1, j + 1):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    o = oA[h, j, vn]
                    if o == -np.inf:
                        continue
                    oIR[h, c, v] = _lae(oIR[h, c, v], o + SR[c, j])
                    oSR[c, j] = _lae(oSR[c, j], o + IR[h, c, v])
        for h in range(w, n):
            i = h - w
            for c in range(i, h):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    o = oB[h, i, vn]
                    if o == -np.inf:
                        continue
                    oIL[h, c, v] = _lae(oIL[h, c, v], o + SL[c, i])
                    oSL[c, i] = _lae(oSL[c, i], o + IL[h, c, v])
        # attachments of width w
        for h in range(n - w):
            j = h + w
            th = toks[h]
            for v in range(V):
                o = oIR[h, j, v]
                if o == -np.inf:
                    continue
                vc = min(v, Vc - 1)
                vd = min(v, Vd - 1)
                rule = ldec[th, RIGHT, vd, CONTINUE] + lchild[th, RIGHT, vc, toks[j]]
                p = math.exp(o + IR[h, j, v] - logz)
                c_dec[th, RIGHT, vd, CONTINUE] += p
                c_child[th, RIGHT, vc, toks[j]] += p
                arcs[j, h + 1] += p
                base = o + rule
                for m in range(h, j):
                    oA[h, m, v] = _lae(oA[h, m, v], base + SL[j, m + 1])
                    oSL[j, m + 1] = _lae(oSL[j, m + 1], base + A[h, m, v])
        for h in range(w, n):
            i = h - w
            th = toks[h]
            for v in range(V):
                o = oIL[h, i, v]
                if o == -np.inf:
                    continue
                vc = min(v, Vc - 1)
                vd = min(v, Vd - 1)
                rule = ldec[th, LEFT, vd, CONTINUE] + lchild[th, LEFT, vc, toks[i]]
                p = math.exp(o + IL[h, i, v] - logz)
                c_dec[th, LEFT, vd, CONTINUE] += p
                c_child[th, LEFT, vc, toks[i]] += p
                arcs[i, h + 1] += p
                base = o + rule
                for m in range(i + 1, h + 1):
                    oB[h, m, v] = _lae(oB[h, m, v], base + SR[i, m - 1])
                    oSR[i, m - 1] = _lae(oSR[i, m - 1], base + B[h, m, v])
    return oA, oB, oIR, oIL, oSR, oSL


@njit(cache=True, nogil=True)
def _viterbi(toks, lroot, lchild, ldec):
    # max-product twin of _inside with backpointers; strict '>' keeps the first
    # candidate in scan order, which makes ties deterministic
    n = toks.shape[0]
    Vc = lchild.shape[2]
    Vd = ldec.shape[2]
    V = max(Vc, Vd)
    A = np.full((n, n, V), -np.inf)
    B = np.full((n, n, V), -np.inf)
    IR = np.full((n, n, V), -np.inf)
    IL = np.full((n, n, V), -np.inf)
    SR = np.full((n, n), -np.inf)
    SL = np.full((n, n), -np.inf)
    bIR = np.full((n, n, V), -1, dtype=np.int64)
    bIL = np.full((n, n, V), -1, dtype=np.int64)
    bA = np.full((n, n, V), -1, dtype=np.int64)
    bB = np.full((n, n, V), -1, dtype=np.int64)
    bSR = np.zeros((n, n), dtype=np.int64)
    bSL = np.zeros((n, n), dtype=np.int64)
    for h in range(n):
        A[h, h, 0] = 0.0
        B[h, h, 0] = 0.0
        SR[h, h] = ldec[toks[h], RIGHT, 0, STOP]
        SL[h, h] = ldec[toks[h], LEFT, 0, STOP]
    for w in range(1, n):
        for h in range(n - w):
            j = h + w
            th = toks[h]
            for v in range(V):
                best = -np.inf
                arg = -1
                for m in range(h, j):
                    s = A[h, m, v] + SL[j, m + 1]
                    if s > best:
                        best = s
                        arg = m
                IR[h, j, v] = best + ldec[th, RIGHT, min(v, Vd - 1), CONTINUE] \
                    + lchild[th, RIGHT, min(v, Vc - 1), toks[j]]
                bIR[h, j, v] = arg
        for h in range(w, n):
            i = h - w
            th = toks[h]
            for v in range(V):
                best = -np.inf
                arg = -1
                for m in range(h, i, -1):
                    s = B[h, m, v] + SR[i, m - 1]
                    if s > best:
                        best = s
                        arg = m
                IL[h, i, v] = best + ldec[th, LEFT, min(v, Vd - 1), CONTINUE] \
                    + lchild[th, LEFT, min(v, Vc - 1), toks[i]]
                bIL[h, i, v] = arg
        for h in range(n - w):
            j = h + w
            for c in range(h + 1, j + 1):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    s = IR[h, c, v] + SR[c, j]
                    if s > A[h, j, vn]:
                        A[h, j, vn] = s
                        bA[h, j, vn] = c * V + v
            best = -np.inf
            arg = 0
            for v in range(V):
                s = A[h, j, v] + ldec[toks[h], RIGHT, min(v, Vd - 1), STOP]
                if s > best:
                    best = s
                    arg = v
            SR[h, j] = best
            bSR[h, j] = arg
        for h in range(w, n):
            i = h - w
            for c in range(h - 1, i - 1, -1):
                for v in range(V):
                    vn = min(v + 1, V - 1)
                    s = IL[h, c, v] + SL[c, i]
                    if s > B[h, i, vn]:
                        B[h, i, vn] = s
                        bB[h, i, vn] = c * V + v
            best = -np.inf
            arg = 0
            for v in range(V):
                s = B[h, i, v] + ldec[toks[h], LEFT, min(v, Vd - 1), STOP]
                if s > best:
                    best = s
                    arg = v
            SL[h, i] = best
            bSL[h, i] = arg
    best = -np.inf
    root = -1
    for r in range(n):
        s = lroot[toks[r]] + SL[r, 0] + SR[r, n - 1]
        if s > best:
            best = s
            root = r
    heads = np.full(n, -2, dtype=np.int64)
    if root < 0:
        return heads, best
    heads[root] = -1
    # explicit stack backtrace: (kind, a, b, v)
    # kinds: 0 SR, 1 SL, 2 A, 3 B, 4 IR, 5 IL
    stack = [(0, root, n - 1, 0), (1, root, 0, 0)]
    while len(stack) > 0:
        kind, a, b, v = stack.pop()
        if kind == 0:
            stack.append((2, a, b, bSR[a, b]))
        elif kind == 1:
            stack.append((3, a, b, bSL[a, b]))
        elif kind == 2:
            if a != b:
                code = bA[a, b, v]
                c = code // V
                stack.append((4, a, c, code % V))
                stack.append((0, c, b, 0))
        elif kind == 3:
            if a != b:
                code = bB[a, b, v]
                c = code // V
                stack.append((5, a, c, code % V))
                stack.append((1, c, b, 0))
        elif kind == 4:
            heads[b] = a
            m = bIR[a, b, v]
            stack.append((2, a, m, v))
            stack.append((1, b, m + 1, 0))
        else:
            heads[b] = a
            m = bIL[a, b, v]
            stack.append((3, a, m, v))
            stack.append((0, b, m - 1, 0))
    return heads, best


def _log_tables(params: DmvParams):
    lroot, lchild, ldec = params.logs()
    return (np.ascontiguousarray(lroot), np.ascontiguousarray(lchild),
            np.ascontiguousarray(ldec))


def _toks(sentence):
    toks = getattr(sentence, "token_ids", sentence)
    return np.ascontiguousarray(toks, dtype=np.int64)


@dataclass
class InsideChart:
    A: np.ndarray
    B: np.ndarray
    IR: np.ndarray
    IL: np.ndarray
    SR: np.ndarray
    SL: np.ndarray
    log_prob: float


@dataclass
class OutsideChart:
    A: np.ndarray
    B: np.ndarray
    IR: np.ndarray
    IL: np.ndarray
    SR: np.ndarray
    SL: np.ndarray
    counts: CountTable
    # arc_posteriors[i, 0]: root attachment of i; [i, h+1]: head h
    arc_posteriors: np.ndarray

    @property
    def root_outside(self):
        """Outside score of the goal item, 0 in the log domain by definition."""
        return 0.0


def inside(sentence, params: DmvParams, logs=None):
    """Inside chart and log sentence probability (sum over projective trees)."""
    lroot, lchild, ldec = logs if logs is not None else _log_tables(params)
    *items, logz = _inside(_toks(sentence), lroot, lchild, ldec)
    return InsideChart(*items, float(logz)), float(logz)


def outside(sentence, params: DmvParams, chart: InsideChart, logs=None, counts=None):
    if chart.log_prob == -np.inf:
        raise ValueError("sentence has zero probability under these parameters")
    lroot, lchild, ldec = logs if logs is not None else _log_tables(params)
    toks = _toks(sentence)
    n = len(toks)
    if counts is None:
        counts = CountTable.zeros(params.m, params.vcfg)
    arcs = np.zeros((n, n + 1))
    items = _outside(toks, lroot, lchild, ldec, chart.A, chart.B, chart.IR, chart.IL,
                     chart.SR, chart.SL, chart.log_prob,
                     counts.root, counts.child, counts.decision, arcs)
    return OutsideChart(*items, counts, arcs)


def expected_counts(sentence, params: DmvParams, logs=None, counts=None):
    """Posterior expected rule counts; pass ``counts`` to accumulate in place.

    Returns ``(counts, log_prob)``.
    """
    chart, logz = inside(sentence, params, logs)
    out = outside(sentence, params, chart, logs, counts)
    return out.counts, logz


def arc_posteriors(sentence, params: DmvParams):
    """(n, n+1) matrix: column 0 root, column h+1 head h."""
    chart, _ = inside(sentence, params)
    return outside(sentence, params, chart).arc_posteriors


# below log(1e-300); floored zeros still lose to every possible rule
LOG_FLOOR = -1e4


def viterbi(sentence, params: DmvParams, logs=None, fallback=False):
    """Best projective tree and its log score.

    A sentence with no positive-probability tree raises ValueError, unless
    ``fallback`` is set: zero probabilities are then floored at ``LOG_FLOOR``
    (fewest impossible rules first, then highest probability) and the
    returned score is ``-inf``.
    """
    lroot, lchild, ldec = logs if logs is not None else _log_tables(params)
    toks = _toks(sentence)
    heads, score = _viterbi(toks, lroot, lchild, ldec)
    if score == -np.inf:
        if not fallback:
            raise ValueError("sentence has zero probability under these parameters")
        heads, _ = _viterbi(toks, np.maximum(lroot, LOG_FLOOR), np.maximum(lchild, LOG_FLOOR),
                            np.maximum(ldec, LOG_FLOOR))
    return ParseTree(tuple(heads.tolist())), float(score)


# ---------------------------------------------------------------------------
# brute-force oracle


def tree_log_prob(tree: ParseTree, sentence, params: DmvParams) -> float:
    """Log probability of one tree, straight from the generative story."""
    toks = list(_toks(sentence))
    if not isinstance(tree, ParseTree):
        tree = ParseTree(tree)
    tree.validate(len(toks))
    Vc = params.child.shape[2]
    Vd = params.decision.shape[2]
    p = 0.0
    terms = []
    for a, h in enumerate(tree.heads):
        if h == -1:
            terms.append(params.root[toks[a]])
    for h in range(len(toks)):
        th = toks[h]
        for d, deps in zip((LEFT, RIGHT), tree.dependents(h)):
            for i, c in enumerate(deps):
                terms.append(params.decision[th, d, min(i, Vd - 1), CONTINUE])
                terms.append(params.child[th, d, min(i, Vc - 1), toks[c]])
            terms.append(params.decision[th, d, min(len(deps), Vd - 1), STOP])
    for t in terms:
        if t <= 0.0:
            return -np.inf
        p += math.log(t)
    return p


MAX_ENUM_LEN = 8


@lru_cache(maxsize=None)
def _span_trees(i, j):
    # every projective tree over positions i..j as (root, heads dict-tuple)
    if i > j:
        return ((None, ()),)
    out = []
    for r in range(i, j + 1):
        for left in _dep_sequences(i, r - 1):
            for right in _dep_sequences(r + 1, j):
                arcs = []
                for sub_root, sub_arcs in left + right:
                    arcs.append((sub_root, r))
                    arcs.extend(sub_arcs)
                out.append((r, tuple(arcs)))
    return tuple(out)


@lru_cache(maxsize=None)
def _dep_sequences(i, j):
    # ways to split i..j into consecutive subtrees (each attaching to an outside head)
    if i > j:
        return ((),)
    out = []
    for k in range(i, j + 1):
        for first in _span_trees(i, k):
            for rest in _dep_sequences(k + 1, j):
                out.append((first,) + rest)
    return tuple(out)


def enumerate_projective_trees(n: int) -> list:
    """All single-rooted projective trees over n positions (n <= 8)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_ENUM_LEN:
        raise ValueError(f"refusing to enumerate trees for n={n} > {MAX_ENUM_LEN}")
    trees = []
    for root, arcs in _span_trees(0, n - 1):
        heads = [0] * n
        heads[root] = -1
        for dep, head in arcs:
            heads[dep] = head
        trees.append(ParseTree(tuple(heads)))
    return trees


def enumerate_by_head_assignment(n: int) -> list:
    """Same set as enumerate_projective_trees, by filtering all n**n head vectors."""
    if n > 6:
        raise ValueError("head-assignment enumeration is limited to n <= 6")
    out = []
    for heads in product(range(-1, n), repeat=n):
        t = ParseTree(heads)
        if t.is_valid():
            out.append(t)
    return out


def oracle(sentence, params: DmvParams):
    """Brute-force log Z, best tree/score and posterior-weighted rule counts."""
    from .model import tree_counts

    toks = _toks(sentence)
    trees = enumerate_projective_trees(len(toks))
    scores = np.array([tree_log_prob(t, toks, params) for t in trees])
    finite = scores[np.isfinite(scores)]
    if finite.size == 0:
        raise ValueError("all trees have zero probability")
    mx = finite.max()
    logz = mx + math.log(np.exp(finite - mx).sum())
    best = int(np.argmax(scores))
    counts = CountTable.zeros(params.m, params.vcfg)
    for t, s in zip(trees, scores):
        if s == -np.inf:
            continue
        one = tree_counts(t, toks, CountTable.zeros(params.m, params.vcfg))
        counts += one.scale(math.exp(s - logz))
    return {"log_prob": logz, "best_tree": trees[best], "best_score": float(scores[best]),
            "counts": counts, "trees": trees, "scores": scores}


__all__ = [
    "InsideChart", "OutsideChart", "inside", "outside", "expected_counts", "arc_posteriors",
    "viterbi", "tree_log_prob", "enumerate_projective_trees", "enumerate_by_head_assignment",
    "oracle", "TreeError",
]
