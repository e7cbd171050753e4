"""Extended-DMV parameter tables, count tables, parse trees and initializers.

Generative story: the root token is drawn from ``root``.  Every head then
generates dependents outward in each direction, nearest first.  Before the
i-th child (i = 0, 1, ...) it draws CONTINUE from ``decision[h, d, min(i, Vd-1)]``
and the child from ``child[h, d, min(i, Vc-1)]``; after the last one it draws
STOP from ``decision[h, d, min(k, Vd-1)]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import TreeError

LEFT, RIGHT = 0, 1
STOP, CONTINUE = 0, 1


@dataclass(frozen=True)
class ValenceConfig:
    Vc: int = 2
    Vd: int = 2

    def __post_init__(self):
        if self.Vc < 1 or self.Vd < 1:
            raise ValueError("valence caps must be >= 1")

    @property
    def V(self):
        return max(self.Vc, self.Vd)


class _Tables:
    """Shared shape logic for DmvParams and CountTable."""

    __slots__ = ("root", "child", "decision")

    def __init__(self, root, child, decision):
        self.root = np.asarray(root, dtype=np.float64)
        self.child = np.asarray(child, dtype=np.float64)
        self.decision = np.asarray(decision, dtype=np.float64)
        m = self.root.shape[0]
        if self.child.ndim != 4 or self.child.shape[0] != m or self.child.shape[1] != 2 \
                or self.child.shape[3] != m:
            raise ValueError(f"child table shape {self.child.shape} incompatible with m={m}")
        if self.decision.shape[:2] != (m, 2) or self.decision.shape[3] != 2:
            raise ValueError(f"decision table shape {self.decision.shape} incompatible with m={m}")

    @property
    def m(self):
        return self.root.shape[0]

    @property
    def vcfg(self):
        return ValenceConfig(self.child.shape[2], self.decision.shape[2])

    @classmethod
    def zeros(cls, m, vcfg: ValenceConfig):
        return cls(np.zeros(m), np.zeros((m, 2, vcfg.Vc, m)), np.zeros((m, 2, vcfg.Vd, 2)))

    def copy(self):
        return type(self)(self.root.copy(), self.child.copy(), self.decision.copy())

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return (np.array_equal(self.root, other.root) and np.array_equal(self.child, other.child)
                and np.array_equal(self.decision, other.decision))

    __hash__ = None

    def __repr__(self):
        v = self.vcfg
        return f"{type(self).__name__}(m={self.m}, Vc={v.Vc}, Vd={v.Vd})"


class DmvParams(_Tables):
    """ROOT, CHILD and DECISION multinomials (probabilities, not logs)."""

    __slots__ = ()

    def distributions(self):
        """Yield every distribution as a 1-d view."""
        yield self.root
        yield from self.child.reshape(-1, self.m)
        yield from self.decision.reshape(-1, 2)

    def check(self, atol=1e-9):
        for name in ("root", "child", "decision"):
            a = getattr(self, name)
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ValueError(f"{name} table has negative or non-finite entries")
            s = a.sum(axis=-1)
            if np.max(np.abs(s - 1.0)) > atol:
                raise ValueError(f"{name} distributions do not sum to 1 (max dev {np.max(np.abs(s - 1)):.3g})")
        return self

    def logs(self):
        with np.errstate(divide="ignore"):
            return np.log(self.root), np.log(self.child), np.log(self.decision)


class CountTable(_Tables):
    """Unnormalized rule counts, same layout as DmvParams."""

    __slots__ = ()

    def __iadd__(self, other):
        self.root += other.root
        self.child += other.child
        self.decision += other.decision
        return self

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    def scale(self, c):
        return CountTable(self.root * c, self.child * c, self.decision * c)


@dataclass(frozen=True)
class ParseTree:
    """0-based heads; -1 marks the root attachment."""

    heads: tuple

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))

    def __len__(self):
        return len(self.heads)

    @classmethod
    def from_conll(cls, heads):
        return cls(tuple(h - 1 for h in heads))

    def to_conll(self):
        return tuple(h + 1 for h in self.heads)

    def validate(self, n: Optional[int] = None):
        """Raise TreeError unless single-rooted, acyclic and projective."""
        heads = self.heads
        if n is not None and len(heads) != n:
            raise TreeError(f"tree has {len(heads)} heads for a sentence of length {n}")
        n = len(heads)
        if n == 0:
            raise TreeError("empty tree")
        roots = [i for i, h in enumerate(heads) if h == -1]
        if len(roots) != 1:
            raise TreeError(f"expected exactly one root attachment, found {len(roots)}")
        for i, h in enumerate(heads):
            if h == i or h < -1 or h >= n:
                raise TreeError(f"invalid head {h} at position {i}")
        for i in range(n):
            seen = 0
            h = heads[i]
            while h != -1:
                seen += 1
                if seen > n:
                    raise TreeError(f"cycle through position {i}")
                h = heads[h]
        for a, h in enumerate(heads):
            if h == -1:
                continue
            lo, hi = min(a, h), max(a, h)
            for k in range(lo + 1, hi):
                g = k
                while g != -1 and g != h:
                    g = heads[g]
                if g != h:
                    raise TreeError(f"arc {h}->{a} is crossed (position {k} not dominated by {h})")
        return self

    def is_valid(self, n=None):
        try:
            self.validate(n)
        except TreeError:
            return False
        return True

    def dependents(self, h):
        """(left, right) dependents of h, each ordered nearest first."""
        left = [i for i in range(h - 1, -1, -1) if self.heads[i] == h]
        right = [i for i in range(h + 1, len(self.heads)) if self.heads[i] == h]
        return left, right


def _size(lexicon) -> int:
    return lexicon if isinstance(lexicon, (int, np.integer)) else lexicon.m


def normalize(counts: CountTable, lam: float = 0.0) -> DmvParams:
    """Additive-smoothed M-step; an all-zero row with lam=0 becomes uniform."""

    def norm(a):
        a = a + lam
        s = a.sum(axis=-1, keepdims=True)
        k = a.shape[-1]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(s > 0, a / np.where(s > 0, s, 1.0), 1.0 / k)
        return out

    if lam < 0:
        raise ValueError("smoothing must be non-negative")
    return DmvParams(norm(counts.root), norm(counts.child), norm(counts.decision))


def init_uniform(lexicon, vcfg: ValenceConfig = ValenceConfig()) -> DmvParams:
    m = _size(lexicon)
    if m < 1:
        raise ValueError("vocabulary must be non-empty")
    return normalize(CountTable.zeros(m, vcfg), 0.0)


def init_random(lexicon, vcfg: ValenceConfig = ValenceConfig(), seed: int = 0) -> DmvParams:
    m = _size(lexicon)
    rng = np.random.default_rng(seed)
    # uniform on (0, 1]: strictly positive weights
    root = 1.0 - rng.random(m)
    child = 1.0 - rng.random((m, 2, vcfg.Vc, m))
    decision = 1.0 - rng.random((m, 2, vcfg.Vd, 2))
    return normalize(CountTable(root, child, decision), 0.0)


def km_counts(corpus, lexicon, vcfg: ValenceConfig = ValenceConfig()) -> CountTable:
    """Harmonic attachment counts: parent weight 1/|h-a|, root weight 1/n."""
    counts = CountTable.zeros(_size(lexicon), vcfg)
    for sent in corpus:
        toks = sent.token_ids
        n = len(toks)
        pos = np.arange(n)
        attach = np.zeros((n, 2))  # mass given to h as a LEFT / RIGHT parent
        for a in range(n):
            dist = np.abs(pos - a).astype(np.float64)
            w = np.zeros(n)
            mask = dist > 0
            w[mask] = 1.0 / dist[mask]
            z = w.sum() + 1.0 / n
            counts.root[toks[a]] += (1.0 / n) / z
            for h in np.flatnonzero(mask):
                d = RIGHT if a > h else LEFT
                p = w[h] / z
                counts.child[toks[h], d, :, toks[a]] += p
                attach[h, d] += p
        for h in range(n):
            for d in (LEFT, RIGHT):
                counts.decision[toks[h], d, :, CONTINUE] += attach[h, d]
                counts.decision[toks[h], d, :, STOP] += 1.0
    return counts


def init_km(corpus, lexicon, vcfg: ValenceConfig = ValenceConfig()) -> DmvParams:
    if len(corpus) == 0:
        raise ValueError("KM initialization needs a non-empty corpus")
    return normalize(km_counts(corpus, lexicon, vcfg), 0.0)


def tree_counts(tree: ParseTree, token_ids, counts: CountTable) -> CountTable:
    """Add the rule uses of one tree to ``counts`` in place."""
    Vc = counts.child.shape[2]
    Vd = counts.decision.shape[2]
    heads = tree.heads
    for a, h in enumerate(heads):
        if h == -1:
            counts.root[token_ids[a]] += 1.0
    for h in range(len(heads)):
        th = token_ids[h]
        for d, deps in zip((LEFT, RIGHT), tree.dependents(h)):
            for i, c in enumerate(deps):
                counts.decision[th, d, min(i, Vd - 1), CONTINUE] += 1.0
                counts.child[th, d, min(i, Vc - 1), token_ids[c]] += 1.0
            counts.decision[th, d, min(len(deps), Vd - 1), STOP] += 1.0
    return counts


def _tree_for(sent, trees, idx):
    if trees is not None:
        tree = trees[idx]
        if not isinstance(tree, ParseTree):
            tree = ParseTree(tree)
    elif sent.gold_heads is not None:
        tree = ParseTree.from_conll(sent.gold_heads)
    else:
        raise TreeError(f"sentence {idx} has no tree")
    try:
        return tree.validate(len(sent))
    except TreeError as exc:
        raise TreeError(f"sentence {idx}: {exc}") from None


def mle_from_trees(corpus, lexicon, vcfg: ValenceConfig = ValenceConfig(), lam: float = 0.0,
                   trees: Optional[Sequence] = None) -> DmvParams:
    """Relative-frequency estimate from gold heads or supplied trees."""
    counts = CountTable.zeros(_size(lexicon), vcfg)
    for idx, sent in enumerate(corpus):
        tree_counts(_tree_for(sent, trees, idx), sent.token_ids, counts)
    return normalize(counts, lam)
