"""Neural CHILD/DECISION rule predictor for the lexicalized DMV.

For a context (head token, direction, valence) the input is the concatenation
``[valence vector; head word vector; head tag vector]``.  A direction-specific
ReLU layer maps it to ``f``; CHILD scores are ``W_chd @ f`` where each row of
``W_chd`` joins the child's word row and its (shared) tag row, and DECISION
scores are ``W_dec @ f``.  Both are softmaxed.  ROOT stays tabular.

Training minimizes count-weighted negative log-likelihood with mini-batch SGD
and momentum; the model keeps its weights, velocity and RNG between calls so
it can be trained across EM iterations without being reset.
"""
from __future__ import annotations

import copy
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import NeuralTrainingError, VectorFormatError
from .model import CountTable, DmvParams, ValenceConfig, normalize

log = logging.getLogger(__name__)

CHILD, DECISION = "child", "decision"


@dataclass
class NeuralConfig:
    d_word_in: int = 100
    d_tag_in: int = 20
    d_val: int = 10
    k: int = 100
    k_tag: int = 20
    hidden: int = 120
    lr: float = 0.03
    momentum: float = 0.9
    batch: int = 200
    epochs_per_mstep: int = 1
    init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("d_word_in", "d_tag_in", "d_val", "k", "k_tag", "hidden", "batch",
                     "epochs_per_mstep"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr < 0:
            raise ValueError("lr must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    @property
    def out_dim(self):
        return self.k + self.k_tag

    def to_dict(self):
        return asdict(self)


class NeuralModel:
    """Weights, momentum buffers and RNG state of the rule network."""

    def __init__(self, token_tag, n_tags: int, vcfg: ValenceConfig, cfg: NeuralConfig,
                 E_word=None, E_tag=None):
        self.cfg = cfg
        self.vcfg = vcfg
        self.token_tag = np.asarray(token_tag, dtype=np.int64)
        self.m = len(self.token_tag)
        self.T = int(n_tags)
        rng = np.random.default_rng(cfg.seed)
        s = cfg.init_scale
        d_in = cfg.d_val + cfg.d_word_in + cfg.d_tag_in
        H, K = cfg.hidden, cfg.out_dim

        def u(*shape):
            return rng.uniform(-s, s, size=shape)

        w = {
            "E_word": u(self.m, cfg.d_word_in),
            "E_tag": u(self.T, cfg.d_tag_in),
            "E_val": u(vcfg.V, cfg.d_val),
            "W_left": u(H, d_in),
            "b_left": np.zeros(H),
            "W_right": u(H, d_in),
            "b_right": np.zeros(H),
            "W_word": u(self.m, cfg.k),
            "W_tag_out": u(self.T, cfg.k_tag),
            "b_child": np.zeros(self.m),
            "W_dec": u(2, K),
            "b_dec": np.zeros(2),
        }
        if H != K:
            w["P_chd"] = u(K, H)
        if E_word is not None:
            w["E_word"] = np.array(E_word, dtype=np.float64)
        if E_tag is not None:
            w["E_tag"] = np.array(E_tag, dtype=np.float64)
        if w["E_word"].shape != (self.m, cfg.d_word_in) or w["E_tag"].shape != (self.T, cfg.d_tag_in):
            raise ValueError("embedding shapes do not match the lexicon/config")
        self.weights = w
        self.velocity = {k: np.zeros_like(v) for k, v in w.items()}
        self.rng = np.random.default_rng(rng.integers(2**63))

    @classmethod
    def for_lexicon(cls, lexicon, vcfg=ValenceConfig(), cfg=NeuralConfig(), **kw):
        return cls(lexicon.token_tag, lexicon.T, vcfg, cfg, **kw)

    def copy(self):
        return copy.deepcopy(self)

    def zero_(self):
        for v in self.weights.values():
            v[...] = 0.0
        return self

    # -- forward / backward -------------------------------------------------

    def _inputs(self, heads, dirs, vals):
        w = self.weights
        return np.concatenate([w["E_val"][vals], w["E_word"][heads],
                               w["E_tag"][self.token_tag[heads]]], axis=1)

    def _trunk(self, heads, dirs, vals):
        w = self.weights
        X = self._inputs(heads, dirs, vals)
        left = (dirs == 0)[:, None]
        Z = np.where(left, X @ w["W_left"].T + w["b_left"], X @ w["W_right"].T + w["b_right"])
        F = np.maximum(Z, 0.0)
        G = F @ w["P_chd"].T if "P_chd" in w else F
        return X, Z, F, G

    def child_matrix(self):
        w = self.weights
        return np.concatenate([w["W_word"], w["W_tag_out"][self.token_tag]], axis=1)

    def scores(self, heads, dirs, vals):
        """Pre-softmax CHILD (B, m) and DECISION (B, 2) scores."""
        heads, dirs, vals = _as_idx(heads, dirs, vals)
        _, _, _, G = self._trunk(heads, dirs, vals)
        w = self.weights
        return G @ self.child_matrix().T + w["b_child"], G @ w["W_dec"].T + w["b_dec"]

    def log_probs(self, heads, dirs, vals):
        sc, sd = self.scores(heads, dirs, vals)
        return _log_softmax(sc), _log_softmax(sd)

    def loss_and_grads(self, heads, dirs, vals, Cc, Cd, want_grads=True):
        """Count-weighted NLL over a batch of contexts and its gradient."""
        w = self.weights
        X, Z, F, G = self._trunk(heads, dirs, vals)
        Wchd = self.child_matrix()
        lc = _log_softmax(G @ Wchd.T + w["b_child"])
        ld = _log_softmax(G @ w["W_dec"].T + w["b_dec"])
        loss = -(np.sum(Cc * np.where(Cc > 0, lc, 0.0)) + np.sum(Cd * np.where(Cd > 0, ld, 0.0)))
        if not want_grads:
            return loss, None
        k = self.cfg.k
        dS = np.exp(lc) * Cc.sum(axis=1, keepdims=True) - Cc
        dD = np.exp(ld) * Cd.sum(axis=1, keepdims=True) - Cd
        g = {}
        dWchd = dS.T @ G
        g["W_word"] = dWchd[:, :k]
        g["W_tag_out"] = np.zeros_like(w["W_tag_out"])
        np.add.at(g["W_tag_out"], self.token_tag, dWchd[:, k:])
        g["b_child"] = dS.sum(axis=0)
        g["W_dec"] = dD.T @ G
        g["b_dec"] = dD.sum(axis=0)
        dG = dS @ Wchd + dD @ w["W_dec"]
        if "P_chd" in w:
            g["P_chd"] = dG.T @ F
            dF = dG @ w["P_chd"]
        else:
            dF = dG
        dZ = dF * (Z > 0)
        left = dirs == 0
        dZl = dZ * left[:, None]
        dZr = dZ * (~left)[:, None]
        g["W_left"] = dZl.T @ X
        g["b_left"] = dZl.sum(axis=0)
        g["W_right"] = dZr.T @ X
        g["b_right"] = dZr.sum(axis=0)
        dX = dZl @ w["W_left"] + dZr @ w["W_right"]
        dv, dw = self.cfg.d_val, self.cfg.d_word_in
        g["E_val"] = np.zeros_like(w["E_val"])
        np.add.at(g["E_val"], vals, dX[:, :dv])
        g["E_word"] = np.zeros_like(w["E_word"])
        np.add.at(g["E_word"], heads, dX[:, dv:dv + dw])
        g["E_tag"] = np.zeros_like(w["E_tag"])
        np.add.at(g["E_tag"], self.token_tag[heads], dX[:, dv + dw:])
        return loss, g


def _as_idx(*arrs):
    return tuple(np.atleast_1d(np.asarray(a, dtype=np.int64)) for a in arrs)


def _log_softmax(S):
    mx = S.max(axis=1, keepdims=True)
    Z = S - mx
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


def forward(model: NeuralModel, head_token: int, direction: int, valence: int, family: str = CHILD):
    """Rule distribution for one context: CHILD over m tokens or DECISION [stop, continue]."""
    if family not in (CHILD, DECISION):
        raise ValueError(f"unknown rule family {family!r}")
    cap = model.vcfg.Vc if family == CHILD else model.vcfg.Vd
    if not 0 <= valence < cap:
        raise ValueError(f"valence {valence} out of range for {family} (cap {cap})")
    lc, ld = model.log_probs([head_token], [direction], [valence])
    return np.exp(lc[0] if family == CHILD else ld[0])


# -- count tables as training data ----------------------------------------


@dataclass
class ContextBatch:
    heads: np.ndarray
    dirs: np.ndarray
    vals: np.ndarray
    child: np.ndarray
    decision: np.ndarray

    def __len__(self):
        return len(self.heads)

    def take(self, idx):
        return ContextBatch(self.heads[idx], self.dirs[idx], self.vals[idx],
                            self.child[idx], self.decision[idx])


def contexts_from_counts(counts: CountTable, skip_empty=True) -> ContextBatch:
    """One row per (head, dir, valence) context, carrying its CHILD and DECISION counts."""
    m = counts.m
    vcfg = counts.vcfg
    V = vcfg.V
    h, d, v = np.meshgrid(np.arange(m), np.arange(2), np.arange(V), indexing="ij")
    h, d, v = h.ravel(), d.ravel(), v.ravel()
    Cc = np.zeros((m, 2, V, m))
    Cc[:, :, :vcfg.Vc] = counts.child
    Cd = np.zeros((m, 2, V, 2))
    Cd[:, :, :vcfg.Vd] = counts.decision
    Cc = Cc.reshape(-1, m)
    Cd = Cd.reshape(-1, 2)
    if skip_empty:
        keep = (Cc.sum(axis=1) + Cd.sum(axis=1)) > 0
        h, d, v, Cc, Cd = h[keep], d[keep], v[keep], Cc[keep], Cd[keep]
    return ContextBatch(h, d, v, Cc, Cd)


def nn_loss(model: NeuralModel, counts: CountTable) -> float:
    """-sum_r count(r) * log p(r) over CHILD and DECISION rules (ROOT excluded)."""
    ctx = contexts_from_counts(counts)
    if len(ctx) == 0:
        return 0.0
    loss, _ = model.loss_and_grads(ctx.heads, ctx.dirs, ctx.vals, ctx.child, ctx.decision,
                                   want_grads=False)
    return float(loss)


def nn_grads(model: NeuralModel, counts: CountTable):
    ctx = contexts_from_counts(counts)
    if len(ctx) == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in model.weights.items()}
    return model.loss_and_grads(ctx.heads, ctx.dirs, ctx.vals, ctx.child, ctx.decision)


def rule_instances(counts: CountTable):
    """Expand counts into weighted single-rule samples.

    A cell with count c becomes ceil(c) samples of weight c / ceil(c), so
    integer (Viterbi) counts give one unit-weight sample per rule use.
    Returns (heads, dirs, vals, family, outcome, weight) with family 0 for
    CHILD and 1 for DECISION.
    """
    cols = []
    for fam, table in ((0, counts.child), (1, counts.decision)):
        idx = np.argwhere(table > 0)
        if len(idx) == 0:
            continue
        c = table[tuple(idx.T)]
        reps = np.ceil(c).astype(np.int64)
        idx = np.repeat(idx, reps, axis=0)
        w = np.repeat(c / reps, reps)
        cols.append((idx[:, 0], idx[:, 1], idx[:, 2], np.full(len(w), fam), idx[:, 3], w))
    if not cols:
        e = np.zeros(0, dtype=np.int64)
        return e, e, e, e, e, np.zeros(0)
    return tuple(np.concatenate(parts) for parts in zip(*cols))


def fit(model: NeuralModel, counts: CountTable, cfg: Optional[NeuralConfig] = None,
        epochs: Optional[int] = None) -> NeuralModel:
    """Mini-batch SGD with momentum on the count-weighted NLL, in place.

    Samples are individual rule uses (see ``rule_instances``); each step
    follows the mean gradient over ``cfg.batch`` of them.
    """
    cfg = cfg or model.cfg
    epochs = cfg.epochs_per_mstep if epochs is None else epochs
    heads, dirs, vals, fam, outcome, weight = rule_instances(counts)
    n = len(weight)
    if n == 0:
        return model
    m = model.m
    w, vel = model.weights, model.velocity
    for _ in range(epochs):
        order = model.rng.permutation(n)
        for start in range(0, n, cfg.batch):
            b = order[start:start + cfg.batch]
            rows = np.arange(len(b))
            Cc = np.zeros((len(b), m))
            Cd = np.zeros((len(b), 2))
            is_child = fam[b] == 0
            Cc[rows[is_child], outcome[b][is_child]] = weight[b][is_child]
            Cd[rows[~is_child], outcome[b][~is_child]] = weight[b][~is_child]
            loss, g = model.loss_and_grads(heads[b], dirs[b], vals[b], Cc, Cd)
            if not np.isfinite(loss):
                raise NeuralTrainingError(
                    f"non-finite loss {loss} on a batch of {len(b)} samples; "
                    f"lower the learning rate (lr={cfg.lr})")
            scale = cfg.lr / weight[b].sum()
            for name, grad in g.items():
                vel[name] *= cfg.momentum
                vel[name] -= scale * grad
                w[name] += vel[name]
    return model


def export_params(model: NeuralModel, lexicon=None, vcfg: Optional[ValenceConfig] = None,
                  root_counts=None, lam: float = 0.0) -> DmvParams:
    """Tabulate network predictions for every context; ROOT from ``root_counts``."""
    vcfg = vcfg or model.vcfg
    m = model.m
    V = vcfg.V
    h, d, v = np.meshgrid(np.arange(m), np.arange(2), np.arange(V), indexing="ij")
    lc, ld = model.log_probs(h.ravel(), d.ravel(), v.ravel())
    child = np.exp(lc).reshape(m, 2, V, m)[:, :, :vcfg.Vc]
    dec = np.exp(ld).reshape(m, 2, V, 2)[:, :, :vcfg.Vd]
    # exp of a log-softmax can drift by an ulp; renormalize
    child /= child.sum(axis=-1, keepdims=True)
    dec /= dec.sum(axis=-1, keepdims=True)
    if root_counts is None:
        root_counts = np.zeros(m)
    root_counts = np.asarray(root_counts, dtype=np.float64)
    if np.any(root_counts < 0):
        raise ValueError("root counts must be non-negative")
    root = normalize(_root_only(root_counts, vcfg), lam).root
    return DmvParams(root, child, dec)


def _root_only(root_counts, vcfg):
    t = CountTable.zeros(len(root_counts), ValenceConfig(1, 1))
    t.root[:] = root_counts
    return t


# -- gradient verification -------------------------------------------------


_TRUNK = ("E_word", "E_tag", "E_val", "W_left", "b_left", "W_right", "b_right")


def gradient_check(model: NeuralModel, counts: CountTable, eps: float = 1e-5,
                   n_samples: int = 1000, seed: int = 0, corrupt: bool = False,
                   floor: float = 1e-6, nudges: int = 20, precision: str = "extended"):
    """Max relative error between backprop and central differences.

    Works on a copy.  Hidden biases are first nudged to move pre-activations
    off the ReLU kink; a sampled weight whose +-eps step still flips any
    ReLU is skipped and another is drawn.  Relative error is
    ``|a - n| / max(|a|, |n|, floor)``; ``corrupt`` flips the analytic sign.

    Analytic gradients are always float64.  With ``precision="extended"``
    the finite-difference losses are evaluated in ``np.longdouble``: in
    float64 their rounding noise is about ``2**-53 * |loss| / eps``, which
    swamps weights whose true gradient is tiny relative to the loss.
    """
    if precision not in ("double", "extended"):
        raise ValueError("precision must be 'double' or 'extended'")
    model = model.copy()
    ctx = contexts_from_counts(counts)
    if len(ctx) == 0:
        return 0.0
    rng = np.random.default_rng(seed)

    def pattern():
        return model._trunk(ctx.heads, ctx.dirs, ctx.vals)[1] > 0

    for _ in range(nudges):
        Z = model._trunk(ctx.heads, ctx.dirs, ctx.vals)[1]
        if np.min(np.abs(Z)) >= 10 * eps:
            break
        for name in ("b_left", "b_right"):
            model.weights[name] += rng.uniform(-1e-2, 1e-2, size=model.weights[name].shape)

    _, grads = model.loss_and_grads(ctx.heads, ctx.dirs, ctx.vals, ctx.child, ctx.decision)
    fd_model, fd_ctx = model, ctx
    if precision == "extended":
        fd_model = model.copy()
        fd_model.weights = {k: v.astype(np.longdouble) for k, v in model.weights.items()}
        fd_ctx = ctx.take(slice(None))
        fd_ctx.child = ctx.child.astype(np.longdouble)
        fd_ctx.decision = ctx.decision.astype(np.longdouble)

    def loss():
        return fd_model.loss_and_grads(fd_ctx.heads, fd_ctx.dirs, fd_ctx.vals, fd_ctx.child,
                                       fd_ctx.decision, want_grads=False)[0]

    def flips(name, idx, value):
        # does setting this weight change any ReLU on/off state?
        if name not in _TRUNK:
            return False
        W = model.weights[name]
        orig = W[idx]
        W[idx] = value
        changed = not np.array_equal(pattern(), base)
        W[idx] = orig
        return changed

    base = pattern()
    names = sorted(model.weights)
    sizes = np.array([model.weights[n].size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    worst = 0.0
    checked = 0
    for flat in rng.permutation(sizes.sum()):
        if checked == n_samples:
            break
        t = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[t]
        idx = np.unravel_index(flat - offsets[t], model.weights[name].shape)
        orig = model.weights[name][idx]
        if flips(name, idx, orig + eps) or flips(name, idx, orig - eps):
            continue
        W = fd_model.weights[name]
        W[idx] = orig + eps
        up = loss()
        W[idx] = orig - eps
        down = loss()
        W[idx] = orig
        num = float((up - down) / (2 * eps))
        ana = grads[name][idx] * (-1.0 if corrupt else 1.0)
        denom = max(abs(ana), abs(num), floor)
        worst = max(worst, abs(ana - num) / denom)
        checked += 1
    return worst


# -- embeddings -------------------------------------------------------------


@dataclass
class VectorCoverage:
    found: int
    missing: int
    extra: int = 0
    missing_tokens: list = field(default_factory=list, repr=False)


def _read_w2v(path, dim):
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(x.isdigit() for x in header):
            raise VectorFormatError(f"{path}:1: expected header 'count dim'")
        count, fdim = int(header[0]), int(header[1])
        if fdim != dim:
            raise VectorFormatError(f"{path}: vector dimension {fdim} does not match configured {dim}")
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            if len(parts) != dim + 1:
                raise VectorFormatError(f"{path}:{lineno}: expected token and {dim} values, got {len(parts) - 1}")
            try:
                vectors[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise VectorFormatError(f"{path}:{lineno}: non-numeric vector entry") from None
        if len(vectors) != count:
            log.warning("%s: header announces %d vectors, read %d", path, count, len(vectors))
    return vectors


def load_vectors(path, lexicon, cfg: NeuralConfig = NeuralConfig(), tag_path=None,
                 allow_random=False, seed=None, scale=0.01):
    """Initial (E_word, E_tag, coverage) from word2vec text files.

    Word rows are keyed by ``word/POS`` (bare ``POS`` for fallback tokens),
    with the bare word accepted as a second choice.  Tokens without a vector
    get seeded N(0, scale^2) rows.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    E_word = rng.normal(0.0, scale, size=(lexicon.m, cfg.d_word_in))
    E_tag = rng.normal(0.0, scale, size=(lexicon.T, cfg.d_tag_in))
    if path is None or not os.path.exists(path):
        if allow_random:
            return E_word, E_tag, VectorCoverage(0, lexicon.m)
        raise FileNotFoundError(f"vector file not found: {path}")
    vecs = _read_w2v(path, cfg.d_word_in)
    found, missing = 0, []
    used = set()
    for i, (w, p) in enumerate(lexicon.tokens):
        key = lexicon.token_str(i)
        if key not in vecs and w is not None and w in vecs:
            key = w
        if key in vecs:
            E_word[i] = vecs[key]
            used.add(key)
            found += 1
        else:
            missing.append(key)
    if tag_path is not None:
        tvecs = _read_w2v(tag_path, cfg.d_tag_in)
        for t, name in enumerate(lexicon.tags):
            if name in tvecs:
                E_tag[t] = tvecs[name]
    cov = VectorCoverage(found, len(missing), len(set(vecs) - used), missing)
    log.info("loaded %d/%d token vectors from %s", found, lexicon.m, path)
    return E_word, E_tag, cov
