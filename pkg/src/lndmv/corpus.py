"""CoNLL ingestion, punctuation stripping, cutoff lexicons and sentence encoding.

Tokens are word/POS pairs.  A pair seen fewer than ``cutoff`` times in the
reference corpus is represented by its bare POS token instead, so a large
cutoff gives an unlexicalized grammar and ``cutoff=1`` a fully lexicalized one.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConllFormatError, EncodeError

# Penn Treebank punctuation tags.
PTB_PUNCT_TAGS = frozenset(["``", "''", ",", ".", ":", "-LRB-", "-RRB-", "#", "$"])


@dataclass
class RawSentence:
    forms: list
    pos: list
    gold_heads: Optional[list] = None
    # untouched CoNLL rows, kept so parse output can reproduce the input columns
    rows: Optional[list] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.forms) != len(self.pos):
            raise ValueError("forms and pos differ in length")
        if self.gold_heads is not None:
            n = len(self.forms)
            if len(self.gold_heads) != n:
                raise ValueError("gold_heads length differs from forms")
            if any(h < 0 or h > n for h in self.gold_heads):
                raise ValueError(f"gold head out of range [0, {n}]")

    def __len__(self):
        return len(self.forms)


def read_conll(path) -> list:
    """Read a CoNLL-X file (FORM col 2, POS col 5, HEAD col 7).

    ``gold_heads`` is set only when every row of the block has a numeric HEAD.
    Lines starting with ``#`` are comments.
    """
    sentences = []
    block = []

    def flush():
        if not block:
            return
        forms, tags, heads, rows = [], [], [], []
        numeric = True
        for lineno, cols in block:
            forms.append(cols[1])
            tags.append(cols[4])
            rows.append(cols)
            head = cols[6] if len(cols) > 6 else "_"
            if head == "_":
                numeric = False
                heads.append(None)
            else:
                try:
                    heads.append(int(head))
                except ValueError:
                    raise ConllFormatError(path, lineno, f"non-numeric HEAD {head!r}") from None
        gold = heads if numeric else None
        if gold is not None:
            n = len(forms)
            bad = [h for h in gold if h < 0 or h > n]
            if bad:
                raise ConllFormatError(path, block[0][0], f"HEAD {bad[0]} outside [0, {n}]")
        sentences.append(RawSentence(forms, tags, gold, rows))
        block.clear()

    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                flush()
                continue
            if line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise ConllFormatError(path, lineno, f"expected 10 tab-separated columns, got {len(cols)}")
            if not cols[0].isdigit():
                # multiword ranges and empty nodes (UD) are not tokens
                if "-" in cols[0] or "." in cols[0]:
                    continue
                raise ConllFormatError(path, lineno, f"bad ID column {cols[0]!r}")
            block.append((lineno, cols))
        flush()
    return sentences


def write_conll(path, raw: Sequence[RawSentence], heads: Sequence[Sequence[int]]):
    """Write sentences with the HEAD column replaced by ``heads`` (CoNLL convention)."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent, hs in zip(raw, heads):
            for i, h in enumerate(hs):
                if sent.rows is not None:
                    cols = list(sent.rows[i])
                    cols[0] = str(i + 1)
                else:
                    cols = [str(i + 1), sent.forms[i], "_", sent.pos[i], sent.pos[i],
                            "_", "_", "_", "_", "_"]
                cols[6] = str(int(h))
                fh.write("\t".join(cols) + "\n")
            fh.write("\n")


def _reattach(heads, keep):
    # follow removed-punctuation heads up to the nearest kept ancestor (0 = root)
    n = len(heads)
    out = {}
    for i in range(n):
        if not keep[i]:
            continue
        h = heads[i]
        seen = 0
        while h != 0 and not keep[h - 1]:
            h = heads[h - 1]
            seen += 1
            if seen > n:
                h = 0
                break
        out[i] = h
    new_index = {}
    for i in range(n):
        if keep[i]:
            new_index[i + 1] = len(new_index) + 1
    return [0 if out[i] == 0 else new_index[out[i]] for i in range(n) if keep[i]]


def strip_and_filter(raw: Iterable[RawSentence], punct_tags=PTB_PUNCT_TAGS, max_len=None) -> list:
    """Drop punctuation tokens, then keep sentences of length 1..max_len.

    Dependents of removed punctuation are re-attached to the nearest
    non-punctuation ancestor (or the root).
    """
    punct_tags = frozenset(punct_tags)
    out = []
    for sent in raw:
        keep = [t not in punct_tags for t in sent.pos]
        n_kept = sum(keep)
        if n_kept == 0 or (max_len is not None and n_kept > max_len):
            continue
        forms = [f for f, k in zip(sent.forms, keep) if k]
        pos = [t for t, k in zip(sent.pos, keep) if k]
        rows = [r for r, k in zip(sent.rows, keep) if k] if sent.rows is not None else None
        heads = _reattach(sent.gold_heads, keep) if sent.gold_heads is not None else None
        out.append(RawSentence(forms, pos, heads, rows))
    return out


@dataclass(frozen=True)
class Lexicon:
    """Token inventory: POS-only tokens (in tag-id order) then word/POS tokens.

    ``tokens[i]`` is ``(word, pos)`` or ``(None, pos)`` for the POS fallback.
    """

    tags: tuple
    tokens: tuple
    cutoff: int

    def __post_init__(self):
        tag_index = {t: i for i, t in enumerate(self.tags)}
        token_index = {}
        for i, (w, p) in enumerate(self.tokens):
            if p not in tag_index:
                raise ValueError(f"token {i} has unknown tag {p!r}")
            key = (w, p)
            if key in token_index:
                raise ValueError(f"duplicate token {key!r}")
            token_index[key] = i
        object.__setattr__(self, "tag_index", tag_index)
        object.__setattr__(self, "_token_index", token_index)
        tt = np.array([tag_index[p] for _, p in self.tokens], dtype=np.int64)
        tt.setflags(write=False)
        object.__setattr__(self, "token_tag", tt)

    @property
    def m(self) -> int:
        return len(self.tokens)

    @property
    def T(self) -> int:
        return len(self.tags)

    def token_of(self, word, pos) -> int:
        try:
            return self._token_index[(word, pos)]
        except KeyError:
            pass
        try:
            return self._token_index[(None, pos)]
        except KeyError:
            raise EncodeError(f"POS tag {pos!r} not in lexicon") from None

    def token_str(self, i: int) -> str:
        w, p = self.tokens[i]
        return p if w is None else f"{w}/{p}"

    def to_dict(self):
        return {"cutoff": self.cutoff, "tags": list(self.tags),
                "tokens": [[w, p] for w, p in self.tokens]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["tags"]), tuple((w, p) for w, p in d["tokens"]), int(d["cutoff"]))


def build_lexicon(raw: Sequence[RawSentence], cutoff: int) -> Lexicon:
    """Lexicalize every word/POS pair occurring at least ``cutoff`` times."""
    if cutoff < 1:
        raise ValueError("cutoff must be >= 1 (use 1 for full lexicalization)")
    if not raw:
        raise ValueError("cannot build a lexicon from an empty corpus")
    counts = Counter()
    order = {}
    tags = set()
    for sent in raw:
        for w, p in zip(sent.forms, sent.pos):
            counts[(w, p)] += 1
            order.setdefault((w, p), len(order))
            tags.add(p)
    tags = tuple(sorted(tags))
    tokens = [(None, t) for t in tags]
    tokens += [pair for pair in sorted(order, key=order.get) if counts[pair] >= cutoff]
    return Lexicon(tags, tuple(tokens), cutoff)


@dataclass(frozen=True)
class Sentence:
    token_ids: np.ndarray
    tag_ids: np.ndarray
    gold_heads: Optional[tuple] = None

    def __post_init__(self):
        if len(self.token_ids) != len(self.tag_ids) or len(self.token_ids) == 0:
            raise ValueError("token_ids and tag_ids must be non-empty and equal length")

    def __len__(self):
        return len(self.token_ids)

    def __eq__(self, other):
        if not isinstance(other, Sentence):
            return NotImplemented
        return (np.array_equal(self.token_ids, other.token_ids)
                and np.array_equal(self.tag_ids, other.tag_ids)
                and self.gold_heads == other.gold_heads)

    __hash__ = None


def encode(raw: Iterable[RawSentence], lexicon: Lexicon) -> list:
    out = []
    for sent in raw:
        tok = np.array([lexicon.token_of(w, p) for w, p in zip(sent.forms, sent.pos)], dtype=np.int64)
        tag = lexicon.token_tag[tok].copy()
        gold = tuple(sent.gold_heads) if sent.gold_heads is not None else None
        out.append(Sentence(tok, tag, gold))
    return out
