"""Read the shipped synthetic treebank, strip punctuation and build lexicons.

Tokens seen fewer than ``cutoff`` times as a (word, POS) pair fall back to
their POS-only token, so the vocabulary shrinks as the cutoff grows.
"""
from lndmv import corpus, synthetic

raw = synthetic.load_shipped("train")
print(f"{len(raw)} raw sentences, first: {' '.join(raw[0].forms)}")

stripped = corpus.strip_and_filter(raw, max_len=10)
print(f"{len(stripped)} sentences of length <= 10 after removing punctuation")

for cutoff in (100000, 200, 50, 1):
    lex = corpus.build_lexicon(stripped, cutoff)
    print(f"cutoff {cutoff:>6}: m = {lex.m:>3} tokens over {lex.T} tags")

lex = corpus.build_lexicon(stripped, 50)
s = corpus.encode(stripped[:1], lex)[0]
print("encoded:", [lex.token_str(int(t)) for t in s.token_ids], "gold heads", s.gold_heads)
