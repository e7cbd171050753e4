"""Parse held-out sentences, write CoNLL and score attachments."""
import tempfile
from pathlib import Path

from lndmv import corpus, synthetic
from lndmv.evaluation import evaluate, parse_corpus
from lndmv.model import ValenceConfig, mle_from_trees

train_raw = corpus.strip_and_filter(synthetic.load_shipped("train"), max_len=10)
test_raw = corpus.strip_and_filter(synthetic.load_shipped("test"), max_len=10)
lex = corpus.build_lexicon(train_raw, 1)
params = mle_from_trees(corpus.encode(train_raw, lex), lex, ValenceConfig(2, 2), lam=0.1)

test = corpus.encode(test_raw, lex)
report = evaluate(params, test)
print(report.to_text())

trees = parse_corpus(params, test)
out = Path(tempfile.mkdtemp()) / "parsed.conll"
corpus.write_conll(out, test_raw, [t.to_conll() for t in trees])
print(f"wrote {out}")
print(out.read_text().split("\n\n")[0])
