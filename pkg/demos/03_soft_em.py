"""Induce a grammar with soft EM from the K&M-style initializer and score it."""
from lndmv import corpus, synthetic, trainer
from lndmv.evaluation import evaluate
from lndmv.model import init_km

train_raw = corpus.strip_and_filter(synthetic.load_shipped("train"), max_len=10)
test_raw = corpus.strip_and_filter(synthetic.load_shipped("test"), max_len=10)
lex = corpus.build_lexicon(train_raw, 50)
train, test = corpus.encode(train_raw, lex), corpus.encode(test_raw, lex)

p0 = init_km(train, lex)
print(f"K&M init: test DDA {evaluate(p0, test).dda_all:.3f}")

params, trace = trainer.soft_em(train, p0, trainer.TrainConfig(max_iters=30, lam=0.1))
for rec in trace.records[::5]:
    print(f"iter {rec.iteration:>3}  log-likelihood/token {rec.ll_per_token:.5f}")
print(f"soft EM:  test DDA {evaluate(params, test).dda_all:.3f}")
