"""Fit the neural rule network and train it with batched hard EM.

The network predicts CHILD and STOP/CONTINUE distributions from embeddings
of the head token, its tag, direction and valence, so rare heads share
statistics with frequent heads of the same tag.
"""
from lndmv import corpus, neural, synthetic, trainer
from lndmv.evaluation import evaluate
from lndmv.model import ValenceConfig, mle_from_trees
from lndmv.neural import NeuralConfig, NeuralModel

train_raw = corpus.strip_and_filter(synthetic.load_shipped("train"), max_len=10)
test_raw = corpus.strip_and_filter(synthetic.load_shipped("test"), max_len=10)
lex = corpus.build_lexicon(train_raw, 50)
train, test = corpus.encode(train_raw, lex), corpus.encode(test_raw, lex)

# start from gold-tree counts on a small slice to show smoothing
good = mle_from_trees(train[:200], lex, ValenceConfig(2, 2), lam=0.1)
model = NeuralModel.for_lexicon(lex, cfg=NeuralConfig(seed=0))
print(f"network with {sum(w.size for w in model.weights.values())} weights, m = {lex.m}")

_, p_nn, trace = trainer.hard_em_neural(
    train, model, good, trainer.TrainConfig(mode="neural", max_iters=20, em_batch=200, seed=0))
print(f"tabular init from 200 gold trees: test DDA {evaluate(good, test).dda_all:.3f}")
print(f"after neural hard EM:             test DDA {evaluate(p_nn, test).dda_all:.3f}")

exported = neural.export_params(model, lex).check()  # raises if any row is off
print(f"exported tables: {exported.child.shape[0] * 2 * 2} CHILD rows, each summing to one")
