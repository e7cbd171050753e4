"""Unsupervised lexicalized dependency grammar induction (extended DMV with a neural rule network)."""
from .chart import arc_posteriors, expected_counts, inside, oracle, outside, tree_log_prob, viterbi
from .corpus import (Lexicon, RawSentence, Sentence, build_lexicon, encode, read_conll,
                     strip_and_filter, write_conll)
from .errors import (ConllFormatError, EncodeError, LndmvError, ModelFormatError,
                     NeuralTrainingError, TreeError, VectorFormatError)
from .evaluation import EvalReport, dda, evaluate, parse_corpus
from .model import (CONTINUE, LEFT, RIGHT, STOP, CountTable, DmvParams, ParseTree, ValenceConfig,
                    init_km, init_random, init_uniform, mle_from_trees, normalize)
from .neural import (NeuralConfig, NeuralModel, export_params, fit, forward, gradient_check,
                     load_vectors, nn_grads, nn_loss)
from .persist import load_model, save_model
from .trainer import (Mode, TrainConfig, TrainTrace, hard_em_neural, hard_em_tabular, init_params,
                      soft_em, train)

__version__ = "0.1.0"
