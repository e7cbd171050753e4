"""Check the dynamic-programming chart against brute-force enumeration.

On a short sentence every projective tree can be listed, so the chart's
log Z, best tree and expected counts can be compared to exact sums.
"""
import numpy as np

from lndmv import chart
from lndmv.model import ValenceConfig
from lndmv.verify import random_params

# random rule tables over a 3-token vocabulary
params = random_params(3, ValenceConfig(2, 2), np.random.default_rng(4))
toks = [0, 2, 1, 2, 0]

_, logz = chart.inside(toks, params)
tree, score = chart.viterbi(toks, params)
counts, _ = chart.expected_counts(toks, params)
ref = chart.oracle(toks, params)

print(f"{len(ref['trees'])} projective trees over {len(toks)} tokens")
print(f"log Z    chart {logz:.12f}  brute force {ref['log_prob']:.12f}")
print(f"best     chart {tree.heads} {score:.6f}  brute force {ref['best_tree'].heads} {ref['best_score']:.6f}")
diff = max(np.abs(getattr(counts, k) - getattr(ref["counts"], k)).max() for k in ("root", "child", "decision"))
print(f"max expected-count difference {diff:.1e}")
print("arc posteriors (row: dependent, col 0: root, col h+1: head h)")
print(np.round(chart.arc_posteriors(toks, params), 3))
