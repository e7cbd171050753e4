"""Run a small cutoff by corpus-size grid and print the averaged rows."""
import csv
import tempfile
from pathlib import Path

from lndmv import corpus, sweep, synthetic

train_raw = corpus.strip_and_filter(synthetic.load_shipped("train"), max_len=10)
test_raw = corpus.strip_and_filter(synthetic.load_shipped("test"), max_len=10)

spec = sweep.SweepSpec(cutoffs=[100000, 200, 50], corpus_sizes=[300, 1000], seeds=[0, 1, 2],
                       mode="soft", init="km", overrides={"max_iters": 10, "lam": 0.1})
out = Path(tempfile.mkdtemp()) / "sweep.csv"
sweep.run_sweep(spec, train_raw, test_raw, out_path=out)

with open(out) as fh:
    for row in csv.DictReader(fh):
        if row["seed"] == "mean":
            print(f"cutoff {row['cutoff']:>6}  m {row['vocab_size']:>3}  n {row['corpus_size']:>4}  "
                  f"test DDA {float(row['dda_test']):.3f}  {row['status']}")
print(f"full table in {out}")
