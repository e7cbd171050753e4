import csv

import pytest

from lndmv import sweep
from lndmv.corpus import RawSentence


def test_default_grids():
    assert sweep.ENGLISH_CUTOFFS == (100000, 500, 200, 100, 80, 70, 60, 50, 40)
    assert sweep.CHINESE_CUTOFFS == (100000, 100, 70, 50, 40, 30, 20, 12, 10)
    assert sweep.SweepSpec().seeds == [0, 1, 2]


@pytest.mark.parametrize("kw", [dict(cutoffs=[]), dict(cutoffs=[0]), dict(seeds=[]),
                                dict(corpus_sizes=[0]), dict(init="trees"),
                                dict(overrides={"nope": 1}), dict(hidden=[10]),
                                dict(overrides={"lr": 0.1})])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        sweep.SweepSpec(**kw)


def test_average_rows_divides_by_seed_count():
    rows = [{"cutoff": 5, "vocab_size": 9, "corpus_size": 10, "seed": s, "init": "km", "mode": "soft",
             "hidden": "", "dda_val": "", "dda_test": v, "seconds": 1.0, "status": "ok"}
            for s, v in enumerate([0.5, 0.25, 0.75])]
    avg = sweep.average_rows(rows, 3)
    assert avg["seed"] == "mean" and avg["dda_test"] == (0.5 + 0.25 + 0.75) / 3
    rows[1]["status"] = "error: boom"
    avg = sweep.average_rows(rows, 3)
    assert avg["status"] == "partial 2/3" and avg["dda_test"] == (0.5 + 0.75) / 2


def test_failed_cell_recorded_and_sweep_continues(tmp_path):
    train = [RawSentence(["a", "b"], ["DT", "NN"], [2, 0])] * 4
    test = [RawSentence(["a", "c"], ["DT", "XX"], [2, 0])]  # unseen tag: every cell fails at eval
    spec = sweep.SweepSpec(cutoffs=[1, 100000], corpus_sizes=[2], seeds=[0, 1],
                           overrides={"max_iters": 2})
    rows = sweep.run_sweep(spec, train, test, out_path=tmp_path / "s.csv")
    assert len(rows) == 4 + 2
    assert all(r["status"].startswith("error: EncodeError") for r in rows[:4])
    assert rows[-1]["status"] == "failed"
    with open(tmp_path / "s.csv") as fh:
        got = list(csv.DictReader(fh))
    assert len(got) == 6 and list(got[0]) == list(sweep.COLUMNS)


def test_prefixes_are_nested():
    import numpy as np
    raw = list(range(10))
    order = np.random.default_rng(0).permutation(10)
    small = sweep._prefix(raw, 3, order)
    big = sweep._prefix(raw, 7, order)
    assert big[:3] == small and len(sweep._prefix(raw, "all", order)) == 10
