import sys

import numpy as np
import pytest

from lndmv import corpus, synthetic


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def conll_rows(forms, pos, heads):
    return "".join(f"{i + 1}\t{f}\t_\t{p}\t{p}\t_\t{h}\t_\t_\t_\n"
                   for i, (f, p, h) in enumerate(zip(forms, pos, heads))) + "\n"


@pytest.fixture(scope="session")
def shipped():
    """Stripped train/val/test splits of the packaged synthetic benchmark."""
    return {split: corpus.strip_and_filter(synthetic.load_shipped(split), max_len=10)
            for split in ("train", "val", "test")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
