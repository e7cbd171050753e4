import numpy as np
import pytest

from lndmv.errors import NeuralTrainingError, VectorFormatError
from lndmv.model import CountTable, ValenceConfig
from lndmv.neural import (CHILD, DECISION, NeuralConfig, NeuralModel, contexts_from_counts,
                          export_params, fit, forward, gradient_check, load_vectors, nn_loss,
                          rule_instances)
from lndmv.corpus import Lexicon

SMALL = dict(d_word_in=6, d_tag_in=3, d_val=2, k=5, k_tag=2, hidden=12, init_scale=0.3)


def small_model(m=6, n_tags=3, vcfg=ValenceConfig(2, 2), **kw):
    cfg = NeuralConfig(**{**SMALL, **kw})
    return NeuralModel(np.arange(m) % n_tags, n_tags, vcfg, cfg)


def test_defaults_match_reported_training_setup():
    cfg = NeuralConfig()
    assert (cfg.lr, cfg.batch, cfg.momentum) == (0.03, 200, 0.9)
    assert (cfg.d_word_in, cfg.k, cfg.d_tag_in, cfg.k_tag) == (100, 100, 20, 20)


def test_zero_network_is_uniform():
    model = small_model()
    model.zero_()
    np.testing.assert_allclose(forward(model, 2, 0, 1, CHILD), np.full(6, 1 / 6))
    np.testing.assert_allclose(forward(model, 2, 1, 0, DECISION), [0.5, 0.5])
    p = export_params(model)
    np.testing.assert_allclose(p.child, 1 / 6)
    np.testing.assert_allclose(p.decision, 0.5)


@pytest.mark.parametrize("seed", range(5))
def test_outputs_are_distributions(seed):
    model = small_model(seed=seed)
    for v in range(2):
        for d in range(2):
            assert forward(model, seed, d, v, CHILD).sum() == pytest.approx(1, abs=1e-12)
            assert forward(model, seed, d, v, DECISION).sum() == pytest.approx(1, abs=1e-12)


def test_equal_score_shift_leaves_child_distribution():
    model = small_model()
    before = forward(model, 1, 0, 0, CHILD)
    model.weights["b_child"] += 3.7  # same shift on every token's score
    np.testing.assert_allclose(forward(model, 1, 0, 0, CHILD), before, atol=1e-14)


def test_forward_argument_checks():
    model = small_model(vcfg=ValenceConfig(3, 2))
    forward(model, 0, 0, 2, CHILD)
    with pytest.raises(ValueError):
        forward(model, 0, 0, 2, DECISION)
    with pytest.raises(ValueError):
        forward(model, 0, 0, 0, "root")


def test_tokens_sharing_a_tag_share_the_tag_output_block():
    model = small_model()
    # tokens 0 and 3 share tag 0; raising their tag vector raises both scores equally
    before = np.log(forward(model, 1, 1, 0, CHILD))
    model.weights["W_tag_out"][0] += 0.5
    after = np.log(forward(model, 1, 1, 0, CHILD))
    diff = after - before
    assert diff[0] == pytest.approx(diff[3], abs=1e-12)
    assert diff[1] == pytest.approx(diff[4], abs=1e-12)


def one_hot_counts(m, head, d, v, child, n=1.0, vcfg=ValenceConfig(2, 2)):
    c = CountTable.zeros(m, vcfg)
    c.child[head, d, v, child] = n
    return c


def test_loss_zero_counts_and_single_rule():
    model = small_model()
    assert nn_loss(model, CountTable.zeros(6, ValenceConfig())) == 0.0
    p = forward(model, 2, 0, 1, CHILD)[4]
    assert nn_loss(model, one_hot_counts(6, 2, 0, 1, 4)) == pytest.approx(-np.log(p), rel=1e-12)


def test_loss_bounded_by_count_entropy():
    rng = np.random.default_rng(0)
    c = CountTable.zeros(6, ValenceConfig())
    c.child[...] = rng.poisson(1.0, c.child.shape)
    c.decision[...] = rng.poisson(2.0, c.decision.shape)
    bound = 0.0
    for table in (c.child, c.decision):
        tot = table.sum(axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            bound += np.nansum(np.where(table > 0, table * np.log(tot / table), 0.0))
    assert nn_loss(small_model(), c) >= bound


def test_contexts_and_instances():
    c = one_hot_counts(6, 2, 1, 0, 3, n=2.5)
    c.decision[2, 1, 0, 1] = 2.0
    ctx = contexts_from_counts(c)
    assert len(ctx) == 1 and ctx.heads[0] == 2
    heads, dirs, vals, fam, out, w = rule_instances(c)
    assert len(w) == 3 + 2  # ceil(2.5) + 2
    assert w.sum() == pytest.approx(4.5)
    assert set(fam.tolist()) == {0, 1}


def test_fit_reduces_loss_and_is_seeded():
    counts = CountTable.zeros(5, ValenceConfig())
    counts.child[1, 1, 0] = [5, 1, 0, 0, 2]
    counts.decision[1, 1, 0] = [3, 8]
    a, b = small_model(m=5), small_model(m=5)
    before = nn_loss(a, counts)
    fit(a, counts, epochs=30)
    fit(b, counts, epochs=30)
    assert nn_loss(a, counts) < before
    for k in a.weights:
        np.testing.assert_array_equal(a.weights[k], b.weights[k])


def test_fit_with_zero_learning_rate_is_a_no_op():
    model = small_model(lr=0.0)
    before = {k: v.copy() for k, v in model.weights.items()}
    fit(model, one_hot_counts(6, 0, 0, 0, 1, 4), epochs=3)
    for k in before:
        np.testing.assert_array_equal(model.weights[k], before[k])


def test_fit_keeps_state_between_calls():
    model = small_model()
    counts = one_hot_counts(6, 0, 0, 0, 1, 4)
    fit(model, counts)
    vel = {k: v.copy() for k, v in model.velocity.items()}
    assert any(np.any(v != 0) for v in vel.values())
    w = {k: v.copy() for k, v in model.weights.items()}
    fit(model, counts)
    # the next step continues from the same weights and momentum
    assert all(np.any(model.weights[k] != w[k]) for k in ("W_word", "b_child"))


def test_fit_argmax_child():
    model = small_model()
    counts = one_hot_counts(6, 3, 1, 0, 5, n=20)
    fit(model, counts, NeuralConfig(**{**SMALL, "lr": 0.1}), epochs=40)
    p = export_params(model)
    assert p.child[3, 1, 0].argmax() == 5


def test_fit_detects_divergence():
    model = small_model(lr=1e6, init_scale=1.0)
    counts = one_hot_counts(6, 3, 1, 0, 5, n=50)
    with np.errstate(all="ignore"), pytest.raises(NeuralTrainingError):
        fit(model, counts, epochs=50)


def test_export_tables_normalized_and_root_from_counts():
    model = small_model(vcfg=ValenceConfig(3, 2))
    p = export_params(model, root_counts=np.array([1, 0, 3, 0, 0, 0.0]), lam=0.0)
    p.check(1e-6)
    np.testing.assert_allclose(p.root, [0.25, 0, 0.75, 0, 0, 0])
    assert p.child.shape == (6, 2, 3, 6) and p.decision.shape == (6, 2, 2, 2)
    with pytest.raises(ValueError):
        export_params(model, root_counts=-np.ones(6))


def _grad_counts(m, seed=0):
    rng = np.random.default_rng(seed)
    c = CountTable.zeros(m, ValenceConfig())
    c.child[...] = rng.poisson(0.5, c.child.shape)
    c.decision[...] = rng.poisson(1.5, c.decision.shape)
    return c


@pytest.mark.parametrize("hidden", [12, 7])  # 7 = k + k_tag: no projection
def test_gradient_check(hidden):
    model = small_model(hidden=hidden)
    assert gradient_check(model, _grad_counts(6), n_samples=300) < 1e-4
    assert gradient_check(model, _grad_counts(6), n_samples=50, corrupt=True) > 0.1


def test_gradient_check_zero_counts():
    assert gradient_check(small_model(), CountTable.zeros(6, ValenceConfig())) == 0.0


def _lexicon():
    return Lexicon(("NN", "VB"), ((None, "NN"), (None, "VB"), ("dog", "NN"), ("runs", "VB")), 1)


def test_load_vectors(tmp_path):
    cfg = NeuralConfig(d_word_in=3, d_tag_in=2)
    path = tmp_path / "w.txt"
    path.write_text("2 3\ndog/NN 1 2 3\nruns 4 5 6\n")
    tpath = tmp_path / "t.txt"
    tpath.write_text("1 2\nVB 7 8\n")
    E, T, cov = load_vectors(str(path), _lexicon(), cfg, str(tpath))
    np.testing.assert_array_equal(E[2], [1, 2, 3])
    np.testing.assert_array_equal(E[3], [4, 5, 6])  # bare word accepted
    np.testing.assert_array_equal(T[1], [7, 8])
    assert (cov.found, cov.missing) == (2, 2)


def test_load_vectors_errors(tmp_path):
    cfg = NeuralConfig(d_word_in=3, d_tag_in=2)
    path = tmp_path / "w.txt"
    path.write_text("1 5\ndog/NN 1 2 3 4 5\n")
    with pytest.raises(VectorFormatError, match="dimension"):
        load_vectors(str(path), _lexicon(), cfg)
    path.write_text("2 3\ndog/NN 1 2 3\nruns 4 5\n")
    with pytest.raises(VectorFormatError, match=":3:"):
        load_vectors(str(path), _lexicon(), cfg)
    with pytest.raises(FileNotFoundError):
        load_vectors(str(tmp_path / "none"), _lexicon(), cfg)
    a = load_vectors(str(tmp_path / "none"), _lexicon(), cfg, allow_random=True, seed=3)
    b = load_vectors(str(tmp_path / "none"), _lexicon(), cfg, allow_random=True, seed=3)
    np.testing.assert_array_equal(a[0], b[0])


def test_embeddings_shape_checked():
    with pytest.raises(ValueError):
        NeuralModel.for_lexicon(_lexicon(), cfg=NeuralConfig(d_word_in=3), E_word=np.zeros((2, 3)))
