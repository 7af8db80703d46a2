import numpy as np
import pytest

from wvloc.network import (
    DivergenceError,
    NetworkConfig,
    TrainedModel,
    build_network,
    load_checkpoint,
    loss_and_gradient,
    loss_at,
    parameter_count,
    predict_batch,
    predict_likelihood,
    save_checkpoint,
    train,
)


def micro_config(num_classes=3, **kw):
    """<= 500 parameters: 12x12 single-channel input, one tiny conv, one dense."""
    defaults = dict(input_channels=1, input_size=12, num_classes=num_classes,
                    conv_layers=((2, 3, 1),), dense_widths=(8,), seed=0)
    defaults.update(kw)
    return NetworkConfig(**defaults)


def test_build_is_deterministic():
    cfg = micro_config()
    a = build_network(cfg)
    b = build_network(cfg)
    assert np.array_equal(a.parameters, b.parameters)
    c = build_network(micro_config(seed=1))
    assert not np.array_equal(a.parameters, c.parameters)


def test_invalid_config_rejected():
    with pytest.raises(ValueError):
        micro_config(num_classes=0)
    with pytest.raises(ValueError):
        NetworkConfig(input_channels=1, input_size=6, num_classes=3,
                      conv_layers=((2, 7, 1),))  # kernel larger than input
    with pytest.raises(ValueError):
        micro_config(learning_rate=0.0)


def test_default_parameter_count_closed_form():
    cfg = NetworkConfig(input_channels=4, input_size=58, num_classes=25)
    conv1 = 6 * (4 * 5 * 5) + 6
    conv2 = 16 * (6 * 5 * 5) + 16
    flat = 16 * 11 * 11          # 58 -> conv 54 -> pool 27 -> conv 23 -> pool 11
    fc1 = flat * 120 + 120
    fc2 = 120 * 84 + 84
    fc3 = 84 * 25 + 25
    assert parameter_count(cfg) == conv1 + conv2 + fc1 + fc2 + fc3


def test_micro_net_is_small_enough_for_grad_check():
    assert parameter_count(micro_config()) <= 500


def test_gradient_matches_central_finite_differences():
    cfg = micro_config()
    model = build_network(cfg)
    rng = np.random.default_rng(123)
    x = rng.uniform(0.0, 1.0, size=(4, 1, 12, 12))
    y = np.array([0, 1, 2, 1])
    _, grad = loss_and_gradient(model, x, y)
    params = model.parameters.copy()
    h = 1e-4
    fd = np.empty_like(params)
    for i in range(params.size):
        p_hi = params.copy(); p_hi[i] += h
        p_lo = params.copy(); p_lo[i] -= h
        fd[i] = (loss_at(model, p_hi, x, y) - loss_at(model, p_lo, x, y)) / (2 * h)
    rel = np.abs(grad - fd) / np.maximum(1e-6, np.maximum(np.abs(grad), np.abs(fd)))
    assert rel.max() <= 1e-3


def test_separable_toy_problem_reaches_full_accuracy():
    cfg = micro_config(num_classes=2, epochs=20, learning_rate=0.05, batch_size=4)
    samples = [(np.zeros((1, 12, 12)), 0) for _ in range(8)] + \
              [(np.ones((1, 12, 12)), 1) for _ in range(8)]
    model = train(build_network(cfg), samples)
    x = np.stack([ch for ch, _ in samples])
    y = np.array([lbl for _, lbl in samples])
    acc = (predict_batch(model, x).argmax(axis=1) == y).mean()
    assert acc == 1.0


def test_zero_epochs_is_a_no_op():
    cfg = micro_config(epochs=0)
    model = build_network(cfg)
    samples = [(np.zeros((1, 12, 12)), 0), (np.ones((1, 12, 12)), 1)]
    trained = train(model, samples)
    assert np.array_equal(trained.parameters, model.parameters)
    assert trained.training_log == ()


def test_training_loss_decreases():
    rng = np.random.default_rng(5)
    cfg = micro_config(epochs=15, learning_rate=0.05, batch_size=8)
    samples = [(rng.uniform(0, 1, (1, 12, 12)) * 0.2 + 0.4 * (lbl == 1), lbl)
               for lbl in [0, 1, 2] * 10]
    model = train(build_network(cfg), samples)
    assert model.training_log[-1][0] < model.training_log[0][0]


def test_training_is_deterministic():
    rng = np.random.default_rng(6)
    samples = [(rng.uniform(0, 1, (1, 12, 12)), int(i % 3)) for i in range(12)]
    cfg = micro_config(epochs=3)
    a = train(build_network(cfg), samples)
    b = train(build_network(cfg), samples)
    assert np.array_equal(a.parameters, b.parameters)
    assert a.training_log == b.training_log


def test_divergence_raises_with_epoch():
    # a non-finite sample drives the loss to NaN on the first batch
    rng = np.random.default_rng(7)
    samples = [(rng.uniform(0, 1, (1, 12, 12)), int(i % 3)) for i in range(11)]
    samples.append((np.full((1, 12, 12), np.inf), 0))
    cfg = micro_config(epochs=5, batch_size=12)
    with pytest.raises(DivergenceError, match="epoch 0"):
        train(build_network(cfg), samples)


def test_predict_likelihood_sums_to_one():
    model = build_network(micro_config())
    vec = predict_likelihood(model, np.random.default_rng(8).uniform(0, 1, (1, 12, 12)))
    assert abs(vec.probs.sum() - 1.0) <= 1e-6
    assert np.all(vec.probs > 0.0)


def test_predict_rejects_wrong_shape():
    model = build_network(micro_config())
    with pytest.raises(ValueError):
        predict_likelihood(model, np.zeros((2, 12, 12)))


def test_untrained_output_is_near_uniform():
    cfg = NetworkConfig(input_channels=4, input_size=58, num_classes=25, seed=0)
    model = build_network(cfg)
    rng = np.random.default_rng(0)
    for _ in range(5):
        vec = predict_likelihood(model, rng.uniform(0, 1, (4, 58, 58)))
        assert vec.probs.max() <= 3.0 / 25
        assert vec.probs.min() >= 1.0 / (3 * 25)


def test_logit_shift_invariance():
    cfg = micro_config()
    model = build_network(cfg)
    x = np.random.default_rng(9).uniform(0, 1, (1, 12, 12))
    base = predict_likelihood(model, x)
    shifted_params = model.parameters.copy()
    shifted_params[-cfg.num_classes:] += 7.5   # final dense bias shifts every logit
    shifted = predict_likelihood(TrainedModel(cfg, shifted_params), x)
    np.testing.assert_allclose(shifted.probs, base.probs, atol=1e-12)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(10)
    samples = [(rng.uniform(0, 1, (1, 12, 12)), int(i % 3)) for i in range(9)]
    model = train(build_network(micro_config(epochs=2)), samples)
    path = tmp_path / "model.ckpt"
    save_checkpoint(model, path)
    loaded = load_checkpoint(path)
    assert np.array_equal(loaded.parameters, model.parameters)
    assert loaded.config == model.config
    assert loaded.training_log == model.training_log
    x = rng.uniform(0, 1, (3, 1, 12, 12))
    assert np.array_equal(predict_batch(loaded, x), predict_batch(model, x))


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError):
        load_checkpoint(path)
