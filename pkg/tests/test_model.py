import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ecg_gaf.model import ConfigError, ModelConfig, build, classify, load_model
from ecg_gaf.nn import ShapeError

DEFAULT_CHAIN = [(32, 32, 3), (30, 30, 32), (15, 15, 32), (13, 13, 64), (6, 6, 64), (4, 4, 64), (1024,), (64,)]


def param_count_oracle(k, cin=3, flat=1024, dense=64):
    conv = lambda i, o: 3 * 3 * i * o + o  # noqa: E731
    return conv(cin, 32) + conv(32, 64) + conv(64, 64) + flat * dense + dense + dense * k + k


@pytest.fixture(scope="module")
def model5():
    return build(ModelConfig(num_classes=5), seed=0)


def test_shape_chain_default(model5):
    assert model5.shape_chain() == DEFAULT_CHAIN + [(5,)]


def test_two_class_head():
    m = build(ModelConfig(num_classes=2), seed=0)
    assert m.shape_chain()[-1] == (2,)
    assert m.layers[-1].units == 2


@pytest.mark.parametrize("k", [2, 5, 10])
def test_parameter_count(k):
    m = build(ModelConfig(num_classes=k), seed=0)
    assert m.num_parameters == param_count_oracle(k)
    assert m.num_parameters == 122245 + (k - 5) * 65


def test_same_seed_same_parameters():
    a = build(ModelConfig(num_classes=5), seed=3)
    b = build(ModelConfig(num_classes=5), seed=3)
    c = build(ModelConfig(num_classes=5), seed=4)
    assert a.to_bytes() == b.to_bytes()
    assert a.to_bytes() != c.to_bytes()


def test_initialisation_ranges(model5):
    for layer in model5.layers:
        for p in layer.params()[1:]:
            assert not p.data.any()  # zero biases
    w = model5.layers[0].weight.data
    assert np.abs(w).max() <= np.sqrt(6.0 / (27 + 288))


def test_input_size_bounds():
    with pytest.raises(ConfigError):
        ModelConfig(num_classes=5, input_size=17)
    m = build(ModelConfig(num_classes=5, input_size=18), seed=0)
    assert m.shape_chain()[5] == (1, 1, 64)
    with pytest.raises(ConfigError):
        ModelConfig(num_classes=1)


def test_zero_batch_gives_bias_chain(rng):
    m = build(ModelConfig(num_classes=5), seed=1)
    for layer in m.layers:
        for p in layer.params()[1:]:
            p.data[...] = rng.normal(size=p.shape).astype(np.float32)
    # Hand-propagate constants: conv on zeros yields the bias at every pixel.
    relu = lambda v: np.maximum(v, 0)  # noqa: E731
    h1 = relu(m.layers[0].bias.data)
    h2 = relu(m.layers[2].bias.data + np.einsum("oiyx,i->o", m.layers[2].weight.data, h1))
    h3 = relu(m.layers[4].bias.data + np.einsum("oiyx,i->o", m.layers[4].weight.data, h2))
    flat = np.tile(h3, 16)
    h4 = relu(m.layers[6].weight.data @ flat + m.layers[6].bias.data)
    expected = m.layers[7].weight.data @ h4 + m.layers[7].bias.data
    logits = m.forward(np.zeros((2, 32, 32, 3)))
    np.testing.assert_allclose(logits, np.tile(expected, (2, 1)), rtol=1e-4, atol=1e-4)


def test_batch_independence(model5, rng):
    batch = rng.uniform(-1, 1, size=(8, 32, 32, 3)).astype(np.float32)
    full = model5.forward(batch)
    single = model5.forward(batch[3:4])
    np.testing.assert_allclose(single[0], full[3], atol=1e-5)
    assert full.shape == (8, 5)


def test_forward_shape_error(model5):
    with pytest.raises(ShapeError):
        model5.forward(np.zeros((1, 30, 30, 3)))


def test_classify_tie_and_dominant():
    cls, probs = classify(np.array([[0.0, 0.0]]))
    assert cls.tolist() == [0] and probs.tolist() == [[0.5, 0.5]]
    cls, probs = classify(np.array([[10.0, 0, 0, 0, 0]]))
    assert cls.tolist() == [0] and probs[0, 0] > 0.99


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 6)), elements=st.floats(-20, 20)))
def test_classify_probabilities(logits):
    cls, probs = classify(logits)
    assert np.all((probs > 0) & (probs < 1))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)
    assert np.array_equal(cls, np.argmax(logits, axis=1))


def test_predict_matches_forward(model5, rng):
    batch = rng.uniform(-1, 1, size=(10, 32, 32, 3)).astype(np.float32)
    cls, probs = model5.predict(batch, batch_size=3)
    ref_cls, ref_probs = classify(model5.forward(batch))
    np.testing.assert_allclose(probs, ref_probs, atol=1e-6)
    assert np.array_equal(cls, ref_cls)
    cls_t, probs_t = model5.predict(batch, batch_size=3, threads=3)
    assert probs_t.tobytes() == probs.tobytes()


def test_checkpoint_roundtrip_forward(tmp_path, model5, rng):
    path = tmp_path / "m.cnn"
    model5.save(path)
    back = load_model(path)
    assert back.config == model5.config
    batch = rng.uniform(-1, 1, size=(4, 32, 32, 3)).astype(np.float32)
    assert back.forward(batch).tobytes() == model5.forward(batch).tobytes()


def test_literal_ten_unit_head(tmp_path, rng):
    m = build(ModelConfig(num_classes=5, head_units=10), seed=0)
    batch = rng.uniform(-1, 1, size=(3, 32, 32, 3)).astype(np.float32)
    assert m.forward(batch).shape == (3, 10)
    cls, probs = m.predict(batch)
    assert probs.shape == (3, 5) and cls.max() < 5
    m.save(tmp_path / "m.cnn")
    assert load_model(tmp_path / "m.cnn", num_classes=5).config.head_units == 10
