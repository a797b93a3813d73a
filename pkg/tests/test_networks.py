import numpy as np
import pytest

import admap
from admap.errors import CompositionError, NumericError, ParseError, RejectedInput, Unsupported
from admap.networks import Layer, activation_pattern, forward
from admap.rng import stream

from conftest import finite_difference_gradient


def zero_descriptor(dim, sigma2=1.0):
    layers = (Layer(np.zeros((4, dim)), np.zeros(4), "relu"),
              Layer(np.zeros((1, 4)), np.zeros(1), "identity"))
    return admap.ReluNetworkSpec(layers, role="descriptor", sigma2=sigma2)


def test_zero_weight_energy_is_pure_quadratic():
    model = admap.ReluNetworkModel(zero_descriptor(6))
    rng = stream(1, "zero")
    for _ in range(10):
        x = rng.normal(0, 2, size=6)
        assert model.energy(x) == pytest.approx(x @ x / 2.0, rel=1e-12)


def test_descriptor_gradient_matches_finite_differences_off_kink():
    spec = admap.random_network(3, [5, 12, 1], role="descriptor", sigma2=0.8)
    model = admap.ReluNetworkModel(spec)
    rng = stream(4, "fd-net")
    checked = 0
    while checked < 20:
        x = rng.normal(0, 1, size=5)
        # skip points within 1e-6 of a kink (pre-activation near zero)
        _, cache = forward(spec, x, keep_cache=True)
        if any(np.abs(z).min() < 1e-6 for z, layer in zip(cache, spec.layers)
               if layer.activation == "relu"):
            continue
        fd = finite_difference_gradient(model, x)
        grad = model.gradient(x)
        assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-9) < 1e-4
        checked += 1


def test_piecewise_quadratic_second_difference():
    # inside one activation region the energy is quadratic, so the second
    # difference along any line equals |h|^2 / sigma^2 everywhere in the region
    sigma2 = 0.7
    spec = admap.random_network(8, [4, 10, 1], role="descriptor", sigma2=sigma2)
    model = admap.ReluNetworkModel(spec)
    rng = stream(6, "piecewise")
    checked = 0
    while checked < 10:
        x = rng.normal(0, 1, size=4)
        h = rng.normal(0, 1, size=4) * 1e-3
        pats = {activation_pattern(spec, x + k * h) for k in (-1, 0, 1)}
        if len(pats) != 1:
            continue
        second = model.energy(x + h) - 2 * model.energy(x) + model.energy(x - h)
        assert second == pytest.approx(h @ h / sigma2, abs=1e-8)
        checked += 1


def test_identity_generator_composition():
    desc_spec = admap.random_network(7, [6, 9, 1], role="descriptor")
    gen = admap.ReluNetworkSpec(
        (Layer(np.eye(6), np.zeros(6), "identity"),), role="generator")
    composed = admap.compose(gen, desc_spec)
    desc = admap.ReluNetworkModel(desc_spec)
    rng = stream(8, "idgen")
    for _ in range(5):
        z = rng.normal(0, 1, size=6)
        assert composed.energy(z) == pytest.approx(desc.energy(z), rel=1e-12)


def test_constant_generator_composition():
    desc_spec = admap.random_network(9, [6, 9, 1], role="descriptor")
    bias = stream(9, "bias").normal(0, 1, size=6)
    gen = admap.ReluNetworkSpec(
        (Layer(np.zeros((6, 2)), bias, "identity"),), role="generator")
    composed = admap.compose(gen, desc_spec)
    desc = admap.ReluNetworkModel(desc_spec)
    expected = desc.energy(bias)
    for z in stream(10, "zs").normal(0, 1, size=(5, 2)):
        assert composed.energy(z) == pytest.approx(expected, rel=1e-12)


def test_composed_gradient_matches_finite_differences():
    gen = admap.random_network(11, [2, 6, 8], role="generator",
                               final_activation="tanh")
    desc = admap.random_network(12, [8, 10, 1], role="descriptor", sigma2=1.2)
    composed = admap.compose(gen, desc)
    assert composed.latent_dim == 2
    rng = stream(13, "fd-composed")
    for _ in range(20):
        z = rng.normal(0, 1, size=2)
        fd = finite_difference_gradient(composed, z)
        grad = composed.gradient(z)
        assert np.linalg.norm(grad - fd) / max(np.linalg.norm(fd), 1e-9) < 1e-4


def test_composition_dim_mismatch():
    gen = admap.random_network(1, [2, 5], role="generator")
    desc = admap.random_network(2, [8, 4, 1], role="descriptor")
    with pytest.raises(CompositionError) as err:
        admap.compose(gen, desc)
    assert "5" in str(err.value) and "8" in str(err.value)


def test_weight_file_roundtrip(tmp_path):
    spec = admap.random_network(21, [3, 7, 1], role="descriptor", sigma2=2.5)
    path = tmp_path / "net.weights"
    admap.save_network(spec, path)
    loaded = admap.load_network(path)
    assert loaded.role == "descriptor"
    assert loaded.sigma2 == 2.5
    assert len(loaded.layers) == len(spec.layers)
    for orig, back in zip(spec.layers, loaded.layers):
        assert back.activation == orig.activation
        # float32 quantization is the only loss
        assert np.array_equal(back.weight, orig.weight.astype("<f4").astype(float))
        assert np.array_equal(back.bias, orig.bias.astype("<f4").astype(float))


def test_load_errors_carry_byte_offsets(tmp_path):
    path = tmp_path / "bad.weights"
    path.write_bytes(b"not a weight file")
    with pytest.raises(ParseError) as err:
        admap.load_network(path)
    assert err.value.offset == 0

    spec = admap.random_network(22, [3, 1], role="descriptor")
    good = tmp_path / "good.weights"
    admap.save_network(spec, good)
    blob = good.read_bytes()
    truncated = tmp_path / "trunc.weights"
    truncated.write_bytes(blob[:-6])
    with pytest.raises(ParseError) as err:
        admap.load_network(truncated)
    assert err.value.offset > 0

    trailing = tmp_path / "trailing.weights"
    trailing.write_bytes(blob + b"xx")
    with pytest.raises(ParseError):
        admap.load_network(trailing)

    garbled = blob.replace(b"layer 3 1", b"layer x 1", 1)
    bad_line = tmp_path / "line.weights"
    bad_line.write_bytes(garbled)
    with pytest.raises(ParseError) as err:
        admap.load_network(bad_line)
    assert err.value.offset > 0


def test_load_relu_network_rejects_generator(tmp_path):
    gen = admap.random_network(23, [2, 6], role="generator")
    path = tmp_path / "gen.weights"
    admap.save_network(gen, path)
    with pytest.raises(Unsupported):
        admap.load_relu_network(path)
    # but the generic loader accepts it for composition
    assert admap.load_network(path).role == "generator"


def test_forward_overflow_names_layer():
    layers = (Layer(np.full((3, 2), 1e200), np.zeros(3), "relu"),
              Layer(np.full((1, 3), 1e200), np.zeros(1), "identity"))
    spec = admap.ReluNetworkSpec(layers, role="descriptor")
    model = admap.ReluNetworkModel(spec)
    with pytest.raises(NumericError) as err:
        model.energy(np.ones(2))
    assert err.value.layer == 1


def test_spec_validation():
    with pytest.raises(RejectedInput):
        admap.ReluNetworkSpec((Layer(np.zeros((3, 2)), np.zeros(3), "relu"),
                               Layer(np.zeros((1, 4)), np.zeros(1), "identity")))
    with pytest.raises(RejectedInput):
        admap.ReluNetworkSpec((Layer(np.zeros((2, 2)), np.zeros(2), "identity"),),
                              role="descriptor")
    with pytest.raises(RejectedInput):
        Layer(np.zeros((2, 2)), np.zeros(2), "swish")
