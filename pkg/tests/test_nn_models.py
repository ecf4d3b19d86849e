"""Architecture tests: parameter counts, shapes, siamese symmetry."""

import numpy as np

from cvepkit.nn.layers import Dense, Sequential
from cvepkit.nn.models import (
    EMBED_INPUT,
    SiameseNetwork,
    build_class_network,
    build_extractor,
    build_kbit_network,
    build_siamese_network,
    count_parameters,
)


def test_extractor_parameter_count():
    layers = build_extractor(np.random.default_rng(0))
    # Spatial 8x8+8, conv 11*8*16+16, conv 14*16*32+32.
    assert count_parameters(layers) == 8696


def test_head_parameter_counts():
    rng = np.random.default_rng(0)
    assert count_parameters(Dense(EMBED_INPUT, 63, rng)) == 127_071
    assert count_parameters(Dense(EMBED_INPUT, 6, rng)) == 12_102


def test_network_totals():
    assert count_parameters(build_kbit_network(0)) == 8696 + 127_071
    assert count_parameters(build_class_network(0)) == 8696 + 12_102
    siam = build_siamese_network(0)
    assert count_parameters(siam.embed) == 8696 + 127_071
    assert count_parameters(siam) == 8696 + 127_071 + 64


def test_extractor_output_width():
    net = Sequential(build_extractor(np.random.default_rng(1)))
    x = np.random.default_rng(2).normal(size=(3, 8, 538)).astype(np.float32)
    y = net.forward(x)
    assert y.shape == (3, EMBED_INPUT)
    # Time chain: 538 -> 528 (conv 11) -> 264 (pool) -> 251 (conv 14)
    # -> 125 (pool) -> 63 (adaptive) x 32 channels.
    assert EMBED_INPUT == 63 * 32


def test_output_shapes_and_ranges():
    x = np.random.default_rng(3).normal(size=(4, 8, 538)).astype(np.float32)
    bits = build_kbit_network(5).forward(x)
    assert bits.shape == (4, 63)
    assert np.all((bits >= 0) & (bits <= 1))
    logits = build_class_network(5).forward(x)
    assert logits.shape == (4, 6)


def test_construction_is_seeded():
    a = build_kbit_network(7)
    b = build_kbit_network(7)
    c = build_kbit_network(8)
    for pa, pb in zip(a.params(), b.params()):
        np.testing.assert_array_equal(pa.value, pb.value)
    assert any(not np.array_equal(pa.value, pc.value)
               for pa, pc in zip(a.params(), c.params()))


def test_siamese_pair_symmetry():
    net = SiameseNetwork(0)
    rng = np.random.default_rng(4)
    x1 = rng.normal(size=(3, 8, 538)).astype(np.float32)
    x2 = rng.normal(size=(3, 8, 538)).astype(np.float32)
    ab = net.forward_pairs(x1, x2)
    ba = net.forward_pairs(x2, x1)
    np.testing.assert_allclose(ab, ba, atol=1e-5)


def test_siamese_identical_inputs_give_baseline_logit():
    net = SiameseNetwork(1)
    x = np.random.default_rng(5).normal(size=(2, 8, 538)).astype(np.float32)
    logit = net.forward_pairs(x, x.copy())
    # |e1 - e2| = 0, so the logit is the head bias.
    np.testing.assert_allclose(logit, float(net.head.bias.value[0]), atol=1e-7)


def test_siamese_inference_paths_match_forward():
    net = SiameseNetwork(2)
    rng = np.random.default_rng(6)
    x1 = rng.normal(size=(2, 8, 538)).astype(np.float32)
    x2 = rng.normal(size=(2, 8, 538)).astype(np.float32)
    want = net.forward_pairs(x1, x2)
    got = net.head_logits(net.embed_forward(x1), net.embed_forward(x2))
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_siamese_backward_accumulates_all_params():
    net = SiameseNetwork(3, dtype=np.float64)
    rng = np.random.default_rng(7)
    x1 = rng.normal(size=(2, 8, 538))
    x2 = rng.normal(size=(2, 8, 538))
    logits = net.forward_pairs(x1, x2, training=True)
    loss = net.loss
    loss.forward(logits, np.array([1.0, 0.0]))
    net.backward(loss.backward())
    nonzero = [np.abs(p.grad).max() > 0 for p in net.params()]
    assert all(nonzero)
