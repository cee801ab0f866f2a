import numpy as np
import pytest

from barkspace import neuralnet as nn
from gradcheck import draw_checkable_case, max_gradient_error

TINY = nn.NetSpec((1, 6, 5), (nn.Conv2d(2, 3, 3), nn.Relu(), nn.Flatten(), nn.Dense(1)))


def test_init_is_deterministic_and_shaped():
    a = nn.init_params(TINY, 123)
    b = nn.init_params(TINY, 123)
    c = nn.init_params(TINY, 124)
    assert a.layers[0]["w"].shape == (2, 1, 3, 3)
    assert a.layers[0]["b"].shape == (2,)
    assert a.layers[3]["w"].shape == (1, 2 * 4 * 3)
    assert a.layers[3]["b"].shape == (1,)
    for (n1, t1), (n2, t2) in zip(a.tensors(), b.tensors()):
        assert n1 == n2 and np.array_equal(t1, t2)
    assert any(not np.array_equal(t1, t2)
               for (_, t1), (_, t2) in zip(a.tensors(), c.tensors()))


def test_init_zero_biases_and_fan_in_bound():
    p = nn.init_params(TINY, 5)
    assert np.all(p.layers[0]["b"] == 0.0)
    assert np.all(p.layers[3]["b"] == 0.0)
    assert np.abs(p.layers[0]["w"]).max() <= 1 / np.sqrt(9)
    assert np.abs(p.layers[3]["w"]).max() <= 1 / np.sqrt(24)


def test_init_rejects_inconsistent_spec():
    bad = nn.NetSpec((1, 2, 2), (nn.Conv2d(1, 3, 3),))
    with pytest.raises(ValueError):
        nn.init_params(bad, 0)


def test_forward_zero_weights_zero_input():
    p = nn.init_params(TINY, 0)
    for entry in p.layers:
        if entry:
            entry["w"][:] = 0.0
    y, _ = nn.forward(TINY, p, np.zeros((1, 6, 5)))
    assert y.shape == (1,)
    assert y[0] == 0.0


def test_forward_1x1_conv_closed_form():
    spec = nn.NetSpec((1, 3, 3), (nn.Conv2d(1, 1, 1),))
    p = nn.init_params(spec, 0)
    p.layers[0]["w"][:] = 0.75
    y, _ = nn.forward(spec, p, np.full((1, 3, 3), 2.0))
    assert y.shape == (1, 3, 3)
    assert np.all(y == 1.5)


def test_maxpool_value_and_truncation():
    spec = nn.NetSpec((1, 2, 2), (nn.MaxPool2x2(),))
    p = nn.init_params(spec, 0)
    y, _ = nn.forward(spec, p, np.array([[[1.0, 2.0], [3.0, 4.0]]]))
    assert y.shape == (1, 1, 1)
    assert y[0, 0, 0] == 4.0
    spec = nn.NetSpec((1, 3, 5), (nn.MaxPool2x2(),))
    y, _ = nn.forward(spec, nn.init_params(spec, 0), np.arange(15.0).reshape(1, 3, 5))
    assert y.shape == (1, 1, 2)  # odd row/col truncated


def test_forward_shape_mismatch():
    p = nn.init_params(TINY, 0)
    with pytest.raises(ValueError):
        nn.forward(TINY, p, np.zeros((1, 5, 5)))


def test_dense_grad_closed_form():
    spec = nn.NetSpec((1, 1, 4), (nn.Flatten(), nn.Dense(1)))
    p = nn.init_params(spec, 3)
    x = np.array([[[0.5, -1.0, 2.0, 0.25]]])
    y, tape = nn.forward(spec, p, x)
    grads, dx = nn.backward(spec, p, tape, np.ones_like(y))
    assert np.array_equal(grads[1]["w"], x.reshape(1, 4))
    assert np.array_equal(grads[1]["b"], np.array([1.0]))
    assert np.array_equal(dx, p.layers[1]["w"].reshape(1, 1, 4))


def test_relu_blocks_gradient_at_negative_preactivation():
    spec = nn.NetSpec((1, 1, 2), (nn.Flatten(), nn.Dense(1), nn.Relu()))
    p = nn.init_params(spec, 1)
    p.layers[1]["w"][:] = 1.0
    x = np.array([[[-2.0, -3.0]]])  # pre-activation -5 < 0
    y, tape = nn.forward(spec, p, x)
    assert y[0] == 0.0
    grads, dx = nn.backward(spec, p, tape, np.ones_like(y))
    assert np.all(grads[1]["w"] == 0.0)
    assert np.all(dx == 0.0)


def test_maxpool_gradient_goes_to_first_argmax_on_tie():
    spec = nn.NetSpec((1, 2, 2), (nn.MaxPool2x2(),))
    p = nn.init_params(spec, 0)
    x = np.array([[[7.0, 7.0], [7.0, 7.0]]])
    y, tape = nn.forward(spec, p, x)
    _, dx = nn.backward(spec, p, tape, np.ones_like(y))
    assert np.array_equal(dx, np.array([[[1.0, 0.0], [0.0, 0.0]]]))


def test_dense_is_linear_without_bias():
    spec = nn.NetSpec((1, 1, 6), (nn.Flatten(), nn.Dense(3)))
    p = nn.init_params(spec, 8)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal((2, 1, 1, 6))
    a, b = 1.7, -0.3
    lhs, _ = nn.forward(spec, p, a * x + b * y)
    fx, _ = nn.forward(spec, p, x)
    fy, _ = nn.forward(spec, p, y)
    assert np.allclose(lhs, a * fx + b * fy, atol=1e-12)


LAYERWISE_SPECS = [
    nn.NetSpec((2, 5, 4), (nn.Conv2d(3, 2, 2),)),
    nn.NetSpec((1, 4, 3), (nn.Relu(),)),
    nn.NetSpec((1, 5, 4), (nn.MaxPool2x2(),)),
    nn.NetSpec((2, 3, 3), (nn.Flatten(), nn.Dense(2))),
    nn.NetSpec((1, 6, 5), (nn.Conv2d(2, 3, 3), nn.Relu(), nn.MaxPool2x2(),
                           nn.Flatten(), nn.Dense(4), nn.Relu(), nn.Dense(1))),
]


@pytest.mark.parametrize("spec", LAYERWISE_SPECS, ids=lambda s: "-".join(
    type(l).__name__ for l in s.layers))
def test_gradients_match_finite_differences(spec):
    rng = np.random.default_rng(hash(spec.layers) % (2**32))
    params, x = draw_checkable_case(spec, rng)
    assert max_gradient_error(spec, params, x, rng) < 1e-4


def test_backward_rejects_mismatched_tape():
    p = nn.init_params(TINY, 0)
    _, tape = nn.forward(TINY, p, np.zeros((1, 6, 5)))
    other = nn.NetSpec((1, 6, 5), (nn.Conv2d(2, 3, 3), nn.Relu(), nn.Flatten(),
                                   nn.Dense(2), nn.Dense(1)))
    with pytest.raises(ValueError):
        nn.backward(other, nn.init_params(other, 0), tape, np.zeros(1))


def test_adam_zero_gradient_keeps_params():
    p = nn.init_params(TINY, 11)
    before = [t.copy() for _, t in p.tensors()]
    state = nn.init_adam(p)
    zero = [None if e is None else {k: np.zeros_like(a) for k, a in e.items()}
            for e in p.layers]
    for _ in range(3):
        nn.adam_step(p, zero, state, lr=0.1)
    for (_, after), orig in zip(p.tensors(), before):
        assert np.array_equal(after, orig)


def test_adam_first_step_is_signed_lr():
    p = nn.init_params(TINY, 11)
    before = [t.copy() for _, t in p.tensors()]
    state = nn.init_adam(p)
    rng = np.random.default_rng(4)
    grads = [None if e is None else {k: rng.standard_normal(a.shape) for k, a in e.items()}
             for e in p.layers]
    nn.adam_step(p, grads, state, lr=1e-3)
    i = 0
    for layer_i, e in enumerate(p.layers):
        if e is None:
            continue
        for k in ("w", "b"):
            step = e[k] - before[i if k == "w" else i + 1]
            expect = -1e-3 * np.sign(grads[layer_i][k])
            assert np.allclose(step, expect, atol=1e-6)
        i += 2


def test_adam_trajectories_bit_identical():
    def run():
        p = nn.init_params(TINY, 21)
        state = nn.init_adam(p)
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, size=(4, 1, 6, 5))
        for step in range(5):
            y, tape = nn.forward(TINY, p, x)
            grads, _ = nn.backward(TINY, p, tape, np.ones_like(y))
            nn.adam_step(p, grads, state, lr=1e-2)
        return [t.copy() for _, t in p.tensors()]

    for a, b in zip(run(), run()):
        assert np.array_equal(a, b)


def test_adam_shape_mismatch_rejected():
    p = nn.init_params(TINY, 0)
    state = nn.init_adam(p)
    bad = [None if e is None else {k: np.zeros(3) for k in e} for e in p.layers]
    with pytest.raises(ValueError):
        nn.adam_step(p, bad, state, lr=0.1)
