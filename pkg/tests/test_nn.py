"""Dense-network math: forward/backward, Huber, clipping, Adam, checkpoints."""

import struct
import zlib

import numpy as np
import pytest

import checks
from courtforge.nn import (
    ACT_IDENTITY,
    ACT_RELU,
    AdamState,
    CheckpointError,
    LayerSpec,
    ParameterSet,
    adam_step,
    backward,
    clip_gradients,
    deserialize_params,
    flatten_grads,
    forward,
    global_grad_norm,
    huber_loss,
    init_params,
    serialize_params,
)

SMALL_SPECS = (LayerSpec(4, 8, ACT_RELU), LayerSpec(8, 3, ACT_IDENTITY))


def small_params(seed=9, dtype=np.float64):
    return init_params(SMALL_SPECS, np.random.default_rng(seed), dtype=dtype)


# ---------------------------------------------------------------------------
# specs and initialization
# ---------------------------------------------------------------------------


def test_layer_spec_validation():
    LayerSpec(3, 5)
    with pytest.raises(ValueError):
        LayerSpec(0, 5)
    with pytest.raises(ValueError):
        LayerSpec(3, 0)
    with pytest.raises(ValueError):
        LayerSpec(3, 5, "tanh")


def test_init_bounds_determinism_and_dtype():
    specs = (LayerSpec(16, 32), LayerSpec(32, 4, ACT_IDENTITY))
    params = init_params(specs, np.random.default_rng(5))
    for (weights, bias), spec in zip(params.layers, specs):
        bound = 1.0 / np.sqrt(spec.in_dim)
        assert weights.shape == (spec.out_dim, spec.in_dim)
        assert bias.shape == (spec.out_dim,)
        assert np.all(np.abs(weights) <= bound)
        assert np.all(np.abs(bias) <= bound)

    again = init_params(specs, np.random.default_rng(5))
    for (w1, b1), (w2, b2) in zip(params.layers, again.layers):
        assert np.array_equal(w1, w2) and np.array_equal(b1, b2)

    f32 = init_params(specs, np.random.default_rng(5), dtype=np.float32)
    assert f32.dtype == np.float32
    assert all(a.dtype == np.float32 for a in f32.arrays())


# ---------------------------------------------------------------------------
# forward pass
# ---------------------------------------------------------------------------


def test_forward_matches_hand_computation():
    specs = (LayerSpec(2, 3, ACT_RELU), LayerSpec(3, 2, ACT_IDENTITY))
    w0 = np.array([[1.0, -1.0], [0.5, 2.0], [-3.0, 0.25]])
    b0 = np.array([0.1, -0.2, 0.3])
    w1 = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 0.0]])
    b1 = np.array([0.0, 1.0])
    params = ParameterSet(specs, [(w0, b0), (w1, b1)])

    x = [2.0, 1.0]
    hidden = []
    for row, bias in zip(w0, b0):  # element-wise reference computation
        z = row[0] * x[0] + row[1] * x[1] + bias
        hidden.append(max(z, 0.0))
    expected = []
    for row, bias in zip(w1, b1):
        expected.append(sum(r * h for r, h in zip(row, hidden)) + bias)

    out, tape = forward(params, np.array(x))
    assert out.shape == (2,)
    assert np.allclose(out, expected, atol=1e-12)
    assert hidden == [1.1, 2.8, 0.0]  # the third unit is clipped by the ReLU
    assert tape.single and len(tape.inputs) == 2 and len(tape.preacts) == 2


def test_forward_batch_matches_single_rows():
    params = small_params()
    x = np.random.default_rng(21).normal(size=(5, 4))
    batch_out, _ = forward(params, x)
    assert batch_out.shape == (5, 3)
    for i in range(5):
        row_out, _ = forward(params, x[i])
        assert np.allclose(batch_out[i], row_out, atol=1e-12)


def test_forward_without_tape():
    params = small_params()
    out, tape = forward(params, np.ones(4), want_tape=False)
    assert tape is None
    assert out.shape == (3,)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def test_parameter_gradients_match_finite_differences():
    checks.check_gradient_finite_difference(n_coords=16, seed=7)


def test_input_gradient_matches_finite_differences():
    params = small_params(seed=13)
    rng = np.random.default_rng(40)
    x = rng.normal(size=(3, 4))
    weights = rng.normal(size=(3, 3))

    def loss_at(inp):
        out, _ = forward(params, inp, want_tape=False)
        return float((out * weights).sum())

    out, tape = forward(params, x)
    _, input_grad = backward(params, tape, weights)
    assert input_grad.shape == x.shape

    h = 1e-6
    for i in range(3):
        for j in range(4):
            bumped = x.copy()
            bumped[i, j] += h
            up = loss_at(bumped)
            bumped[i, j] -= 2 * h
            down = loss_at(bumped)
            numeric = (up - down) / (2 * h)
            scale = max(1e-8, abs(numeric) + abs(input_grad[i, j]))
            assert abs(numeric - input_grad[i, j]) / scale < 1e-6


def test_backward_single_vector_shapes():
    params = small_params()
    out, tape = forward(params, np.ones(4))
    grads, input_grad = backward(params, tape, np.ones(3))
    assert input_grad.shape == (4,)
    flat = flatten_grads(grads)
    for grad, param in zip(flat, params.arrays()):
        assert grad.shape == param.shape


# ---------------------------------------------------------------------------
# loss, norms, optimizer
# ---------------------------------------------------------------------------


def test_huber_frozen_values_and_gradient():
    loss, grad = huber_loss(np.array([1.5, 3.0]), np.array([1.0, 1.0]))
    # Quadratic branch at error 0.5 gives 0.125; linear branch at 2.0 gives 1.5.
    assert abs(loss - (0.125 + 1.5) / 2) <= 1e-15
    assert np.allclose(grad, [0.25, 0.5], atol=1e-15)

    loss, grad = huber_loss(np.array([0.0]), np.array([1.0]))
    assert abs(loss - 0.5) <= 1e-15  # |error| = 1 sits on the quadratic side
    assert abs(grad[0] + 1.0) <= 1e-15

    below, _ = huber_loss(np.array([1.0 - 1e-9]), np.array([0.0]))
    above, _ = huber_loss(np.array([1.0 + 1e-9]), np.array([0.0]))
    assert abs(above - below) < 1e-8  # continuous across the branch point


def test_huber_custom_delta():
    loss, grad = huber_loss(np.array([4.0]), np.array([0.0]), delta=2.0)
    assert abs(loss - 2.0 * (4.0 - 1.0)) <= 1e-15
    assert abs(grad[0] - 2.0) <= 1e-15


def test_global_norm_and_clipping():
    arrays = [np.array([3.0]), np.array([4.0])]
    assert abs(global_grad_norm(arrays) - 5.0) <= 1e-15

    clipped = clip_gradients(arrays, max_norm=1.0)
    assert clipped is arrays  # the same list, scaled in place
    assert abs(arrays[0][0] - 0.6) <= 1e-12
    assert abs(arrays[1][0] - 0.8) <= 1e-12

    small = [np.array([0.3]), np.array([0.4])]
    clip_gradients(small, max_norm=1.0)
    assert small[0][0] == 0.3 and small[1][0] == 0.4


def test_adam_first_step_frozen_value():
    param = np.array([1.0])
    state = AdamState.for_arrays([param])
    returned, _ = adam_step([param], [np.array([2.0])], state, lr=0.0005)
    assert returned[0] is param  # update happens in place
    assert abs((1.0 - param[0]) - 0.0004999999975) <= 1e-15
    assert state.t == 1


def test_adam_matches_scalar_recurrence():
    checks.check_adam_against_scalar_recurrence()


# ---------------------------------------------------------------------------
# checkpoint serialization
# ---------------------------------------------------------------------------


def test_serialize_roundtrip_with_adam():
    params = small_params(seed=31)
    grads = [np.full_like(a, 0.01) for a in params.arrays()]
    state = AdamState.for_arrays(params.arrays())
    for _ in range(3):
        adam_step(params.arrays(), grads, state)

    blob = serialize_params(params, state)
    restored, restored_state = deserialize_params(blob, expected_specs=SMALL_SPECS)
    assert restored.specs == params.specs
    for original, copy in zip(params.arrays(), restored.arrays()):
        assert np.array_equal(original, copy)
    assert restored_state.t == 3
    for original, copy in zip(state.m + state.v, restored_state.m + restored_state.v):
        assert np.array_equal(original, copy)


def test_serialize_roundtrip_without_adam():
    params = small_params(seed=32)
    restored, state = deserialize_params(serialize_params(params))
    assert state is None
    for original, copy in zip(params.arrays(), restored.arrays()):
        assert np.array_equal(original, copy)


def test_serialize_float32_exact_through_float64_payload():
    params = small_params(seed=33, dtype=np.float32)
    blob = serialize_params(params)
    restored, _ = deserialize_params(blob, dtype=np.float32)
    assert restored.dtype == np.float32
    for original, copy in zip(params.arrays(), restored.arrays()):
        assert np.array_equal(original, copy)


def _recrc(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body))


def test_deserialize_error_paths():
    params = small_params(seed=34)
    blob = serialize_params(params)

    with pytest.raises(CheckpointError, match="truncated"):
        deserialize_params(blob[:8])
    with pytest.raises(CheckpointError, match="checksum"):
        corrupted = bytearray(blob)
        corrupted[20] ^= 0xFF
        deserialize_params(bytes(corrupted))
    with pytest.raises(CheckpointError, match="magic"):
        deserialize_params(_recrc(b"XXNET001" + blob[8:-4]))
    with pytest.raises(CheckpointError, match="version"):
        deserialize_params(_recrc(blob[:8] + struct.pack("<I", 99) + blob[12:-4]))
    with pytest.raises(CheckpointError, match="layer table"):
        deserialize_params(blob, expected_specs=(LayerSpec(4, 9), LayerSpec(9, 3)))
    with pytest.raises(CheckpointError, match="trailing"):
        deserialize_params(_recrc(blob[:-4] + b"\x00\x00"))
    with pytest.raises(CheckpointError, match="truncated"):
        deserialize_params(_recrc(blob[:-40]))


# ---------------------------------------------------------------------------
# parameter-set utilities
# ---------------------------------------------------------------------------


def test_parameter_set_arrays_and_counts():
    params = small_params()
    flat = params.arrays()
    assert len(flat) == 4
    assert flat[0] is params.layers[0][0] and flat[1] is params.layers[0][1]
    assert flat[2] is params.layers[1][0] and flat[3] is params.layers[1][1]
    assert params.n_params() == 4 * 8 + 8 + 8 * 3 + 3


def test_parameter_set_clone_is_independent():
    params = small_params()
    copy = params.clone()
    copy.layers[0][0][0, 0] += 100.0
    assert params.layers[0][0][0, 0] != copy.layers[0][0][0, 0]


def test_parameter_set_copy_from():
    src = small_params(seed=1)
    dst = small_params(seed=2)
    dst.copy_from(src)
    for a, b in zip(src.arrays(), dst.arrays()):
        assert np.array_equal(a, b)
        assert a is not b
    other = init_params((LayerSpec(4, 8), LayerSpec(8, 4, ACT_IDENTITY)), np.random.default_rng(3))
    with pytest.raises(ValueError):
        dst.copy_from(other)


def test_parameter_set_subset_shares_memory():
    params = small_params()
    head = params.subset(1, 2)
    assert head.specs == (SMALL_SPECS[1],)
    head.layers[0][1][0] = 42.0
    assert params.layers[1][1][0] == 42.0


def test_parameter_set_mismatched_lengths_raise():
    with pytest.raises(ValueError):
        ParameterSet(SMALL_SPECS, [(np.zeros((8, 4)), np.zeros(8))])
