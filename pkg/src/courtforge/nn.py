"""Dense network core: manual forward/backward, Huber loss, Adam, checkpoints.

Networks are chains of fully connected layers (weights shaped
``(out_dim, in_dim)``) with ReLU or identity activations. The forward
pass records a tape of layer inputs and pre-activations; the backward
pass replays it in reverse to produce exact gradients. No autograd
framework is involved.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

ACT_RELU = "relu"
ACT_IDENTITY = "identity"

_ACT_CODES = {ACT_RELU: 0, ACT_IDENTITY: 1}
_ACT_NAMES = {code: name for name, code in _ACT_CODES.items()}

CHECKPOINT_MAGIC = b"CFNET001"
CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    """A checkpoint file is malformed, corrupt, or mismatched."""


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = ACT_RELU

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be positive, got {self.in_dim}x{self.out_dim}")
        if self.activation not in _ACT_CODES:
            raise ValueError(f"unknown activation {self.activation!r}")


class ParameterSet:
    """Ordered (weights, bias) pairs for a chain of layers."""

    def __init__(self, specs, layers):
        self.specs = tuple(specs)
        self.layers = list(layers)
        if len(self.specs) != len(self.layers):
            raise ValueError("spec/layer count mismatch")

    @property
    def dtype(self):
        return self.layers[0][0].dtype

    def arrays(self) -> list:
        """Flat parameter list: W0, b0, W1, b1, ..."""
        out = []
        for weights, bias in self.layers:
            out.append(weights)
            out.append(bias)
        return out

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def clone(self) -> "ParameterSet":
        return ParameterSet(self.specs, [(w.copy(), b.copy()) for w, b in self.layers])

    def copy_from(self, other: "ParameterSet") -> None:
        if self.specs != other.specs:
            raise ValueError("cannot copy between mismatched layer specs")
        for (w, b), (ow, ob) in zip(self.layers, other.layers):
            np.copyto(w, ow)
            np.copyto(b, ob)

    def subset(self, start: int, stop: int) -> "ParameterSet":
        """Chain view over layers [start, stop); arrays are shared, not copied."""
        return ParameterSet(self.specs[start:stop], self.layers[start:stop])

    def astype(self, dtype) -> "ParameterSet":
        return ParameterSet(
            self.specs, [(w.astype(dtype), b.astype(dtype)) for w, b in self.layers]
        )


def init_params(specs, rng: np.random.Generator, dtype=np.float64) -> ParameterSet:
    """Fan-in scaled uniform init: weights and biases in [-1/sqrt(in_dim), 1/sqrt(in_dim)]."""
    layers = []
    for spec in specs:
        bound = 1.0 / np.sqrt(spec.in_dim)
        weights = rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)).astype(dtype)
        bias = rng.uniform(-bound, bound, size=spec.out_dim).astype(dtype)
        layers.append((weights, bias))
    return ParameterSet(specs, layers)


@dataclass
class Tape:
    inputs: list
    preacts: list
    single: bool


def forward(params: ParameterSet, x, want_tape: bool = True):
    """Run the chain; returns (output, tape). Accepts one vector or a batch."""
    x = np.asarray(x, dtype=params.dtype)
    single = x.ndim == 1
    h = x.reshape(1, -1) if single else x
    inputs = []
    preacts = []
    for (weights, bias), spec in zip(params.layers, params.specs):
        if want_tape:
            inputs.append(h)
        z = h @ weights.T + bias
        if want_tape:
            preacts.append(z)
        h = np.maximum(z, 0.0) if spec.activation == ACT_RELU else z
    out = h[0] if single else h
    return out, (Tape(inputs, preacts, single) if want_tape else None)


def backward(params: ParameterSet, tape: Tape, output_grad):
    """Backpropagate a loss gradient through the taped forward pass.

    Returns (per-layer [(dW, db), ...], gradient w.r.t. the chain input).
    """
    g = np.asarray(output_grad, dtype=params.dtype)
    if tape.single:
        g = g.reshape(1, -1)
    grads: list = [None] * len(params.layers)
    for i in range(len(params.layers) - 1, -1, -1):
        weights, _ = params.layers[i]
        dz = g * (tape.preacts[i] > 0) if params.specs[i].activation == ACT_RELU else g
        grads[i] = (dz.T @ tape.inputs[i], dz.sum(axis=0))
        g = dz @ weights
    return grads, (g[0] if tape.single else g)


def flatten_grads(layer_grads) -> list:
    """Per-layer (dW, db) pairs to a flat array list matching ParameterSet.arrays()."""
    out = []
    for d_weights, d_bias in layer_grads:
        out.append(d_weights)
        out.append(d_bias)
    return out


# ---------------------------------------------------------------------------
# loss, clipping, optimizer
# ---------------------------------------------------------------------------


def huber_loss(pred, target, delta: float = 1.0):
    """Mean Huber loss and its gradient w.r.t. pred."""
    pred = np.asarray(pred)
    target = np.asarray(target, dtype=pred.dtype)
    err = pred - target
    abs_err = np.abs(err)
    quad = abs_err <= delta
    elem = np.where(quad, 0.5 * err * err, delta * (abs_err - 0.5 * delta))
    grad = np.where(quad, err, delta * np.sign(err)) / err.size
    return float(elem.mean()), grad


def global_grad_norm(arrays) -> float:
    return float(np.sqrt(sum(float((a * a).sum()) for a in arrays)))


def clip_gradients(arrays, max_norm: float = 1.0):
    """Scale the whole gradient list (in place) so its global norm is at most max_norm."""
    norm = global_grad_norm(arrays)
    if norm > max_norm:
        scale = max_norm / norm
        for a in arrays:
            a *= scale
    return arrays


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @staticmethod
    def for_arrays(arrays) -> "AdamState":
        return AdamState(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
        )


def adam_step(
    arrays,
    grads,
    state: AdamState,
    lr: float = 0.0005,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update, applied to the arrays in place."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for param, grad, m, v in zip(arrays, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * (grad * grad)
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return arrays, state


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------


def _spec_table(params: ParameterSet) -> bytes:
    parts = [struct.pack("<I", len(params.specs))]
    for spec in params.specs:
        parts.append(struct.pack("<IIB", spec.in_dim, spec.out_dim, _ACT_CODES[spec.activation]))
    return b"".join(parts)


def _array_bytes(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def serialize_params(params: ParameterSet, adam: AdamState | None = None) -> bytes:
    """Pack a chain (and optionally its Adam state) into the checkpoint byte format.

    Layout: magic, format version, layer-spec table, float64 little-endian
    parameter payload, optional optimizer payload, CRC32 of everything
    before it.
    """
    parts = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), _spec_table(params)]
    parts.append(struct.pack("<BQ", 1 if adam is not None else 0, adam.t if adam else 0))
    for arr in params.arrays():
        parts.append(_array_bytes(arr))
    if adam is not None:
        for arr in adam.m:
            parts.append(_array_bytes(arr))
        for arr in adam.v:
            parts.append(_array_bytes(arr))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError("checkpoint truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize_params(blob: bytes, expected_specs=None, dtype=np.float64):
    """Unpack a checkpoint; returns (ParameterSet, AdamState or None).

    Validates magic, version, activation codes, payload length, and the
    trailing checksum; if expected_specs is given the stored layer table
    must match it exactly.
    """
    if len(blob) < len(CHECKPOINT_MAGIC) + 8:
        raise CheckpointError("checkpoint truncated")
    body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != stored_crc:
        raise CheckpointError("checkpoint checksum mismatch")
    reader = _Reader(body)
    if reader.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointError("not a network checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (n_layers,) = reader.unpack("<I")
    specs = []
    for _ in range(n_layers):
        in_dim, out_dim, act_code = reader.unpack("<IIB")
        if act_code not in _ACT_NAMES:
            raise CheckpointError(f"unknown activation code {act_code}")
        specs.append(LayerSpec(in_dim, out_dim, _ACT_NAMES[act_code]))
    specs = tuple(specs)
    if expected_specs is not None and specs != tuple(expected_specs):
        raise CheckpointError(
            f"layer table mismatch: stored {[(s.in_dim, s.out_dim) for s in specs]}, "
            f"expected {[(s.in_dim, s.out_dim) for s in expected_specs]}"
        )
    has_adam, adam_t = reader.unpack("<BQ")

    def read_array(shape):
        count = int(np.prod(shape))
        raw = reader.take(count * 8)
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(dtype)

    layers = []
    for spec in specs:
        weights = read_array((spec.out_dim, spec.in_dim))
        bias = read_array((spec.out_dim,))
        layers.append((weights, bias))
    params = ParameterSet(specs, layers)
    adam = None
    if has_adam:
        shapes = [a.shape for a in params.arrays()]
        m = [read_array(s) for s in shapes]
        v = [read_array(s) for s in shapes]
        adam = AdamState(m=m, v=v, t=adam_t)
    if reader.pos != len(body):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return params, adam
