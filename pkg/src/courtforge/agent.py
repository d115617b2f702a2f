"""Dueling double DQN agent: networks, replay buffer, targets, learning.

The dueling network shares a two-layer trunk and splits into a scalar
state-value head and a per-action advantage head, combined as
``Q = V + A - mean(A)``. Action selection is epsilon-greedy restricted
to the actions valid in the current match phase. Targets decouple
selection (online network argmax) from evaluation (target network).
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict, dataclass

import numpy as np

from .match import STATE_DIM, ValidationError, valid_actions_from_vec
from .nn import (
    ACT_IDENTITY,
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
    huber_loss,
    init_params,
    serialize_params,
)

N_ACTIONS = 10

VARIANT_DUELING = "dueling_ddqn"
VARIANT_VANILLA = "vanilla_dqn"

TRUNK_SPECS = (LayerSpec(STATE_DIM, 128), LayerSpec(128, 128))
VALUE_SPECS = (LayerSpec(128, 64), LayerSpec(64, 1, ACT_IDENTITY))
ADVANTAGE_SPECS = (LayerSpec(128, 64), LayerSpec(64, N_ACTIONS, ACT_IDENTITY))
VANILLA_SPECS = (
    LayerSpec(STATE_DIM, 128),
    LayerSpec(128, 128),
    LayerSpec(128, N_ACTIONS, ACT_IDENTITY),
)

AGENT_MAGIC = b"CFAGT001"
AGENT_VERSION = 1


@dataclass
class AgentConfig:
    variant: str = VARIANT_DUELING
    gamma: float = 0.99
    learning_rate: float = 0.0005
    batch_size: int = 128
    buffer_capacity: int = 20000
    target_update_episodes: int = 5
    grad_clip_norm: float = 1.0
    mask_targets: bool = False
    dtype: str = "float32"

    def check(self) -> None:
        if self.variant not in (VARIANT_DUELING, VARIANT_VANILLA):
            raise ValidationError(f"unknown agent variant {self.variant!r}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValidationError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.learning_rate <= 0.0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}")
        if self.buffer_capacity < self.batch_size:
            raise ValidationError(
                f"buffer_capacity {self.buffer_capacity} smaller than batch_size {self.batch_size}"
            )
        if self.target_update_episodes < 1:
            raise ValidationError("target_update_episodes must be positive")
        if self.grad_clip_norm <= 0.0:
            raise ValidationError("grad_clip_norm must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValidationError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


# ---------------------------------------------------------------------------
# networks
# ---------------------------------------------------------------------------


class DuelingQNetwork:
    """Shared trunk with value and advantage heads."""

    specs = TRUNK_SPECS + VALUE_SPECS + ADVANTAGE_SPECS

    def __init__(self, params: ParameterSet):
        if tuple(params.specs) != self.specs:
            raise ValidationError("parameter layer table does not match the dueling topology")
        self.params = params
        self._trunk = params.subset(0, 2)
        self._value = params.subset(2, 4)
        self._advantage = params.subset(4, 6)

    @classmethod
    def create(cls, rng: np.random.Generator, dtype=np.float32) -> "DuelingQNetwork":
        return cls(init_params(cls.specs, rng, dtype=dtype))

    def q_values(self, x) -> np.ndarray:
        q, _ = self.forward_tape(x, want_tape=False)
        return q

    def forward_tape(self, x, want_tape: bool = True):
        hidden, trunk_tape = forward(self._trunk, x, want_tape)
        value, value_tape = forward(self._value, hidden, want_tape)
        adv, adv_tape = forward(self._advantage, hidden, want_tape)
        q = value + adv - adv.mean(axis=-1, keepdims=True)
        if q.ndim == 1 and np.asarray(x).ndim == 1:
            q = q.reshape(-1)
        return q, (trunk_tape, value_tape, adv_tape)

    def backward_from_q_grad(self, tapes, dq) -> list:
        """Gradients for a loss given d(loss)/dQ, flattened in parameter order."""
        trunk_tape, value_tape, adv_tape = tapes
        dq = np.atleast_2d(np.asarray(dq, dtype=self.params.dtype))
        d_adv = dq - dq.mean(axis=-1, keepdims=True)
        d_value = dq.sum(axis=-1, keepdims=True)
        value_grads, d_hidden_v = backward(self._value, value_tape, d_value)
        adv_grads, d_hidden_a = backward(self._advantage, adv_tape, d_adv)
        trunk_grads, _ = backward(self._trunk, trunk_tape, d_hidden_v + d_hidden_a)
        return flatten_grads(trunk_grads + value_grads + adv_grads)


class VanillaQNetwork:
    """Plain feedforward Q head, no value/advantage split."""

    specs = VANILLA_SPECS

    def __init__(self, params: ParameterSet):
        if tuple(params.specs) != self.specs:
            raise ValidationError("parameter layer table does not match the vanilla topology")
        self.params = params

    @classmethod
    def create(cls, rng: np.random.Generator, dtype=np.float32) -> "VanillaQNetwork":
        return cls(init_params(cls.specs, rng, dtype=dtype))

    def q_values(self, x) -> np.ndarray:
        q, _ = forward(self.params, x, want_tape=False)
        return q

    def forward_tape(self, x, want_tape: bool = True):
        return forward(self.params, x, want_tape)

    def backward_from_q_grad(self, tape, dq) -> list:
        grads, _ = backward(self.params, tape, dq)
        return flatten_grads(grads)


def build_network(variant: str, rng: np.random.Generator, dtype=np.float32):
    if variant == VARIANT_DUELING:
        return DuelingQNetwork.create(rng, dtype)
    if variant == VARIANT_VANILLA:
        return VanillaQNetwork.create(rng, dtype)
    raise ValidationError(f"unknown agent variant {variant!r}")


# ---------------------------------------------------------------------------
# replay buffer
# ---------------------------------------------------------------------------


class ReplayBuffer:
    """Fixed-capacity ring buffer; full buffer overwrites the oldest transition."""

    def __init__(self, capacity: int, state_dim: int = STATE_DIM, dtype=np.float32):
        if capacity < 1:
            raise ValidationError("buffer capacity must be positive")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim), dtype=dtype)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity, dtype=dtype)
        self.next_states = np.zeros((capacity, state_dim), dtype=dtype)
        self.dones = np.zeros(capacity, dtype=bool)
        self.head = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action, reward, next_state, done) -> None:
        i = self.head
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = done
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Uniform sample of distinct indices; requires size >= batch_size."""
        if self.size < batch_size:
            raise ValidationError(f"buffer holds {self.size} < batch {batch_size}")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return (
            self.states[idx],
            self.actions[idx],
            self.rewards[idx],
            self.next_states[idx],
            self.dones[idx],
        )



# ---------------------------------------------------------------------------
# action selection and targets
# ---------------------------------------------------------------------------


def select_action(q_values, valid, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the valid set only; greedy ties go to the lowest id."""
    ids = sorted(valid)
    if not ids:
        raise ValidationError("empty valid action set")
    if epsilon > 0.0 and rng.random() < epsilon:
        return ids[int(rng.integers(len(ids)))]
    best = ids[0]
    best_q = q_values[best]
    for aid in ids[1:]:
        if q_values[aid] > best_q:
            best = aid
            best_q = q_values[aid]
    return best


def _valid_mask(next_states) -> np.ndarray:
    mask = np.zeros((len(next_states), N_ACTIONS), dtype=bool)
    for row, vec in enumerate(next_states):
        for aid in valid_actions_from_vec(vec):
            mask[row, aid] = True
    return mask


def compute_targets(batch, online_net, target_net, gamma: float, mask_targets: bool = False):
    """Double-Q targets: online network picks the next action, target evaluates it."""
    _, _, rewards, next_states, dones = batch
    q_online = online_net.q_values(next_states)
    if mask_targets:
        q_online = np.where(_valid_mask(next_states), q_online, -np.inf)
    best_next = np.argmax(q_online, axis=1)
    q_target = target_net.q_values(next_states)
    bootstrap = q_target[np.arange(len(best_next)), best_next]
    return rewards + gamma * (1.0 - dones.astype(bootstrap.dtype)) * bootstrap


def vanilla_targets(batch, target_net, gamma: float):
    """Plain max-Q targets evaluated on whichever network is handed in."""
    _, _, rewards, next_states, dones = batch
    bootstrap = target_net.q_values(next_states).max(axis=1)
    return rewards + gamma * (1.0 - dones.astype(bootstrap.dtype)) * bootstrap


# ---------------------------------------------------------------------------
# agent
# ---------------------------------------------------------------------------


class Agent:
    """Q-learning agent with online and target networks and a replay buffer.

    The dueling variant trains with double-Q targets against a target
    network refreshed by the harness every few episodes. The vanilla
    variant is the ablation baseline: no dueling heads, and it bootstraps
    max-Q targets from its own online network.
    """

    def __init__(self, config: AgentConfig, rng: np.random.Generator):
        config.check()
        self.config = config
        dtype = config.np_dtype
        self.online = build_network(config.variant, rng, dtype)
        self.target = build_network(config.variant, rng, dtype)
        self.target.params.copy_from(self.online.params)
        self.adam = AdamState.for_arrays(self.online.params.arrays())
        self.buffer = ReplayBuffer(config.buffer_capacity, dtype=dtype)

    def q_values(self, state_vec) -> np.ndarray:
        return self.online.q_values(state_vec)

    def act(self, state_vec, valid, epsilon: float, rng: np.random.Generator) -> int:
        return select_action(self.online.q_values(state_vec), valid, epsilon, rng)

    def hard_update_target(self) -> None:
        self.target.params.copy_from(self.online.params)

    def learn_step(self, rng: np.random.Generator):
        """One minibatch update; returns the loss, or None before the buffer is warm."""
        if self.buffer.size < self.config.batch_size:
            return None
        batch = self.buffer.sample(self.config.batch_size, rng)
        states, actions = batch[0], batch[1]
        if self.config.variant == VARIANT_DUELING:
            targets = compute_targets(
                batch, self.online, self.target, self.config.gamma, self.config.mask_targets
            )
        else:
            targets = vanilla_targets(batch, self.online, self.config.gamma)
        q_all, tape = self.online.forward_tape(states)
        rows = np.arange(len(actions))
        predicted = q_all[rows, actions]
        loss, d_pred = huber_loss(predicted, targets)
        dq = np.zeros_like(q_all)
        dq[rows, actions] = d_pred
        grads = self.online.backward_from_q_grad(tape, dq)
        clip_gradients(grads, self.config.grad_clip_norm)
        adam_step(
            self.online.params.arrays(), grads, self.adam, lr=self.config.learning_rate
        )
        return loss

    # -- checkpoints --------------------------------------------------------

    def save(self, path, episode: int = 0, extra: dict | None = None,
             include_buffer: bool = True) -> None:
        """Write agent header, both networks, optimizer, and (optionally) the buffer."""
        header = {
            "variant": self.config.variant,
            "episode": episode,
            "config": asdict(self.config),
        }
        if extra:
            header.update(extra)
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        online_blob = serialize_params(self.online.params, self.adam)
        target_blob = serialize_params(self.target.params)
        parts = [
            AGENT_MAGIC,
            struct.pack("<I", AGENT_VERSION),
            struct.pack("<I", len(header_bytes)),
            header_bytes,
            struct.pack("<I", len(online_blob)),
            online_blob,
            struct.pack("<I", len(target_blob)),
            target_blob,
            struct.pack("<B", 1 if include_buffer else 0),
        ]
        if include_buffer:
            parts.append(self._buffer_bytes())
        body = b"".join(parts)
        with open(path, "wb") as fh:
            fh.write(body + struct.pack("<I", zlib.crc32(body)))

    def _buffer_bytes(self) -> bytes:
        # Slots [0:size] are dumped in storage order together with the write
        # head, so a restored buffer samples exactly like the original.
        buf = self.buffer
        n = buf.size
        parts = [struct.pack("<III", buf.capacity, n, buf.head)]
        parts.append(np.ascontiguousarray(buf.states[:n], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(buf.actions[:n], dtype="<i8").tobytes())
        parts.append(np.ascontiguousarray(buf.rewards[:n], dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(buf.next_states[:n], dtype="<f8").tobytes())
        parts.append(np.packbits(buf.dones[:n]).tobytes())
        return b"".join(parts)

    @classmethod
    def load(cls, path, expected_variant: str | None = None):
        """Read a checkpoint; returns (agent, header dict)."""
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < len(AGENT_MAGIC) + 8:
            raise CheckpointError("agent checkpoint truncated")
        body, (stored_crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
        if zlib.crc32(body) != stored_crc:
            raise CheckpointError("agent checkpoint checksum mismatch")
        pos = 0

        def take(n):
            nonlocal pos
            if pos + n > len(body):
                raise CheckpointError("agent checkpoint truncated")
            chunk = body[pos : pos + n]
            pos += n
            return chunk

        if take(len(AGENT_MAGIC)) != AGENT_MAGIC:
            raise CheckpointError("not an agent checkpoint (bad magic)")
        (version,) = struct.unpack("<I", take(4))
        if version != AGENT_VERSION:
            raise CheckpointError(f"unsupported agent checkpoint version {version}")
        (header_len,) = struct.unpack("<I", take(4))
        try:
            header = json.loads(take(header_len).decode("utf-8"))
        except ValueError as exc:
            raise CheckpointError(f"bad agent checkpoint header: {exc}") from exc
        config = AgentConfig(**header["config"])
        if expected_variant is not None and config.variant != expected_variant:
            raise CheckpointError(
                f"checkpoint holds variant {config.variant!r}, expected {expected_variant!r}"
            )
        agent = cls(config, np.random.default_rng(0))
        expected = agent.online.specs
        (online_len,) = struct.unpack("<I", take(4))
        online_params, adam = deserialize_params(
            take(online_len), expected_specs=expected, dtype=config.np_dtype
        )
        (target_len,) = struct.unpack("<I", take(4))
        target_params, _ = deserialize_params(
            take(target_len), expected_specs=expected, dtype=config.np_dtype
        )
        agent.online.params.copy_from(online_params)
        agent.target.params.copy_from(target_params)
        if adam is not None:
            agent.adam = AdamState(
                m=[a.astype(config.np_dtype) for a in adam.m],
                v=[a.astype(config.np_dtype) for a in adam.v],
                t=adam.t,
            )
        (has_buffer,) = struct.unpack("<B", take(1))
        if has_buffer:
            capacity, size, head = struct.unpack("<III", take(12))
            if capacity != config.buffer_capacity:
                raise CheckpointError(
                    f"stored buffer capacity {capacity} != config {config.buffer_capacity}"
                )
            if size > capacity or head >= max(capacity, 1):
                raise CheckpointError("agent checkpoint buffer bookkeeping out of range")
            buf = agent.buffer
            buf.states[:size] = np.frombuffer(take(size * STATE_DIM * 8), dtype="<f8").reshape(
                size, STATE_DIM
            )
            buf.actions[:size] = np.frombuffer(take(size * 8), dtype="<i8")
            buf.rewards[:size] = np.frombuffer(take(size * 8), dtype="<f8")
            buf.next_states[:size] = np.frombuffer(
                take(size * STATE_DIM * 8), dtype="<f8"
            ).reshape(size, STATE_DIM)
            buf.dones[:size] = np.unpackbits(
                np.frombuffer(take((size + 7) // 8), dtype=np.uint8), count=size
            ).astype(bool)
            buf.size = size
            buf.head = head
        if pos != len(body):
            raise CheckpointError("trailing bytes after agent checkpoint payload")
        return agent, header
