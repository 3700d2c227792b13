"""Scalar value network: 17 -> 128 -> 64 -> 32 -> 8 -> 1, tanh hidden layers.

Plain-numpy forward and manual backprop (SGD on mean squared error, optional
momentum, off by default). Includes the replay buffer and a versioned binary
checkpoint format; checkpoint round-trips are bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

LAYER_DIMS = (17, 128, 64, 32, 8, 1)
REPLAY_CAPACITY = 65536

_MAGIC = b"CVRPTW-VNET-1\n"


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 4096
    train_every: int = 10
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.9995
    gamma: float = 0.9
    momentum: float = 0.0
    temperature: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        for name in ("learning_rate", "batch_size", "train_every", "epsilon_start", "temperature"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def epsilon(self, episode: int) -> float:
        return self.epsilon_start * self.epsilon_decay ** episode


class NetworkParams:
    """Weight matrices W[i] of shape (fan_in, fan_out) and bias vectors b[i]."""

    def __init__(self, weights: List[np.ndarray], biases: List[np.ndarray]):
        dims = tuple([weights[0].shape[0]] + [w.shape[1] for w in weights])
        if dims != LAYER_DIMS:
            raise ValueError(f"bad layer dims {dims}, expected {LAYER_DIMS}")
        for w, b in zip(weights, biases):
            if b.shape != (w.shape[1],):
                raise ValueError("bias shape mismatch")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError("non-finite parameter")
        self.weights = weights
        self.biases = biases
        self._velocity = None  # momentum buffers, lazily allocated

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])


def init(seed: int) -> NetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    rng = np.random.Generator(np.random.PCG64(seed))
    weights, biases = [], []
    for fan_in, fan_out in zip(LAYER_DIMS, LAYER_DIMS[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def forward(params: NetworkParams, x: np.ndarray) -> float:
    """Value of a single 17-entry input."""
    if x.shape != (LAYER_DIMS[0],) or not np.isfinite(x).all():
        raise ValueError("input must be 17 finite entries")
    return float(forward_batch(params, x[None, :])[0])


def forward_batch(params: NetworkParams, X: np.ndarray) -> np.ndarray:
    """Values for a (n, 17) batch."""
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
    return h[:, 0]


def _forward_cache(params: NetworkParams, X: np.ndarray):
    activations = [X]
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
        activations.append(h)
    return activations


def gradients(params: NetworkParams, X: np.ndarray, y: np.ndarray
              ) -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """MSE loss and its gradients w.r.t. every weight and bias."""
    n = X.shape[0]
    acts = _forward_cache(params, X)
    pred = acts[-1][:, 0]
    err = pred - y
    loss = float(np.mean(err * err))

    grad_w: List[np.ndarray] = [None] * len(params.weights)
    grad_b: List[np.ndarray] = [None] * len(params.biases)
    delta = (2.0 / n) * err[:, None]  # d loss / d output
    for i in range(len(params.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - acts[i] * acts[i])
    return loss, grad_w, grad_b


def train_batch(params: NetworkParams, X: np.ndarray, y: np.ndarray,
                config: TrainConfig) -> float:
    """One SGD step on the batch; returns the pre-step loss."""
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    loss, grad_w, grad_b = gradients(params, X, y)
    if not np.isfinite(loss):
        raise FloatingPointError(f"training diverged: loss={loss}")
    lr, mom = config.learning_rate, config.momentum
    if mom > 0.0:
        if params._velocity is None:
            params._velocity = ([np.zeros_like(w) for w in params.weights],
                                [np.zeros_like(b) for b in params.biases])
        vel_w, vel_b = params._velocity
        for i in range(len(params.weights)):
            vel_w[i] = mom * vel_w[i] - lr * grad_w[i]
            vel_b[i] = mom * vel_b[i] - lr * grad_b[i]
            params.weights[i] += vel_w[i]
            params.biases[i] += vel_b[i]
    else:
        for i in range(len(params.weights)):
            params.weights[i] -= lr * grad_w[i]
            params.biases[i] -= lr * grad_b[i]
    return loss


# ---------------------------------------------------------------------------
# Replay buffer
# ---------------------------------------------------------------------------

class ReplayBuffer:
    """FIFO ring buffer of (feature vector, target) pairs."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        self.capacity = capacity
        self.X = np.zeros((capacity, LAYER_DIMS[0]))
        self.y = np.zeros(capacity)
        self.cursor = 0
        self.count = 0

    def push(self, x: np.ndarray, target: float) -> None:
        self.X[self.cursor] = x
        self.y[self.cursor] = target
        self.cursor = (self.cursor + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Uniform sample: with replacement while count < k, without otherwise."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.count == 0:
            raise ValueError("cannot sample from an empty buffer")
        replace = self.count < k
        idx = rng.choice(self.count, size=k, replace=replace)
        return self.X[idx], self.y[idx]


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save(params: NetworkParams, path: str) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", len(LAYER_DIMS)))
        f.write(struct.pack(f"<{len(LAYER_DIMS)}I", *LAYER_DIMS))
        for w, b in zip(params.weights, params.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


class CheckpointError(ValueError):
    pass


def load(path: str) -> NetworkParams:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(_MAGIC):
        raise CheckpointError(f"{path}: bad magic")
    off = len(_MAGIC)
    (ndims,) = struct.unpack_from("<I", data, off)
    off += 4
    if ndims != len(LAYER_DIMS):
        raise CheckpointError(f"{path}: expected {len(LAYER_DIMS)} dims, found {ndims}")
    dims = struct.unpack_from(f"<{ndims}I", data, off)
    off += 4 * ndims
    if dims != LAYER_DIMS:
        raise CheckpointError(f"{path}: layer dims {dims} do not match {LAYER_DIMS}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims, dims[1:]):
        nb = 8 * fan_in * fan_out
        if off + nb + 8 * fan_out > len(data):
            raise CheckpointError(f"{path}: truncated checkpoint")
        weights.append(np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=off)
                       .reshape(fan_in, fan_out).copy())
        off += nb
        biases.append(np.frombuffer(data, dtype="<f8", count=fan_out, offset=off).copy())
        off += 8 * fan_out
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return NetworkParams(weights, biases)
