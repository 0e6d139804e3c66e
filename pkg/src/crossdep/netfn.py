"""Multilayer perceptron function families with hand-written backprop.

The two trained function families are plain tanh MLPs with a sigmoid (or
identity) output head. Forward, backward, and the Adam update are explicit
so gradients with respect to the network *outputs* can be injected directly
(the training objective differentiates through correlation statistics, not
through a scalar loss head).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "MlpParams",
    "MlpGrads",
    "AdamState",
    "Batch",
    "mlp_init",
    "forward",
    "backward",
    "adam_step",
    "adam_init",
]

_ACTIVATIONS = ("sigmoid", "identity")


@dataclass
class Batch:
    """A block of input rows, one sample per row."""

    rows: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2:
            raise ValueError(f"batch rows must be 2-D, got shape {self.rows.shape}")
        if self.rows.shape[0] < 1:
            raise ValueError("batch must contain at least one row")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("batch contains non-finite values")

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class MlpParams:
    """Weights and biases of a fully-connected network.

    weights[i] has shape (layer_sizes[i], layer_sizes[i+1]); hidden
    activations are tanh, the output head is `output_activation`.
    """

    layer_sizes: tuple
    weights: list
    biases: list
    output_activation: str = "sigmoid"

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2:
            raise ValueError("need at least an input and an output layer size")
        if any(s < 1 for s in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.output_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown output activation: {self.output_activation!r}")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("parameter list lengths do not match layer_sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != want:
                raise ValueError(f"weights[{i}] shape {w.shape}, expected {want}")
            if b.shape != (self.layer_sizes[i + 1],):
                raise ValueError(f"biases[{i}] shape {b.shape}, expected ({want[1]},)")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"non-finite parameters in layer {i}")

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class MlpGrads:
    """Parameter gradients shaped like the corresponding MlpParams."""

    weights: list
    biases: list


@dataclass
class AdamState:
    """Adam moment estimates plus hyperparameters for one network."""

    m_weights: list
    m_biases: list
    v_weights: list
    v_biases: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8


def mlp_init(layer_sizes, output_activation: str = "sigmoid", seed=0) -> MlpParams:
    """Deterministic network init: symmetric uniform weights, zero biases.

    Weight scale sqrt(6/(fan_in+fan_out)) keeps initial output correlation
    matrices well-conditioned.
    """
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2:
        raise ValueError("layer_sizes must list at least input and output dims")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(sizes, weights, biases, output_activation)


def _rows(params: MlpParams, batch) -> np.ndarray:
    rows = batch.rows if isinstance(batch, Batch) else Batch(batch).rows
    if rows.shape[1] != params.in_dim:
        raise ValueError(
            f"batch dimension {rows.shape[1]} does not match network input {params.in_dim}"
        )
    return rows


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_cached(params: MlpParams, rows: np.ndarray):
    hidden = [rows]
    z = rows
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = np.tanh(z @ w + b)
        hidden.append(z)
    pre = z @ params.weights[-1] + params.biases[-1]
    out = _sigmoid(pre) if params.output_activation == "sigmoid" else pre
    return out, hidden


def forward(params: MlpParams, batch) -> np.ndarray:
    """Evaluate the network on a batch; returns an (n, out_dim) array."""
    out, _ = _forward_cached(params, _rows(params, batch))
    return out


def backward(params: MlpParams, batch, out_grads) -> MlpGrads:
    """Gradients of sum_n <out_grads[n], forward(params, batch)[n]> per parameter."""
    rows = _rows(params, batch)
    out_grads = np.asarray(out_grads, dtype=float)
    out, hidden = _forward_cached(params, rows)
    if out_grads.shape != out.shape:
        raise ValueError(
            f"out_grads shape {out_grads.shape} does not match outputs {out.shape}"
        )
    if params.output_activation == "sigmoid":
        delta = out_grads * out * (1.0 - out)
    else:
        delta = out_grads
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        d_weights[i] = hidden[i].T @ delta
        d_biases[i] = delta.sum(axis=0)
        if i > 0:
            # tanh' = 1 - tanh^2, using the cached activation values
            delta = (delta @ params.weights[i].T) * (1.0 - hidden[i] ** 2)
    return MlpGrads(d_weights, d_biases)


def adam_init(
    params: MlpParams,
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
) -> AdamState:
    return AdamState(
        m_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_weights=[np.zeros_like(w) for w in params.weights],
        v_biases=[np.zeros_like(b) for b in params.biases],
        t=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps_adam=eps_adam,
    )


def adam_step(params: MlpParams, state: AdamState, grads: MlpGrads):
    """One Adam update with bias-corrected moments; mutates and returns (params, state)."""
    for i, g in enumerate(grads.weights):
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in layer {i} weights")
    for i, g in enumerate(grads.biases):
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient in layer {i} biases")

    state.t += 1
    corr1 = 1.0 - state.beta1 ** state.t
    corr2 = 1.0 - state.beta2 ** state.t

    def update(value, m, v, g):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        value -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps_adam)

    for i in range(len(params.weights)):
        update(params.weights[i], state.m_weights[i], state.v_weights[i], grads.weights[i])
        update(params.biases[i], state.m_biases[i], state.v_biases[i], grads.biases[i])
    return params, state
