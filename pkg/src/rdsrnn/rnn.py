"""Recurrent network architectures with ReLU activations.

Three feedback topologies are supported:

* ``general`` — every hidden layer receives an affine map of the previous
  step's full feedback vector (all hidden layers plus the output,
  concatenated in layer order).
* ``last-layer`` — the network output is fed back affinely into the first
  hidden layer, making the output sequence a state recursion.
* ``memory-bank`` — the first hidden layer feeds itself and acts as a shift
  register that stores the step counter, the initial state, and the input
  history behind a large positive bias; a subsequent constant-offset stage
  removes the bias. See :func:`build_memory_bank`.

The activation is fixed to ``max(., 0)`` componentwise. Networks are
immutable during evaluation; a rollout owns its ``NetworkState``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError, NonFiniteError
from .linalg import spectral_norm

NETWORK_SCHEMA = "rdsrnn-network/1"

FEEDBACK_KINDS = ("general", "last-layer", "memory-bank")


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def one_hot(indices: np.ndarray, n_categories: int) -> np.ndarray:
    """Map integer switching inputs to one-hot rows (network boundary)."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= n_categories:
        raise ValueError("index out of range")
    out = np.zeros(idx.shape + (n_categories,))
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


@dataclass(frozen=True)
class Topology:
    """Layer widths ``(d_in, hidden..., d_out)`` plus the feedback wiring."""

    widths: tuple
    feedback: str = "last-layer"
    horizon: int | None = None  # memory-bank slot count

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 3:
            raise ConfigurationError("need at least input, one hidden, and output widths")
        if any(w <= 0 for w in widths):
            raise ConfigurationError("widths must be positive")
        if self.feedback not in FEEDBACK_KINDS:
            raise ConfigurationError(f"unknown feedback kind {self.feedback!r}")
        if self.feedback == "memory-bank":
            if self.horizon is None or self.horizon < 1:
                raise ConfigurationError("memory-bank topology needs horizon >= 1")
            expected = 1 + widths[-1] + self.horizon * widths[0]
            if widths[1] != expected:
                raise ConfigurationError(
                    f"memory-bank first layer width must be {expected}, got {widths[1]}"
                )
        elif self.horizon is not None:
            raise ConfigurationError("horizon only applies to memory-bank feedback")
        object.__setattr__(self, "widths", widths)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def feedback_dim(self) -> int:
        if self.feedback == "general":
            return int(sum(self.widths[1:]))
        if self.feedback == "last-layer":
            return self.output_dim
        return self.widths[1]


def _check_shape(arr: np.ndarray, shape: tuple, name: str) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(arr, dtype=float))
    if a.shape != shape:
        raise ConfigurationError(f"{name} has shape {a.shape}, expected {shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return a


@dataclass
class Network:
    """Parameters for one topology: per-layer affine maps plus feedback maps."""

    topology: Topology
    weights: list  # layer maps, weights[l] : widths[l] -> widths[l+1]
    biases: list
    phi_weights: list  # feedback maps into hidden pre-activations
    phi_biases: list
    post_bias: np.ndarray | None = None  # memory-bank offset stage

    def __post_init__(self):
        top = self.topology
        w = top.widths
        if len(self.weights) != top.n_layers or len(self.biases) != top.n_layers:
            raise ConfigurationError(f"expected {top.n_layers} layer maps")
        self.weights = [
            _check_shape(m, (w[l + 1], w[l]), f"weights[{l}]")
            for l, m in enumerate(self.weights)
        ]
        self.biases = [
            _check_shape(b, (w[l + 1],), f"biases[{l}]") for l, b in enumerate(self.biases)
        ]
        n_phi = top.n_layers - 1 if top.feedback == "general" else 1
        if len(self.phi_weights) != n_phi or len(self.phi_biases) != n_phi:
            raise ConfigurationError(f"expected {n_phi} feedback maps")
        fb = top.feedback_dim
        self.phi_weights = [
            _check_shape(m, (w[l + 1], fb), f"phi_weights[{l}]")
            for l, m in enumerate(self.phi_weights)
        ]
        self.phi_biases = [
            _check_shape(b, (w[l + 1],), f"phi_biases[{l}]")
            for l, b in enumerate(self.phi_biases)
        ]
        if top.feedback == "memory-bank":
            if self.post_bias is None:
                raise ConfigurationError("memory-bank networks need post_bias")
            self.post_bias = _check_shape(self.post_bias, (w[1],), "post_bias")
        elif self.post_bias is not None:
            raise ConfigurationError("post_bias only applies to memory-bank networks")


@dataclass
class NetworkState:
    """Feedback vector carried between steps."""

    feedback: np.ndarray

    def __post_init__(self):
        self.feedback = np.ascontiguousarray(np.asarray(self.feedback, dtype=float))


def initial_state(net: Network, value) -> NetworkState:
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.shape != (net.topology.feedback_dim,):
        raise ConfigurationError(
            f"initial state has shape {v.shape}, expected ({net.topology.feedback_dim},)"
        )
    return NetworkState(v)


def forward_step(net: Network, state: NetworkState, u) -> tuple:
    """One network step: returns ``(output, next_state)``."""
    top = net.topology
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (top.input_dim,):
        raise ValueError(f"input has shape {u.shape}, expected ({top.input_dim},)")
    if not np.all(np.isfinite(u)):
        raise NonFiniteError("input has non-finite entries")
    fb = state.feedback
    if fb.shape != (top.feedback_dim,):
        raise ValueError(f"state has shape {fb.shape}, expected ({top.feedback_dim},)")

    if top.feedback == "general":
        hiddens = []
        h = u
        for l in range(top.n_layers - 1):
            pre = net.weights[l] @ h + net.biases[l]
            pre = pre + net.phi_weights[l] @ fb + net.phi_biases[l]
            h = relu(pre)
            hiddens.append(h)
        out = net.weights[-1] @ h + net.biases[-1]
        return out, NetworkState(np.concatenate(hiddens + [out]))

    if top.feedback == "last-layer":
        pre = net.weights[0] @ u + net.biases[0]
        pre = pre + net.phi_weights[0] @ fb + net.phi_biases[0]
        h = relu(pre)
        for l in range(1, top.n_layers - 1):
            h = relu(net.weights[l] @ h + net.biases[l])
        out = net.weights[-1] @ h + net.biases[-1]
        return out, NetworkState(out)

    # memory-bank: the first layer feeds itself; the offset stage follows.
    h1 = relu(net.weights[0] @ u + net.biases[0] + net.phi_weights[0] @ fb + net.phi_biases[0])
    h = h1 + net.post_bias
    for l in range(1, top.n_layers - 1):
        h = relu(net.weights[l] @ h + net.biases[l])
    out = net.weights[-1] @ h + net.biases[-1]
    return out, NetworkState(h1)


def rollout(net: Network, initial: NetworkState, inputs) -> np.ndarray:
    """Iterate :func:`forward_step`; outputs indexed ``t = 1..T``."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.size == 0:
        return np.zeros((0, net.topology.output_dim))
    state = initial
    out = np.empty((inputs.shape[0], net.topology.output_dim))
    for t in range(inputs.shape[0]):
        out[t], state = forward_step(net, state, inputs[t])
    return out


def rollout_batch(net: Network, initial: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Batched rollout of a last-layer-feedback network.

    ``initial`` is ``(n, d_out)`` (or ``(d_out,)``, broadcast), ``inputs`` is
    ``(n, T, d_in)``; returns ``(n, T, d_out)``. Single-hidden-layer networks
    run through the compiled kernel; deeper ones use the vectorised path.
    """
    top = net.topology
    if top.feedback != "last-layer":
        raise ConfigurationError("rollout_batch supports last-layer feedback only")
    inputs = np.ascontiguousarray(np.asarray(inputs, dtype=float))
    if inputs.ndim != 3 or inputs.shape[2] != top.input_dim:
        raise ValueError(f"inputs must be (n, T, {top.input_dim})")
    if not np.all(np.isfinite(inputs)):
        raise NonFiniteError("inputs have non-finite entries")
    x0 = np.asarray(initial, dtype=float)
    if x0.ndim == 1:
        x0 = np.broadcast_to(x0, (inputs.shape[0], top.output_dim))
    x0 = np.ascontiguousarray(x0)

    if top.n_layers == 2:
        return kernels.rnn2_rollout_batch(
            net.weights[0], net.biases[0], net.phi_weights[0], net.phi_biases[0],
            net.weights[1], net.biases[1], inputs, x0,
        )

    out = np.empty((inputs.shape[0], inputs.shape[1], top.output_dim))
    x = x0
    for t in range(inputs.shape[1]):
        h = relu(inputs[:, t] @ net.weights[0].T + net.biases[0]
                 + x @ net.phi_weights[0].T + net.phi_biases[0])
        for l in range(1, top.n_layers - 1):
            h = relu(h @ net.weights[l].T + net.biases[l])
        x = h @ net.weights[-1].T + net.biases[-1]
        out[:, t] = x
    return out


# ---------------------------------------------------------------------------
# memory bank
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryBankLayer:
    """First-layer parameters of the self-feedback shift register."""

    input_weight: np.ndarray   # (width, d_u)
    input_bias: np.ndarray     # (width,)
    recurrent_weight: np.ndarray  # (width, width)
    post_bias: np.ndarray      # (width,), subtracted-bias stage
    state_dim: int
    input_dim: int
    horizon: int
    bias: float

    @property
    def width(self) -> int:
        return self.input_bias.shape[0]


def build_memory_bank(d_x: int, d_u: int, horizon: int, bias: float, x0):
    """Construct the exact shift-register first layer and its initial state.

    Layer width is ``1 + d_x + horizon * d_u``: one step-counter slot, the
    held initial state, and ``horizon`` input slots (newest first). Stored
    values ride ``bias`` above zero so the ReLU passes them through whenever
    every input coordinate stays above ``-bias``; the post stage subtracts
    the bias again. After ``t`` steps the post-stage output reads
    ``(t, x0, u_t, ..., u_1, ...)``.
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    if not bias > 0.0:
        raise ConfigurationError("bias must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (d_x,):
        raise ConfigurationError(f"x0 must have shape ({d_x},)")
    width = 1 + d_x + horizon * d_u
    slot0 = 1 + d_x  # first input slot

    m_in = np.zeros((width, d_u))
    m_in[slot0:slot0 + d_u] = np.eye(d_u)
    b_in = np.zeros(width)
    b_in[0] = 1.0
    b_in[slot0:slot0 + d_u] = bias

    m_rec = np.zeros((width, width))
    m_rec[0, 0] = 1.0
    m_rec[1:1 + d_x, 1:1 + d_x] = np.eye(d_x)
    for j in range(1, horizon):  # slot j holds what slot j-1 held last step
        rows = slice(slot0 + j * d_u, slot0 + (j + 1) * d_u)
        cols = slice(slot0 + (j - 1) * d_u, slot0 + j * d_u)
        m_rec[rows, cols] = np.eye(d_u)

    post = np.full(width, -bias)
    post[0] = 0.0

    h0 = np.zeros(width)
    h0[1:1 + d_x] = x0 + bias
    h0[slot0:slot0 + d_u] = 0.0
    h0[slot0 + d_u:] = bias

    layer = MemoryBankLayer(m_in, b_in, m_rec, post, d_x, d_u, horizon, float(bias))
    return layer, NetworkState(h0)


def memory_bank_step(layer: MemoryBankLayer, state: NetworkState, u):
    """Advance the register one step; returns ``(post_stage_output, next_state)``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    h1 = relu(layer.input_weight @ u + layer.input_bias + layer.recurrent_weight @ state.feedback)
    return h1 + layer.post_bias, NetworkState(h1)


def memory_bank_trace(layer: MemoryBankLayer, state: NetworkState, inputs) -> np.ndarray:
    """Post-stage outputs for ``t = 1..T`` under the given input sequence."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    out = np.empty((inputs.shape[0], layer.width))
    for t in range(inputs.shape[0]):
        out[t], state = memory_bank_step(layer, state, inputs[t])
    return out


def memory_bank_network(layer: MemoryBankLayer, tail_weights, tail_biases) -> Network:
    """Wrap the register and a feedforward tail into a full Network."""
    widths = (layer.input_dim, layer.width) + tuple(w.shape[0] for w in tail_weights)
    top = Topology(widths, feedback="memory-bank", horizon=layer.horizon)
    return Network(
        topology=top,
        weights=[layer.input_weight] + list(tail_weights),
        biases=[layer.input_bias] + list(tail_biases),
        phi_weights=[layer.recurrent_weight],
        phi_biases=[np.zeros(layer.width)],
        post_bias=layer.post_bias,
    )


# ---------------------------------------------------------------------------
# diagnostics and serialization
# ---------------------------------------------------------------------------


def lipschitz_feedback_bound(net: Network) -> float:
    """Norm-product upper bound on the state-to-state Lipschitz constant.

    Valid for last-layer feedback because the activation is 1-Lipschitz: the
    feedback path is the feedback map followed by layers 2..L.
    """
    if net.topology.feedback != "last-layer":
        raise ConfigurationError("bound defined for last-layer feedback networks")
    bound = spectral_norm(net.phi_weights[0])
    for w in net.weights[1:]:
        bound *= spectral_norm(w)
    return bound


def as_general(net: Network) -> Network:
    """Embed a last-layer-feedback network into the general topology.

    The first hidden layer reads the output block of the feedback vector;
    every other feedback map is zero. Outputs match the specialised path
    exactly when the general feedback vector's output block holds the same
    value.
    """
    if net.topology.feedback != "last-layer":
        raise ConfigurationError("expected a last-layer feedback network")
    top = net.topology
    widths = top.widths
    general = Topology(widths, feedback="general")
    fb = general.feedback_dim
    phi_w = []
    phi_b = []
    for l in range(top.n_layers - 1):
        m = np.zeros((widths[l + 1], fb))
        if l == 0:
            m[:, fb - top.output_dim:] = net.phi_weights[0]
            phi_b.append(net.phi_biases[0].copy())
        else:
            phi_b.append(np.zeros(widths[l + 1]))
        phi_w.append(m)
    return Network(
        topology=general,
        weights=[w.copy() for w in net.weights],
        biases=[b.copy() for b in net.biases],
        phi_weights=phi_w,
        phi_biases=phi_b,
    )


def network_to_dict(net: Network) -> dict:
    doc = {
        "schema": NETWORK_SCHEMA,
        "topology": {
            "widths": list(net.topology.widths),
            "feedback": net.topology.feedback,
            "horizon": net.topology.horizon,
        },
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "phi_weights": [w.tolist() for w in net.phi_weights],
        "phi_biases": [b.tolist() for b in net.phi_biases],
    }
    if net.post_bias is not None:
        doc["post_bias"] = net.post_bias.tolist()
    return doc


def network_from_dict(doc: dict) -> Network:
    if doc.get("schema") != NETWORK_SCHEMA:
        raise ConfigurationError(f"unsupported network schema {doc.get('schema')!r}")
    top = Topology(
        tuple(doc["topology"]["widths"]),
        doc["topology"]["feedback"],
        doc["topology"].get("horizon"),
    )
    post = doc.get("post_bias")
    return Network(
        topology=top,
        weights=[np.array(w) for w in doc["weights"]],
        biases=[np.array(b) for b in doc["biases"]],
        phi_weights=[np.array(w) for w in doc["phi_weights"]],
        phi_biases=[np.array(b) for b in doc["phi_biases"]],
        post_bias=None if post is None else np.array(post),
    )


def network_to_json(net: Network) -> str:
    # json round-trips finite doubles exactly (repr-based float formatting)
    return json.dumps(network_to_dict(net), indent=2)


def network_from_json(text: str) -> Network:
    return network_from_dict(json.loads(text))


def save_network(net: Network, path) -> None:
    Path(path).write_text(network_to_json(net) + "\n")


def load_network(path) -> Network:
    return network_from_json(Path(path).read_text())
