"""Training for last-layer-feedback networks.

Backpropagation through time under a mean-square cost: the loss is the mean,
over trajectories and time steps, of the squared distance between the
network rollout and the target states. Gradients are exact reverse-mode
derivatives of that loss (ReLU subgradient 0 at 0) and are validated against
central finite differences in the test suite.

Rollouts during training start either from each trajectory's recorded
initial state (``"true-start"``) or from the mean of all states in the batch
(``"batch-mean"``, for data sets whose initial state is not observed).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, NonFiniteError
from .rng import stream
from .rnn import Network, Topology, relu
from .systems import TrajectoryBatch

DIVERGENCE_THRESHOLD = 1e12

INIT_POLICIES = ("true-start", "batch-mean")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 100
    epochs: int = 200
    optimizer: str = "adam"  # or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    truncation: int | None = None  # None = full backpropagation through time
    seed: int = 0
    grad_clip: float | None = None
    init_policy: str = "true-start"

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ConfigurationError("learning rate, batch size, and epochs must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        if self.truncation is not None and self.truncation < 1:
            raise ConfigurationError("truncation must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ConfigurationError("grad_clip must be positive")
        if self.init_policy not in INIT_POLICIES:
            raise ConfigurationError(f"unknown init policy {self.init_policy!r}")


@dataclass
class TrainReport:
    loss_history: np.ndarray
    network: Network
    wall_time: float


@dataclass
class Gradients:
    """Loss gradient in the same layout as the network parameters."""

    weights: list
    biases: list
    phi_weight: np.ndarray
    phi_bias: np.ndarray
    loss: float

    def flat(self) -> np.ndarray:
        parts = [w.ravel() for w in self.weights] + [b.ravel() for b in self.biases]
        parts += [self.phi_weight.ravel(), self.phi_bias.ravel()]
        return np.concatenate(parts)


def _require_trainable(net_or_top) -> None:
    top = net_or_top.topology if isinstance(net_or_top, Network) else net_or_top
    if top.feedback != "last-layer":
        raise ConfigurationError("training supports last-layer feedback networks")


def _check_batch(batch: TrajectoryBatch, top: Topology) -> None:
    if batch.n_traj == 0 or batch.horizon == 0:
        raise ValueError("batch must contain trajectories with at least one step")
    if batch.inputs.ndim != 3:
        raise ValueError("training inputs must be float vectors; encode switching "
                         "indices with one_hot first")
    if batch.inputs.shape[2] != top.input_dim or batch.states.shape[2] != top.output_dim:
        raise ValueError("batch dimensions do not match the topology")


def initial_states(batch: TrajectoryBatch, policy: str) -> np.ndarray:
    """Per-trajectory rollout starts under the given policy."""
    if policy == "true-start":
        return np.ascontiguousarray(batch.states[:, 0])
    if policy == "batch-mean":
        mean = batch.states.reshape(-1, batch.states.shape[2]).mean(axis=0)
        return np.ascontiguousarray(np.broadcast_to(mean, (batch.n_traj, len(mean))))
    raise ConfigurationError(f"unknown init policy {policy!r}")


def init_network(topology: Topology, seed: int) -> Network:
    """Uniform init in +-sqrt(6/(fan_in+fan_out)) per weight matrix."""
    _require_trainable(topology)
    gen = stream(seed, 0)

    def glorot(rows, cols):
        limit = np.sqrt(6.0 / (rows + cols))
        return gen.uniform(-limit, limit, size=(rows, cols))

    w = topology.widths
    weights = [glorot(w[l + 1], w[l]) for l in range(topology.n_layers)]
    biases = [np.zeros(w[l + 1]) for l in range(topology.n_layers)]
    phi_w = [glorot(w[1], topology.output_dim)]
    phi_b = [np.zeros(w[1])]
    return Network(topology, weights, biases, phi_w, phi_b)


def _forward_scan(net: Network, inputs: np.ndarray, init: np.ndarray):
    """Rollout that records pre-activations and hidden values for BPTT."""
    top = net.topology
    n, T, _ = inputs.shape
    n_hidden = top.n_layers - 1
    pre = [np.empty((n, T, top.widths[l + 1])) for l in range(n_hidden)]
    hid = [np.empty_like(p) for p in pre]
    outs = np.empty((n, T, top.output_dim))
    x = init
    for t in range(T):
        a = inputs[:, t] @ net.weights[0].T + net.biases[0]
        a += x @ net.phi_weights[0].T + net.phi_biases[0]
        pre[0][:, t] = a
        h = relu(a)
        hid[0][:, t] = h
        for l in range(1, n_hidden):
            a = h @ net.weights[l].T + net.biases[l]
            pre[l][:, t] = a
            h = relu(a)
            hid[l][:, t] = h
        x = h @ net.weights[-1].T + net.biases[-1]
        outs[:, t] = x
    return outs, pre, hid


def mse_loss(net: Network, batch: TrajectoryBatch, initial: np.ndarray | None = None,
             policy: str = "true-start") -> float:
    """Mean over trajectories and steps of the squared rollout error."""
    _require_trainable(net)
    _check_batch(batch, net.topology)
    init = initial_states(batch, policy) if initial is None else np.asarray(initial, float)
    outs, _, _ = _forward_scan(net, batch.inputs, init)
    if not np.all(np.isfinite(outs)):
        raise NonFiniteError("rollout produced non-finite outputs")
    diff = outs - batch.states[:, 1:]
    return float(np.mean(np.sum(diff ** 2, axis=2)))


def bptt_gradient(net: Network, batch: TrajectoryBatch,
                  initial: np.ndarray | None = None, policy: str = "true-start",
                  truncation: int | None = None) -> Gradients:
    """Exact reverse-mode gradient of :func:`mse_loss`.

    With ``truncation=k`` the state-to-state gradient flow is cut at every
    ``k``-step boundary (the forward pass is unchanged).
    """
    _require_trainable(net)
    _check_batch(batch, net.topology)
    top = net.topology
    init = initial_states(batch, policy) if initial is None else np.asarray(initial, float)
    inputs = batch.inputs
    targets = batch.states[:, 1:]
    n, T, _ = inputs.shape
    n_hidden = top.n_layers - 1

    outs, pre, hid = _forward_scan(net, inputs, init)
    if not np.all(np.isfinite(outs)):
        raise NonFiniteError("forward pass produced non-finite outputs")
    diff = outs - targets
    loss = float(np.mean(np.sum(diff ** 2, axis=2)))
    direct = (2.0 / (n * T)) * diff

    d_w = [np.zeros_like(w) for w in net.weights]
    d_b = [np.zeros_like(b) for b in net.biases]
    d_pw = np.zeros_like(net.phi_weights[0])
    d_pb = np.zeros_like(net.phi_biases[0])

    carry = np.zeros((n, top.output_dim))
    for t in range(T - 1, -1, -1):
        r = direct[:, t] + carry
        d_w[-1] += r.T @ hid[-1][:, t]
        d_b[-1] += r.sum(axis=0)
        g = r @ net.weights[-1]
        for l in range(n_hidden - 1, 0, -1):
            g = g * (pre[l][:, t] > 0.0)
            d_w[l] += g.T @ hid[l - 1][:, t]
            d_b[l] += g.sum(axis=0)
            g = g @ net.weights[l]
        g = g * (pre[0][:, t] > 0.0)
        d_w[0] += g.T @ inputs[:, t]
        d_b[0] += g.sum(axis=0)
        x_prev = outs[:, t - 1] if t > 0 else init
        d_pw += g.T @ x_prev
        d_pb += g.sum(axis=0)
        if truncation is not None and t % truncation == 0:
            carry = np.zeros((n, top.output_dim))
        else:
            carry = g @ net.phi_weights[0]
    return Gradients(d_w, d_b, d_pw, d_pb, loss)


def _clip(grads: Gradients, limit: float | None) -> None:
    if limit is None:
        return
    total = float(np.sqrt(np.sum(grads.flat() ** 2)))
    if total > limit:
        scale = limit / total
        for w in grads.weights:
            w *= scale
        for b in grads.biases:
            b *= scale
        grads.phi_weight *= scale
        grads.phi_bias *= scale


class _Adam:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.steps = 0

    def update(self, params, grads) -> None:
        cfg = self.cfg
        self.steps += 1
        correct1 = 1.0 - cfg.adam_beta1 ** self.steps
        correct2 = 1.0 - cfg.adam_beta2 ** self.steps
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= cfg.adam_beta1
            m += (1.0 - cfg.adam_beta1) * g
            v *= cfg.adam_beta2
            v += (1.0 - cfg.adam_beta2) * g * g
            p -= cfg.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + cfg.adam_eps)


class _Sgd:
    def __init__(self, params, cfg: TrainConfig):
        self.cfg = cfg

    def update(self, params, grads) -> None:
        for p, g in zip(params, grads):
            p -= self.cfg.learning_rate * g


def train(batch: TrajectoryBatch, topology: Topology, config: TrainConfig) -> TrainReport:
    """Minibatch optimization of the rollout loss; reproducible per seed."""
    _require_trainable(topology)
    _check_batch(batch, topology)
    started = time.perf_counter()
    net = init_network(topology, config.seed)
    shuffler = stream(config.seed, 1)
    init_all = initial_states(batch, config.init_policy)

    params = net.weights + net.biases + [net.phi_weights[0], net.phi_biases[0]]
    opt = _Adam(params, config) if config.optimizer == "adam" else _Sgd(params, config)

    history = np.empty(config.epochs)
    n = batch.n_traj
    for epoch in range(config.epochs):
        order = shuffler.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n, config.batch_size):
            pick = order[lo:lo + config.batch_size]
            sub = TrajectoryBatch(batch.states[pick], batch.inputs[pick], batch.seed)
            grads = bptt_gradient(net, sub, initial=init_all[pick],
                                  truncation=config.truncation)
            _clip(grads, config.grad_clip)
            flat_grads = grads.weights + grads.biases + [grads.phi_weight, grads.phi_bias]
            opt.update(params, flat_grads)
            epoch_loss += grads.loss
            n_batches += 1
        mean_loss = epoch_loss / n_batches
        if not np.isfinite(mean_loss) or mean_loss > DIVERGENCE_THRESHOLD:
            raise DivergenceError(f"loss {mean_loss!r} at epoch {epoch}")
        history[epoch] = mean_loss
    return TrainReport(history, net, time.perf_counter() - started)
