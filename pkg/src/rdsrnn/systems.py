"""Random dynamical system definitions and simulators.

Supported system kinds:

* ``ifs`` — a finite ensemble of affine maps, one drawn per step with fixed
  probabilities.
* ``switched-affine`` — the same mechanics with the categorical switching
  signal described as an explicit input process.
* ``linear`` — ``x' = A x + B u`` with an iid-Gaussian or AR(1) input.
* ``ou`` — the scalar mean-reverting recursion
  ``x' = mean + alpha * (x - mean) + u`` with iid-Gaussian ``u``.

All simulators are deterministic given ``(spec, x0, horizon, seed)``;
trajectory ``n`` of a batch draws from stream ``n`` of the master seed (see
:mod:`rdsrnn.rng`), so it does not depend on the batch size. Switching inputs
are stored as integer indices; mapping to one-hot vectors happens at the
network boundary (:func:`rdsrnn.rnn.one_hot`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigurationError
from .rng import stream

SYSTEM_SCHEMA = "rdsrnn-system/1"


def _as_matrix(value, name: str) -> np.ndarray:
    m = np.array(value, dtype=float)
    if m.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ConfigurationError(f"{name} has non-finite entries")
    return m


def _as_vector(value, name: str) -> np.ndarray:
    v = np.atleast_1d(np.array(value, dtype=float))
    if v.ndim != 1:
        raise ConfigurationError(f"{name} must be a vector, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{name} has non-finite entries")
    return v


def _check_psd(m: np.ndarray, name: str) -> None:
    if not np.allclose(m, m.T, atol=1e-12, rtol=0.0):
        raise ConfigurationError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(m)
    if eigs.min(initial=0.0) < -1e-10:
        raise ConfigurationError(f"{name} must be positive semidefinite")


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Factor F with F @ F.T == cov, valid for singular PSD matrices."""
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


# ---------------------------------------------------------------------------
# map ensembles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMap:
    """The map ``x -> matrix @ x + offset``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix, "matrix")
        b = _as_vector(self.offset, "offset")
        if m.shape[0] != m.shape[1]:
            raise ConfigurationError(f"matrix must be square, got {m.shape}")
        if b.shape[0] != m.shape[0]:
            raise ConfigurationError(
                f"offset length {b.shape[0]} does not match matrix size {m.shape[0]}"
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", b)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float) + self.offset


@dataclass(frozen=True)
class MapEnsemble:
    """A finite set of affine maps with selection probabilities."""

    maps: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        maps = tuple(self.maps)
        if len(maps) < 1:
            raise ConfigurationError("ensemble needs at least one map")
        p = _as_vector(self.probabilities, "probabilities")
        if len(p) != len(maps):
            raise ConfigurationError("probabilities and maps must have equal length")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ConfigurationError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"probabilities sum to {p.sum()!r}, expected 1")
        dims = {m.dim for m in maps}
        if len(dims) != 1:
            raise ConfigurationError(f"maps have inconsistent dimensions {sorted(dims)}")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "probabilities", p)

    @property
    def dim(self) -> int:
        return self.maps[0].dim

    def matrices(self) -> np.ndarray:
        return np.ascontiguousarray([m.matrix for m in self.maps])

    def offsets(self) -> np.ndarray:
        return np.ascontiguousarray([m.offset for m in self.maps])


# ---------------------------------------------------------------------------
# input processes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CategoricalInput:
    """iid categorical draws, delivered as integer indices."""

    probabilities: np.ndarray

    def __post_init__(self):
        p = _as_vector(self.probabilities, "probabilities")
        if np.any(p < 0.0) or np.any(p > 1.0) or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError("invalid probability vector")
        object.__setattr__(self, "probabilities", p)

    @property
    def dimension(self) -> int:
        return 1

    def draw(self, horizon: int, gen: np.random.Generator) -> np.ndarray:
        u = gen.random(horizon)
        cum = np.cumsum(self.probabilities)
        idx = np.searchsorted(cum, u, side="right")
        return np.minimum(idx, len(cum) - 1).astype(np.int64)


@dataclass(frozen=True)
class GaussianInput:
    """iid Gaussian draws with the given mean and covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = _as_vector(self.mean, "mean")
        cov = np.atleast_2d(np.array(self.covariance, dtype=float))
        cov = _as_matrix(cov, "covariance")
        if cov.shape != (len(mean), len(mean)):
            raise ConfigurationError("covariance shape does not match mean")
        _check_psd(cov, "covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dimension(self) -> int:
        return len(self.mean)

    def draw(self, horizon: int, gen: np.random.Generator) -> np.ndarray:
        z = gen.standard_normal((horizon, self.dimension))
        return z @ _psd_factor(self.covariance).T + self.mean


@dataclass(frozen=True)
class Ar1Input:
    """``u_t = matrix @ u_{t-1} + innovation_t`` from a Gaussian start."""

    matrix: np.ndarray
    innovation: GaussianInput
    initial_mean: np.ndarray
    initial_covariance: np.ndarray

    def __post_init__(self):
        m = _as_matrix(self.matrix, "matrix")
        if m.shape[0] != m.shape[1]:
            raise ConfigurationError("AR(1) matrix must be square")
        if m.shape[0] != self.innovation.dimension:
            raise ConfigurationError("AR(1) matrix does not match innovation dimension")
        mean0 = _as_vector(self.initial_mean, "initial_mean")
        cov0 = np.atleast_2d(np.array(self.initial_covariance, dtype=float))
        _check_psd(cov0, "initial_covariance")
        if len(mean0) != m.shape[0] or cov0.shape != m.shape:
            raise ConfigurationError("initial law dimensions do not match AR(1) matrix")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "initial_mean", mean0)
        object.__setattr__(self, "initial_covariance", cov0)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def draw(self, horizon: int, gen: np.random.Generator) -> np.ndarray:
        # u0 is drawn first, then the innovations, so the stream layout is
        # stable regardless of how the recursion is evaluated.
        u0 = gen.standard_normal(self.dimension) @ _psd_factor(self.initial_covariance).T
        u0 = u0 + self.initial_mean
        shocks = self.innovation.draw(horizon, gen)
        path = kernels.linear_path_batch(
            np.ascontiguousarray(self.matrix),
            np.ascontiguousarray(np.eye(self.dimension)),
            np.ascontiguousarray(shocks[None]),
            np.ascontiguousarray(u0[None]),
        )
        return np.ascontiguousarray(path[0, 1:])


# ---------------------------------------------------------------------------
# system specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IfsSystem:
    """Iterated function system: the switching law is the ensemble's own."""

    ensemble: MapEnsemble
    kind: str = field(default="ifs", init=False)

    @property
    def state_dim(self) -> int:
        return self.ensemble.dim

    @property
    def input_process(self) -> CategoricalInput:
        return CategoricalInput(self.ensemble.probabilities)


@dataclass(frozen=True)
class SwitchedAffineSystem:
    """Affine maps switched by an explicit categorical input signal."""

    ensemble: MapEnsemble
    inputs: CategoricalInput
    kind: str = field(default="switched-affine", init=False)

    def __post_init__(self):
        if len(self.inputs.probabilities) != len(self.ensemble.maps):
            raise ConfigurationError("input categories do not match the map count")

    @property
    def state_dim(self) -> int:
        return self.ensemble.dim

    @property
    def input_process(self) -> CategoricalInput:
        return self.inputs


@dataclass(frozen=True)
class LinearSystem:
    """``x' = transition @ x + input_matrix @ u``."""

    transition: np.ndarray
    input_matrix: np.ndarray
    inputs: object  # GaussianInput | Ar1Input
    kind: str = field(default="linear", init=False)

    def __post_init__(self):
        a = _as_matrix(self.transition, "transition")
        b = _as_matrix(self.input_matrix, "input_matrix")
        if a.shape[0] != a.shape[1]:
            raise ConfigurationError("transition must be square")
        if b.shape[0] != a.shape[0]:
            raise ConfigurationError("input_matrix rows must match the state dimension")
        if not isinstance(self.inputs, (GaussianInput, Ar1Input)):
            raise ConfigurationError("linear systems take Gaussian or AR(1) inputs")
        if b.shape[1] != self.inputs.dimension:
            raise ConfigurationError("input_matrix columns must match the input dimension")
        object.__setattr__(self, "transition", a)
        object.__setattr__(self, "input_matrix", b)

    @property
    def state_dim(self) -> int:
        return self.transition.shape[0]

    @property
    def input_process(self):
        return self.inputs


@dataclass(frozen=True)
class OuSystem:
    """Scalar mean-reverting recursion with iid Gaussian input."""

    mean: float
    alpha: float
    sigma: float
    kind: str = field(default="ou", init=False)

    def __post_init__(self):
        for name in ("mean", "alpha", "sigma"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.sigma < 0.0:
            raise ConfigurationError("sigma must be nonnegative")

    @property
    def state_dim(self) -> int:
        return 1

    @property
    def input_process(self) -> GaussianInput:
        return GaussianInput(np.zeros(1), np.array([[self.sigma ** 2]]))


SWITCHED_KINDS = (IfsSystem, SwitchedAffineSystem)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """States indexed ``t = 0..T`` and the inputs that produced ``t = 1..T``."""

    states: np.ndarray
    inputs: np.ndarray
    seed: int

    def __post_init__(self):
        if len(self.states) != len(self.inputs) + 1:
            raise ConfigurationError("states must be one longer than inputs")

    @property
    def horizon(self) -> int:
        return len(self.inputs)


@dataclass
class TrajectoryBatch:
    """Stacked trajectories; row ``n`` used stream ``n`` of ``seed``."""

    states: np.ndarray  # (n_traj, T+1, dx)
    inputs: np.ndarray  # (n_traj, T) int64 or (n_traj, T, du) float
    seed: int

    def __post_init__(self):
        if self.states.shape[1] != self.inputs.shape[1] + 1:
            raise ConfigurationError("states must be one longer than inputs")
        if self.states.shape[0] != self.inputs.shape[0]:
            raise ConfigurationError("states and inputs disagree on trajectory count")

    @property
    def n_traj(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.inputs.shape[1]

    def trajectory(self, n: int) -> Trajectory:
        return Trajectory(self.states[n], self.inputs[n], self.seed)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def sample_map_index(probabilities, u: float) -> int:
    """Inverse-CDF selection with left-closed bins.

    Returns the smallest index whose cumulative probability strictly exceeds
    ``u``; a draw landing exactly on a bin boundary selects the next bin.
    """
    p = _as_vector(probabilities, "probabilities")
    if np.any(p < 0.0) or np.any(p > 1.0) or abs(p.sum() - 1.0) > 1e-12:
        raise ConfigurationError("invalid probability vector")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    cum = np.cumsum(p)
    return int(min(np.searchsorted(cum, u, side="right"), len(p) - 1))


def step(spec, x, u):
    """One application of the system map ``f(x, u)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.state_dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({spec.state_dim},)")
    if isinstance(spec, SWITCHED_KINDS):
        i = int(u)
        if not 0 <= i < len(spec.ensemble.maps):
            raise ValueError(f"map index {i} out of range for {len(spec.ensemble.maps)} maps")
        return spec.ensemble.maps[i].apply(x)
    if isinstance(spec, LinearSystem):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return spec.transition @ x + spec.input_matrix @ u
    if isinstance(spec, OuSystem):
        u = float(np.asarray(u).reshape(()))
        return np.array([spec.mean + spec.alpha * (x[0] - spec.mean) + u])
    raise ConfigurationError(f"unknown system kind {type(spec).__name__}")


def evolve(spec, x0_batch: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Deterministic state recursion under externally supplied inputs.

    ``x0_batch`` is ``(n_traj, dx)``; ``inputs`` is ``(n_traj, T)`` for
    switched kinds (int indices) and ``(n_traj, T, du)`` otherwise. Returns
    states ``(n_traj, T+1, dx)``. This is the coupling primitive: running two
    initial conditions (or two systems) on the same ``inputs`` realises the
    same random maps on both.
    """
    x0_batch = np.ascontiguousarray(np.asarray(x0_batch, dtype=float))
    if x0_batch.ndim != 2 or x0_batch.shape[1] != spec.state_dim:
        raise ValueError(f"x0 batch must be (n, {spec.state_dim})")
    if isinstance(spec, SWITCHED_KINDS):
        idx = np.ascontiguousarray(np.asarray(inputs, dtype=np.int64))
        if idx.min(initial=0) < 0 or idx.max(initial=0) >= len(spec.ensemble.maps):
            raise ValueError("map index out of range")
        return kernels.switched_path_batch(
            spec.ensemble.matrices(), spec.ensemble.offsets(), idx, x0_batch
        )
    if isinstance(spec, LinearSystem):
        u = np.ascontiguousarray(np.asarray(inputs, dtype=float))
        return kernels.linear_path_batch(
            np.ascontiguousarray(spec.transition),
            np.ascontiguousarray(spec.input_matrix),
            u,
            x0_batch,
        )
    if isinstance(spec, OuSystem):
        u = np.ascontiguousarray(np.asarray(inputs, dtype=float))
        if u.ndim == 3:
            u = np.ascontiguousarray(u[:, :, 0])
        states = kernels.ou_path_batch(spec.mean, spec.alpha, u, x0_batch[:, 0].copy())
        return states[:, :, None]
    raise ConfigurationError(f"unknown system kind {type(spec).__name__}")


def draw_input_batch(process, horizon: int, n_traj: int, seed: int,
                     stream_offset: int = 0) -> np.ndarray:
    """Stacked input draws, one independent stream per trajectory.

    Row ``n`` uses stream ``stream_offset + n``, so a batch can be produced
    in chunks without changing any draw.
    """
    rows = [process.draw(horizon, stream(seed, stream_offset + n)) for n in range(n_traj)]
    return np.ascontiguousarray(rows)


def simulate(spec, x0, horizon: int, seed: int) -> Trajectory:
    """Simulate one trajectory; equals row 0 of a batch with the same seed."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    inputs = spec.input_process.draw(horizon, stream(seed, 0))
    states = evolve(spec, x0[None], inputs[None])[0]
    return Trajectory(states, inputs, seed)


def simulate_batch(spec, x0, horizon: int, n_traj: int, seed: int) -> TrajectoryBatch:
    """Simulate ``n_traj`` independent trajectories from a common start.

    ``x0`` may also be ``(n_traj, dx)`` for per-trajectory starts.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim <= 1:
        x0 = np.broadcast_to(np.atleast_1d(x0), (n_traj, spec.state_dim))
    inputs = draw_input_batch(spec.input_process, horizon, n_traj, seed)
    states = evolve(spec, x0, inputs)
    return TrajectoryBatch(states, inputs, seed)


def backward_compose(spec, x0, n: int, seed: int) -> np.ndarray:
    """Backward map compositions ``y_k`` for ``k = 1..n``.

    Draw ``j`` of the seeded stream realises the map ``j`` steps into the
    past; ``y_k`` applies draws ``k, k-1, ..., 0`` in that order, so all
    ``y_k`` share the same realised maps and only the composition depth
    grows. Only iid input kinds are supported.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    gen = stream(seed, 0)
    if isinstance(spec, SWITCHED_KINDS):
        idx = spec.input_process.draw(n + 1, gen)
        a_seq = np.ascontiguousarray(spec.ensemble.matrices()[idx])
        b_seq = np.ascontiguousarray(spec.ensemble.offsets()[idx])
    elif isinstance(spec, LinearSystem):
        if not isinstance(spec.inputs, GaussianInput):
            raise ConfigurationError("backward composition needs iid input draws")
        u = spec.inputs.draw(n + 1, gen)
        a_seq = np.ascontiguousarray(np.broadcast_to(spec.transition, (n + 1,) + spec.transition.shape))
        b_seq = np.ascontiguousarray(u @ spec.input_matrix.T)
    elif isinstance(spec, OuSystem):
        u = spec.input_process.draw(n + 1, gen)[:, 0]
        a_seq = np.full((n + 1, 1, 1), spec.alpha)
        b_seq = (spec.mean * (1.0 - spec.alpha) + u)[:, None]
    else:
        raise ConfigurationError(f"unknown system kind {type(spec).__name__}")
    return kernels.backward_affine(a_seq, b_seq, x0)


def stack_linear(a, b, g):
    """Block matrices of the system/input stack driven by AR(1) innovations.

    Returns the transition block ``[[a, b@g], [0, g]]`` and the input block
    ``[[b, 0], [0, I]]``. The transition's eigenvalues are the union of the
    eigenvalues of ``a`` and ``g``.
    """
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    g = _as_matrix(g, "g")
    dx, du = b.shape
    if a.shape != (dx, dx) or g.shape != (du, du):
        raise ConfigurationError(
            f"incompatible shapes: a {a.shape}, b {b.shape}, g {g.shape}"
        )
    transition = np.block([[a, b @ g], [np.zeros((du, dx)), g]])
    input_block = np.block([[b, np.zeros((dx, du))], [np.zeros((du, du)), np.eye(du)]])
    return transition, input_block


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _input_to_dict(proc) -> dict:
    if isinstance(proc, CategoricalInput):
        return {"kind": "iid-categorical", "probabilities": proc.probabilities.tolist()}
    if isinstance(proc, GaussianInput):
        return {
            "kind": "iid-gaussian",
            "mean": proc.mean.tolist(),
            "covariance": proc.covariance.tolist(),
        }
    if isinstance(proc, Ar1Input):
        return {
            "kind": "ar1",
            "matrix": proc.matrix.tolist(),
            "innovation": _input_to_dict(proc.innovation),
            "initial_mean": proc.initial_mean.tolist(),
            "initial_covariance": proc.initial_covariance.tolist(),
        }
    raise ConfigurationError(f"unknown input process {type(proc).__name__}")


def _input_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind == "iid-categorical":
        return CategoricalInput(np.array(doc["probabilities"]))
    if kind == "iid-gaussian":
        return GaussianInput(np.array(doc["mean"]), np.array(doc["covariance"]))
    if kind == "ar1":
        return Ar1Input(
            np.array(doc["matrix"]),
            _input_from_dict(doc["innovation"]),
            np.array(doc["initial_mean"]),
            np.array(doc["initial_covariance"]),
        )
    raise ConfigurationError(f"unknown input process kind {kind!r}")


def spec_to_dict(spec) -> dict:
    doc = {"schema": SYSTEM_SCHEMA, "kind": spec.kind}
    if isinstance(spec, SWITCHED_KINDS):
        doc["maps"] = [
            {"matrix": m.matrix.tolist(), "offset": m.offset.tolist()}
            for m in spec.ensemble.maps
        ]
        doc["probabilities"] = spec.ensemble.probabilities.tolist()
        if isinstance(spec, SwitchedAffineSystem):
            doc["input_probabilities"] = spec.inputs.probabilities.tolist()
    elif isinstance(spec, LinearSystem):
        doc["transition"] = spec.transition.tolist()
        doc["input_matrix"] = spec.input_matrix.tolist()
        doc["input_process"] = _input_to_dict(spec.inputs)
    elif isinstance(spec, OuSystem):
        doc.update({"mean": spec.mean, "alpha": spec.alpha, "sigma": spec.sigma})
    else:
        raise ConfigurationError(f"unknown system kind {type(spec).__name__}")
    return doc


def spec_from_dict(doc: dict):
    kind = doc.get("kind")
    if kind in ("ifs", "switched-affine"):
        maps = tuple(
            AffineMap(np.array(m["matrix"]), np.array(m["offset"])) for m in doc["maps"]
        )
        ensemble = MapEnsemble(maps, np.array(doc["probabilities"]))
        if kind == "ifs":
            return IfsSystem(ensemble)
        return SwitchedAffineSystem(
            ensemble, CategoricalInput(np.array(doc["input_probabilities"]))
        )
    if kind == "linear":
        return LinearSystem(
            np.array(doc["transition"]),
            np.array(doc["input_matrix"]),
            _input_from_dict(doc["input_process"]),
        )
    if kind == "ou":
        return OuSystem(doc["mean"], doc["alpha"], doc["sigma"])
    raise ConfigurationError(f"unknown system kind {kind!r}")


def spec_to_json(spec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2)


def spec_from_json(text: str):
    return spec_from_dict(json.loads(text))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write ``t,x_0..x_{d-1},u_0..u_{du-1}`` rows; the t=0 row has no input."""
    states = traj.states
    inputs = traj.inputs if traj.inputs.ndim == 2 else traj.inputs[:, None]
    dx = states.shape[1]
    du = inputs.shape[1]
    header = (
        "t,"
        + ",".join(f"x_{i}" for i in range(dx))
        + ","
        + ",".join(f"u_{i}" for i in range(du))
    )
    lines = [header]
    for t in range(states.shape[0]):
        cells = [str(t)] + [repr(float(v)) for v in states[t]]
        if t == 0:
            cells += [""] * du
        elif np.issubdtype(traj.inputs.dtype, np.integer):
            cells += [str(int(v)) for v in inputs[t - 1]]
        else:
            cells += [repr(float(v)) for v in inputs[t - 1]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
