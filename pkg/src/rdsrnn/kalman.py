"""Linear-Gaussian state-space simulation and the exact Kalman filter.

The filter state ``(mean, covariance)`` evolves as a time-invariant
dynamical system driven by the observation sequence; the covariance (and
hence the gain) is observation-independent, so batched filtering precomputes
the gain sequence once and runs only the mean recursion per trajectory.
Solves against the innovation covariance go through Cholesky factors; a
failed factorization is reported, never patched with a pseudo-inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, FixedPointError
from .linalg import spectral_norm, spectral_radius
from .rng import stream
from .systems import _as_matrix, _as_vector, _check_psd, _psd_factor

RICCATI_MAX_ITER = 10 ** 6


@dataclass(frozen=True)
class LgssmModel:
    """Signal ``z' = transition z + noise(process_cov)`` observed through
    ``u = emission z + noise(obs_cov)``, with a Gaussian initial law."""

    transition: np.ndarray   # (dz, dz)
    emission: np.ndarray     # (du, dz)
    process_cov: np.ndarray  # (dz, dz) PSD
    obs_cov: np.ndarray      # (du, du) PSD (PD required for filtering)
    init_mean: np.ndarray    # (dz,)
    init_cov: np.ndarray     # (dz, dz) PSD

    def __post_init__(self):
        g = _as_matrix(np.atleast_2d(np.asarray(self.transition, float)), "transition")
        h = _as_matrix(np.atleast_2d(np.asarray(self.emission, float)), "emission")
        q = _as_matrix(np.atleast_2d(np.asarray(self.process_cov, float)), "process_cov")
        r = _as_matrix(np.atleast_2d(np.asarray(self.obs_cov, float)), "obs_cov")
        m0 = _as_vector(self.init_mean, "init_mean")
        c0 = _as_matrix(np.atleast_2d(np.asarray(self.init_cov, float)), "init_cov")
        dz = g.shape[0]
        if g.shape != (dz, dz):
            raise ConfigurationError("transition must be square")
        if h.shape[1] != dz:
            raise ConfigurationError("emission columns must match the signal dimension")
        du = h.shape[0]
        if q.shape != (dz, dz) or r.shape != (du, du):
            raise ConfigurationError("noise covariance shapes do not match the model")
        if m0.shape != (dz,) or c0.shape != (dz, dz):
            raise ConfigurationError("initial law shapes do not match the model")
        _check_psd(q, "process_cov")
        _check_psd(r, "obs_cov")
        _check_psd(c0, "init_cov")
        for name, value in (("transition", g), ("emission", h), ("process_cov", q),
                            ("obs_cov", r), ("init_mean", m0), ("init_cov", c0)):
            object.__setattr__(self, name, value)

    @property
    def signal_dim(self) -> int:
        return self.transition.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.emission.shape[0]

    def to_dict(self) -> dict:
        return {
            "transition": self.transition.tolist(),
            "emission": self.emission.tolist(),
            "process_cov": self.process_cov.tolist(),
            "obs_cov": self.obs_cov.tolist(),
            "init_mean": self.init_mean.tolist(),
            "init_cov": self.init_cov.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LgssmModel":
        return cls(*(np.array(doc[k]) for k in (
            "transition", "emission", "process_cov", "obs_cov", "init_mean", "init_cov")))


@dataclass
class FilterState:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = _as_vector(self.mean, "mean")
        self.cov = _as_matrix(np.atleast_2d(np.asarray(self.cov, float)), "cov")
        if self.cov.shape != (len(self.mean),) * 2:
            raise ConfigurationError("covariance shape does not match the mean")
        _check_psd(self.cov, "cov")


def initial_filter_state(model: LgssmModel) -> FilterState:
    return FilterState(model.init_mean.copy(), model.init_cov.copy())


def _spd_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve with a symmetric positive-definite matrix via its Cholesky factor."""
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("innovation covariance is not positive definite") from exc
    y = np.linalg.solve(chol, rhs)
    return np.linalg.solve(chol.T, y)


def _gain_and_cov(model: LgssmModel, cov: np.ndarray, joseph: bool):
    g, h, q, r = model.transition, model.emission, model.process_cov, model.obs_cov
    predicted = g @ cov @ g.T + q
    innovation = r + h @ predicted @ h.T
    gain = _spd_solve(innovation, h @ predicted.T).T
    if joseph:
        closed = np.eye(model.signal_dim) - gain @ h
        new_cov = closed @ predicted @ closed.T + gain @ r @ gain.T
    else:
        new_cov = (np.eye(model.signal_dim) - gain @ h) @ predicted
    new_cov = 0.5 * (new_cov + new_cov.T)
    return gain, new_cov


def kalman_step(model: LgssmModel, state: FilterState, obs, joseph: bool = False) -> FilterState:
    """One filter update: optimal gain, then mean and covariance.

    The covariance is re-symmetrized every step; ``joseph=True`` switches to
    the stabilized covariance form.
    """
    obs = _as_vector(obs, "obs")
    if obs.shape != (model.obs_dim,):
        raise ValueError(f"observation has shape {obs.shape}, expected ({model.obs_dim},)")
    gain, new_cov = _gain_and_cov(model, state.cov, joseph)
    predicted_mean = model.transition @ state.mean
    new_mean = predicted_mean + gain @ (obs - model.emission @ predicted_mean)
    return FilterState(new_mean, new_cov)


def gain_sequence(model: LgssmModel, horizon: int, joseph: bool = False):
    """Gains, covariances, and closed-loop mean transitions for ``t=1..horizon``.

    These depend only on the model (not on observations), which is what makes
    batched filtering cheap.
    """
    gains = np.empty((horizon, model.signal_dim, model.obs_dim))
    covs = np.empty((horizon, model.signal_dim, model.signal_dim))
    closed = np.empty((horizon, model.signal_dim, model.signal_dim))
    cov = model.init_cov
    for t in range(horizon):
        gain, cov = _gain_and_cov(model, cov, joseph)
        gains[t] = gain
        covs[t] = cov
        closed[t] = model.transition - gain @ (model.emission @ model.transition)
    return gains, covs, closed


def filter_trajectory(model: LgssmModel, observations: np.ndarray, joseph: bool = False):
    """Filter means and covariances for one observation sequence (t = 1..T)."""
    obs = np.asarray(observations, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    state = initial_filter_state(model)
    means = np.empty((obs.shape[0], model.signal_dim))
    covs = np.empty((obs.shape[0], model.signal_dim, model.signal_dim))
    for t in range(obs.shape[0]):
        state = kalman_step(model, state, obs[t], joseph)
        means[t] = state.mean
        covs[t] = state.cov
    return means, covs


def filter_means_batch(model: LgssmModel, observations: np.ndarray) -> np.ndarray:
    """Filter means for a stack of observation sequences ``(n, T, du)``."""
    obs = np.ascontiguousarray(np.asarray(observations, dtype=float))
    if obs.ndim == 2:
        obs = obs[:, :, None]
    gains, _, closed = gain_sequence(model, obs.shape[1])
    return kernels.kalman_mean_batch(
        np.ascontiguousarray(closed), np.ascontiguousarray(gains), obs,
        np.ascontiguousarray(model.init_mean),
    )


def simulate_lgssm(model: LgssmModel, horizon: int, seed: int):
    """Sample ``(signals (T+1, dz), observations (T, du))`` from the model."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    gen = stream(seed, 0)
    z_factor = _psd_factor(model.init_cov)
    q_factor = _psd_factor(model.process_cov)
    r_factor = _psd_factor(model.obs_cov)
    signals = np.empty((horizon + 1, model.signal_dim))
    observations = np.empty((horizon, model.obs_dim))
    signals[0] = model.init_mean + z_factor @ gen.standard_normal(model.signal_dim)
    for t in range(horizon):
        shock = q_factor @ gen.standard_normal(model.signal_dim)
        signals[t + 1] = model.transition @ signals[t] + shock
        noise = r_factor @ gen.standard_normal(model.obs_dim)
        observations[t] = model.emission @ signals[t + 1] + noise
    return signals, observations


def simulate_lgssm_batch(model: LgssmModel, horizon: int, n_traj: int, seed: int,
                         stream_offset: int = 0):
    """Independent model draws; trajectory ``n`` uses stream ``stream_offset + n``."""
    signals = np.empty((n_traj, horizon + 1, model.signal_dim))
    observations = np.empty((n_traj, horizon, model.obs_dim))
    z_factor = _psd_factor(model.init_cov)
    q_factor = _psd_factor(model.process_cov)
    r_factor = _psd_factor(model.obs_cov)
    for n in range(n_traj):
        gen = stream(seed, stream_offset + n)
        signals[n, 0] = model.init_mean + z_factor @ gen.standard_normal(model.signal_dim)
        for t in range(horizon):
            signals[n, t + 1] = model.transition @ signals[n, t] \
                + q_factor @ gen.standard_normal(model.signal_dim)
            observations[n, t] = model.emission @ signals[n, t + 1] \
                + r_factor @ gen.standard_normal(model.obs_dim)
    return signals, observations


def riccati_fixed_point(model: LgssmModel, tol: float = 1e-12) -> np.ndarray:
    """Stationary filter covariance by iterating the update map from init_cov.

    Requires a strictly stable signal transition. Raises ``FixedPointError``
    if successive covariances have not come within ``tol`` (spectral norm)
    after the iteration cap.
    """
    if spectral_radius(model.transition) >= 1.0:
        raise ConfigurationError("riccati fixed point needs spectral radius < 1")
    cov = model.init_cov
    for _ in range(RICCATI_MAX_ITER):
        _, new_cov = _gain_and_cov(model, cov, joseph=False)
        if spectral_norm(new_cov - cov) < tol:
            return new_cov
        cov = new_cov
    raise FixedPointError(f"no fixed point within {RICCATI_MAX_ITER} iterations")


def encode_filter_state(state: FilterState) -> np.ndarray:
    """Mean followed by the covariance upper triangle in row-major order."""
    dz = len(state.mean)
    iu = np.triu_indices(dz)
    return np.concatenate([state.mean, state.cov[iu]])


def decode_filter_state(vector) -> FilterState:
    """Inverse of :func:`encode_filter_state`; validates the length."""
    v = _as_vector(vector, "encoded state")
    # length = dz + dz(dz+1)/2  =>  dz = (sqrt(9 + 8 len) - 3) / 2
    dz = int(round((np.sqrt(9.0 + 8.0 * len(v)) - 3.0) / 2.0))
    if dz < 1 or dz + dz * (dz + 1) // 2 != len(v):
        raise ValueError(f"encoded length {len(v)} does not match any dimension")
    mean = v[:dz]
    cov = np.zeros((dz, dz))
    iu = np.triu_indices(dz)
    cov[iu] = v[dz:]
    cov = cov + np.triu(cov, 1).T
    return FilterState(mean, cov)


def encode_filter_path(means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Row-wise encoding of a filter trajectory ``(T, dz)`` + ``(T, dz, dz)``."""
    dz = means.shape[1]
    iu = np.triu_indices(dz)
    return np.concatenate([means, covs[:, iu[0], iu[1]]], axis=1)
