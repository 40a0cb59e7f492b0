"""Contraction-on-average diagnostics.

For finite affine ensembles the window-``k`` moment bound is computed by
exact enumeration of all ``K^k`` map sequences; for general systems it is
estimated by coupled Monte-Carlo (the same realised maps applied to both
initial points). A log-linear fit of bound against window length recovers
the decay constants when the fit is credible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, CouplingCollapseError, EnumerationLimitError
from .linalg import spectral_norm
from .systems import MapEnsemble, draw_input_batch, evolve

ENUMERATION_CAP = 10 ** 7
MIN_FIT_WINDOWS = 3
FIT_R2_GATE = 0.9


@dataclass
class DecayFit:
    """Result of the log-linear decay fit.

    ``rate`` and ``scale`` are set only when the slope is negative and the
    fit quality passes the gate; otherwise ``contractive`` is False.
    """

    contractive: bool
    scale: float | None  # multiplier C in C * rate**k
    rate: float | None
    r_squared: float


@dataclass
class ContractionReport:
    window_bounds: list  # (window length, bound) pairs
    p: float
    fit: DecayFit

    def to_dict(self) -> dict:
        return {
            "schema": "rdsrnn-contraction/1",
            "p": self.p,
            "window_bounds": [[int(k), float(b)] for k, b in self.window_bounds],
            "contractive": self.fit.contractive,
            "scale": self.fit.scale,
            "rate": self.fit.rate,
            "r_squared": self.fit.r_squared,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def exact_affine_bound(ensemble: MapEnsemble, window: int, p: float) -> float:
    """Exact moment bound for a window of ``window`` random affine maps.

    Sums, over every ordered map sequence, the sequence probability times the
    spectral norm of the composed linear part raised to ``p``. Refuses when
    ``K**window`` exceeds the enumeration cap.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    if p < 1:
        raise ValueError("p must be at least 1")
    n_maps = len(ensemble.maps)
    if n_maps ** window > ENUMERATION_CAP:
        raise EnumerationLimitError(
            f"{n_maps}**{window} sequences exceed the enumeration cap {ENUMERATION_CAP}"
        )
    mats = ensemble.matrices()
    probs = ensemble.probabilities

    def descend(depth: int, prob: float, product: np.ndarray) -> float:
        if depth == window:
            return prob * spectral_norm(product) ** p
        total = 0.0
        for i in range(n_maps):
            # later draws act after earlier ones, so they multiply from the left
            total += descend(depth + 1, prob * probs[i], mats[i] @ product)
        return total

    return float(descend(0, 1.0, np.eye(ensemble.dim)))


def estimate_contraction(spec, x, x0, s: int, t: int, p: float,
                         n_samples: int, seed: int) -> float:
    """Coupled Monte-Carlo estimate of the window ``(s, t]`` moment ratio.

    Both initial points evolve under identical realised inputs; the estimate
    is the mean ``p``-th power distance at time ``t`` over the mean at time
    ``s``. Raises ``CouplingCollapseError`` when the trajectories have
    already merged at time ``s``.
    """
    if not t > s >= 0:
        raise ValueError("need t > s >= 0")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if np.array_equal(x, x0):
        raise ValueError("initial points must differ")
    inputs = draw_input_batch(spec.input_process, t, n_samples, seed)
    a = evolve(spec, np.broadcast_to(x, (n_samples, len(x))), inputs)
    b = evolve(spec, np.broadcast_to(x0, (n_samples, len(x0))), inputs)
    gaps = np.linalg.norm(a - b, axis=2) ** p
    denominator = float(gaps[:, s].mean())
    if denominator < 1e-300:
        raise CouplingCollapseError(f"coupled trajectories merged by step {s}")
    return float(gaps[:, t].mean()) / denominator


def fit_decay(window_bounds) -> DecayFit:
    """Ordinary least squares of log(bound) against window length.

    Declares the system non-contractive when the slope is nonnegative or the
    fit explains less than ``FIT_R2_GATE`` of the variance.
    """
    pairs = [(int(k), float(b)) for k, b in window_bounds]
    if len(pairs) < MIN_FIT_WINDOWS:
        raise ValueError(f"need at least {MIN_FIT_WINDOWS} windows, got {len(pairs)}")
    if any(b <= 0.0 for _, b in pairs):
        raise ValueError("window bounds must be positive for a log fit")
    ks = np.array([k for k, _ in pairs], dtype=float)
    logs = np.log([b for _, b in pairs])
    slope, intercept = np.polyfit(ks, logs, 1)
    residuals = logs - (slope * ks + intercept)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    if ss_tot > 0.0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res == 0.0 else 0.0
    # rounding in the fit can turn an exactly flat sequence into slope ~ -1e-17
    if slope >= -1e-12 or r_squared < FIT_R2_GATE:
        return DecayFit(contractive=False, scale=None, rate=None, r_squared=r_squared)
    return DecayFit(
        contractive=True,
        scale=float(np.exp(intercept)),
        rate=float(np.exp(slope)),
        r_squared=r_squared,
    )


def contraction_report(ensemble: MapEnsemble, windows, p: float) -> ContractionReport:
    """Exact window bounds over ``windows`` plus the fitted decay."""
    bounds = [(int(k), exact_affine_bound(ensemble, int(k), p)) for k in windows]
    return ContractionReport(window_bounds=bounds, p=float(p), fit=fit_decay(bounds))
