"""Ready-made systems and networks used by the experiments and tests."""

import numpy as np

from .rnn import Network, Topology
from .systems import AffineMap, IfsSystem, MapEnsemble, OuSystem


def barnsley_fern() -> IfsSystem:
    """The classic four-map fern ensemble on the plane."""
    maps = (
        AffineMap([[0.00, 0.00], [0.00, 0.16]], [0.00, 0.00]),
        AffineMap([[0.85, 0.04], [-0.04, 0.85]], [0.00, 1.60]),
        AffineMap([[0.20, -0.26], [0.23, 0.22]], [0.00, 1.60]),
        AffineMap([[-0.15, 0.28], [0.26, 0.24]], [0.00, 0.44]),
    )
    return IfsSystem(MapEnsemble(maps, [0.01, 0.85, 0.07, 0.07]))


def simplified_fern() -> IfsSystem:
    """Two-map fern variant; small enough to learn from short samples."""
    maps = (
        AffineMap([[0.40, -0.3733], [0.060, 0.60]], [0.3533, 0.00]),
        AffineMap([[-0.80, -0.1867], [0.1371, 0.80]], [1.10, 0.10]),
    )
    return IfsSystem(MapEnsemble(maps, [0.2993, 0.7007]))


def crossed_expansion_ensemble() -> MapEnsemble:
    """Two maps, each expanding one axis by 10/9 and halving the other.

    Neither map is contractive, and the one-step average map norm is 10/9;
    two-step compositions contract on average.
    """
    maps = (
        AffineMap([[10.0 / 9.0, 0.0], [0.0, 0.5]], [0.0, 0.0]),
        AffineMap([[0.5, 0.0], [0.0, 10.0 / 9.0]], [0.0, 0.0]),
    )
    return MapEnsemble(maps, [0.5, 0.5])


def ou_identity_network(mean: float, alpha: float, bias: float,
                        output_offset: float = 0.0) -> Network:
    """Single-ReLU network reproducing the scalar mean-reverting update.

    Computes ``max(0, u + mean - alpha*mean + bias + alpha*x) - bias +
    output_offset``, which equals the OU step plus a constant per-step
    offset whenever the ReLU argument is positive (``bias`` large enough).
    """
    top = Topology((1, 1, 1), feedback="last-layer")
    return Network(
        topology=top,
        weights=[np.array([[1.0]]), np.array([[1.0]])],
        biases=[np.array([mean - alpha * mean + bias]), np.array([-bias + output_offset])],
        phi_weights=[np.array([[alpha]])],
        phi_biases=[np.array([0.0])],
    )


def ou_system(mean: float = 20.0, alpha: float = 0.99, sigma: float = 1.0) -> OuSystem:
    return OuSystem(mean, alpha, sigma)
