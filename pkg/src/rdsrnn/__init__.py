"""Random dynamical systems, contraction diagnostics, and recurrent-network
trajectory approximation experiments."""

from .backend import NUMBA_ENABLED
from .contraction import (ContractionReport, DecayFit, contraction_report,
                          estimate_contraction, exact_affine_bound, fit_decay)
from .errors import (ConfigurationError, CouplingCollapseError, DivergenceError,
                     EnumerationLimitError, FixedPointError, NonFiniteError)
from .experiments import (ErrorCurve, ExperimentConfig, compute_error_curve,
                          run_experiment)
from .kalman import (FilterState, LgssmModel, decode_filter_state,
                     encode_filter_state, filter_trajectory, kalman_step,
                     riccati_fixed_point, simulate_lgssm)
from .linalg import spectral_norm, spectral_radius
from .rnn import (MemoryBankLayer, Network, NetworkState, Topology,
                  build_memory_bank, forward_step, lipschitz_feedback_bound,
                  load_network, network_from_json, network_to_json, one_hot,
                  rollout, rollout_batch, save_network)
from .systems import (AffineMap, Ar1Input, CategoricalInput, GaussianInput,
                      IfsSystem, LinearSystem, MapEnsemble, OuSystem,
                      SwitchedAffineSystem, Trajectory, TrajectoryBatch,
                      backward_compose, sample_map_index, simulate,
                      simulate_batch, spec_from_json, spec_to_json,
                      stack_linear, step, trajectory_to_csv)
from .train import TrainConfig, TrainReport, bptt_gradient, init_network, mse_loss, train

__version__ = "0.1.0"
