"""Diffusion Kalman filtering over sensor networks, with stability certificates."""

from ._linalg import NumericalError
from .analysis import (
    StabilityCertificate,
    StackedErrorSystem,
    bias_propagation,
    build_stacked_system,
    centralized_closed_loop_radius,
    contraction_certificate,
    eigen_range_report,
    error_recursion_step,
    pbh_detectability,
    pbh_stabilizability,
    stack_errors,
    unstack_errors,
)
from .experiment import ExperimentConfig, build_scenario, certify, reference_scenario, run_experiment
from .filters import (
    DiffusionKalmanFilter,
    centralized_gain,
    centralized_riccati_step,
    centralized_step,
    classical_local_riccati_step,
    converge_centralized_riccati,
    converge_distributed_riccati,
    diffusion_step,
    distributed_gain,
    distributed_riccati_step,
    pz_form_step,
)
from .model import (
    NodeObservationModel,
    StateSpaceModel,
    Trajectory,
    make_tracking_model,
    sample_gaussian,
    simulate_trajectory,
)
from .network import (
    CombinationMatrix,
    Network,
    build_network,
    generate_paper_topology,
    is_primitive,
    k_hop_neighborhood,
    uniform_weights,
)

__version__ = "0.1.0"
