"""Detection-efficiency thresholds and loophole simulation for the PBR experiment."""

from .errors import InfeasibleError
from .loophole_sim import AdversaryCoupling, ExperimentStats, build_adversary, run_experiment
from .overlap_models import EpistemicModel, ModelKind, invert_parameter, overlap_p
from .pbr_circuit import (
    CircuitParams,
    ForbiddenMatching,
    Preparation,
    ProbabilityMatrix,
    find_forbidden_parameters,
    forbidden_matching,
    prepare_state,
    probability_matrix,
)
from .statevector import (
    StateVector,
    apply_selective_phase,
    apply_single_qubit_gate,
    born_probabilities,
    tensor_product,
)
from .thresholds import (
    DesignOptimum,
    ThresholdPoint,
    critical_efficiency,
    critical_model_parameter,
    eta_of_theta,
    mermin_threshold,
    min_qubits,
    optimal_design,
    sweep_eta_theta,
    table_one,
    theta_min,
)

__version__ = "0.1.0"
