"""Steady-state quantum optomechanics: operating points, stability, covariance
matrices, cooling figures of merit and Gaussian entanglement."""

from .errors import (ConvergenceError, DegeneracyError, InstabilityError, OptomechError,
                     PhysicalityError, ValidationError)
from .model import (DerivedParams, LinearizedModel, PhysicalParams, coupling_from_power,
                    derive_params, effective_coupling, hybrid_model, power_for_coupling,
                    single_mode_model, two_mode_model)
from .steady_state import OperatingPoint, select_branch, solve_single_mode, solve_two_mode
from .stability import (StabilityReport, balanced_condition_check, cold_damping_stability,
                        routh_hurwitz_single, stability_report, two_mode_char_poly)
from .lyapunov import CovarianceMatrix, solve_lyapunov, steady_state_cm, symplectic_eigenvalues
from .gaussian import (BipartiteBlocks, log_negativity, log_negativity_modes, simon_criterion,
                       swap_fidelity, tripartite_class)
from .cooling import (CoolingReport, FeedbackConfig, backaction_variances, feedback_variances,
                      optimize_feedback)
from .output_modes import (FilterSpec, check_orthonormality, output_cm, sideband_entanglement,
                           two_mode_output_cm)
from .oracle import SimConfig, simulate_cm, simulate_filtered_output

__version__ = "0.1.0"
