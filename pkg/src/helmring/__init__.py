"""Forward and inverse multi-frequency impedance scattering on annuli."""

from .errors import (BudgetExceededError, DomainError, HelmringError,
                     IllConditionedRuleError, ImpedanceBlowupError,
                     NonvanishingFieldError, StepResolutionError)
from .forward import (FieldState, ImpedanceData, RadialPotential,
                      boundary_state, cosine_potential, gaussian_bump,
                      generate_data, integrate_inward, square_well,
                      zero_potential)
from .harness import (ErrorReport, ExperimentSpec, SlopeReport,
                      convergence_study, preset, preset_names, run_experiment)
from .inversion import (ImpedanceState, ReconstructionConfig,
                        ReconstructionResult, euler_march, evolve_impedance,
                        heun_cn_march, q_derivative, reconstruct, riccati_rhs,
                        trace_integrand)
from .quadrature import (FoldedGrid, FrequencyGrid, LogBasisSpec, PanelRule,
                         accelerated_grid, fold_grid, graded_log_panels,
                         moment_fitted_rule, richardson_combine,
                         trapezoid_grid)
from .specfun import CylinderFunctionValue, eval_cylinder, free_impedance

__version__ = "0.1.0"
