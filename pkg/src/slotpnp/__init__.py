"""Structure-preserving finite-difference solver for the Poisson-Nernst-Planck
equations in Slotboom form: periodic staggered-grid operators, four mobility
means, a semi-implicit positivity-preserving stepper, property diagnostics,
and a manufactured-solutions convergence harness."""

from .backend import active_backend, select_backend
from .diagnostics import (ErrorNorms, StepReport, dissipation_rate, error_norms,
                          flux, free_energy, tau_star, total_mass)
from .errors import (ConfigError, GridMismatchError, IncompatibleRhsError,
                     NonConvergenceError, PositivityViolationError, SlotpnpError)
from .grid import (CellField, FaceField, GridSpec, avg_forward, diff_forward,
                   divergence, face_inner, gradient, inner, laplacian, mean, norm,
                   weighted_laplacian)
from .mms import (ConvergenceTable, ManufacturedCase, build_paper_case,
                  convergence_table, run_case)
from .mobility import MeanKind, face_mobility
from .poisson import PoissonProblem, poisson_residual, solve_poisson
from .transport import (SchemeConfig, Species, State, apply_transport_operator,
                        solve_spd, step, step_species, step_with_stats)

__version__ = "0.1.0"
