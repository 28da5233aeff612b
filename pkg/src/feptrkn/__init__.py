"""Functionally fitted explicit pseudo two-step Runge-Kutta-Nystrom integrators."""
from .basis import BasisSet, eval_basis, make_basis, parse_basis
from .coeffs import (CoefficientTableau, CollocationMatrix, DenseCoefficients, EmbeddedTableau,
                     build_F, solve_dense, solve_embedded, solve_tableau, solve_variable_A)
from .errors import ConfigurationError, FeptrknError, NumericError
from .integrator import (StepController, StepState, Trajectory, compute_ncd, dense_eval,
                         endpoint_error, integrate_adaptive, integrate_fixed, start_stages,
                         step_fixed)
from .methods import REGISTRY, MethodSpec, get_method
from .nodes import NodeVector, node_conditions, solve_nodes
from .problems import Problem, bett, dahlquist, newt, parse_problem, solve_kepler
from .stability import amplification, radius_gap, scan_region, similarity_check, spectral_radius

__version__ = "0.1.0"
