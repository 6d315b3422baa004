"""Detectability and stabilizability of dynamical systems on weighted graphs."""

__version__ = "0.1.0"

from .graph import (  # noqa: E402
    WeightedGraph,
    adjacency_matrix,
    generate_graph,
    is_irreducible_bruteforce,
    is_strongly_connected,
    laplacian,
    parse_graph,
)
from .matfun import expm, expm_taylor_oracle, induced_inf_norm, row_sums  # noqa: E402
from .certs import check_inf_norm_uniqueness, check_positivity, check_right_stochastic  # noqa: E402
from .detectability import (  # noqa: E402
    DetectabilityReport,
    OutputSpec,
    certify_detectability,
    certify_stabilizability,
    numeric_detectability,
    observability_gramian,
)
from .dynamics import LpvSchedule, discretize, lpv_detectability, lpv_transition, simulate  # noqa: E402
from .estimation import KalmanConfig, kalman_step, run_estimator  # noqa: E402
