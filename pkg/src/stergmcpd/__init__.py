"""Multiple change point detection for dynamic networks.

A time-heterogeneous separable temporal ERGM is fitted by maximum pseudo
likelihood under a group fused lasso penalty (ADMM), and change points are
read off the standardized parameter differences, with the penalty chosen by
BIC.
"""
from .detect import DetectionConfig, DetectionResult, LambdaFit, detect_change_points
from .evaluate import abs_error, covering, hausdorff_one_sided
from .network import NetworkError, NetworkSeries, NetworkSnapshot, NodalAttributes
from .plik import pseudo_loglik
from .simulate import SbmScenario, StergmScenario, scenario2, simulate_sbm_series, simulate_stergm_series
from .solver import SolverConfig, SolverError, run_admm
from .stats import StatisticSpec, Term, build_change_stat_blocks

__all__ = [
    "DetectionConfig",
    "DetectionResult",
    "LambdaFit",
    "NetworkError",
    "NetworkSeries",
    "NetworkSnapshot",
    "NodalAttributes",
    "SbmScenario",
    "SolverConfig",
    "SolverError",
    "StatisticSpec",
    "StergmScenario",
    "Term",
    "abs_error",
    "build_change_stat_blocks",
    "covering",
    "detect_change_points",
    "hausdorff_one_sided",
    "pseudo_loglik",
    "run_admm",
    "scenario2",
    "simulate_sbm_series",
    "simulate_stergm_series",
]
__version__ = "0.1.0"
