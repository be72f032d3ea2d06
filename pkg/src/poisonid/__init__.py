"""Source identification when an adversary corrupts the training set.

The defender sees a training sequence (partly attacker-controlled, fraction
alpha) and a test sequence (distorted within an average per-letter budget L)
and must decide whether the test came from the training source.  The library
provides the exact worst-case-corruption decision rule, the attacker's
optimal strategies, equilibrium analysis (security margins, blinding levels,
error exponents), and a Monte Carlo simulator that validates the asymptotic
theory at finite n.
"""
from .analysis import (ExponentResult, SecurityMarginResult, blinding_level,
                       error_exponent, gamma0_membership, gamma_membership,
                       indist_membership, region_radius, security_margin)
from .attacker import (AttackResult, attack_nontargeted_addition,
                       attack_targeted_addition, attack_targeted_replacement,
                       attack_test)
from .config import GameConfig, Variant
from .defender import (DecisionOutcome, decide, statistic,
                       statistic_addition, statistic_replacement)
from .pmf import (EmpiricalType, Pmf, delta_n, empirical_type, h_c,
                  kl_divergence, l1_distance)
from .simulate import (SimulationReport, exponent_sweep, hausdorff_distance,
                       run_game_trials, sanov_probe)
from .transport import (CostMatrix, TransportMap, col_marginal, emd,
                        is_admissible, map_distance, map_distortion,
                        perturb_map, quantize_map, row_marginal)

__version__ = "0.1.0"

__all__ = [
    "Pmf", "EmpiricalType", "empirical_type", "kl_divergence", "l1_distance",
    "h_c", "delta_n",
    "GameConfig", "Variant",
    "CostMatrix", "TransportMap", "row_marginal", "col_marginal",
    "map_distortion", "map_distance", "is_admissible", "emd", "quantize_map",
    "perturb_map",
    "DecisionOutcome", "decide", "statistic", "statistic_addition",
    "statistic_replacement",
    "AttackResult", "attack_test", "attack_targeted_addition",
    "attack_targeted_replacement", "attack_nontargeted_addition",
    "SecurityMarginResult", "ExponentResult", "security_margin",
    "blinding_level", "error_exponent", "region_radius",
    "gamma0_membership", "gamma_membership", "indist_membership",
    "SimulationReport", "run_game_trials", "exponent_sweep", "sanov_probe",
    "hausdorff_distance",
    "__version__",
]
