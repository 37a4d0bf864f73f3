"""Normal-form game dynamics: sampled best responses, policy iteration, FP variants and metrics."""

from .dynamics import (DynamicsConfig, RunTrace, run_brpi, run_dynamics, run_fp, run_fp_sbr,
                       run_ibr, trailing_mean)
from .game import BlottoParams, Game, blotto_payoff, build_game, enumerate_allocations
from .metagame import (MetaGameTable, NashLeague, build_one_vs_rest_table, nash_league,
                       sbr_exploit_lower_bound, wilson_interval)
from .metrics import QreConfig, ccedist, nashconv, qre_solve, zero_sum_qre
from .responses import SBRConfig, exact_best_response, sampled_best_response
from .strategy import CorrelationDevice, MixedStrategy, PolicyHistory, ProductProfile

__version__ = "0.1.0"

__all__ = [
    "BlottoParams", "CorrelationDevice", "DynamicsConfig", "Game", "MetaGameTable",
    "MixedStrategy", "NashLeague", "PolicyHistory", "ProductProfile", "QreConfig", "RunTrace",
    "SBRConfig", "blotto_payoff", "build_game", "build_one_vs_rest_table", "ccedist",
    "enumerate_allocations", "exact_best_response", "nash_league", "nashconv", "qre_solve", "zero_sum_qre",
    "run_brpi", "run_dynamics", "run_fp", "run_fp_sbr", "run_ibr", "sampled_best_response",
    "sbr_exploit_lower_bound", "trailing_mean", "wilson_interval",
]
