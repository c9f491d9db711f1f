"""Simulator and verification harness for online collateral maintenance.

A settlement operator holds collateral C and commits part of it against
incoming transactions; committed collateral is reclaimed only by flushing,
which knocks the flushed capacity offline for F slots.  This package
provides the slot-level machines (wallet banks and a divisible pool), the
online policies from the accompanying analysis, brute-force offline
optima, workload generators and adversaries, closed-form competitive
ratios, and a harness that measures policies against their proven bounds.
"""

from .model import (
    PPM,
    CollateralError,
    Event,
    EventTrace,
    FlushExceedsCommitted,
    InsufficientCollateral,
    InvalidParams,
    ModelParams,
    RunResult,
    Transaction,
    TransactionSequence,
    WalletBank,
    CollateralPool,
    WalletOffline,
    validate_window_bound,
)
from .policies import (
    POLICY_KINDS,
    FlushAllPolicy,
    FlushTwoWhenFullPolicy,
    FlushWhenFullPolicy,
    RandTwoPolicy,
    ThresholdPolicy,
    make_policy,
)
from .oracles import (
    DEFAULT_BUDGET,
    BudgetExceeded,
    OracleBudget,
    feasible_window_check,
    greedy_feasible_value,
    opt_general_utility,
    opt_general_value,
    opt_general_value_sim,
    opt_kwallet_value,
    opt_utility_upper_bound,
    opt_value_extend,
    window_upper_bound,
)
from .workloads import (
    WORKLOAD_KINDS,
    Thm3Adversary,
    WorkloadSpec,
    epoch_burst_seq,
    fwf_killer_seq,
    gen_stochastic,
    read_sequence_csv,
    write_sequence_csv,
)
from .formulas import (
    DomainError,
    eta_alpha,
    eta_star,
    eta_star_ratio,
    fa_ratio,
    ftwf_ratio,
    fwf_ratio,
    k_star,
    kwallet_profit_inflation,
)
from .harness import (
    ExhaustSpace,
    ExperimentConfig,
    exhaustive_verify,
    measure_ratio,
    run_adversary,
    run_policy,
    run_sequence,
    sweep,
)

__version__ = "0.1.0"

__all__ = [
    "PPM",
    "CollateralError",
    "Event",
    "EventTrace",
    "FlushExceedsCommitted",
    "InsufficientCollateral",
    "InvalidParams",
    "ModelParams",
    "RunResult",
    "Transaction",
    "TransactionSequence",
    "WalletBank",
    "CollateralPool",
    "WalletOffline",
    "validate_window_bound",
    "POLICY_KINDS",
    "FlushAllPolicy",
    "FlushTwoWhenFullPolicy",
    "FlushWhenFullPolicy",
    "RandTwoPolicy",
    "ThresholdPolicy",
    "make_policy",
    "DEFAULT_BUDGET",
    "BudgetExceeded",
    "OracleBudget",
    "feasible_window_check",
    "greedy_feasible_value",
    "opt_general_utility",
    "opt_general_value",
    "opt_general_value_sim",
    "opt_kwallet_value",
    "opt_utility_upper_bound",
    "opt_value_extend",
    "window_upper_bound",
    "WORKLOAD_KINDS",
    "Thm3Adversary",
    "WorkloadSpec",
    "epoch_burst_seq",
    "fwf_killer_seq",
    "gen_stochastic",
    "read_sequence_csv",
    "write_sequence_csv",
    "DomainError",
    "eta_alpha",
    "eta_star",
    "eta_star_ratio",
    "fa_ratio",
    "ftwf_ratio",
    "fwf_ratio",
    "k_star",
    "kwallet_profit_inflation",
    "ExhaustSpace",
    "ExperimentConfig",
    "exhaustive_verify",
    "measure_ratio",
    "run_adversary",
    "run_policy",
    "run_sequence",
    "sweep",
]
