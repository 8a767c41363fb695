"""Simulator and analysis suite for learning dynamics in sequential
correlated-agreement peer prediction."""

__version__ = "0.1.0"

from .agents import (
    AgentPolicy,
    CollusionPolicy,
    ConsistentPolicy,
    EpsilonGreedyPolicy,
    RewardBasedPolicy,
    UpdateFunctionSpec,
    UpdateKind,
    adversarial_necessity_run,
    capped_softmax,
    certify,
    check_exchangeability,
    check_full_exploitation,
    check_order_preservation,
    check_reward_floor,
    choose_strategy,
    custom,
    evaluate_update_function,
    fpl,
    ftl,
    hedge1,
    hedge2,
    replicator,
    update_probabilities,
)
from .analysis import (
    ConsistentStrategy,
    ConvergenceReport,
    DriftEstimate,
    EventTimeline,
    InsufficientData,
    best_response_grid,
    bne_expected_payoff,
    conditional_drift,
    converge_proportion,
    convergence_round,
    counterfactual_paths,
    event_timeline,
    ledger_paths,
    regret,
    regret_series,
    reports_from_trace,
    visited_ledger_rows,
)
from .engine import (
    GameState,
    RoundRecord,
    RunTrace,
    SimulationConfig,
    TraceSet,
    run_replications,
    run_round,
    run_simulation,
)
from .ledger import InvariantViolation, RewardLedger, leader_gap, ledger_update
from .mechanism import (
    RankKMechanism,
    RoundPayment,
    Strategy,
    apply_strategy,
    ca_payment,
    ca_rank2,
    counterfactual_vector,
)
from .signals import (
    DEFAULT_DISTRIBUTION,
    DistributionError,
    DriftConstants,
    NotPositivelyCorrelated,
    SignalDistribution,
    SumNotOne,
    ZeroMass,
    drift_constants,
    sample_signal_pair,
    sample_signal_pairs,
    validate_distribution,
)
