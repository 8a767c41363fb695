"""Deterministic round loop and replication batches.

Randomness contract: every replication owns counter-based streams derived
as ``SeedSequence(master_seed, spawn_key=(run_index, lane))`` over a
Philox generator, with one lane per consumer: the signal sequence, each
agent's choice draws, and each agent's collusion script.  Every policy
pre-draws a fixed-shape block per run at setup, so a run's trace is a pure
function of (config, run_index) regardless of batch composition, thread
count, or execution order.

Within a round, strategies are drawn before the fresh signals are applied;
the draw distribution reads only the agent's own ledger (plus the round
index for epsilon-greedy), which keeps the choice/signal independence
explicit.  Agents never see the peer's raw signal, only what their own
counterfactual rewards reveal.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    AgentPolicy,
    CollusionPolicy,
    ConsistentPolicy,
    EpsilonGreedyPolicy,
    RewardBasedPolicy,
    UpdateKind,
    greedy_mixture,
    hedge2,
    softmax_rate,
    update_probabilities,
)
from .ledger import RewardLedger, check_counterfactual_batch, check_ledger_batch
from .ledger import InvariantViolation
from .mechanism import (
    RoundPayment,
    Strategy,
    agreement_payments,
    counterfactual_matrix,
    reports_for,
)
from .signals import DEFAULT_DISTRIBUTION, SignalDistribution, signal_pairs_from_uniforms

LANE_SIGNALS = 0
LANE_AGENT_A = 1
LANE_AGENT_B = 2
LANE_SCRIPT_A = 3
LANE_SCRIPT_B = 4

Seed = "int | tuple[int, ...]"


def lane_generator(master_seed, run_index: int, lane: int) -> np.random.Generator:
    """The stream one consumer of randomness owns within one replication."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(run_index, lane))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class SimulationConfig:
    distribution: SignalDistribution = DEFAULT_DISTRIBUTION
    policy_a: AgentPolicy = field(default_factory=lambda: RewardBasedPolicy(hedge2()))
    policy_b: AgentPolicy = field(default_factory=lambda: RewardBasedPolicy(hedge2()))
    rounds: int = 800
    replications: int = 400
    master_seed: "int | tuple[int, ...]" = 0
    trace_detail: str = "summary"
    invariant_checks: bool = True

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if self.trace_detail not in ("summary", "full"):
            raise ValueError(f"trace_detail must be summary or full, got {self.trace_detail!r}")


@dataclass(frozen=True)
class RoundRecord:
    """Everything observable about one simulated round."""

    t: int
    x: int
    y: int
    strat_a: Strategy
    strat_b: Strategy
    xhat: int
    yhat: int
    payment: RoundPayment
    cf_a: tuple[int, int, int, int]
    cf_b: tuple[int, int, int, int]


@dataclass
class RunTrace:
    """Per-round record of one replication, plus final ledgers.

    Strategy arrays hold the Strategy integer codes 1..4.  Reports,
    counterfactual vectors and full ledger paths are cheap to reconstruct,
    so they are not stored (see peerca.analysis).
    """

    run_index: int
    x: np.ndarray
    y: np.ndarray
    strat_a: np.ndarray
    strat_b: np.ndarray
    r: np.ndarray
    s: np.ndarray
    final_ledger_a: tuple[int, int, int, int]
    final_ledger_b: tuple[int, int, int, int]

    @property
    def rounds(self) -> int:
        return int(self.x.shape[0])


@dataclass
class TraceSet:
    config: SimulationConfig
    traces: list[RunTrace]


# --- vectorized policy drivers ----------------------------------------------
#
# Each driver pre-draws a fixed-shape block per run and answers "strategies
# for round t" as 0-based codes for a batch of runs in lockstep.


class _ProbDriver:
    """Common path: per-round probabilities inverted with one uniform per run."""

    def __init__(self, rngs, rounds: int):
        self._u = np.stack([rng.random(rounds) for rng in rngs])

    def probabilities(self, totals: np.ndarray, t: int) -> np.ndarray:
        raise NotImplementedError

    def choose(self, totals: np.ndarray, t: int) -> np.ndarray:
        probs = self.probabilities(totals, t)
        u = self._u[:, t - 1]
        return np.minimum((u[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1), 3)


class _UpdateFunctionDriver(_ProbDriver):
    def __init__(self, spec, rngs, rounds: int):
        super().__init__(rngs, rounds)
        self._spec = spec

    def probabilities(self, totals: np.ndarray, t: int) -> np.ndarray:
        return update_probabilities(self._spec, totals)


class _EpsilonGreedyDriver(_ProbDriver):
    def probabilities(self, totals: np.ndarray, t: int) -> np.ndarray:
        return greedy_mixture(totals, t)


class _ConsistentDriver(_ProbDriver):
    def __init__(self, policy: ConsistentPolicy, rngs, rounds: int):
        super().__init__(rngs, rounds)
        self._probs = policy.strategy_probabilities()[None, :]

    def probabilities(self, totals: np.ndarray, t: int) -> np.ndarray:
        return np.broadcast_to(self._probs, (totals.shape[0], 4))


class _PerturbedLeaderDriver:
    def __init__(self, noise_max: float, rngs, rounds: int):
        self._noise = np.stack([rng.random((rounds, 4)) for rng in rngs]) * noise_max

    def choose(self, totals: np.ndarray, t: int) -> np.ndarray:
        return np.argmax(totals + self._noise[:, t - 1, :], axis=1)


class _CollusionDriver:
    def __init__(self, rngs, rounds: int):
        coins = np.stack([rng.random(rounds) for rng in rngs])
        # 0-based codes: 2 = always report 1, 3 = always report 0.
        self._script = np.where(coins < 0.5, 2, 3).astype(np.int8)

    def choose(self, totals: np.ndarray, t: int) -> np.ndarray:
        return self._script[:, t - 1]


def _make_driver(policy: AgentPolicy, config, run_indices, agent_lane, script_lane):
    rounds = config.rounds
    if isinstance(policy, CollusionPolicy):
        rngs = [lane_generator(config.master_seed, i, script_lane) for i in run_indices]
        return _CollusionDriver(rngs, rounds)
    rngs = [lane_generator(config.master_seed, i, agent_lane) for i in run_indices]
    if isinstance(policy, RewardBasedPolicy):
        if policy.spec.kind == UpdateKind.FPL:
            return _PerturbedLeaderDriver(policy.spec.noise_max, rngs, rounds)
        if policy.spec.kind == UpdateKind.CUSTOM:
            raise ValueError("custom update functions are for checkers only, not simulation")
        if softmax_rate(policy.spec) is None and policy.spec.kind != UpdateKind.FTL:
            raise ValueError(f"unsupported update kind {policy.spec.kind}")
        return _UpdateFunctionDriver(policy.spec, rngs, rounds)
    if isinstance(policy, EpsilonGreedyPolicy):
        return _EpsilonGreedyDriver(rngs, rounds)
    if isinstance(policy, ConsistentPolicy):
        return _ConsistentDriver(policy, rngs, rounds)
    raise TypeError(f"unknown policy {policy!r}")


# --- batch execution ----------------------------------------------------------


class _BatchState:
    """Mutable per-batch state; one row per replication, advanced in lockstep."""

    def __init__(self, config: SimulationConfig, run_indices):
        n = len(run_indices)
        self.config = config
        self.run_indices = list(run_indices)
        self.t = 0
        self.R = np.zeros((n, 4), dtype=np.int64)
        self.S = np.zeros((n, 4), dtype=np.int64)
        self.xhat_prev = np.zeros(n, dtype=np.int8)
        self.yhat_prev = np.zeros(n, dtype=np.int8)
        sig_rngs = [lane_generator(config.master_seed, i, LANE_SIGNALS) for i in run_indices]
        self.sig_u = np.stack([rng.random(config.rounds) for rng in sig_rngs])
        self.driver_a = _make_driver(config.policy_a, config, run_indices, LANE_AGENT_A, LANE_SCRIPT_A)
        self.driver_b = _make_driver(config.policy_b, config, run_indices, LANE_AGENT_B, LANE_SCRIPT_B)


def _advance(st: _BatchState):
    """Advance every run in the batch by one round; returns the round's arrays."""
    t = st.t + 1
    sa = st.driver_a.choose(st.R, t)
    sb = st.driver_b.choose(st.S, t)
    x, y = signal_pairs_from_uniforms(st.config.distribution, st.sig_u[:, t - 1])
    xhat = reports_for(sa, x)
    yhat = reports_for(sb, y)
    r, s = agreement_payments(xhat, yhat, st.xhat_prev, st.yhat_prev)
    cf_a = counterfactual_matrix(x, yhat, st.yhat_prev)
    cf_b = counterfactual_matrix(y, xhat, st.xhat_prev)
    if st.config.invariant_checks:
        n = x.shape[0]
        check_counterfactual_batch(cf_a, f"round {t} agent A")
        check_counterfactual_batch(cf_b, f"round {t} agent B")
        if (r != cf_a[np.arange(n), sa]).any() or (s != cf_b[np.arange(n), sb]).any():
            raise InvariantViolation(
                f"round {t}: realized payment differs from the chosen counterfactual entry"
            )
    st.R += cf_a
    st.S += cf_b
    if st.config.invariant_checks:
        check_ledger_batch(st.R, f"round {t} agent A")
        check_ledger_batch(st.S, f"round {t} agent B")
    st.xhat_prev = xhat
    st.yhat_prev = yhat
    st.t = t
    return x, y, sa, sb, xhat, yhat, r, s, cf_a, cf_b


def run_batch(config: SimulationConfig, run_indices) -> list[RunTrace]:
    """Simulate the given replications in lockstep; traces in argument order."""
    st = _BatchState(config, run_indices)
    n, rounds = len(st.run_indices), config.rounds
    xs = np.empty((rounds, n), dtype=np.int8)
    ys = np.empty((rounds, n), dtype=np.int8)
    sas = np.empty((rounds, n), dtype=np.int8)
    sbs = np.empty((rounds, n), dtype=np.int8)
    rs = np.empty((rounds, n), dtype=np.int8)
    ss = np.empty((rounds, n), dtype=np.int8)
    for t in range(rounds):
        x, y, sa, sb, _, _, r, s, _, _ = _advance(st)
        xs[t], ys[t], rs[t], ss[t] = x, y, r, s
        sas[t], sbs[t] = sa, sb
    sas += 1  # expose Strategy codes 1..4
    sbs += 1
    return [
        RunTrace(
            run_index=int(st.run_indices[i]),
            x=xs[:, i].copy(),
            y=ys[:, i].copy(),
            strat_a=sas[:, i].copy(),
            strat_b=sbs[:, i].copy(),
            r=rs[:, i].copy(),
            s=ss[:, i].copy(),
            final_ledger_a=tuple(int(v) for v in st.R[i]),
            final_ledger_b=tuple(int(v) for v in st.S[i]),
        )
        for i in range(n)
    ]


def run_simulation(config: SimulationConfig, run_index: int = 0) -> RunTrace:
    """Simulate one replication; identical to its slice of any batch."""
    return run_batch(config, [run_index])[0]


def run_replications(config: SimulationConfig, threads: int = 1) -> TraceSet:
    """Simulate all replications, optionally split across worker threads.

    Aggregation is in run-index order whatever the completion order, and
    per-run traces do not depend on the split, so any thread count yields
    identical output.
    """
    indices = list(range(config.replications))
    if threads <= 1 or config.replications == 1:
        return TraceSet(config=config, traces=run_batch(config, indices))
    threads = min(threads, config.replications)
    chunks = [indices[k::threads] for k in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda c: run_batch(config, c), chunks))
    by_index: dict[int, RunTrace] = {}
    for traces in results:
        for trace in traces:
            by_index[trace.run_index] = trace
    return TraceSet(config=config, traces=[by_index[i] for i in indices])


# --- scalar stepping ----------------------------------------------------------


class GameState:
    """One replication advanced round by round; wraps a batch of size one.

    The state owns its streams (derived at construction from the config and
    run index), so stepping is deterministic and matches run_simulation.
    """

    def __init__(self, config: SimulationConfig, run_index: int = 0):
        self.config = config
        self.run_index = run_index
        self._batch = _BatchState(config, [run_index])

    @property
    def t(self) -> int:
        return self._batch.t

    @property
    def ledger_a(self) -> RewardLedger:
        return RewardLedger(tuple(int(v) for v in self._batch.R[0]), t=self._batch.t)

    @property
    def ledger_b(self) -> RewardLedger:
        return RewardLedger(tuple(int(v) for v in self._batch.S[0]), t=self._batch.t)

    def step(self) -> RoundRecord:
        if self._batch.t >= self.config.rounds:
            raise RuntimeError(f"run is complete after {self.config.rounds} rounds")
        x, y, sa, sb, xhat, yhat, r, s, cf_a, cf_b = _advance(self._batch)
        return RoundRecord(
            t=self._batch.t,
            x=int(x[0]),
            y=int(y[0]),
            strat_a=Strategy(int(sa[0]) + 1),
            strat_b=Strategy(int(sb[0]) + 1),
            xhat=int(xhat[0]),
            yhat=int(yhat[0]),
            payment=RoundPayment(r=int(r[0]), s=int(s[0])),
            cf_a=tuple(int(v) for v in cf_a[0]),
            cf_b=tuple(int(v) for v in cf_b[0]),
        )


def run_round(state: GameState) -> RoundRecord:
    """Advance a game state by one round."""
    return state.step()
