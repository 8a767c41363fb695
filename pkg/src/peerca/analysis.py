"""Trace analytics: convergence, regret, event timelines, drift, equilibria.

Traces store signals, chosen strategies and realized payments; everything
else (reports, counterfactual vectors, full ledger paths) is reconstructed
here on demand.  All operations are pure over immutable trace data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import RunTrace, TraceSet
from .mechanism import Strategy, counterfactual_matrix, reports_for
from .signals import SignalDistribution


class InsufficientData(RuntimeError):
    """Too few qualifying rounds for the requested statistic."""


# --- trace reconstruction ---------------------------------------------------


def reports_from_trace(trace: RunTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-round reports of both agents."""
    xhat = reports_for(trace.strat_a - 1, trace.x)
    yhat = reports_for(trace.strat_b - 1, trace.y)
    return xhat, yhat


def _lagged(reports: np.ndarray) -> np.ndarray:
    prev = np.empty_like(reports)
    prev[0] = 0
    prev[1:] = reports[:-1]
    return prev


def counterfactual_paths(trace: RunTrace) -> tuple[np.ndarray, np.ndarray]:
    """Per-round counterfactual vectors for both agents, shape (T, 4)."""
    xhat, yhat = reports_from_trace(trace)
    cf_a = counterfactual_matrix(trace.x, yhat, _lagged(yhat))
    cf_b = counterfactual_matrix(trace.y, xhat, _lagged(xhat))
    return cf_a, cf_b


def ledger_paths(trace: RunTrace) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative reward paths for both agents, shape (T, 4), after each round."""
    cf_a, cf_b = counterfactual_paths(trace)
    return (
        np.cumsum(cf_a, axis=0, dtype=np.int64),
        np.cumsum(cf_b, axis=0, dtype=np.int64),
    )


def visited_ledger_rows(traceset: TraceSet, agent: str = "a") -> np.ndarray:
    """Deduplicated ledger states at which the agent's choices were made.

    These are the states after 0 .. T-1 rounds: the zero state plus every
    prefix of the cumulative reward path except the last.
    """
    rows = [np.zeros((1, 4), dtype=np.int64)]
    for trace in traceset.traces:
        path = ledger_paths(trace)[0 if agent == "a" else 1]
        rows.append(path[:-1])
    return np.unique(np.concatenate(rows), axis=0)


# --- convergence -------------------------------------------------------------


def _trailing_run_lengths(match: np.ndarray) -> np.ndarray:
    """Length of the all-true suffix per row of a boolean (n, T) array."""
    rev = match[:, ::-1].astype(np.int64)
    return np.cumprod(rev, axis=1).sum(axis=1)


def _convergence_rounds(strat_a: np.ndarray, strat_b: np.ndarray) -> np.ndarray:
    """Vectorized convergence round per run; 0 means never converged."""
    rounds = strat_a.shape[1]
    out = np.zeros(strat_a.shape[0], dtype=np.int64)
    for code in (Strategy.TRUTHFUL, Strategy.FLIP):
        both = (strat_a == code) & (strat_b == code)
        length = _trailing_run_lengths(both)
        candidate = np.where(length > 0, rounds - length + 1, 0)
        take = (out == 0) | ((candidate > 0) & (candidate < out))
        out = np.where(take & (candidate > 0), candidate, out)
    return out


def convergence_round(trace: RunTrace) -> int | None:
    """Earliest round from which both agents play truthful (or both flip) forever.

    Only a uniform suffix counts: every later pair must be the same
    converged pair.  None when no such suffix exists.
    """
    round_ = _convergence_rounds(trace.strat_a[None, :], trace.strat_b[None, :])[0]
    return int(round_) if round_ > 0 else None


@dataclass
class ConvergenceReport:
    """Share of runs converged from each round onward; nondecreasing in t."""

    rounds: np.ndarray
    proportion: np.ndarray
    convergence_rounds: np.ndarray  # per run; 0 encodes "never"

    def at(self, t: int) -> float:
        return float(self.proportion[t - 1])


def converge_proportion(traceset: TraceSet) -> ConvergenceReport:
    strat_a = np.stack([tr.strat_a for tr in traceset.traces])
    strat_b = np.stack([tr.strat_b for tr in traceset.traces])
    conv = _convergence_rounds(strat_a, strat_b)
    rounds = strat_a.shape[1]
    counts = np.bincount(conv[conv > 0], minlength=rounds + 1)[1:]
    proportion = np.cumsum(counts) / strat_a.shape[0]
    return ConvergenceReport(
        rounds=np.arange(1, rounds + 1), proportion=proportion, convergence_rounds=conv
    )


# --- regret ------------------------------------------------------------------


def regret_series(trace: RunTrace, agent: str = "a") -> np.ndarray:
    """Reg(t) per round: best cumulative option reward minus realized reward.

    Computed exactly as defined; negative values are possible in principle
    and are reported as computed rather than clamped.
    """
    cf_a, cf_b = counterfactual_paths(trace)
    cf = cf_a if agent == "a" else cf_b
    realized = trace.r if agent == "a" else trace.s
    best = np.cumsum(cf, axis=0, dtype=np.int64).max(axis=1)
    return best - np.cumsum(realized, dtype=np.int64)


def regret(trace: RunTrace, agent: str = "a") -> int:
    """Final-round regret."""
    return int(regret_series(trace, agent)[-1])


# --- event timeline ----------------------------------------------------------

EVENT_LABELS = ("mid", "bad12", "bad21", "good11", "good22")


@dataclass
class EventTimeline:
    """Per-round ledger-region flags with thresholds c0 (bad) and u (good).

    Bad regions hold when one agent's truthful total and the other's flip
    total both exceed c0; good regions when both agents' totals for the
    same informative strategy reach u.  For c0, u >= 1 the regions are
    pairwise exclusive, so each round gets exactly one label.
    """

    codes: np.ndarray
    c0: int
    u: int

    def counts(self) -> dict[str, int]:
        tally = np.bincount(self.codes, minlength=len(EVENT_LABELS))
        return {label: int(tally[i]) for i, label in enumerate(EVENT_LABELS)}

    @property
    def final_state(self) -> str:
        return EVENT_LABELS[int(self.codes[-1])]

    def dwell_round(self, label: str) -> int | None:
        """First round from which the timeline stays in ``label`` forever."""
        code = EVENT_LABELS.index(label)
        match = (self.codes == code)[None, :]
        length = _trailing_run_lengths(match)[0]
        return int(self.codes.shape[0] - length + 1) if length > 0 else None


def event_codes(path_a: np.ndarray, path_b: np.ndarray, c0: int, u: int) -> np.ndarray:
    """Classify ledger-path rounds into the five regions (codes index EVENT_LABELS)."""
    if c0 < 1 or u < 1:
        raise ValueError(f"thresholds must be >= 1, got c0={c0}, u={u}")
    r1, r2 = path_a[:, 0], path_a[:, 1]
    s1, s2 = path_b[:, 0], path_b[:, 1]
    codes = np.zeros(path_a.shape[0], dtype=np.int8)
    codes[(r1 > c0) & (s2 > c0)] = 1
    codes[(r2 > c0) & (s1 > c0)] = 2
    codes[(r1 >= u) & (s1 >= u)] = 3
    codes[(r2 >= u) & (s2 >= u)] = 4
    return codes


def event_timeline(trace: RunTrace, c0: int = 20, u: int = 10) -> EventTimeline:
    path_a, path_b = ledger_paths(trace)
    return EventTimeline(codes=event_codes(path_a, path_b, c0, u), c0=c0, u=u)


# --- conditional drift --------------------------------------------------------


@dataclass
class DriftEstimate:
    mean: float
    se: float
    count: int

    def ci(self, z: float = 3.0) -> tuple[float, float]:
        return self.mean - z * self.se, self.mean + z * self.se


def conditional_drift(
    traceset: TraceSet, condition: str = "peer_truthful", agent: str = "a"
) -> DriftEstimate:
    """Mean truthful-minus-flip counterfactual reward on conditioned rounds.

    A round t >= 2 qualifies when the peer played truthfully (or, for the
    flipping condition, flipped) at both t and t-1.  Under the conditioning
    the focal agent's expected per-round difference equals the gap between
    the joint and independent agreement margins of the signal law.
    """
    peer_code = {"peer_truthful": Strategy.TRUTHFUL, "peer_flipping": Strategy.FLIP}[condition]
    values = []
    for trace in traceset.traces:
        peer = trace.strat_b if agent == "a" else trace.strat_a
        cf = counterfactual_paths(trace)[0 if agent == "a" else 1]
        held = (peer[1:] == peer_code) & (peer[:-1] == peer_code)
        diff = (cf[1:, 0] - cf[1:, 1]).astype(float)
        values.append(diff[held])
    pooled = np.concatenate(values) if values else np.array([])
    if pooled.size < 100:
        raise InsufficientData(
            f"only {pooled.size} qualifying rounds for condition {condition!r}; need 100"
        )
    mean = float(pooled.mean())
    se = float(pooled.std(ddof=1) / np.sqrt(pooled.size))
    return DriftEstimate(mean=mean, se=se, count=int(pooled.size))


# --- consistent-strategy equilibrium analytics --------------------------------


@dataclass(frozen=True)
class ConsistentStrategy:
    """A fixed reporting profile: (p0, p1) for the first agent, (q0, q1) second.

    p1 is the probability of reporting 1 on signal 1, p0 of reporting 0 on
    signal 0; likewise q1/q0 for the peer.
    """

    p0: float
    p1: float
    q0: float
    q1: float

    def __post_init__(self) -> None:
        for name in ("p0", "p1", "q0", "q1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def truthful(cls) -> "ConsistentStrategy":
        return cls(1.0, 1.0, 1.0, 1.0)

    @classmethod
    def flipping(cls) -> "ConsistentStrategy":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def uninformative(cls, prob_one: float = 1.0) -> "ConsistentStrategy":
        """Both agents report 1 with probability ``prob_one`` regardless of signal."""
        return cls(1.0 - prob_one, prob_one, 1.0 - prob_one, prob_one)


def _agreement_now(dist: SignalDistribution, p0, p1, q0, q1):
    """Probability the two same-round reports agree, under the joint law."""
    return (
        dist.p11 * (p1 * q1 + (1 - p1) * (1 - q1))
        + dist.p00 * (p0 * q0 + (1 - p0) * (1 - q0))
        + dist.p10 * (p1 * (1 - q0) + (1 - p1) * q0)
        + dist.p01 * (q1 * (1 - p0) + (1 - q1) * p0)
    )


def _agreement_lagged(dist: SignalDistribution, p0, p1, q0, q1):
    """Probability a report agrees with the peer's previous-round report.

    Signals in different rounds are independent, so this is the agreement
    probability when each report is drawn from its own marginal.
    """
    rep_x1 = dist.pr_x1 * p1 + (1 - dist.pr_x1) * (1 - p0)
    rep_y1 = dist.pr_y1 * q1 + (1 - dist.pr_y1) * (1 - q0)
    return rep_x1 * rep_y1 + (1 - rep_x1) * (1 - rep_y1)


def _expected_payoff(dist: SignalDistribution, p0, p1, q0, q1):
    return _agreement_now(dist, p0, p1, q0, q1) - _agreement_lagged(dist, p0, p1, q0, q1)


def bne_expected_payoff(
    dist: SignalDistribution, strategy: ConsistentStrategy
) -> tuple[float, float]:
    """Per-round expected payments under a fixed consistent profile.

    The two agents' expectations coincide: both equal the same-round
    agreement probability minus the lagged (independent) agreement
    probability.  Returned as a pair anyway for the two seats.
    """
    v = float(_expected_payoff(dist, strategy.p0, strategy.p1, strategy.q0, strategy.q1))
    return v, v


@dataclass
class BestResponseGrid:
    """Exhaustive payoff evaluation of one agent's responses on a grid."""

    resolution: float
    grid: np.ndarray
    payoffs: np.ndarray  # payoffs[i, j] responds with p0=grid[i], p1=grid[j]
    best_payoff: float
    maximizers: list[tuple[float, float]]


def best_response_grid(
    dist: SignalDistribution,
    opponent: ConsistentStrategy,
    resolution: float = 0.05,
    tol: float = 1e-12,
) -> BestResponseGrid:
    """Grid-search the responder's (p0, p1) against a fixed peer (q0, q1)."""
    steps = round(1.0 / resolution)
    if abs(steps * resolution - 1.0) > 1e-9:
        raise ValueError(f"resolution {resolution} must divide [0, 1] evenly")
    grid = np.linspace(0.0, 1.0, steps + 1)
    p0 = grid[:, None]
    p1 = grid[None, :]
    payoffs = _expected_payoff(dist, p0, p1, opponent.q0, opponent.q1)
    best = float(payoffs.max())
    where = np.argwhere(payoffs >= best - tol)
    maximizers = [(float(grid[i]), float(grid[j])) for i, j in where]
    return BestResponseGrid(
        resolution=resolution,
        grid=grid,
        payoffs=payoffs,
        best_payoff=best,
        maximizers=maximizers,
    )
