"""Learning agents and certification of the reward-based update family.

A reward-based agent keeps one update function ``f`` from cumulative
reward 4-vectors to the probability simplex and draws each round's
strategy from ``f`` evaluated at its own ledger.  The family ships five
members: two multiplicative-weights variants (geometric weights with base
3^(1/2) per reward point, and exponential weights with rate beta),
perturbed-leader with uniform noise, plain follow-the-leader, and the
discrete replicator rule (geometric weights with base ratio^(1/2)).

Membership in the family is certified empirically by three checks:
exchangeability under coordinate permutations, order preservation between
rewards and probabilities, and full exploitation of a runaway leader.
The module also provides the fixed-reward environment on which any
update function that caps its leader probability below one provably
accumulates linear regret.

Two further policies sit outside the family: epsilon-greedy with
exploration rate 1/(t+1)^2 (time-varying, so not a fixed update function)
and a collusion agent that ignores its signals entirely, playing a
pre-committed fair-coin sequence over the two constant-report strategies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, Union

import numpy as np

from .ledger import RewardLedger
from .mechanism import Strategy

SIMPLEX_TOL = 1e-12
EXACT_CHECK_TOL = 1e-9
MC_SIGMA_FACTOR = 4.0


class UpdateKind(Enum):
    HEDGE1 = "hedge1"
    HEDGE2 = "hedge2"
    FPL = "fpl"
    FTL = "ftl"
    REPLICATOR = "replicator"
    CUSTOM = "custom"


@dataclass(frozen=True)
class UpdateFunctionSpec:
    """A named, parameterized map from reward 4-vectors to the simplex.

    ``fn`` is only read for CUSTOM kinds and must accept an (..., 4) array
    of rewards and return probabilities of the same shape.
    """

    kind: UpdateKind
    beta: float = 1.0
    noise_max: float = 1.0
    ratio: float = 3.0
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.kind == UpdateKind.HEDGE2 and not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.kind == UpdateKind.FPL and not self.noise_max > 0:
            raise ValueError(f"noise_max must be positive, got {self.noise_max}")
        if self.kind == UpdateKind.REPLICATOR and not self.ratio > 1:
            raise ValueError(f"ratio must exceed 1, got {self.ratio}")
        if (self.fn is None) == (self.kind == UpdateKind.CUSTOM):
            raise ValueError("fn is required for CUSTOM and forbidden otherwise")
        if not self.label:
            object.__setattr__(self, "label", self._default_label())

    def _default_label(self) -> str:
        if self.kind == UpdateKind.HEDGE2:
            return f"hedge2(beta={self.beta:g})"
        if self.kind == UpdateKind.FPL:
            return f"fpl(noise_max={self.noise_max:g})"
        if self.kind == UpdateKind.REPLICATOR:
            return f"replicator(ratio={self.ratio:g})"
        return self.kind.value


def hedge1() -> UpdateFunctionSpec:
    """Weights 3**(R/2); the base and exponent are fixed by convention."""
    return UpdateFunctionSpec(UpdateKind.HEDGE1)


def hedge2(beta: float = 1.0) -> UpdateFunctionSpec:
    """Weights exp(beta * R)."""
    return UpdateFunctionSpec(UpdateKind.HEDGE2, beta=beta)


def fpl(noise_max: float = 1.0) -> UpdateFunctionSpec:
    """Argmax of R + noise with i.i.d. uniform noise on [0, noise_max]."""
    return UpdateFunctionSpec(UpdateKind.FPL, noise_max=noise_max)


def ftl() -> UpdateFunctionSpec:
    """Uniform over the argmax set of R."""
    return UpdateFunctionSpec(UpdateKind.FTL)


def replicator(ratio: float = 3.0) -> UpdateFunctionSpec:
    """Weights ratio**(R/2); ratio is the up/down weight multiplier quotient."""
    return UpdateFunctionSpec(UpdateKind.REPLICATOR, ratio=ratio)


def custom(fn: Callable[[np.ndarray], np.ndarray], label: str) -> UpdateFunctionSpec:
    """Wrap an arbitrary simplex-valued map for the checkers and necessity runs."""
    return UpdateFunctionSpec(UpdateKind.CUSTOM, fn=fn, label=label)


def softmax_rate(spec: UpdateFunctionSpec) -> float | None:
    """Exponential rate for the geometric/exponential-weight kinds, else None."""
    if spec.kind == UpdateKind.HEDGE1:
        return np.log(3.0) / 2.0
    if spec.kind == UpdateKind.HEDGE2:
        return spec.beta
    if spec.kind == UpdateKind.REPLICATOR:
        return np.log(spec.ratio) / 2.0
    return None


def _softmax(rewards: np.ndarray, rate: float) -> np.ndarray:
    # Subtracting the row max keeps every exponent <= 0, so no overflow for
    # any reward magnitude.
    z = rate * (rewards - rewards.max(axis=-1, keepdims=True))
    w = np.exp(z)
    return w / w.sum(axis=-1, keepdims=True)


def update_probabilities(spec: UpdateFunctionSpec, rewards: np.ndarray) -> np.ndarray:
    """Exact choice probabilities for the closed-form kinds.

    FPL probabilities have no closed form here; estimate them with
    ``evaluate_update_function``.
    """
    rewards = np.asarray(rewards, dtype=float)
    if spec.kind == UpdateKind.FTL:
        mask = rewards == rewards.max(axis=-1, keepdims=True)
        return mask / mask.sum(axis=-1, keepdims=True)
    rate = softmax_rate(spec)
    if rate is not None:
        return _softmax(rewards, rate)
    if spec.kind == UpdateKind.CUSTOM:
        probs = np.asarray(spec.fn(rewards), dtype=float)
        bad_sum = np.abs(probs.sum(axis=-1) - 1.0) > SIMPLEX_TOL
        if probs.shape != rewards.shape or bad_sum.any() or (probs < 0).any():
            raise ValueError(f"custom update function {spec.label!r} left the simplex")
        return probs
    raise ValueError("perturbed-leader probabilities require Monte Carlo estimation")


@dataclass(frozen=True)
class EvaluatedUpdate:
    """Evaluated probabilities; ``stderr`` is set only for Monte Carlo estimates."""

    probs: np.ndarray
    stderr: np.ndarray | None = None


def evaluate_update_function(
    spec: UpdateFunctionSpec,
    rewards: Sequence[float],
    fpl_samples: int = 100_000,
    rng: np.random.Generator | None = None,
) -> EvaluatedUpdate:
    """Evaluate one reward vector, estimating perturbed-leader kinds by sampling."""
    rewards = np.asarray(rewards, dtype=float)
    if spec.kind != UpdateKind.FPL:
        return EvaluatedUpdate(probs=update_probabilities(spec, rewards))
    # Bounded noise cannot overturn a strict leader whose margin is at
    # least the noise range (ties have probability zero), so that case is
    # exact without sampling.
    order = np.argsort(rewards)[::-1]
    if rewards[order[0]] - rewards[order[1]] >= spec.noise_max:
        probs = np.zeros(4)
        probs[order[0]] = 1.0
        return EvaluatedUpdate(probs=probs, stderr=np.zeros(4))
    if rng is None:
        rng = np.random.default_rng(0)
    noise = rng.random((fpl_samples, 4)) * spec.noise_max
    winners = np.argmax(rewards + noise, axis=1)
    probs = np.bincount(winners, minlength=4) / fpl_samples
    stderr = np.sqrt(probs * (1.0 - probs) / fpl_samples)
    return EvaluatedUpdate(probs=probs, stderr=stderr)


# --- policies ---------------------------------------------------------------


@dataclass(frozen=True)
class RewardBasedPolicy:
    """Draw each round's strategy from a fixed update function of the ledger."""

    spec: UpdateFunctionSpec


@dataclass(frozen=True)
class EpsilonGreedyPolicy:
    """Explore uniformly with probability 1/(t+1)^2, else argmax of the ledger.

    Rounds are 1-indexed, so the first round explores with probability 1/4.
    Not a member of the update-function family: the rule depends on t.
    """


@dataclass(frozen=True)
class CollusionPolicy:
    """Ignore signals; play a pre-committed fair-coin sequence of constant reports.

    The coin sequence comes from a stream independent of the game's
    randomness, which is what makes the commitment meaningful.
    """


@dataclass(frozen=True)
class ConsistentPolicy:
    """Fixed per-round reporting behavior, for forced-strategy calibration runs.

    ``p1`` is the probability of reporting 1 on signal 1 and ``p0`` of
    reporting 0 on signal 0.  Realized as an i.i.d. draw over the four pure
    strategies each round.
    """

    p0: float
    p1: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p0 <= 1.0 and 0.0 <= self.p1 <= 1.0):
            raise ValueError(f"probabilities must lie in [0, 1], got {self}")

    def strategy_probabilities(self) -> np.ndarray:
        a = self.p1 * self.p0
        b = (1.0 - self.p1) * (1.0 - self.p0)
        c = self.p1 * (1.0 - self.p0)
        d = (1.0 - self.p1) * self.p0
        return np.array([a, b, c, d])


AgentPolicy = Union[RewardBasedPolicy, EpsilonGreedyPolicy, CollusionPolicy, ConsistentPolicy]


def exploration_rate(t: int) -> float:
    """Epsilon-greedy exploration probability at 1-indexed round t."""
    return 1.0 / (t + 1) ** 2


def greedy_mixture(totals: np.ndarray, t: int) -> np.ndarray:
    """Epsilon-greedy per-round choice distribution at a ledger state."""
    totals = np.asarray(totals, dtype=float)
    eps = exploration_rate(t)
    mask = totals == totals.max(axis=-1, keepdims=True)
    exploit = mask / mask.sum(axis=-1, keepdims=True)
    return eps / 4.0 + (1.0 - eps) * exploit


def _draw_index(probs: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(np.cumsum(probs), u, side="right"), 3))


def choose_strategy(
    policy: AgentPolicy, ledger: RewardLedger, t: int, rng: np.random.Generator
) -> Strategy:
    """Draw the strategy for 1-indexed round ``t`` given the agent's own ledger.

    The draw depends only on the ledger (and t for epsilon-greedy), never
    on the current signal.  Perturbed-leader policies sample fresh noise
    and take the argmax, which realizes exactly the FPL choice law.
    """
    totals = ledger.as_array()
    if isinstance(policy, RewardBasedPolicy):
        if policy.spec.kind == UpdateKind.FPL:
            noise = rng.random(4) * policy.spec.noise_max
            return Strategy(int(np.argmax(totals + noise)) + 1)
        probs = update_probabilities(policy.spec, totals)
        return Strategy(_draw_index(probs, rng.random()) + 1)
    if isinstance(policy, EpsilonGreedyPolicy):
        return Strategy(_draw_index(greedy_mixture(totals, t), rng.random()) + 1)
    if isinstance(policy, CollusionPolicy):
        return Strategy.ALWAYS_ONE if rng.random() < 0.5 else Strategy.ALWAYS_ZERO
    if isinstance(policy, ConsistentPolicy):
        return Strategy(_draw_index(policy.strategy_probabilities(), rng.random()) + 1)
    raise TypeError(f"unknown policy {policy!r}")


# --- assumption certification ----------------------------------------------


@dataclass
class AssumptionCheck:
    """Outcome of one randomized assumption check."""

    name: str
    trials: int
    violations: int
    worst_deviation: float
    worst_case: dict | None

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class ExploitationPoint:
    gap: int
    prob: float
    stderr: float


@dataclass
class ExploitationCurve:
    """Leader probability as the leader's margin grows.

    ``points`` follows the ray (gap, 0, 0, 0); ``directions`` repeats the
    probe with random nonpositive values in the trailing coordinates.  The
    verdict is PASS when the primary curve is nondecreasing within
    tolerance and exceeds 1 - 1e-3 at the largest gap.
    """

    points: list[ExploitationPoint]
    directions: list[list[ExploitationPoint]]
    passed: bool

    @property
    def plateau(self) -> float:
        return self.points[-1].prob


@dataclass
class AssumptionReport:
    label: str
    exchangeability: AssumptionCheck
    order_preservation: AssumptionCheck
    full_exploitation: ExploitationCurve

    @property
    def passed(self) -> bool:
        return (
            self.exchangeability.passed
            and self.order_preservation.passed
            and self.full_exploitation.passed
        )

    def verdicts(self) -> dict[str, str]:
        return {
            "exchangeability": "PASS" if self.exchangeability.passed else "FAIL",
            "order_preservation": "PASS" if self.order_preservation.passed else "FAIL",
            "full_exploitation": "PASS" if self.full_exploitation.passed else "FAIL",
        }


_CHECK_REWARD_RANGE = (-25, 26)


def _estimate(
    spec: UpdateFunctionSpec,
    rewards: np.ndarray,
    fpl_samples: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Probabilities plus the per-coordinate tolerance scale for comparisons."""
    if spec.kind == UpdateKind.FPL:
        ev = evaluate_update_function(spec, rewards, fpl_samples=fpl_samples, rng=rng)
        return ev.probs, ev.stderr
    return update_probabilities(spec, rewards), np.zeros(4)


def _pair_tolerance(se_a: np.ndarray, se_b: np.ndarray) -> np.ndarray:
    combined = np.sqrt(se_a**2 + se_b**2)
    return np.maximum(MC_SIGMA_FACTOR * combined, EXACT_CHECK_TOL)


def check_exchangeability(
    spec: UpdateFunctionSpec,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    fpl_samples: int = 20_000,
) -> AssumptionCheck:
    """Probe f(permuted R) against the permuted f(R) on random integer vectors."""
    rng = rng if rng is not None else np.random.default_rng(0)
    violations = 0
    worst = 0.0
    worst_case = None
    for _ in range(trials):
        rewards = rng.integers(*_CHECK_REWARD_RANGE, size=4).astype(float)
        perm = rng.permutation(4)
        base, se_base = _estimate(spec, rewards, fpl_samples, rng)
        permuted, se_perm = _estimate(spec, rewards[perm], fpl_samples, rng)
        deviation = np.abs(base[perm] - permuted)
        tol = _pair_tolerance(se_base[perm], se_perm)
        excess = float((deviation - tol).max())
        if excess > 0:
            violations += 1
            if excess > worst:
                worst = excess
                worst_case = {"rewards": rewards.tolist(), "perm": perm.tolist()}
    return AssumptionCheck("exchangeability", trials, violations, worst, worst_case)


def check_order_preservation(
    spec: UpdateFunctionSpec,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    fpl_samples: int = 20_000,
) -> AssumptionCheck:
    """Probe that higher rewards never receive lower probability."""
    rng = rng if rng is not None else np.random.default_rng(0)
    violations = 0
    worst = 0.0
    worst_case = None
    for _ in range(trials):
        rewards = rng.integers(*_CHECK_REWARD_RANGE, size=4).astype(float)
        probs, se = _estimate(spec, rewards, fpl_samples, rng)
        tol = _pair_tolerance(se[:, None], se[None, :])
        higher = rewards[:, None] >= rewards[None, :]
        shortfall = probs[None, :] - probs[:, None] - tol
        excess = float(np.where(higher, shortfall, -np.inf).max())
        if excess > 0:
            violations += 1
            if excess > worst:
                worst = excess
                worst_case = {"rewards": rewards.tolist()}
    return AssumptionCheck("order_preservation", trials, violations, worst, worst_case)


DEFAULT_GAPS = (1, 2, 4, 8, 16, 32, 64)


def check_full_exploitation(
    spec: UpdateFunctionSpec,
    gaps: Sequence[int] = DEFAULT_GAPS,
    rng: np.random.Generator | None = None,
    fpl_samples: int = 100_000,
    extra_directions: int = 3,
    target: float = 1.0 - 1e-3,
) -> ExploitationCurve:
    """Trace the leader probability along growing margins.

    The verdict comes from the primary ray (gap, 0, 0, 0).  Random
    nonpositive fillers in the other coordinates give additional curves
    for inspection since the limit could in principle be approached
    differently along other directions.
    """
    if list(gaps) != sorted(set(int(g) for g in gaps)) or min(gaps) <= 0:
        raise ValueError("gaps must be positive and strictly increasing")
    rng = rng if rng is not None else np.random.default_rng(0)

    def curve(fillers: np.ndarray) -> list[ExploitationPoint]:
        pts = []
        for gap in gaps:
            rewards = np.array([float(gap), *fillers])
            probs, se = _estimate(spec, rewards, fpl_samples, rng)
            pts.append(ExploitationPoint(gap=int(gap), prob=float(probs[0]), stderr=float(se[0])))
        return pts

    primary = curve(np.zeros(3))
    directions = [
        curve(-rng.integers(0, 20, size=3).astype(float)) for _ in range(extra_directions)
    ]
    tol = [
        max(MC_SIGMA_FACTOR * np.hypot(a.stderr, b.stderr), EXACT_CHECK_TOL)
        for a, b in zip(primary, primary[1:])
    ]
    nondecreasing = all(
        b.prob >= a.prob - t for a, b, t in zip(primary, primary[1:], tol)
    )
    passed = nondecreasing and primary[-1].prob >= target
    return ExploitationCurve(points=primary, directions=directions, passed=passed)


def certify(
    spec: UpdateFunctionSpec,
    trials: int = 1000,
    rng: np.random.Generator | None = None,
    fpl_samples: int = 20_000,
    fpl_trials: int = 300,
) -> AssumptionReport:
    """Run all three family checks; Monte Carlo kinds use fewer, wider trials."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = fpl_trials if spec.kind == UpdateKind.FPL else trials
    return AssumptionReport(
        label=spec.label,
        exchangeability=check_exchangeability(spec, n, rng, fpl_samples),
        order_preservation=check_order_preservation(spec, n, rng, fpl_samples),
        full_exploitation=check_full_exploitation(spec, rng=rng),
    )


# --- fixed-reward necessity environment -------------------------------------

NECESSITY_REWARDS = np.array([2, 1, 1, 1], dtype=np.int64)


def adversarial_necessity_run(
    spec: UpdateFunctionSpec,
    rounds: int,
    runs: int = 1,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Regret series on the constant environment r = (2, 1, 1, 1).

    Every option's reward accrues each round (full feedback); the realized
    reward is 2 when the first option is chosen and 1 otherwise.  Returns a
    (runs, rounds) array of Reg(t) = 2t - realized cumulative reward.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    totals = np.zeros((runs, 4), dtype=np.int64)
    missed = np.zeros((runs, rounds), dtype=np.int64)
    for t in range(rounds):
        if spec.kind == UpdateKind.FPL:
            noise = rng.random((runs, 4)) * spec.noise_max
            choice = np.argmax(totals + noise, axis=1)
        else:
            probs = update_probabilities(spec, totals)
            u = rng.random(runs)
            choice = np.minimum((u[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1), 3)
        missed[:, t] = choice != 0
        totals += NECESSITY_REWARDS
    return np.cumsum(missed, axis=1)


# --- counterexample update functions for the checkers -----------------------


def capped_softmax(beta: float = 1.0, cap: float = 0.9) -> UpdateFunctionSpec:
    """Exponential weights whose top probability is clipped at ``cap``.

    Exchangeable and order-preserving, but the leader probability plateaus
    at ``cap`` instead of reaching one, so it fails full exploitation and
    pays a linear regret price on the fixed-reward environment.
    """
    if not 0.25 < cap < 1.0:
        raise ValueError(f"cap must lie in (0.25, 1), got {cap}")

    def fn(rewards: np.ndarray) -> np.ndarray:
        probs = _softmax(np.asarray(rewards, dtype=float), beta)
        top = probs.max(axis=-1, keepdims=True)
        excess = np.maximum(top - cap, 0.0)
        at_top = probs == top
        # At most one coordinate can exceed cap > 1/2; spread its excess
        # over the rest so order and exchangeability survive.
        spread = excess / 3.0
        probs = np.where(at_top, probs - excess, probs + spread)
        return probs

    return custom(fn, label=f"capped_softmax(beta={beta:g}, cap={cap:g})")


def biased_softmax(bonus: float = 1.0) -> UpdateFunctionSpec:
    """Exponential weights with a bonus on the first coordinate; breaks exchangeability."""

    def fn(rewards: np.ndarray) -> np.ndarray:
        shifted = np.asarray(rewards, dtype=float).copy()
        shifted[..., 0] += bonus
        return _softmax(shifted, 1.0)

    return custom(fn, label=f"biased_softmax(bonus={bonus:g})")


def inverted_softmax() -> UpdateFunctionSpec:
    """Exponential weights on negated rewards; breaks order preservation."""

    def fn(rewards: np.ndarray) -> np.ndarray:
        return _softmax(-np.asarray(rewards, dtype=float), 1.0)

    return custom(fn, label="inverted_softmax")


# --- nonnegative-reward probability floor ------------------------------------


@dataclass
class RewardFloorReport:
    """Evidence that nonnegative truthful/flip totals keep probability >= 1/4."""

    label: str
    states_checked: int
    violations: int
    worst_prob: float
    worst_state: tuple[int, int, int, int] | None
    slack: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def check_reward_floor(
    spec: UpdateFunctionSpec,
    rows: np.ndarray,
    slack: float | None = None,
    fpl_samples: int = 30_000,
    rng: np.random.Generator | None = None,
) -> RewardFloorReport:
    """Evaluate f at visited ledger rows; a nonnegative entry in the first two
    coordinates must carry probability at least 1/4 (minus Monte Carlo slack
    for perturbed-leader kinds).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    if slack is None:
        slack = 0.01 if spec.kind == UpdateKind.FPL else 0.0
    rows = np.unique(np.asarray(rows, dtype=np.int64).reshape(-1, 4), axis=0)
    floor = 0.25 - slack
    checked = 0
    violations = 0
    worst_prob = 1.0
    worst_state = None
    for row in rows:
        qualifying = [i for i in (0, 1) if row[i] >= 0]
        if not qualifying:
            continue
        checked += 1
        probs, _ = _estimate(spec, row.astype(float), fpl_samples, rng)
        for i in qualifying:
            p = float(probs[i])
            if p < worst_prob:
                worst_prob = p
                worst_state = tuple(int(v) for v in row)
            if p < floor:
                violations += 1
    return RewardFloorReport(
        label=spec.label,
        states_checked=checked,
        violations=violations,
        worst_prob=worst_prob,
        worst_state=worst_state,
        slack=slack,
    )
