"""Sequential correlated-agreement payments and per-strategy counterfactuals.

The mechanism pays each agent for agreeing with the peer's current report
and charges for agreeing with the peer's previous report, with both
"previous" reports fixed to 0 ahead of round one.  Agents choose among
four pure strategies each round: report the signal, flip it, or report a
constant.  For learning we also need the counterfactual payment of every
strategy the agent could have played, holding the peer's realized reports
fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np


class Strategy(IntEnum):
    TRUTHFUL = 1
    FLIP = 2
    ALWAYS_ONE = 3
    ALWAYS_ZERO = 4

    @property
    def uninformative(self) -> bool:
        return self in (Strategy.ALWAYS_ONE, Strategy.ALWAYS_ZERO)


STRATEGIES = tuple(Strategy)

# Every realizable counterfactual increment: all four entries cancel in
# truthful/flip and constant-report pairs, and the nonzero patterns flip
# sign together.
COUNTERFACTUAL_PATTERNS = frozenset(
    {(0, 0, 0, 0), (1, -1, 1, -1), (1, -1, -1, 1), (-1, 1, 1, -1), (-1, 1, -1, 1)}
)


@dataclass(frozen=True)
class RoundPayment:
    """Per-round payments: r to the first agent, s to the second."""

    r: int
    s: int


def apply_strategy(strategy: Strategy, signal: int) -> int:
    """Report produced by a pure strategy on a binary signal."""
    if strategy == Strategy.TRUTHFUL:
        return signal
    if strategy == Strategy.FLIP:
        return 1 - signal
    if strategy == Strategy.ALWAYS_ONE:
        return 1
    return 0


def ca_payment(xhat: int, yhat: int, xhat_prev: int, yhat_prev: int) -> RoundPayment:
    """Correlated-agreement payments for one round.

    At round one the previous reports are the boundary values 0.
    """
    r = int(xhat == yhat) - int(xhat == yhat_prev)
    s = int(yhat == xhat) - int(yhat == xhat_prev)
    return RoundPayment(r=r, s=s)


def counterfactual_vector(
    own_signal: int, peer_report: int, peer_report_prev: int
) -> tuple[int, int, int, int]:
    """Payment each strategy would have earned, peer reports held fixed.

    Entry i is the payment had the agent played ``Strategy(i + 1)`` on its
    own signal this round.  Symmetric in the two seats, so no role
    argument: pass the agent's signal and the peer's current/previous
    reports (boundary 0 at round one).
    """
    out = []
    for strategy in STRATEGIES:
        rep = apply_strategy(strategy, own_signal)
        out.append(int(rep == peer_report) - int(rep == peer_report_prev))
    return tuple(out)


# --- vectorized kernels used by the engine and analysis -------------------


def reports_for(strategy_codes: np.ndarray, signals: np.ndarray) -> np.ndarray:
    """Reports for an array of 0-based strategy codes applied to signals."""
    s = np.asarray(signals, dtype=np.int8)
    table = np.stack([s, 1 - s, np.ones_like(s), np.zeros_like(s)])
    return table[np.asarray(strategy_codes), np.arange(s.shape[0])]


def agreement_payments(
    xhat: np.ndarray, yhat: np.ndarray, xhat_prev: np.ndarray, yhat_prev: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized correlated-agreement payments (r, s)."""
    r = (xhat == yhat).astype(np.int8) - (xhat == yhat_prev).astype(np.int8)
    s = (yhat == xhat).astype(np.int8) - (yhat == xhat_prev).astype(np.int8)
    return r, s


def counterfactual_matrix(
    signals: np.ndarray, peer_now: np.ndarray, peer_prev: np.ndarray
) -> np.ndarray:
    """Counterfactual vectors for a batch: row per agent instance, column per strategy."""
    s = np.asarray(signals, dtype=np.int8)
    reps = np.stack([s, 1 - s, np.ones_like(s), np.zeros_like(s)], axis=1)
    now = np.asarray(peer_now, dtype=np.int8)[:, None]
    prev = np.asarray(peer_prev, dtype=np.int8)[:, None]
    return (reps == now).astype(np.int8) - (reps == prev).astype(np.int8)


# --- generic fixed-window sequential mechanisms ----------------------------


@dataclass(frozen=True)
class RankKMechanism:
    """Sequential payment rule reading only the last k report pairs.

    ``pay`` maps two length-k report windows (oldest first) to the pair of
    payments.  Reports before round one are 0.
    """

    k: int
    pay: Callable[[Sequence[int], Sequence[int]], tuple[int, int]]

    def payment_stream(
        self, xhats: Sequence[int], yhats: Sequence[int]
    ) -> list[RoundPayment]:
        if len(xhats) != len(yhats):
            raise ValueError("report streams must have equal length")
        pad = [0] * (self.k - 1)
        xs = pad + list(xhats)
        ys = pad + list(yhats)
        out = []
        for t in range(len(xhats)):
            r, s = self.pay(xs[t : t + self.k], ys[t : t + self.k])
            out.append(RoundPayment(r=int(r), s=int(s)))
        return out


def ca_rank2() -> RankKMechanism:
    """The correlated-agreement rule expressed as a rank-2 mechanism."""

    def pay(xs: Sequence[int], ys: Sequence[int]) -> tuple[int, int]:
        r = int(xs[1] == ys[1]) - int(xs[1] == ys[0])
        s = int(ys[1] == xs[1]) - int(ys[1] == xs[0])
        return r, s

    return RankKMechanism(k=2, pay=pay)
