"""Cumulative per-strategy reward bookkeeping with exact integer laws.

Under the correlated-agreement rule the four cumulative counterfactual
totals obey hard laws at every round: the truthful and flip totals cancel,
the constant-report totals cancel and stay inside [-1, 1], and each
round's increment is one of five patterns whose alternating sum is a
multiple of four.  All arithmetic is integer so the laws are checked with
zero tolerance; a breach signals a mechanism or bookkeeping bug and aborts
the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mechanism import COUNTERFACTUAL_PATTERNS, Strategy


class InvariantViolation(RuntimeError):
    """An exact ledger law failed; indicates a bug, not bad luck."""


@dataclass(frozen=True)
class RewardLedger:
    """One agent's cumulative counterfactual rewards after ``t`` rounds."""

    totals: tuple[int, int, int, int] = (0, 0, 0, 0)
    t: int = 0

    def as_array(self) -> np.ndarray:
        return np.array(self.totals, dtype=np.int64)


def _check_totals(totals: tuple[int, int, int, int], context: str) -> None:
    r1, r2, r3, r4 = totals
    if r1 + r2 != 0 or r3 + r4 != 0:
        raise InvariantViolation(f"{context}: totals {totals} break the cancellation law")
    if not (-1 <= r3 <= 1):
        raise InvariantViolation(f"{context}: constant-report total {r3} outside [-1, 1]")


def ledger_update(ledger: RewardLedger, cf: tuple[int, int, int, int]) -> RewardLedger:
    """Add one round's counterfactual vector and re-assert every law."""
    cf = tuple(int(v) for v in cf)
    if cf not in COUNTERFACTUAL_PATTERNS:
        raise InvariantViolation(
            f"round {ledger.t + 1}: counterfactual vector {cf} not a realizable pattern"
        )
    totals = tuple(a + b for a, b in zip(ledger.totals, cf))
    _check_totals(totals, f"round {ledger.t + 1}")
    if (totals[0] - totals[1] + totals[2] - totals[3]) % 4 != 0:
        raise InvariantViolation(
            f"round {ledger.t + 1}: totals {totals} break the mod-4 identity"
        )
    return RewardLedger(totals=totals, t=ledger.t + 1)


def leader_gap(ledger: RewardLedger) -> tuple[Strategy, int]:
    """Leading strategy (lowest index on ties) and its margin over the runner-up."""
    totals = ledger.as_array()
    leader = int(np.argmax(totals))
    ordered = np.sort(totals)[::-1]
    return Strategy(leader + 1), int(ordered[0] - ordered[1])


# --- batch checks used inside the vectorized engine ------------------------


def check_counterfactual_batch(cf: np.ndarray, context: str) -> None:
    """Assert every row of a (n, 4) increment batch is a realizable pattern."""
    v1, v2, v3, v4 = cf[:, 0], cf[:, 1], cf[:, 2], cf[:, 3]
    ok = (
        (v2 == -v1)
        & (v4 == -v3)
        & (np.abs(v1) <= 1)
        & (np.abs(v3) <= 1)
        & (np.abs(v1) == np.abs(v3))
        & ((v1 - v2 + v3 - v4) % 4 == 0)
    )
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise InvariantViolation(
            f"{context}: run {bad} produced counterfactual vector {cf[bad].tolist()}"
        )


def check_ledger_batch(totals: np.ndarray, context: str) -> None:
    """Assert every row of a (n, 4) cumulative batch satisfies the exact laws."""
    r1, r2, r3, r4 = totals[:, 0], totals[:, 1], totals[:, 2], totals[:, 3]
    ok = (r1 + r2 == 0) & (r3 + r4 == 0) & (np.abs(r3) <= 1) & (np.abs(r4) <= 1)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise InvariantViolation(
            f"{context}: run {bad} ledger {totals[bad].tolist()} breaks an exact law"
        )
