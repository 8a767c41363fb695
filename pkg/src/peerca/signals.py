"""Joint law of the two agents' private signals.

Each round the pair ``(x, y)`` is drawn i.i.d. from a distribution on
{0,1}^2 that has full support and is positively correlated: both matching
outcomes are strictly more likely than either mismatched outcome.

Two scalar functionals of the law drive the learning dynamics.
``gamma1`` is the expected agreement margin between the agents' signals,
``Pr[x = y] - Pr[x != y]``.  ``gamma2`` is the same margin when one bit is
replaced by an independent copy drawn from its own marginal; it always
sits strictly below ``gamma1`` on the admissible set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-12

# Fixed outcome order used by the categorical sampler: (1,1), (0,0), (1,0), (0,1).
_OUTCOME_X = np.array([1, 0, 1, 0], dtype=np.int8)
_OUTCOME_Y = np.array([1, 0, 0, 1], dtype=np.int8)


class DistributionError(ValueError):
    """A proposed signal distribution violates a model assumption."""


class SumNotOne(DistributionError):
    """The four masses do not sum to one."""


class ZeroMass(DistributionError):
    """Some outcome has zero (or negative) mass; full support is required."""


class NotPositivelyCorrelated(DistributionError):
    """min(p11, p00) must strictly exceed max(p10, p01)."""


@dataclass(frozen=True)
class SignalDistribution:
    """Validated joint law; each field is the mass of the matching (x, y) outcome."""

    p11: float
    p00: float
    p10: float
    p01: float

    def as_array(self) -> np.ndarray:
        """Masses in sampler order: (1,1), (0,0), (1,0), (0,1)."""
        return np.array([self.p11, self.p00, self.p10, self.p01])

    @property
    def pr_x1(self) -> float:
        return self.p11 + self.p10

    @property
    def pr_y1(self) -> float:
        return self.p11 + self.p01

    @property
    def min_mass(self) -> float:
        return min(self.p11, self.p00, self.p10, self.p01)


@dataclass(frozen=True)
class DriftConstants:
    """Agreement margins of a signal distribution; gamma1 > gamma2 always."""

    gamma1: float
    gamma2: float


def validate_distribution(
    p11: float,
    p00: float,
    p10: float,
    p01: float,
    *,
    allow_unnormalized: bool = False,
) -> SignalDistribution:
    """Check the three model assumptions and return the validated law.

    With ``allow_unnormalized`` the masses may have any positive total and
    are renormalized before the remaining checks; otherwise the total must
    equal one within ``SIMPLEX_TOL``.

    Raises SumNotOne, ZeroMass, or NotPositivelyCorrelated naming the
    violated condition.
    """
    masses = np.array([p11, p00, p10, p01], dtype=float)
    if not np.all(np.isfinite(masses)):
        raise DistributionError(f"masses must be finite, got {masses.tolist()}")
    total = float(masses.sum())
    if allow_unnormalized:
        if total <= 0.0:
            raise SumNotOne(f"masses sum to {total}, cannot renormalize")
        masses = masses / total
    elif abs(total - 1.0) > SIMPLEX_TOL:
        raise SumNotOne(f"masses sum to {total!r}, expected 1 within {SIMPLEX_TOL}")
    if np.any(masses <= 0.0):
        raise ZeroMass(f"all outcomes need positive mass, got {masses.tolist()}")
    p11n, p00n, p10n, p01n = masses.tolist()
    if min(p11n, p00n) <= max(p10n, p01n):
        raise NotPositivelyCorrelated(
            f"min(p11, p00)={min(p11n, p00n)!r} must exceed max(p10, p01)={max(p10n, p01n)!r}"
        )
    return SignalDistribution(p11n, p00n, p10n, p01n)


def drift_constants(dist: SignalDistribution) -> DriftConstants:
    """Agreement margins: gamma1 for the joint law, gamma2 for independent copies."""
    gamma1 = dist.p11 + dist.p00 - dist.p10 - dist.p01
    gamma2 = (dist.p11 - dist.p00) ** 2 - (dist.p10 - dist.p01) ** 2
    return DriftConstants(gamma1=gamma1, gamma2=gamma2)


def signal_pairs_from_uniforms(
    dist: SignalDistribution, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Map uniforms in [0,1) to signal pairs by inverting the categorical CDF.

    The outcome order (1,1), (0,0), (1,0), (0,1) is part of the
    reproducibility contract: a given uniform always maps to the same pair.
    """
    cuts = np.cumsum(dist.as_array())
    idx = np.minimum(np.searchsorted(cuts, u, side="right"), 3)
    return _OUTCOME_X[idx], _OUTCOME_Y[idx]


def sample_signal_pair(dist: SignalDistribution, rng: np.random.Generator) -> tuple[int, int]:
    """Draw one signal pair from the joint law."""
    x, y = signal_pairs_from_uniforms(dist, np.array([rng.random()]))
    return int(x[0]), int(y[0])


def sample_signal_pairs(
    dist: SignalDistribution, rng: np.random.Generator, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``size`` i.i.d. signal pairs."""
    return signal_pairs_from_uniforms(dist, rng.random(size))


# Shipped default: the symmetric 2:1 law (1/3, 1/3, 1/6, 1/6), obtained by
# normalizing the weights 0.4/0.4/0.2/0.2.
DEFAULT_DISTRIBUTION = validate_distribution(0.4, 0.4, 0.2, 0.2, allow_unnormalized=True)
