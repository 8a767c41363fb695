import numpy as np
import pytest

from peerca.signals import (
    DEFAULT_DISTRIBUTION,
    DistributionError,
    NotPositivelyCorrelated,
    SumNotOne,
    ZeroMass,
    drift_constants,
    sample_signal_pair,
    sample_signal_pairs,
    validate_distribution,
)

THIRDS = (1 / 3, 1 / 3, 1 / 6, 1 / 6)


def random_valid_distribution(rng):
    """Two large masses for the matching outcomes, two small for the rest."""
    while True:
        w = np.sort(rng.random(4))[::-1]
        w /= w.sum()
        big = rng.permutation(w[:2])
        small = rng.permutation(w[2:])
        if min(big) > max(small) and min(small) > 0:
            return validate_distribution(big[0], big[1], small[0], small[1])


class TestValidation:
    def test_accepts_normalized_default(self):
        d = validate_distribution(*THIRDS)
        assert d.as_array() == pytest.approx(THIRDS, abs=1e-15)

    def test_rejects_unnormalized_weights_as_printed(self):
        with pytest.raises(SumNotOne):
            validate_distribution(0.4, 0.4, 0.2, 0.2)

    def test_rejects_independence_boundary(self):
        with pytest.raises(NotPositivelyCorrelated):
            validate_distribution(0.25, 0.25, 0.25, 0.25)

    def test_accepts_asymmetric_correlated(self):
        d = validate_distribution(0.4, 0.4, 0.1, 0.1)
        assert d.p10 == 0.1

    def test_rejects_zero_mass(self):
        with pytest.raises(ZeroMass):
            validate_distribution(0.5, 0.5, 0.0, 0.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(DistributionError):
            validate_distribution(float("nan"), 0.4, 0.1, 0.1)

    def test_renormalization_override(self):
        d = validate_distribution(0.4, 0.4, 0.2, 0.2, allow_unnormalized=True)
        assert d.as_array() == pytest.approx(THIRDS, abs=1e-12)
        assert d == DEFAULT_DISTRIBUTION

    def test_override_still_needs_positive_total(self):
        with pytest.raises(SumNotOne):
            validate_distribution(0.0, 0.0, 0.0, 0.0, allow_unnormalized=True)


class TestDriftConstants:
    def test_default_distribution(self):
        dc = drift_constants(validate_distribution(*THIRDS))
        assert dc.gamma1 == pytest.approx(1 / 3, abs=1e-15)
        assert dc.gamma2 == pytest.approx(0.0, abs=1e-15)

    def test_asymmetric_distribution(self):
        dc = drift_constants(validate_distribution(0.5, 0.3, 0.1, 0.1))
        assert dc.gamma1 == pytest.approx(0.6, abs=1e-12)
        assert dc.gamma2 == pytest.approx(0.04, abs=1e-12)

    def test_symmetric_distributions_have_zero_gamma2(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            eps = rng.uniform(0.0, 0.2)
            d = validate_distribution(
                0.3 + eps / 2, 0.3 + eps / 2, 0.2 - eps / 2, 0.2 - eps / 2
            )
            assert drift_constants(d).gamma2 == pytest.approx(0.0, abs=1e-15)

    def test_gamma1_dominates_gamma2_on_random_valid_laws(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            dc = drift_constants(random_valid_distribution(rng))
            assert dc.gamma1 > 0
            assert dc.gamma1 - dc.gamma2 > 0

    def test_independent_copy_margin_identity(self):
        # The agreement margin of independent marginal copies equals gamma2.
        rng = np.random.default_rng(12)
        for _ in range(300):
            d = random_valid_distribution(rng)
            px1, py1 = d.pr_x1, d.pr_y1
            margin = px1 * py1 + (1 - px1) * (1 - py1) - px1 * (1 - py1) - (1 - px1) * py1
            assert margin == pytest.approx(drift_constants(d).gamma2, abs=1e-12)


class TestSampling:
    def test_determinism_same_stream_state(self):
        d = DEFAULT_DISTRIBUTION
        a = sample_signal_pairs(d, np.random.default_rng(123), 50)
        b = sample_signal_pairs(d, np.random.default_rng(123), 50)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    def test_scalar_draw_matches_vector_draw(self):
        d = DEFAULT_DISTRIBUTION
        xs, ys = sample_signal_pairs(d, np.random.default_rng(9), 1)
        x, y = sample_signal_pair(d, np.random.default_rng(9))
        assert (x, y) == (int(xs[0]), int(ys[0]))

    def test_empirical_frequencies_match_masses(self):
        d = validate_distribution(*THIRDS)
        x, y = sample_signal_pairs(d, np.random.default_rng(42), 1_000_000)
        freq = {
            (1, 1): np.mean((x == 1) & (y == 1)),
            (0, 0): np.mean((x == 0) & (y == 0)),
            (1, 0): np.mean((x == 1) & (y == 0)),
            (0, 1): np.mean((x == 0) & (y == 1)),
        }
        assert freq[(1, 1)] == pytest.approx(d.p11, abs=0.005)
        assert freq[(0, 0)] == pytest.approx(d.p00, abs=0.005)
        assert freq[(1, 0)] == pytest.approx(d.p10, abs=0.005)
        assert freq[(0, 1)] == pytest.approx(d.p01, abs=0.005)

    def test_empirical_marginal(self):
        d = validate_distribution(0.4, 0.4, 0.1, 0.1)
        x, _ = sample_signal_pairs(d, np.random.default_rng(7), 1_000_000)
        assert x.mean() == pytest.approx(d.pr_x1, abs=0.005)
        assert d.pr_x1 == pytest.approx(0.5)
