import itertools

import numpy as np
import pytest

from peerca.mechanism import (
    COUNTERFACTUAL_PATTERNS,
    RoundPayment,
    Strategy,
    agreement_payments,
    apply_strategy,
    ca_payment,
    ca_rank2,
    counterfactual_matrix,
    counterfactual_vector,
    reports_for,
)

BITS = (0, 1)


def xor_payment(xhat, yhat, xhat_prev, yhat_prev):
    # Independent formulation: agreement indicator as 1 - XOR.
    r = (xhat ^ yhat_prev) - (xhat ^ yhat)
    s = (yhat ^ xhat_prev) - (yhat ^ xhat)
    return r, s


class TestApplyStrategy:
    def test_truthful_is_identity(self):
        assert apply_strategy(Strategy.TRUTHFUL, 1) == 1
        assert apply_strategy(Strategy.TRUTHFUL, 0) == 0

    def test_flip(self):
        assert apply_strategy(Strategy.FLIP, 1) == 0
        assert apply_strategy(Strategy.FLIP, 0) == 1

    def test_constants(self):
        assert apply_strategy(Strategy.ALWAYS_ONE, 0) == 1
        assert apply_strategy(Strategy.ALWAYS_ZERO, 1) == 0

    def test_uninformative_flags(self):
        assert not Strategy.TRUTHFUL.uninformative
        assert not Strategy.FLIP.uninformative
        assert Strategy.ALWAYS_ONE.uninformative
        assert Strategy.ALWAYS_ZERO.uninformative


class TestPayment:
    def test_equal_current_reports_cancel_for_r(self):
        for prev in BITS:
            assert ca_payment(1, 1, prev, 1).r == 0

    def test_spec_rows(self):
        assert ca_payment(1, 1, 0, 0) == RoundPayment(1, 1)
        assert ca_payment(0, 1, 1, 0) == RoundPayment(-1, -1)

    def test_all_sixteen_inputs_against_xor_oracle(self):
        for xhat, yhat, xp, yp in itertools.product(BITS, repeat=4):
            got = ca_payment(xhat, yhat, xp, yp)
            assert (got.r, got.s) == xor_payment(xhat, yhat, xp, yp)
            assert got.r in (-1, 0, 1) and got.s in (-1, 0, 1)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        xh, yh, xp, yp = (rng.integers(0, 2, 200, dtype=np.int8) for _ in range(4))
        r, s = agreement_payments(xh, yh, xp, yp)
        for i in range(200):
            pay = ca_payment(int(xh[i]), int(yh[i]), int(xp[i]), int(yp[i]))
            assert (pay.r, pay.s) == (r[i], s[i])


class TestCounterfactual:
    def test_spec_rows(self):
        assert counterfactual_vector(1, 1, 0) == (1, -1, 1, -1)
        assert counterfactual_vector(1, 1, 1) == (0, 0, 0, 0)
        assert counterfactual_vector(0, 1, 0) == (-1, 1, 1, -1)

    def test_all_eight_inputs_land_in_pattern_set(self):
        for signal, now, prev in itertools.product(BITS, repeat=3):
            cf = counterfactual_vector(signal, now, prev)
            assert cf in COUNTERFACTUAL_PATTERNS
            assert (cf[0] - cf[1] + cf[2] - cf[3]) % 4 == 0

    def test_chosen_entry_equals_realized_payment(self):
        # Whatever strategy is played, its counterfactual entry is the
        # payment the mechanism actually pays for the resulting report.
        for signal, now, prev in itertools.product(BITS, repeat=3):
            cf = counterfactual_vector(signal, now, prev)
            for strategy in Strategy:
                report = apply_strategy(strategy, signal)
                assert cf[strategy - 1] == ca_payment(report, now, 0, prev).r

    def test_matrix_matches_scalar(self):
        rows = list(itertools.product(BITS, repeat=3))
        sig, now, prev = (np.array(col, dtype=np.int8) for col in zip(*rows))
        matrix = counterfactual_matrix(sig, now, prev)
        for i, (s, n, p) in enumerate(rows):
            assert tuple(matrix[i]) == counterfactual_vector(s, n, p)

    def test_reports_for_matches_apply_strategy(self):
        codes = np.array([0, 1, 2, 3, 0, 3], dtype=np.int8)
        signals = np.array([1, 1, 0, 1, 0, 0], dtype=np.int8)
        reports = reports_for(codes, signals)
        for i in range(len(codes)):
            assert reports[i] == apply_strategy(Strategy(codes[i] + 1), int(signals[i]))


class TestRankK:
    def test_rank2_reproduces_direct_payments(self):
        rng = np.random.default_rng(17)
        mech = ca_rank2()
        xhats = rng.integers(0, 2, 500).tolist()
        yhats = rng.integers(0, 2, 500).tolist()
        stream = mech.payment_stream(xhats, yhats)
        xp, yp = 0, 0
        for t in range(500):
            assert stream[t] == ca_payment(xhats[t], yhats[t], xp, yp)
            xp, yp = xhats[t], yhats[t]

    def test_boundary_before_round_one_is_zero(self):
        mech = ca_rank2()
        first = mech.payment_stream([1], [1])[0]
        assert first == ca_payment(1, 1, 0, 0)

    def test_stream_length_mismatch(self):
        with pytest.raises(ValueError):
            ca_rank2().payment_stream([1], [1, 0])
