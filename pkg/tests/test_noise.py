import math

import numpy as np
import pytest

from driftpec.errors import (
    InfeasibleTimes,
    InvalidInput,
    InvalidParam,
    InvalidPeriod,
    InvalidTime,
)
from driftpec.noise import (
    APDParams,
    DecoherenceTimes,
    NoiseSchedule,
    apd_channel,
    apd_channel_from_times,
    decay_probability,
    pauli_twirl,
    schedule_channel,
    separable_product,
    tphi_from_bloch_redfield,
    twirled_apd_coeffs,
)
from driftpec.quantum import PauliChannel, ptm_of_channel

from conftest import random_kraus_channel


def random_feasible_times(rng):
    t1 = rng.uniform(5.0, 300.0)
    t2 = rng.uniform(0.1, 2.0) * t1
    t = rng.uniform(0.5, 400.0)
    return t, t1, t2


class TestDecayProbability:
    def test_zero_time(self):
        assert decay_probability(0.0, 17.0) == 0.0

    def test_asymptote(self):
        assert decay_probability(1e9, 50.0) == pytest.approx(1.0, abs=1e-12)

    def test_known_value(self):
        # 1 - exp(-100/150) = 1 - exp(-2/3)
        assert decay_probability(100.0, 150.0) == pytest.approx(0.4865828810, abs=1e-9)

    def test_monotone_in_time(self):
        values = [decay_probability(t, 80.0) for t in (1, 10, 50, 200)]
        assert values == sorted(values)

    @pytest.mark.parametrize("t1", [0.0, -5.0, math.inf])
    def test_bad_t1(self, t1):
        with pytest.raises(InvalidTime):
            decay_probability(10.0, t1)


class TestBlochRedfield:
    def test_boundary_gives_infinity(self):
        assert tphi_from_bloch_redfield(50.0, 100.0) == math.inf

    def test_known_value(self):
        # 1 / (1/70 - 1/244) with the device means T1=122, T2=70
        assert tphi_from_bloch_redfield(122.0, 70.0) == pytest.approx(98.1609, abs=5e-4)

    def test_infeasible_pair_raises(self):
        # measured feeds do produce such points, e.g. T1 ~ 17 us with T2 ~ 62 us
        with pytest.raises(InfeasibleTimes):
            tphi_from_bloch_redfield(17.0, 62.0)

    def test_decoherence_times_guard(self):
        DecoherenceTimes(t1=17.0, t2=62.0)  # construction is fine
        with pytest.raises(InfeasibleTimes):
            DecoherenceTimes(t1=17.0, t2=62.0).require_physical()


class TestApdChannel:
    def test_no_damping_is_identity(self, rng):
        ch = apd_channel(APDParams(gamma=0.0, lam=0.0))
        total = sum(k @ k.conj().T for k in ch.kraus_ops)
        np.testing.assert_allclose(total, np.eye(2), atol=1e-14)
        assert np.abs(ch.kraus_ops[0] - np.eye(2)).max() < 1e-14

    def test_coherence_survival_entry(self):
        # E0[1,1] = sqrt((1-gamma)(1-lam)) at t=100, T1=150, T2=70
        ch = apd_channel(APDParams.from_times(100.0, 150.0, 70.0))
        assert ch.kraus_ops[0][1, 1].real == pytest.approx(0.3508, abs=5e-5)

    @pytest.mark.parametrize("gamma,lam", [(-0.1, 0.5), (0.5, 1.2)])
    def test_out_of_range(self, gamma, lam):
        with pytest.raises(InvalidParam):
            APDParams(gamma=gamma, lam=lam)

    def test_cptp_over_parameter_grid(self):
        for gamma in (0.0, 0.3, 0.9, 1.0):
            for lam in (0.0, 0.5, 1.0):
                ch = apd_channel(APDParams(gamma=gamma, lam=lam))
                acc = sum(k.conj().T @ k for k in ch.kraus_ops)
                np.testing.assert_allclose(acc, np.eye(2), atol=1e-12)


class TestPauliTwirl:
    def test_identity_channel(self):
        from driftpec.quantum import KrausChannel
        twirled = pauli_twirl(KrausChannel(kraus_ops=(np.eye(2, dtype=complex),)))
        np.testing.assert_allclose(twirled.x, [1, 0, 0, 0], atol=1e-14)

    def test_fixes_pauli_channels(self, rng):
        for _ in range(10):
            x = rng.dirichlet(np.ones(4))
            ch = PauliChannel(n=1, x=x)
            np.testing.assert_allclose(pauli_twirl(ch.to_kraus()).x, x, atol=1e-12)

    def test_matches_closed_form(self, rng):
        for _ in range(200):
            t, t1, t2 = random_feasible_times(rng)
            twirled = pauli_twirl(apd_channel_from_times(t, t1, t2))
            closed = twirled_apd_coeffs(t, t1, t2)
            np.testing.assert_allclose(twirled.x, closed.vector, atol=1e-10)

    def test_naive_dephasing_mode_keeps_relaxation_weights(self):
        # without coherence matching only the X/Y weights coincide exactly
        twirled = pauli_twirl(apd_channel_from_times(100, 150, 70, match_twirl=False))
        gamma = decay_probability(100, 150)
        assert twirled.x[1] == pytest.approx(gamma / 4, abs=1e-12)
        assert twirled.x[2] == pytest.approx(gamma / 4, abs=1e-12)

    def test_average_fidelity_preserved(self, rng):
        # twirl keeps the PTM trace, hence the average channel fidelity
        for _ in range(20):
            ch = random_kraus_channel(rng, dim=2, n_ops=3)
            before = np.trace(ptm_of_channel(ch).matrix)
            after = np.trace(ptm_of_channel(pauli_twirl(ch).to_kraus()).matrix)
            assert after == pytest.approx(before, abs=1e-9)

    def test_twirl_of_damping_is_valid_channel(self, rng):
        for _ in range(50):
            t, t1, t2 = random_feasible_times(rng)
            x = pauli_twirl(apd_channel(APDParams.from_times(t, t1, t2))).x
            assert x.min() >= 0
            assert x.sum() == pytest.approx(1.0, abs=1e-12)


class TestTwirledCoeffs:
    def test_zero_time(self):
        c = twirled_apd_coeffs(1e-300, 150.0, 70.0)
        np.testing.assert_allclose(c.vector, [1, 0, 0, 0], atol=1e-12)

    def test_first_device_pair(self):
        c = twirled_apd_coeffs(100.0, 150.0, 70.0)
        assert c.c0 == pytest.approx(0.5666, abs=5e-5)
        assert c.c1 == pytest.approx(0.1216, abs=5e-5)
        assert c.c2 == c.c1
        assert c.c3 == pytest.approx(0.1901, abs=5e-5)

    def test_second_device_pair(self):
        c = twirled_apd_coeffs(100.0, 200.0, 130.0)
        assert c.c0 == pytest.approx(0.6691, abs=5e-5)
        assert c.c1 == pytest.approx(0.0984, abs=5e-5)
        assert c.c3 == pytest.approx(0.1342, abs=5e-5)

    def test_simplex_and_range_over_random_triples(self, rng):
        for _ in range(300):
            t = rng.uniform(0, 500)
            t1 = rng.uniform(1, 300)
            t2 = rng.uniform(1, 300)
            c = twirled_apd_coeffs(t, t1, t2)
            # c0 is the complement by construction; re-summing costs one ulp
            assert c.c0 + c.c1 + c.c2 + c.c3 == pytest.approx(1.0, abs=1e-15)
            assert all(0 <= v <= 1 for v in c.vector)

    def test_bad_times(self):
        with pytest.raises(InvalidTime):
            twirled_apd_coeffs(100.0, -1.0, 70.0)


class TestSeparableProduct:
    def test_noiseless_pair(self):
        e0 = np.array([1.0, 0, 0, 0])
        ch = separable_product([e0, e0])
        expected = np.zeros(16)
        expected[0] = 1
        np.testing.assert_allclose(ch.x, expected, atol=0)

    def test_period0_pair_matches_published_means(self):
        ch = separable_product([twirled_apd_coeffs(100, 150, 70),
                                twirled_apd_coeffs(100, 200, 130)])
        assert ch.x[0] == pytest.approx(0.379, abs=1e-3)    # II
        assert ch.x[4] == pytest.approx(0.081, abs=1e-3)    # XI
        assert ch.x[1] == pytest.approx(0.056, abs=1e-3)    # IX
        assert ch.x[12] == pytest.approx(0.127, abs=1e-3)   # ZI

    def test_period2_pair(self):
        ch = separable_product([twirled_apd_coeffs(100, 105, 60),
                                twirled_apd_coeffs(100, 105, 96.25)])
        assert ch.x[0] == pytest.approx(0.260, abs=1e-3)    # II
        assert ch.x[3] == pytest.approx(0.079, abs=1e-3)    # IZ

    def test_empty_list(self):
        with pytest.raises(InvalidInput):
            separable_product([])

    def test_sum_and_permutation_covariance(self, rng):
        a = rng.dirichlet(np.ones(4))
        b = rng.dirichlet(np.ones(4))
        ab = separable_product([a, b]).x
        ba = separable_product([b, a]).x
        assert abs(ab.sum() - 1.0) < 1e-12
        swapped = ab.reshape(4, 4).T.reshape(16)
        np.testing.assert_allclose(ba, swapped, atol=1e-15)


class TestSchedule:
    def default(self, allow_unphysical=False):
        return NoiseSchedule.from_endpoints(
            t1_spans=[(150.0, 60.0), (200.0, 10.0)],
            t2_spans=[(70.0, 50.0), (130.0, 62.5)],
            periods=5, gate_time=100.0, allow_unphysical=allow_unphysical)

    def test_linear_interpolation(self):
        sched = self.default()
        times = sched.times_at(1)
        assert times[0].t1 == pytest.approx(127.5)
        assert times[1].t1 == pytest.approx(152.5)
        assert times[0].t2 == pytest.approx(65.0)
        assert times[1].t2 == pytest.approx(113.125)

    def test_period1_channel_spot_values(self):
        ch, _ = schedule_channel(self.default(), 1)
        assert ch.x[0] == pytest.approx(0.326, abs=1e-3)
        assert ch.x[4] == pytest.approx(0.083, abs=1e-3)

    def test_identity_weight_decreases_with_drift(self):
        sched = self.default()
        series = [schedule_channel(sched, p)[0].x[0] for p in range(3)]
        assert series[0] > series[1] > series[2]

    def test_period_out_of_range(self):
        with pytest.raises(InvalidPeriod):
            schedule_channel(self.default(), 5)

    def test_unphysical_tail_guarded(self):
        with pytest.raises(InfeasibleTimes):
            self.default().times_at(4)
        ch, times = schedule_channel(self.default(allow_unphysical=True), 4)
        assert times[1].t1 == pytest.approx(10.0)
        assert ch.x.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_shapes_and_times(self):
        with pytest.raises(InvalidInput):
            NoiseSchedule(t1_means=np.ones((2, 2)), t2_means=np.ones((3, 2)), gate_time=100.0)
        with pytest.raises(InvalidTime):
            NoiseSchedule(t1_means=np.array([[1.0, -2.0]]), t2_means=np.ones((1, 2)),
                          gate_time=100.0)
        with pytest.raises(InvalidTime):
            NoiseSchedule(t1_means=np.ones((1, 2)), t2_means=np.ones((1, 2)), gate_time=0.0)
