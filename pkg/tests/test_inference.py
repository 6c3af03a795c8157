import math

import numpy as np
import pytest

from driftpec.errors import DimMismatch, InvalidInput
from driftpec.experiment import GATES, default_schedule, default_test_state, ideal_histogram
from driftpec.inference import (
    CalibrationModel,
    MapOptions,
    ShotRecord,
    log_likelihood,
    log_posterior,
    map_estimate,
    map_objective,
    predicted_probs,
    roll_prior,
    simulate_shots,
)
from driftpec.noise import schedule_channel
from driftpec.pec import quasiprob_decompose
from driftpec.quantum import (
    DensityMatrix,
    PauliChannel,
    apply_channel,
    measure_probs,
    pauli_label,
    pauli_matrix,
)

HH = GATES["HH"]


@pytest.fixture(scope="module")
def rho_test():
    return default_test_state()


@pytest.fixture(scope="module")
def channels():
    sched = default_schedule()
    return [schedule_channel(sched, p)[0] for p in range(3)]


@pytest.fixture(scope="module")
def mixture_model(rho_test, channels):
    theta0 = quasiprob_decompose(channels[0], HH)
    return CalibrationModel(gate=HH, rho_test=rho_test, kind="old-pec-mixture",
                            theta_old=theta0.theta)


@pytest.fixture(scope="module")
def plain_model(rho_test):
    return CalibrationModel(gate=HH, rho_test=rho_test, kind="plain-noisy")


def mixture_probs_dense(theta_old, x, rho_test):
    """Independent path: apply each Pauli-conjugated noisy circuit as dense
    channel algebra and mix with the sampling weights."""
    weights = np.abs(theta_old) / np.abs(theta_old).sum()
    base = HH @ rho_test.matrix @ HH.conj().T
    out = np.zeros(4)
    for w, pw in enumerate(weights):
        pm = pauli_matrix(pauli_label(w, 2))
        conj = DensityMatrix.from_matrix(pm @ base @ pm.conj().T,
                                         eig_floor=rho_test.eig_floor)
        out += pw * measure_probs(apply_channel(x, conj))
    return out


class TestShotRecord:
    def test_total(self):
        assert ShotRecord(counts=np.array([3, 0, 2, 5])).total == 10

    def test_rejects_negative_and_fractional(self):
        with pytest.raises(InvalidInput):
            ShotRecord(counts=np.array([1, -1, 0, 0]))
        with pytest.raises(InvalidInput):
            ShotRecord(counts=np.array([1.5, 0.5, 0, 0]))


class TestCalibrationModel:
    def test_rejects_non_unitary_gate(self, rho_test):
        with pytest.raises(InvalidInput):
            CalibrationModel(gate=np.eye(4) * 0.5, rho_test=rho_test, kind="plain-noisy")

    def test_mixture_needs_theta(self, rho_test):
        with pytest.raises(InvalidInput):
            CalibrationModel(gate=HH, rho_test=rho_test, kind="old-pec-mixture")

    def test_rejects_unknown_kind(self, rho_test):
        with pytest.raises(InvalidInput):
            CalibrationModel(gate=HH, rho_test=rho_test, kind="maximum-likelihood")


class TestPredictedProbs:
    def test_noiseless_plain_model_gives_ideal(self, plain_model, rho_test):
        e_ii = np.zeros(16)
        e_ii[0] = 1.0
        probs = predicted_probs(PauliChannel(n=2, x=e_ii), plain_model)
        np.testing.assert_allclose(probs, ideal_histogram(HH, rho_test), atol=1e-12)

    def test_mixture_matches_dense_superoperator_path(self, mixture_model, rho_test,
                                                      channels, rng):
        for x in (channels[0], channels[2],
                  PauliChannel(n=2, x=rng.dirichlet(np.ones(16)))):
            expected = mixture_probs_dense(mixture_model.theta_old, x, rho_test)
            np.testing.assert_allclose(predicted_probs(x, mixture_model), expected,
                                       atol=1e-10)

    def test_always_a_histogram(self, mixture_model, plain_model, rng):
        for model in (mixture_model, plain_model):
            for _ in range(10):
                p = predicted_probs(rng.dirichlet(np.ones(16)), model)
                assert p.min() >= -1e-12
                assert p.sum() == pytest.approx(1.0, abs=1e-9)

    def test_dim_mismatch(self, plain_model):
        with pytest.raises(DimMismatch):
            predicted_probs(np.ones(4) / 4, plain_model)


class TestSimulateShots:
    def test_degenerate_distribution(self, rng):
        rec = simulate_shots(np.array([1.0, 0, 0, 0]), 100, rng)
        np.testing.assert_array_equal(rec.counts, [100, 0, 0, 0])

    def test_uniform_within_five_sigma(self, rng):
        shots = 100_000
        rec = simulate_shots(np.full(4, 0.25), shots, rng)
        sigma = math.sqrt(shots * 0.25 * 0.75)
        assert np.abs(rec.counts - shots / 4).max() < 5 * sigma

    def test_seed_determinism(self):
        p = np.array([0.7, 0.1, 0.15, 0.05])
        a = simulate_shots(p, 1000, np.random.default_rng(11)).counts
        b = simulate_shots(p, 1000, np.random.default_rng(11)).counts
        np.testing.assert_array_equal(a, b)

    def test_needs_positive_mass(self, rng):
        with pytest.raises(InvalidInput):
            simulate_shots(np.zeros(4), 10, rng)


class TestLogLikelihood:
    def test_empty_record(self, plain_model, channels):
        rec = ShotRecord(counts=np.zeros(4, dtype=int))
        assert log_likelihood(channels[0], rec, plain_model) == 0.0

    def test_single_count(self, plain_model, channels):
        rec = ShotRecord(counts=np.array([1, 0, 0, 0]))
        p = predicted_probs(channels[0], plain_model)
        assert log_likelihood(channels[0], rec, plain_model) == pytest.approx(
            math.log(p[0]), abs=1e-12)

    def test_additive_over_records(self, plain_model, channels, rng):
        p = predicted_probs(channels[1], plain_model)
        rec_a = simulate_shots(p, 500, rng)
        rec_b = simulate_shots(p, 700, rng)
        joint = ShotRecord(counts=rec_a.counts + rec_b.counts)
        assert log_likelihood(channels[0], joint, plain_model) == pytest.approx(
            log_likelihood(channels[0], rec_a, plain_model)
            + log_likelihood(channels[0], rec_b, plain_model), abs=1e-9)

    def test_slice_grid_argmax_recovers_truth(self, plain_model, channels):
        # two-parameter slice x(a, b) spanned by the three drift channels;
        # the likelihood over exact large-sample counts peaks at the truth
        v = [c.x for c in channels]
        a_true, b_true = 0.3, 0.5

        def on_slice(a, b):
            return PauliChannel(n=2, x=a * v[0] + b * v[1] + (1 - a - b) * v[2])

        p_true = predicted_probs(on_slice(a_true, b_true), plain_model)
        counts = ShotRecord(counts=np.round(1e6 * p_true).astype(int))
        grid = np.linspace(0.0, 1.0, 41)
        best, best_ab = -np.inf, None
        for a in grid:
            for b in grid:
                if a + b > 1.0:
                    continue
                val = log_likelihood(on_slice(a, b), counts, plain_model)
                if val > best:
                    best, best_ab = val, (a, b)
        assert best_ab[0] == pytest.approx(a_true, abs=0.025 + 1e-9)
        assert best_ab[1] == pytest.approx(b_true, abs=0.025 + 1e-9)


class TestLogPosterior:
    def test_flat_prior_equals_likelihood(self, plain_model, channels, rng):
        rec = simulate_shots(predicted_probs(channels[1], plain_model), 1000, rng)
        lp = log_posterior(channels[0], rec, plain_model, np.ones(16))
        ll = log_likelihood(channels[0], rec, plain_model)
        assert lp == pytest.approx(ll, abs=1e-12)

    def test_prior_terms_added(self, plain_model, channels, rng):
        rec = simulate_shots(predicted_probs(channels[1], plain_model), 1000, rng)
        eta = rng.uniform(1.5, 4.0, size=16)
        expected = (log_likelihood(channels[0], rec, plain_model)
                    + ((eta - 1) * np.log(channels[0].x)).sum())
        assert log_posterior(channels[0], rec, plain_model, eta) == pytest.approx(
            expected, abs=1e-9)


class TestMapObjectiveGradient:
    def test_matches_central_differences(self, mixture_model, channels, rng):
        rec = simulate_shots(predicted_probs(channels[1], mixture_model), 100_000,
                             np.random.default_rng(5))
        eta = roll_prior(channels[0], 50.0)
        h = 1e-6
        for _ in range(20):
            z = rng.normal(scale=1.5, size=16)
            _, grad = map_objective(z, rec, mixture_model, eta)
            fd = np.empty(16)
            for i in range(16):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                fd[i] = (map_objective(zp, rec, mixture_model, eta)[0]
                         - map_objective(zm, rec, mixture_model, eta)[0]) / (2 * h)
            assert np.linalg.norm(fd - grad) <= 1e-5 * np.linalg.norm(grad)


class TestMapEstimate:
    def test_zero_data_returns_prior_mode(self, mixture_model, channels):
        eta = roll_prior(channels[1], 50.0)
        rec = ShotRecord(counts=np.zeros(4, dtype=int))
        est = map_estimate(rec, mixture_model, eta, MapOptions(seed=3))
        np.testing.assert_allclose(est.x_hat.x, eta.mode, atol=1e-6)
        assert est.converged

    def test_bitwise_determinism(self, mixture_model, channels):
        rec = simulate_shots(predicted_probs(channels[1], mixture_model), 20_000,
                             np.random.default_rng(8))
        eta = roll_prior(channels[0], 50.0)
        a = map_estimate(rec, mixture_model, eta, MapOptions(seed=4))
        b = map_estimate(rec, mixture_model, eta, MapOptions(seed=4))
        assert np.array_equal(a.x_hat.x, b.x_hat.x)
        assert a.log_posterior_value == b.log_posterior_value
        assert (a.iterations, a.converged, a.restart) == (b.iterations, b.converged, b.restart)

    def test_recovers_first_drift_step(self, mixture_model, channels):
        # calibration stream from the drifted channel through the deployed
        # circuit; the identity weight lands within 0.03 of the true 0.326
        rec = simulate_shots(predicted_probs(channels[1], mixture_model), 100_000,
                             np.random.default_rng(1))
        eta = roll_prior(channels[0], 50.0)
        est = map_estimate(rec, mixture_model, eta, MapOptions(seed=1))
        assert abs(est.x_hat.x[0] - 0.326) <= 0.03
        assert est.log_posterior_value >= log_posterior(channels[1], rec,
                                                        mixture_model, eta)

    def test_recovers_second_drift_step(self, rho_test, channels):
        theta1 = quasiprob_decompose(channels[1], HH)
        model = CalibrationModel(gate=HH, rho_test=rho_test, kind="old-pec-mixture",
                                 theta_old=theta1.theta)
        rec = simulate_shots(predicted_probs(channels[2], model), 100_000,
                             np.random.default_rng(1))
        eta = roll_prior(channels[1], 50.0)
        est = map_estimate(rec, model, eta, MapOptions(seed=2))
        assert abs(est.x_hat.x[0] - 0.260) <= 0.03

    def test_counts_scale_pulls_toward_data(self, mixture_model, channels):
        # prior influence shrinks as the record grows: the predicted
        # histogram approaches the empirical one monotonically
        p_gen = predicted_probs(channels[2], mixture_model)
        base = simulate_shots(p_gen, 2000, np.random.default_rng(9)).counts
        empirical = base / base.sum()
        eta = roll_prior(channels[0], 50.0)
        gaps = []
        for scale in (1, 10, 100):
            rec = ShotRecord(counts=base * scale)
            est = map_estimate(rec, mixture_model, eta, MapOptions(seed=6))
            gaps.append(np.abs(predicted_probs(est.x_hat, mixture_model) - empirical).max())
        assert gaps[0] > gaps[1] > gaps[2]

    def test_identifiable_projection_at_large_counts(self, mixture_model, channels):
        p_gen = predicted_probs(channels[1], mixture_model)
        rec = simulate_shots(p_gen, 10**6, np.random.default_rng(12))
        est = map_estimate(rec, mixture_model, np.full(16, 2.0), MapOptions(seed=7))
        predicted = predicted_probs(est.x_hat, mixture_model)
        assert np.abs(predicted - p_gen).max() <= 0.005

    def test_nonconvergence_reports_best_iterate(self, mixture_model, channels):
        rec = simulate_shots(predicted_probs(channels[1], mixture_model), 50_000,
                             np.random.default_rng(3))
        eta = roll_prior(channels[0], 50.0)
        est = map_estimate(rec, mixture_model, eta,
                           MapOptions(seed=5, max_iterations=3))
        assert not est.converged
        assert est.x_hat.x.sum() == pytest.approx(1.0, abs=1e-9)
        assert np.isfinite(est.log_posterior_value)


class TestRollPrior:
    def test_mode_is_anchor(self, channels):
        prior = roll_prior(channels[1], 50.0)
        np.testing.assert_allclose(prior.mode, channels[1].x, atol=1e-15)
        assert prior.eta.min() > 1.0

    def test_mode_limit_at_large_concentration(self, channels):
        prior = roll_prior(channels[0], 1e9)
        np.testing.assert_allclose(prior.mode, channels[0].x, atol=1e-12)

    def test_uniform_anchor(self):
        prior = roll_prior(np.full(16, 1 / 16), 160.0)
        np.testing.assert_allclose(prior.eta, np.full(16, 11.0), atol=1e-12)

    def test_rejects_bad_concentration(self, channels):
        with pytest.raises(InvalidInput):
            roll_prior(channels[0], 0.0)
