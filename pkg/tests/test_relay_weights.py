"""Тесты расчёта матрицы весов: SNR, подъём Кронекера, SDP и восстановление ранга 1."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from channel import SystemConfig
from conftest import random_complex
from relay_weights import (AfWeights, InfeasibleProblemError, LiftedProblem, SdpSolution, SolverError,
                           end_to_end_snr, hermitian_to_real_embedding, lift_problem,
                           lifted_relay_power, matched_filter_weights, optimize_weights,
                           rank_one_residual, real_to_hermitian, recover_weights, relay_power,
                           solve_charnes_cooper_sdp)


def _lifted_snr(w, lp, cfg):
    signal = cfg.source_power * abs(np.vdot(lp.h, w)) ** 2
    noise = cfg.relay_noise_power * np.linalg.norm(lp.a_mat.conj().T @ w) ** 2
    return signal / (noise + cfg.dest_noise_power)


def _random_search_snr(h1, h2, cfg, rng, count):
    """Лучшее SNR среди count случайных W, отмасштабированных на бюджет мощности."""
    w = random_complex(rng, count, len(h1), len(h1))
    signal = np.abs(np.einsum("i,kij,j->k", h2.conj(), w, h1)) ** 2
    noise = np.sum(np.abs(np.einsum("kji,j->ki", w.conj(), h2)) ** 2, axis=1)
    power = (cfg.source_power * np.sum(np.abs(w @ h1) ** 2, axis=1)
             + cfg.relay_noise_power * np.sum(np.abs(w) ** 2, axis=(1, 2)))
    scale = cfg.relay_power_budget / power
    snr = cfg.source_power * signal * scale / (cfg.relay_noise_power * noise * scale + cfg.dest_noise_power)
    return float(snr.max())


class TestSnrAndPower:
    def test_zero_weights(self, cfg4, rng):
        h1, h2 = random_complex(rng, 4), random_complex(rng, 4)
        assert end_to_end_snr(AfWeights.zeros(4), h1, h2, cfg4) == 0.0
        assert relay_power(AfWeights.zeros(4), h1, cfg4) == 0.0

    def test_scalar_snr(self):
        cfg = SystemConfig(n_antennas=1, source_power=1.0, relay_power_budget=10.0)
        one = np.array([1.0 + 0j])
        assert end_to_end_snr(AfWeights([[1.0]]), one, one, cfg) == pytest.approx(0.5)

    def test_scalar_power(self):
        cfg = SystemConfig(n_antennas=1, source_power=2.0, relay_noise_power=0.5)
        w = 1.5 - 0.5j
        expected = 2.0 * abs(w) ** 2 + 0.5 * abs(w) ** 2
        assert relay_power(AfWeights([[w]]), np.array([1.0 + 0j]), cfg) == pytest.approx(expected)

    def test_phase_invariance(self, cfg4, rng):
        h1, h2 = random_complex(rng, 4), random_complex(rng, 4)
        weights = AfWeights(random_complex(rng, 4, 4))
        rotated = weights.scaled(np.exp(1j * 0.9))
        assert end_to_end_snr(rotated, h1, h2, cfg4) == pytest.approx(end_to_end_snr(weights, h1, h2, cfg4),
                                                                      rel=1e-12)

    def test_lifted_forms_match(self, cfg4, rng):
        h1, h2 = random_complex(rng, 4), random_complex(rng, 4)
        weights = AfWeights(random_complex(rng, 4, 4))
        lp = lift_problem(h1, h2)
        w = weights.vec()
        assert end_to_end_snr(weights, h1, h2, cfg4) == pytest.approx(_lifted_snr(w, lp, cfg4), rel=1e-10)
        assert relay_power(weights, h1, cfg4) == pytest.approx(lifted_relay_power(w, lp, cfg4), rel=1e-10)

    def test_random_search_oracle_matches_direct_evaluation(self):
        cfg = SystemConfig(n_antennas=2)
        rng = np.random.default_rng(3)
        h1, h2 = random_complex(rng, 2), random_complex(rng, 2)
        best = _random_search_snr(h1, h2, cfg, np.random.default_rng(9), 1)
        candidate = AfWeights(random_complex(np.random.default_rng(9), 1, 2, 2)[0])
        candidate = candidate.scaled(np.sqrt(cfg.relay_power_budget / relay_power(candidate, h1, cfg)))
        assert best == pytest.approx(end_to_end_snr(candidate, h1, h2, cfg), rel=1e-12)


class TestLifting:
    def test_scalar_case(self):
        lp = lift_problem(np.array([2.0 + 1j]), np.array([0.5 - 1j]))
        assert_allclose(lp.h, [(2.0 - 1j) * (0.5 - 1j)])
        assert_allclose(lp.a_mat, [[0.5 - 1j]])
        assert_allclose(lp.b_mat, [[2.0 - 1j]])

    def test_basis_vectors_select_entry(self, rng):
        e1, e2 = np.eye(3)[0].astype(complex), np.eye(3)[1].astype(complex)
        weights = AfWeights(random_complex(rng, 3, 3))
        lp = lift_problem(e1, e2)
        assert np.vdot(lp.h, weights.vec()) == pytest.approx(weights.matrix[1, 0])

    def test_identities(self, rng):
        h1, h2 = random_complex(rng, 3), random_complex(rng, 3)
        weights = AfWeights(random_complex(rng, 3, 3))
        lp = lift_problem(h1, h2)
        w = weights.vec()
        mat = weights.matrix
        assert abs(np.vdot(lp.h, w) - np.vdot(h2, mat @ h1)) < 1e-12
        assert_allclose(lp.a_mat.conj().T @ w, mat.conj().T @ h2, atol=1e-12)
        assert_allclose(lp.b_mat.conj().T @ w, mat @ h1, atol=1e-12)

    def test_vec_is_column_major(self):
        weights = AfWeights([[1, 2], [3, 4]])
        assert_allclose(weights.vec(), [1, 3, 2, 4])
        assert_allclose(AfWeights.from_vec(weights.vec(), 2).matrix, weights.matrix)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            lift_problem(np.ones(2), np.ones(3))


class TestRealEmbedding:
    def test_identity(self):
        assert_allclose(hermitian_to_real_embedding(np.eye(2)), np.eye(4))

    def test_pauli_y_spectrum(self):
        emb = hermitian_to_real_embedding(np.array([[0, -1j], [1j, 0]]))
        assert_allclose(np.linalg.eigvalsh(emb), [-1, -1, 1, 1], atol=1e-12)

    def test_spectrum_doubling(self, rng):
        m = random_complex(rng, 4, 4)
        m = m + m.conj().T
        expected = np.sort(np.repeat(np.linalg.eigvalsh(m), 2))
        assert_allclose(np.linalg.eigvalsh(hermitian_to_real_embedding(m)), expected, atol=1e-10)

    def test_trace_identity_and_inverse(self, rng):
        m = random_complex(rng, 3, 3)
        m = m + m.conj().T
        q = random_complex(rng, 3, 3)
        q = q @ q.conj().T
        lhs = np.trace(hermitian_to_real_embedding(m) @ hermitian_to_real_embedding(q))
        assert lhs == pytest.approx(2 * np.real(np.trace(m @ q)))
        assert_allclose(real_to_hermitian(hermitian_to_real_embedding(q)), q, atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_to_real_embedding(np.array([[0, 1], [0, 0]]))


class TestRankResidual:
    def test_rank_one(self, rng):
        q = random_complex(rng, 5)
        assert rank_one_residual(np.outer(q, q.conj())) == pytest.approx(0.0, abs=1e-12)

    def test_identity(self):
        assert rank_one_residual(np.eye(2)) == pytest.approx(0.5)

    def test_zero_trace(self):
        with pytest.raises(ValueError):
            rank_one_residual(np.zeros((2, 2)))


class TestRecovery:
    def test_rank_one_recovery_up_to_phase(self, cfg4, rng):
        h1, h2 = random_complex(rng, 2), random_complex(rng, 2)
        lp = lift_problem(h1, h2)
        q = random_complex(rng, 4)
        # на границе мощности масштабирование ничего не меняет
        q *= np.sqrt(cfg4.relay_power_budget / lifted_relay_power(q, lp, cfg4))
        tau = 0.7
        sol = SdpSolution(q_tilde=tau * np.outer(q, q.conj()), tau=tau, objective=1.0)
        w = recover_weights(sol, lp, cfg4).vec()
        assert abs(np.vdot(w, q)) == pytest.approx(np.linalg.norm(q) ** 2, rel=1e-10)
        assert np.linalg.norm(w) == pytest.approx(np.linalg.norm(q), rel=1e-10)

    def test_small_tau(self, cfg4):
        lp = lift_problem(np.ones(2), np.ones(2))
        sol = SdpSolution(q_tilde=np.eye(4), tau=0.0, objective=1.0)
        with pytest.raises(SolverError):
            recover_weights(sol, lp, cfg4)

    def test_solver_error_message_carries_iteration(self):
        exc = SolverError("сбой")
        assert str(exc) == "сбой"
        exc.iteration = 3
        assert "3" in str(exc)


class TestMatchedFilter:
    def test_scalar(self, scalar_cfg):
        one = np.array([1.0 + 0j])
        weights = matched_filter_weights(one, one, scalar_cfg)
        assert abs(weights.matrix[0, 0]) == pytest.approx(np.sqrt(5.0))
        assert end_to_end_snr(weights, one, one, scalar_cfg) == pytest.approx(5.0 / 6.0)

    def test_power_is_budget_after_scaling(self, cfg4, rng):
        h1, h2 = random_complex(rng, 4), random_complex(rng, 4)
        first = matched_filter_weights(h1, h2, cfg4)
        second = matched_filter_weights(2.0 * h1, h2, cfg4)
        assert not np.allclose(first.matrix, second.matrix)
        assert relay_power(first, h1, cfg4) == pytest.approx(cfg4.relay_power_budget)
        assert relay_power(second, 2.0 * h1, cfg4) == pytest.approx(cfg4.relay_power_budget)

    def test_zero_channel(self, cfg4):
        with pytest.raises(ValueError):
            matched_filter_weights(np.zeros(4), np.ones(4), cfg4)


class TestSdp:
    def test_scalar_closed_form(self, scalar_cfg):
        one = np.array([1.0 + 0j])
        weights, diagnostics = optimize_weights(one, one, scalar_cfg)
        assert abs(weights.matrix[0, 0]) ** 2 == pytest.approx(5.0, rel=1e-6)
        assert end_to_end_snr(weights, one, one, scalar_cfg) == pytest.approx(5.0 / 6.0, rel=1e-6)
        assert diagnostics.implied_snr == pytest.approx(5.0 / 6.0, rel=1e-5)

    def test_relaxation_is_tight(self, cfg4, rng):
        h1, h2 = random_complex(rng, 3), random_complex(rng, 3)
        cfg = cfg4.replace(n_antennas=3)
        lp = lift_problem(h1, h2)
        sol = solve_charnes_cooper_sdp(lp, cfg)
        assert rank_one_residual(sol.q_tilde / sol.tau) <= 1e-5

        weights = recover_weights(sol, lp, cfg)
        snr = end_to_end_snr(weights, h1, h2, cfg)
        assert abs(snr - sol.implied_snr) / sol.implied_snr <= 1e-6
        assert relay_power(weights, h1, cfg) == pytest.approx(cfg.relay_power_budget, rel=1e-9)

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_relaxation_is_tight_on_random_instances(self, n):
        rng = np.random.default_rng(500 + n)
        cfg = SystemConfig(n_antennas=n)
        for _ in range(25):
            h1, h2 = random_complex(rng, n), random_complex(rng, n)
            lp = lift_problem(h1, h2)
            sol = solve_charnes_cooper_sdp(lp, cfg)
            assert rank_one_residual(sol.q_tilde / sol.tau) <= 1e-5

            weights = recover_weights(sol, lp, cfg)
            snr = end_to_end_snr(weights, h1, h2, cfg)
            assert abs(snr - sol.implied_snr) / sol.implied_snr <= 1e-6
            assert relay_power(weights, h1, cfg) <= cfg.relay_power_budget * (1 + 1e-6)

    @pytest.mark.parametrize("seed", range(20))
    def test_beats_random_search(self, seed):
        rng = np.random.default_rng(seed)
        cfg = SystemConfig(n_antennas=2)
        h1, h2 = random_complex(rng, 2), random_complex(rng, 2)
        weights, _ = optimize_weights(h1, h2, cfg)
        sdp_snr = end_to_end_snr(weights, h1, h2, cfg)
        mf_snr = end_to_end_snr(matched_filter_weights(h1, h2, cfg), h1, h2, cfg)
        assert sdp_snr >= mf_snr - 1e-6
        assert sdp_snr >= _random_search_snr(h1, h2, cfg, rng, 10000) - 1e-6

    def test_matches_matched_filter(self, cfg4, rng):
        h1, h2 = random_complex(rng, 4), random_complex(rng, 4)
        weights, diagnostics = optimize_weights(h1, h2, cfg4)
        sdp_snr = end_to_end_snr(weights, h1, h2, cfg4)
        mf_snr = end_to_end_snr(matched_filter_weights(h1, h2, cfg4), h1, h2, cfg4)
        assert mf_snr <= sdp_snr * (1 + 1e-6)
        assert sdp_snr <= mf_snr * (1 + 1e-6)
        assert diagnostics.rank_residual <= 1e-5
        assert diagnostics.status in ("optimal", "optimal_inaccurate")

    def test_degenerate_channel(self, cfg4):
        weights, diagnostics = optimize_weights(np.zeros(4, dtype=complex), np.ones(4, dtype=complex), cfg4)
        assert not np.any(weights.matrix)
        assert diagnostics.status == "degenerate"

    def test_infeasible_lifted_problem(self, cfg4):
        lp = LiftedProblem(h=np.zeros(4, dtype=complex), a_mat=np.zeros((4, 2)), b_mat=np.zeros((4, 2)))
        with pytest.raises(InfeasibleProblemError):
            solve_charnes_cooper_sdp(lp, cfg4)
