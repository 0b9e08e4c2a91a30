"""
Модуль для расчёта матрицы весов AF-ретранслятора.

Ретранслятор умножает принятый вектор на матрицу W и переизлучает его.
Задача: максимизировать сквозное SNR

    γ = P_s |h2^H W h1|^2 / (σ_r² ‖h2^H W‖^2 + σ_d²)

при ограничении мощности P_s ‖W h1‖^2 + σ_r² ‖W‖^2 <= P_tot.

Как это работает:
1. Переход к вектору w = vec(W) через произведение Кронекера (LiftedProblem)
2. Полуопределённая релаксация Q = w w^H и преобразование Чарнса-Купера
   превращают дробную задачу в обычную SDP
3. SDP решается методом внутренней точки (cvxpy) в вещественном вложении
4. Из Q = Q̃/τ восстанавливается w = sqrt(λ_max) * x по главному собственному вектору

Релаксация всегда точна (оптимальное Q имеет ранг 1), это проверяется
во время работы через rank_one_residual.
"""
import logging
import time
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import cvxpy as cp  # моделирование SDP, решатель CLARABEL
import numpy as np
from scipy.linalg import eigh  # только главный собственный вектор (subset_by_index)

from channel import SystemConfig

logger = logging.getLogger(__name__)

# Статусы cvxpy, которые считаются решением
_ACCEPTED_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)


class SolverError(RuntimeError):
    """
    SDP не решена (решатель не сошёлся или τ слишком мало).

    Атрибут iteration заполняется внешним циклом AO при повторном выбросе.
    """

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration

    def __str__(self):
        base = super().__str__()
        if self.iteration is None:
            return base
        return f"итерация {self.iteration}: {base}"


class InfeasibleProblemError(ValueError):
    """Поднятый канал h почти нулевой: ограничение Tr(P_s h h^H Q̃) = 1 невыполнимо."""


@dataclass(frozen=True)
class AfWeights:
    """Комплексная матрица весов W размера N x N."""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"W должна быть квадратной, получена форма {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("W содержит нечисловые элементы")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def zeros(cls, n: int) -> "AfWeights":
        return cls(np.zeros((n, n), dtype=complex))

    @classmethod
    def from_vec(cls, w: np.ndarray, n: int) -> "AfWeights":
        """unvec по столбцам (обратная операция к vec)."""
        return cls(np.asarray(w).reshape((n, n), order="F"))

    def vec(self) -> np.ndarray:
        """vec(W) по столбцам, как в тождестве vec(A1 A2 A3) = (A3^T ⊗ A1) vec(A2)."""
        return self.matrix.reshape(-1, order="F")

    def scaled(self, factor: complex) -> "AfWeights":
        return AfWeights(self.matrix * factor)

    def to_dict(self) -> Dict:
        return {"real": self.matrix.real.tolist(), "imag": self.matrix.imag.tolist()}


@dataclass(frozen=True)
class LiftedProblem:
    """
    Задача в переменной w = vec(W).

    h = h1* ⊗ h2, A = I ⊗ h2, B = h1* ⊗ I, так что
    h^H w = h2^H W h1, ‖A^H w‖ = ‖h2^H W‖, ‖B^H w‖ = ‖W h1‖.
    """

    h: np.ndarray
    a_mat: np.ndarray
    b_mat: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.a_mat.shape[1]


@dataclass(frozen=True)
class SdpSolution:
    """Решение SDP после преобразования Чарнса-Купера."""

    q_tilde: np.ndarray
    tau: float
    objective: float
    iterations: int = 0
    status: str = ""
    solve_time: float = 0.0

    @property
    def implied_snr(self) -> float:
        """SNR, соответствующее оптимуму: 1 / значение целевой функции."""
        return 1.0 / self.objective


@dataclass(frozen=True)
class WeightDiagnostics:
    """Диагностика одного обновления W (для логов эксперимента)."""

    objective: float
    implied_snr: float
    rank_residual: float
    iterations: int
    status: str
    solve_time: float

    def to_dict(self) -> Dict:
        return {
            "objective": self.objective,
            "implied_snr": self.implied_snr,
            "rank_residual": self.rank_residual,
            "iterations": self.iterations,
            "status": self.status,
            "solve_time": self.solve_time,
        }


def _matrix(weights) -> np.ndarray:
    return weights.matrix if isinstance(weights, AfWeights) else np.asarray(weights, dtype=complex)


# ============================================
# SNR И МОЩНОСТЬ
# ============================================

def end_to_end_snr(weights: AfWeights, h1: np.ndarray, h2: np.ndarray, cfg: SystemConfig) -> float:
    """
    Сквозное SNR на приёмнике.

    Args:
        weights: Матрица весов W
        h1: Канал источник -> ретранслятор (N)
        h2: Канал ретранслятор -> приёмник (N)
        cfg: Параметры системы

    Returns:
        γ = P_s |h2^H W h1|^2 / (σ_r² ‖h2^H W‖^2 + σ_d²)
    """
    w = _matrix(weights)
    signal = cfg.source_power * abs(np.vdot(h2, w @ h1)) ** 2
    forwarded_noise = cfg.relay_noise_power * np.linalg.norm(w.conj().T @ h2) ** 2
    return float(signal / (forwarded_noise + cfg.dest_noise_power))


def relay_power(weights: AfWeights, h1: np.ndarray, cfg: SystemConfig) -> float:
    """Мощность передачи ретранслятора P_s ‖W h1‖^2 + σ_r² ‖W‖_F^2."""
    w = _matrix(weights)
    return float(cfg.source_power * np.linalg.norm(w @ h1) ** 2
                 + cfg.relay_noise_power * np.linalg.norm(w, "fro") ** 2)


def lifted_relay_power(w: np.ndarray, lp: LiftedProblem, cfg: SystemConfig) -> float:
    """Мощность ретранслятора в поднятой форме P_s w^H B B^H w + σ_r² w^H w."""
    return float(cfg.source_power * np.linalg.norm(lp.b_mat.conj().T @ w) ** 2
                 + cfg.relay_noise_power * np.linalg.norm(w) ** 2)


def lift_problem(h1: np.ndarray, h2: np.ndarray) -> LiftedProblem:
    """Построить h, A, B для задачи в переменной w = vec(W)."""
    h1 = np.asarray(h1, dtype=complex).ravel()
    h2 = np.asarray(h2, dtype=complex).ravel()
    if h1.shape != h2.shape:
        raise ValueError(f"Длины h1 ({h1.size}) и h2 ({h2.size}) должны совпадать")
    n = h1.size
    eye = np.eye(n)
    return LiftedProblem(
        h=np.kron(h1.conj(), h2),
        a_mat=np.kron(eye, h2[:, None]),
        b_mat=np.kron(h1.conj()[:, None], eye),
    )


# ============================================
# ВЕЩЕСТВЕННОЕ ВЛОЖЕНИЕ
# ============================================
# Эрмитова M размера n вкладывается в симметричную [[Re M, -Im M], [Im M, Re M]]
# размера 2n. Спектр при этом дублируется, а Tr(emb(M) emb(Q)) = 2 Tr(M Q).

def hermitian_to_real_embedding(m: np.ndarray) -> np.ndarray:
    """
    Вещественное симметричное вложение эрмитовой матрицы.

    Raises:
        ValueError: если матрица не эрмитова (допуск 1e-10)
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"Ожидается квадратная матрица, получена форма {m.shape}")
    if not np.allclose(m, m.conj().T, rtol=0.0, atol=1e-10):
        raise ValueError("Матрица не эрмитова")
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def real_to_hermitian(x: np.ndarray) -> np.ndarray:
    """Обратная операция к вложению (с усреднением блоков)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0] // 2
    real = 0.5 * (x[:n, :n] + x[n:, n:])
    imag = 0.5 * (x[n:, :n] - x[:n, n:])
    q = real + 1j * imag
    return 0.5 * (q + q.conj().T)


# ============================================
# SDP ЧАРНСА-КУПЕРА
# ============================================

def solve_charnes_cooper_sdp(lp: LiftedProblem, cfg: SystemConfig) -> SdpSolution:
    """
    Решить SDP после преобразования Чарнса-Купера.

        min   Tr(σ_r² A A^H Q̃) + τ σ_d²
        s.t.  Tr((P_s B B^H + σ_r² I) Q̃) <= τ P_tot
              Tr(P_s h h^H Q̃) = 1,  Q̃ ⪰ 0,  τ >= 0

    Комплексная переменная Q̃ заменяется вещественной X размера 2N² с блочной
    структурой вложения; все следы в вещественной форме делятся на 2.

    Args:
        lp: Поднятая задача
        cfg: Параметры системы (мощности и допуски решателя)

    Returns:
        SdpSolution с эрмитовой Q̃, τ и значением целевой функции

    Raises:
        InfeasibleProblemError: если h почти нулевой
        SolverError: если решатель не достиг оптимума
    """
    if np.linalg.norm(lp.h) < cfg.degenerate_channel_tol:
        raise InfeasibleProblemError("h = h1* ⊗ h2 почти нулевой, SDP невыполнима")

    dim = lp.h.size
    noise_mat = cfg.relay_noise_power * (lp.a_mat @ lp.a_mat.conj().T)
    power_mat = (cfg.source_power * (lp.b_mat @ lp.b_mat.conj().T)
                 + cfg.relay_noise_power * np.eye(dim))
    signal_mat = cfg.source_power * np.outer(lp.h, lp.h.conj())

    noise_real = hermitian_to_real_embedding(noise_mat)
    power_real = hermitian_to_real_embedding(power_mat)
    signal_real = hermitian_to_real_embedding(signal_mat)

    x = cp.Variable((2 * dim, 2 * dim), PSD=True)
    tau = cp.Variable(nonneg=True)
    objective = cp.Minimize(0.5 * cp.sum(cp.multiply(noise_real, x)) + tau * cfg.dest_noise_power)
    constraints = [
        0.5 * cp.sum(cp.multiply(power_real, x)) <= tau * cfg.relay_power_budget,
        0.5 * cp.sum(cp.multiply(signal_real, x)) == 1.0,
        # Блочная структура вещественного вложения
        x[:dim, :dim] == x[dim:, dim:],
        x[:dim, dim:] == -x[dim:, :dim],
    ]
    problem = cp.Problem(objective, constraints)

    started = time.perf_counter()
    try:
        problem.solve(solver=cfg.sdp_solver, **_solver_options(cfg))
    except cp.error.SolverError as exc:
        raise SolverError(f"решатель {cfg.sdp_solver} завершился с ошибкой: {exc}") from exc
    elapsed = time.perf_counter() - started

    if problem.status not in _ACCEPTED_STATUSES or x.value is None or tau.value is None:
        raise SolverError(f"SDP не решена, статус решателя: {problem.status}")
    if problem.status == cp.OPTIMAL_INACCURATE:
        logger.warning("SDP решена с пониженной точностью (N=%d)", lp.n_antennas)

    stats = problem.solver_stats
    iterations = int(stats.num_iters) if stats is not None and stats.num_iters is not None else 0
    return SdpSolution(
        q_tilde=real_to_hermitian(x.value),
        tau=float(tau.value),
        objective=float(problem.value),
        iterations=iterations,
        status=str(problem.status),
        solve_time=elapsed,
    )


def _solver_options(cfg: SystemConfig) -> Dict:
    """Параметры точности для решателя."""
    tol = cfg.sdp_feasibility_tol
    if cfg.sdp_solver.upper() == "CLARABEL":
        return {
            "tol_gap_abs": tol,
            "tol_gap_rel": tol,
            "tol_feas": tol,
            "max_iter": cfg.sdp_max_iters,
        }
    if cfg.sdp_solver.upper() == "SCS":
        return {"eps": tol, "max_iters": 100 * cfg.sdp_max_iters}
    return {}


def rank_one_residual(q: np.ndarray) -> float:
    """
    Невязка ранга 1 - λ_max(Q)/Tr(Q); равна 0 тогда и только тогда, когда rank(Q) = 1.

    Raises:
        ValueError: если Tr(Q) <= 0
    """
    q = np.asarray(q, dtype=complex)
    trace = float(np.real(np.trace(q)))
    if trace <= 0:
        raise ValueError(f"След матрицы должен быть положительным, получено {trace}")
    lambda_max = float(np.linalg.eigvalsh(0.5 * (q + q.conj().T))[-1])
    return float(np.clip(1.0 - lambda_max / trace, 0.0, 1.0))


def recover_weights(sol: SdpSolution, lp: LiftedProblem, cfg: SystemConfig) -> AfWeights:
    """
    Восстановить W из решения SDP.

    Q = Q̃/τ, w = sqrt(λ_max) * x (x - главный собственный вектор), W = unvec(w).
    После этого w масштабируется на границу бюджета мощности: γ(cW) растёт
    по c > 0, поэтому оптимум лежит на границе, а масштаб убирает только
    погрешность решателя.

    Raises:
        SolverError: если τ не превышает допуск
    """
    if sol.tau <= cfg.tau_tol:
        raise SolverError(f"τ = {sol.tau:.3e} слишком мало для восстановления Q = Q̃/τ")
    q = sol.q_tilde / sol.tau
    q = 0.5 * (q + q.conj().T)
    dim = q.shape[0]
    eigenvalues, eigenvectors = eigh(q, subset_by_index=[dim - 1, dim - 1])
    lambda_max = max(float(eigenvalues[0]), 0.0)
    w = np.sqrt(lambda_max) * eigenvectors[:, 0]

    power = lifted_relay_power(w, lp, cfg)
    if power > 0:
        w = w * np.sqrt(cfg.relay_power_budget / power)
    return AfWeights.from_vec(w, lp.n_antennas)


def matched_filter_weights(h1: np.ndarray, h2: np.ndarray, cfg: SystemConfig) -> AfWeights:
    """
    Согласованный фильтр W = α h2 h1^H, α выбран так, что мощность равна P_tot.

    Используется как начальное приближение AO и как нижняя оценка для SDP.

    Raises:
        ValueError: если h1 или h2 нулевой
    """
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    if not np.any(h1) or not np.any(h2):
        raise ValueError("Согласованный фильтр не определён для нулевого канала")
    base = np.outer(h2, h1.conj())
    alpha = np.sqrt(cfg.relay_power_budget / relay_power(base, h1, cfg))
    return AfWeights(alpha * base)


def optimize_weights(h1: np.ndarray, h2: np.ndarray,
                     cfg: SystemConfig) -> Tuple[AfWeights, WeightDiagnostics]:
    """
    Полное обновление блока W: подъём, SDP, восстановление, проверка ранга.

    Если ‖h1‖ или ‖h2‖ меньше допуска, SDP пропускается и возвращается W = 0
    (при нулевом канале γ = 0 для любой допустимой W).

    Returns:
        (W, диагностика)
    """
    n = len(h1)
    if (np.linalg.norm(h1) < cfg.degenerate_channel_tol
            or np.linalg.norm(h2) < cfg.degenerate_channel_tol):
        logger.info("Вырожденный канал: SDP пропущена, W = 0")
        return AfWeights.zeros(n), WeightDiagnostics(
            objective=float("inf"), implied_snr=0.0, rank_residual=0.0,
            iterations=0, status="degenerate", solve_time=0.0,
        )

    lp = lift_problem(h1, h2)
    sol = solve_charnes_cooper_sdp(lp, cfg)
    weights = recover_weights(sol, lp, cfg)
    residual = rank_one_residual(sol.q_tilde / sol.tau)
    if residual > cfg.rank_tol:
        logger.warning("Невязка ранга %.3e превышает порог %.1e", residual, cfg.rank_tol)

    snr = end_to_end_snr(weights, h1, h2, cfg)
    gap = abs(snr - sol.implied_snr) / max(sol.implied_snr, 1e-300)
    if gap > cfg.snr_rel_tol:
        logger.debug("SNR восстановленного W отличается от оптимума SDP на %.3e", gap)

    return weights, WeightDiagnostics(
        objective=sol.objective,
        implied_snr=sol.implied_snr,
        rank_residual=residual,
        iterations=sol.iterations,
        status=sol.status,
        solve_time=sol.solve_time,
    )
