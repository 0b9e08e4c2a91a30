"""
Модуль для оптимизации позиций подвижных антенн градиентным подъёмом (GA).

Позиции оптимизируются по одной антенне: для n-й антенны все остальные
позиции и W фиксированы, целевая функция зависит только от r_n (или t_n)
и раскладывается в сумму косинусов, поэтому градиент считается аналитически.

Как это работает (для каждой антенны n = 1..N в одном проходе):
1. Строится контекст (ReceiveContext / TransmitContext) - все величины,
   не зависящие от позиции n-й антенны
2. Считается градиент и делается шаг r̂ = r + μ ∇f
3. Если r̂ недопустима или f(r̂) < f(r), шаг делится пополам
4. Если за max_halvings делений шаг не найден - антенна остаётся на месте

Проходы повторяются, пока относительное изменение цели не станет меньше
convergence_tol или не исчерпается max_outer_iters.

Этап приёма: цель f(r_n) = |a_n|^2 |h1_n|^2 + 2 Re{a_n α_n h1_n*},
допустимое множество включает ограничение мощности ретранслятора.
Этап передачи: цель g(t_n) = log2(P_s |c_n* h2_n + β_n|^2)
- log2(σ_r² ‖h2_n w̃_n + d_n‖^2 + σ_d²), ограничения только геометрические.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from channel import (GEOMETRY_TOL, ChannelRealization, Position, PositionSet, SystemConfig,
                     distances_to_others, in_region, min_pairwise_distance,
                     relay_dest_channel, source_relay_channel)
from relay_weights import AfWeights, end_to_end_snr, relay_power

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)

# Допуск мощности при проверке допустимости входного набора
POWER_REL_TOL = 1e-6


class InfeasiblePositionsError(ValueError):
    """Начальный набор позиций недопустим или у W нет запаса мощности."""


@dataclass(frozen=True)
class GaParams:
    """Параметры градиентного подъёма."""

    initial_step: float = 1.0
    max_outer_iters: int = 50
    max_halvings: int = 30
    convergence_tol: float = 1e-5

    def __post_init__(self):
        if self.initial_step <= 0:
            raise ValueError("initial_step должен быть > 0")
        if self.max_halvings < 1:
            raise ValueError("max_halvings должно быть >= 1")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters должно быть >= 1")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol не может быть отрицательным")

    @classmethod
    def from_config(cls, cfg: SystemConfig) -> "GaParams":
        return cls(
            initial_step=cfg.ga_initial_step,
            max_outer_iters=cfg.ga_max_outer_iters,
            max_halvings=cfg.ga_max_halvings,
            convergence_tol=cfg.ga_convergence_tol,
        )


@dataclass(frozen=True)
class StepRecord:
    """Результат одного шага с линейным поиском."""

    position: np.ndarray
    value: float
    step: float
    halvings: int
    moved: bool


@dataclass(frozen=True)
class SweepRecord:
    """Запись одного прохода по антеннам (для трассировки)."""

    stage: str
    sweep: int
    objective: float
    moved: int
    halvings: int
    steps: List[float]

    def to_dict(self):
        return {
            "stage": self.stage,
            "sweep": self.sweep,
            "objective": self.objective,
            "moved": self.moved,
            "halvings": self.halvings,
            "steps": list(self.steps),
        }


@dataclass(frozen=True)
class ReceiveContext:
    """Величины подзадачи приёма для антенны n, не зависящие от r_n."""

    n: int
    a: np.ndarray
    alpha_n: complex
    b_n: np.ndarray
    big_b_n: np.ndarray
    q_n: np.ndarray
    p_tilde_tot: float
    w_n: np.ndarray


@dataclass(frozen=True)
class TransmitContext:
    """Величины подзадачи передачи для антенны n, не зависящие от t_n."""

    n: int
    c: np.ndarray
    beta_n: complex
    d_n: np.ndarray
    e_n: np.ndarray
    m_n: np.ndarray
    f_n: np.ndarray
    s_n: np.ndarray
    w_tilde_n: np.ndarray


# ============================================
# КОСИНУСНЫЕ РАЗЛОЖЕНИЯ
# ============================================
# Для матрицы M и вектора v по фазам ρ путей:
#   quad = Re{f^H M f} = Σ_ij |M_ij| cos(k(ρ_i - ρ_j) - ∠M_ij)
#   lin  = Re{v^H f}   = Σ_p  |v_p|  cos(k ρ_p - ∠v_p)
# где f = exp(j k ρ). Диагональ i = j входит в сумму (даёт константу).

def _point(pos) -> np.ndarray:
    return pos.as_array() if isinstance(pos, Position) else np.asarray(pos, dtype=float)


def _quadratic_term(mat: np.ndarray, rho: np.ndarray, k: float) -> float:
    gamma = k * (rho[:, None] - rho[None, :]) - np.angle(mat)
    return float(np.sum(np.abs(mat) * np.cos(gamma)))


def _linear_term(vec: np.ndarray, rho: np.ndarray, k: float) -> float:
    kappa = k * rho - np.angle(vec)
    return float(np.sum(np.abs(vec) * np.cos(kappa)))


def _quadratic_gradient(mat: np.ndarray, dirs: np.ndarray, rho: np.ndarray, k: float) -> np.ndarray:
    gamma = k * (rho[:, None] - rho[None, :]) - np.angle(mat)
    weight = np.abs(mat) * np.sin(gamma)
    # Σ_ij w_ij (dir_i - dir_j) = Σ_i dir_i Σ_j w_ij - Σ_j dir_j Σ_i w_ij
    return -k * (weight.sum(axis=1) @ dirs - weight.sum(axis=0) @ dirs)


def _linear_gradient(vec: np.ndarray, dirs: np.ndarray, rho: np.ndarray, k: float) -> np.ndarray:
    kappa = k * rho - np.angle(vec)
    return -k * ((np.abs(vec) * np.sin(kappa)) @ dirs)


# ============================================
# ЭТАП ПРИЁМА
# ============================================

def _check_index(n: int, cfg: SystemConfig):
    if not 0 <= n < cfg.n_antennas:
        raise IndexError(f"Индекс антенны {n} вне диапазона [0, {cfg.n_antennas})")


def build_receive_context(n: int, weights: AfWeights, rx_positions: PositionSet,
                          tx_positions: PositionSet, ch: ChannelRealization,
                          cfg: SystemConfig) -> ReceiveContext:
    """
    Построить контекст подзадачи приёма для антенны n.

    a = W^H h2, α_n = Σ_{k≠n} a_k* h1_k, b_n = Σ_{k≠n} h1_k w_k,
    B_n = |a_n|^2 g1 g1^H, q_n = a_n* α_n* g1, P̃_tot = P_tot - σ_r² ‖W‖^2.
    """
    _check_index(n, cfg)
    w = weights.matrix
    h1 = source_relay_channel(rx_positions, ch, cfg)
    h2 = relay_dest_channel(tx_positions, ch, cfg)
    a = w.conj().T @ h2
    others = np.arange(cfg.n_antennas) != n
    alpha_n = complex(np.sum(a[others].conj() * h1[others]))
    b_n = w[:, others] @ h1[others]
    g1 = ch.rx_prv
    return ReceiveContext(
        n=n,
        a=a,
        alpha_n=alpha_n,
        b_n=b_n,
        big_b_n=abs(a[n]) ** 2 * np.outer(g1, g1.conj()),
        q_n=np.conj(a[n]) * np.conj(alpha_n) * g1,
        p_tilde_tot=float(cfg.relay_power_budget
                          - cfg.relay_noise_power * np.linalg.norm(w, "fro") ** 2),
        w_n=w[:, n].copy(),
    )


def receive_objective(r_n, ctx: ReceiveContext, ch: ChannelRealization, cfg: SystemConfig) -> float:
    """f(r_n) = f1(r_n) + 2 f2(r_n) через косинусные разложения."""
    rho = ch.rx_directions @ _point(r_n)
    k = cfg.wavenumber
    return _quadratic_term(ctx.big_b_n, rho, k) + 2.0 * _linear_term(ctx.q_n, rho, k)


def receive_gradient(r_n, ctx: ReceiveContext, ch: ChannelRealization, cfg: SystemConfig) -> np.ndarray:
    """Аналитический градиент [∂f/∂x, ∂f/∂y]."""
    dirs = ch.rx_directions
    rho = dirs @ _point(r_n)
    k = cfg.wavenumber
    return (_quadratic_gradient(ctx.big_b_n, dirs, rho, k)
            + 2.0 * _linear_gradient(ctx.q_n, dirs, rho, k))


def receive_feasible(r_n, n: int, rx_positions: PositionSet, ctx: ReceiveContext,
                     ch: ChannelRealization, cfg: SystemConfig) -> bool:
    """
    Принадлежит ли r_n допустимому множеству R_n.

    Проверяются: область C_r, расстояние >= D до остальных антенн и
    мощность P_s ‖h1_n(r_n) w_n + b_n‖^2 <= P̃_tot.
    """
    point = _point(r_n)
    if not in_region(point, cfg):
        return False
    if np.any(distances_to_others(point, n, rx_positions) < cfg.min_distance - GEOMETRY_TOL):
        return False
    h1_n = np.vdot(np.exp(1j * cfg.wavenumber * (ch.rx_directions @ point)), ch.rx_prv)
    power = cfg.source_power * np.linalg.norm(h1_n * ctx.w_n + ctx.b_n) ** 2
    return bool(power <= ctx.p_tilde_tot)


# ============================================
# ЭТАП ПЕРЕДАЧИ
# ============================================

def build_transmit_context(n: int, weights: AfWeights, rx_positions: PositionSet,
                           tx_positions: PositionSet, ch: ChannelRealization,
                           cfg: SystemConfig) -> TransmitContext:
    """
    Построить контекст подзадачи передачи для антенны n.

    c = W h1, β_n = Σ_{k≠n} c_k* h2_k, d_n = Σ_{k≠n} h2_k w̃_k (w̃_k - столбцы W^H),
    E_n = P_s |c_n|^2 f2 f2^H, m_n = P_s c_n* β_n* f2,
    F_n = σ_r² ‖w̃_n‖^2 f2 f2^H, s_n = f2 d_n^H w̃_n.
    """
    _check_index(n, cfg)
    w = weights.matrix
    h1 = source_relay_channel(rx_positions, ch, cfg)
    h2 = relay_dest_channel(tx_positions, ch, cfg)
    c = w @ h1
    w_tilde = w.conj().T
    others = np.arange(cfg.n_antennas) != n
    beta_n = complex(np.sum(c[others].conj() * h2[others]))
    d_n = w_tilde[:, others] @ h2[others]
    w_tilde_n = w_tilde[:, n].copy()
    f2 = ch.tx_prv
    outer = np.outer(f2, f2.conj())
    return TransmitContext(
        n=n,
        c=c,
        beta_n=beta_n,
        d_n=d_n,
        e_n=cfg.source_power * abs(c[n]) ** 2 * outer,
        m_n=cfg.source_power * np.conj(c[n]) * np.conj(beta_n) * f2,
        f_n=cfg.relay_noise_power * np.linalg.norm(w_tilde_n) ** 2 * outer,
        s_n=f2 * np.vdot(d_n, w_tilde_n),
        w_tilde_n=w_tilde_n,
    )


def _transmit_parts(t_n, ctx: TransmitContext, ch: ChannelRealization, cfg: SystemConfig):
    """Числитель и знаменатель отношения под логарифмами g1 и g2."""
    rho = ch.tx_directions @ _point(t_n)
    k = cfg.wavenumber
    numerator = (_quadratic_term(ctx.e_n, rho, k) + 2.0 * _linear_term(ctx.m_n, rho, k)
                 + cfg.source_power * abs(ctx.beta_n) ** 2)
    # Перекрёстный член σ_r² ‖h w̃ + d‖^2 несёт множитель σ_r²
    denominator = (_quadratic_term(ctx.f_n, rho, k)
                   + 2.0 * cfg.relay_noise_power * _linear_term(ctx.s_n, rho, k)
                   + cfg.relay_noise_power * np.linalg.norm(ctx.d_n) ** 2
                   + cfg.dest_noise_power)
    return rho, numerator, denominator


def transmit_objective(t_n, ctx: TransmitContext, ch: ChannelRealization, cfg: SystemConfig) -> float:
    """
    g(t_n) = g1(t_n) - g2(t_n) в битах.

    2^g равно сквозному SNR γ при остальных блоках фиксированными.
    При нулевом числителе возвращается -inf.
    """
    _, numerator, denominator = _transmit_parts(t_n, ctx, ch, cfg)
    if numerator <= 0:
        return float("-inf")
    return float(np.log2(numerator) - np.log2(denominator))


def transmit_gradient(t_n, ctx: TransmitContext, ch: ChannelRealization, cfg: SystemConfig) -> np.ndarray:
    """
    Аналитический градиент g(t_n).

    ∇g = (∇g11 + 2∇g12) / (num ln2) - (∇g21 + 2σ_r² ∇g22) / (den ln2).
    Деление на ln2 - точный градиент логарифма по основанию 2.
    """
    rho, numerator, denominator = _transmit_parts(t_n, ctx, ch, cfg)
    dirs = ch.tx_directions
    k = cfg.wavenumber
    grad = np.zeros(2)
    if numerator > 0:
        grad_num = (_quadratic_gradient(ctx.e_n, dirs, rho, k)
                    + 2.0 * _linear_gradient(ctx.m_n, dirs, rho, k))
        grad += grad_num / (numerator * LN2)
    grad_den = (_quadratic_gradient(ctx.f_n, dirs, rho, k)
                + 2.0 * cfg.relay_noise_power * _linear_gradient(ctx.s_n, dirs, rho, k))
    grad -= grad_den / (denominator * LN2)
    return grad


def transmit_feasible(t_n, n: int, tx_positions: PositionSet, cfg: SystemConfig) -> bool:
    """Принадлежит ли t_n множеству T_n (область и минимальное расстояние)."""
    point = _point(t_n)
    if not in_region(point, cfg):
        return False
    return bool(np.all(distances_to_others(point, n, tx_positions) >= cfg.min_distance - GEOMETRY_TOL))


# ============================================
# ГРАДИЕНТНЫЙ ПОДЪЁМ
# ============================================

def ascend_position(start, objective: Callable, gradient: Callable,
                    feasible: Callable, ga: GaParams) -> StepRecord:
    """
    Один шаг подъёма с делением шага пополам.

    Кандидат start + μ ∇ принимается, если он допустим и цель не уменьшилась.
    Иначе μ делится пополам (не более ga.max_halvings раз). Если подходящего
    шага нет, позиция не меняется.

    Args:
        start: Текущая позиция (2-вектор)
        objective: f(point) -> float
        gradient: ∇f(point) -> 2-вектор
        feasible: point -> bool
        ga: Параметры подъёма

    Returns:
        StepRecord с новой позицией и числом делений
    """
    start = _point(start)
    current = objective(start)
    grad = gradient(start)
    if not np.any(grad) or not np.all(np.isfinite(grad)):
        return StepRecord(start, current, 0.0, 0, False)

    step = ga.initial_step
    for halvings in range(ga.max_halvings + 1):
        candidate = start + step * grad
        if feasible(candidate):
            value = objective(candidate)
            if value >= current:
                return StepRecord(candidate, value, step, halvings, True)
        step /= 2.0
    return StepRecord(start, current, 0.0, ga.max_halvings, False)


def _relative_change(new: float, old: float) -> float:
    if not np.isfinite(old) or not np.isfinite(new):
        return float("inf")
    return abs(new - old) / max(abs(old), 1e-300)


def _check_geometry(positions: PositionSet, cfg: SystemConfig, label: str):
    if not all(in_region(p, cfg) for p in positions.coords):
        raise InfeasiblePositionsError(f"{label}: позиции вне области C_r")
    if min_pairwise_distance(positions) < cfg.min_distance - 1e-9:
        raise InfeasiblePositionsError(f"{label}: нарушено минимальное расстояние D")


def optimize_receive_positions(rx_positions: PositionSet, weights: AfWeights,
                               tx_positions: PositionSet, ch: ChannelRealization,
                               cfg: SystemConfig, ga: Optional[GaParams] = None,
                               trace: Optional[List[SweepRecord]] = None) -> PositionSet:
    """
    Оптимизировать позиции приёма r̃ при фиксированных W и t̃ (алгоритм GA).

    Антенны обновляются циклически n = 1..N. Цель прохода - |h2^H W h1|^2
    (числитель SNR; знаменатель от r̃ не зависит), она не убывает.

    Args:
        rx_positions: Начальные допустимые позиции r̃
        weights: Матрица весов W
        tx_positions: Позиции передачи t̃
        ch: Реализация канала
        cfg: Параметры системы
        ga: Параметры подъёма (по умолчанию из cfg)
        trace: Если передан список - в него добавляются SweepRecord

    Returns:
        Новый допустимый набор r̃

    Raises:
        InfeasiblePositionsError: недопустимый вход или P̃_tot <= 0
    """
    ga = ga or GaParams.from_config(cfg)
    _check_geometry(rx_positions, cfg, "приём")
    w = weights.matrix
    h1 = source_relay_channel(rx_positions, ch, cfg)
    if relay_power(weights, h1, cfg) > cfg.relay_power_budget * (1 + POWER_REL_TOL):
        raise InfeasiblePositionsError("приём: начальные позиции нарушают бюджет мощности")
    if cfg.relay_power_budget - cfg.relay_noise_power * np.linalg.norm(w, "fro") ** 2 <= 0:
        raise InfeasiblePositionsError("P̃_tot <= 0: мощность шума W превышает бюджет")

    h2 = relay_dest_channel(tx_positions, ch, cfg)
    current = rx_positions
    previous = abs(np.vdot(h2, w @ h1)) ** 2
    for sweep in range(ga.max_outer_iters):
        moved, halvings, steps = 0, 0, []
        for n in range(cfg.n_antennas):
            ctx = build_receive_context(n, weights, current, tx_positions, ch, cfg)
            positions = current
            record = ascend_position(
                current.coords[n],
                lambda p: receive_objective(p, ctx, ch, cfg),
                lambda p: receive_gradient(p, ctx, ch, cfg),
                lambda p: receive_feasible(p, n, positions, ctx, ch, cfg),
                ga,
            )
            halvings += record.halvings
            steps.append(record.step)
            if record.moved:
                moved += 1
                current = current.with_position(n, record.position)

        h1 = source_relay_channel(current, ch, cfg)
        value = abs(np.vdot(h2, w @ h1)) ** 2
        if trace is not None:
            trace.append(SweepRecord("receive", sweep, float(value), moved, halvings, steps))
        if moved == 0 or _relative_change(value, previous) < ga.convergence_tol:
            break
        previous = value
    return current


def optimize_transmit_positions(tx_positions: PositionSet, weights: AfWeights,
                                rx_positions: PositionSet, ch: ChannelRealization,
                                cfg: SystemConfig, ga: Optional[GaParams] = None,
                                trace: Optional[List[SweepRecord]] = None) -> PositionSet:
    """
    Оптимизировать позиции передачи t̃ при фиксированных W и r̃.

    Зеркально optimize_receive_positions, но допустимое множество T_n
    содержит только область и минимальное расстояние. Цель прохода - log2 γ.

    Raises:
        InfeasiblePositionsError: недопустимый вход
    """
    ga = ga or GaParams.from_config(cfg)
    _check_geometry(tx_positions, cfg, "передача")
    h1 = source_relay_channel(rx_positions, ch, cfg)

    current = tx_positions
    previous = end_to_end_snr(weights, h1, relay_dest_channel(current, ch, cfg), cfg)
    for sweep in range(ga.max_outer_iters):
        moved, halvings, steps = 0, 0, []
        for n in range(cfg.n_antennas):
            ctx = build_transmit_context(n, weights, rx_positions, current, ch, cfg)
            positions = current
            record = ascend_position(
                current.coords[n],
                lambda p: transmit_objective(p, ctx, ch, cfg),
                lambda p: transmit_gradient(p, ctx, ch, cfg),
                lambda p: transmit_feasible(p, n, positions, cfg),
                ga,
            )
            halvings += record.halvings
            steps.append(record.step)
            if record.moved:
                moved += 1
                current = current.with_position(n, record.position)

        value = end_to_end_snr(weights, h1, relay_dest_channel(current, ch, cfg), cfg)
        if trace is not None:
            trace.append(SweepRecord("transmit", sweep, float(value), moved, halvings, steps))
        if moved == 0 or _relative_change(value, previous) < ga.convergence_tol:
            break
        previous = value
    return current
