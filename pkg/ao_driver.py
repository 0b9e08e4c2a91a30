"""
Модуль альтернативной оптимизации (AO) для двухэтапной расстановки MA.

Один шаг AO:
1. Обновить позиции приёма r̃ (градиентный подъём)
2. Обновить позиции передачи t̃ (градиентный подъём)
3. Обновить W: SDP Чарнса-Купера + восстановление ранга 1

Каждый блок не уменьшает SNR, поэтому последовательность скоростей
½ log2(1 + γ) не убывает и ограничена сверху - цикл сходится.
Начальная точка - сетка FPA и согласованный фильтр.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional

import numpy as np

from channel import (ChannelRealization, PositionSet, SystemConfig, fpa_layout,
                     relay_dest_channel, source_relay_channel)
from position_opt import (GaParams, SweepRecord, optimize_receive_positions,
                          optimize_transmit_positions)
from relay_weights import (AfWeights, SolverError, WeightDiagnostics, end_to_end_snr,
                           matched_filter_weights, optimize_weights, relay_power)

logger = logging.getLogger(__name__)


def achievable_rate(snr: float) -> float:
    """
    Достижимая скорость ½ log2(1 + γ) бит/с/Гц (½ - полудуплексный ретранслятор).

    Raises:
        ValueError: если snr < 0
    """
    if snr < 0:
        raise ValueError(f"SNR не может быть отрицательным, получено {snr}")
    return float(0.5 * np.log2(1.0 + snr))


@dataclass
class SolutionState:
    """
    Состояние решения (W, r̃, t̃) с производными величинами.

    trace - скорость после инициализации и после каждой итерации AO.
    diagnostics - диагностика последнего решения SDP (None, пока W не обновлялась).
    """

    weights: AfWeights
    rx_positions: PositionSet
    tx_positions: PositionSet
    snr: float
    rate: float
    trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rank_residual: float = 0.0
    scheme: str = "proposed"
    diagnostics: Optional[WeightDiagnostics] = None

    def to_dict(self) -> Dict:
        """Словарь для traces.json."""
        return {
            "scheme": self.scheme,
            "snr": self.snr,
            "rate": self.rate,
            "trace": list(self.trace),
            "iterations": self.iterations,
            "converged": self.converged,
            "rank_residual": self.rank_residual,
            "rx_positions": self.rx_positions.to_list(),
            "tx_positions": self.tx_positions.to_list(),
            "weights": self.weights.to_dict(),
            "sdp": self.diagnostics.to_dict() if self.diagnostics is not None else None,
        }


def evaluate_state(weights: AfWeights, rx_positions: PositionSet, tx_positions: PositionSet,
                   ch: ChannelRealization, cfg: SystemConfig) -> float:
    """SNR для заданной тройки (W, r̃, t̃)."""
    h1 = source_relay_channel(rx_positions, ch, cfg)
    h2 = relay_dest_channel(tx_positions, ch, cfg)
    return end_to_end_snr(weights, h1, h2, cfg)


def initialize(cfg: SystemConfig, ch: ChannelRealization) -> SolutionState:
    """
    Начальное состояние: r̃ = t̃ = сетка FPA, W - согласованный фильтр.

    Raises:
        LayoutError: если сетка не помещается в область
    """
    grid = fpa_layout(cfg)
    h1 = source_relay_channel(grid, ch, cfg)
    h2 = relay_dest_channel(grid, ch, cfg)
    try:
        weights = matched_filter_weights(h1, h2, cfg)
    except ValueError:
        logger.info("Нулевой канал на сетке FPA, начальная W = 0")
        weights = AfWeights.zeros(cfg.n_antennas)
    snr = end_to_end_snr(weights, h1, h2, cfg)
    rate = achievable_rate(snr)
    return SolutionState(weights, grid, grid, snr, rate, trace=[rate])


def restore_power_slack(weights: AfWeights, rx_positions: PositionSet,
                        ch: ChannelRealization, cfg: SystemConfig) -> AfWeights:
    """
    Вернуть запас мощности перед обновлением позиций.

    Если σ_r² ‖W‖^2 >= P_tot, W масштабируется на slack_factor * sqrt(P_tot / мощность),
    иначе P̃_tot <= 0 и подзадача приёма не определена.
    """
    noise_power = cfg.relay_noise_power * np.linalg.norm(weights.matrix, "fro") ** 2
    if noise_power < cfg.relay_power_budget:
        return weights
    h1 = source_relay_channel(rx_positions, ch, cfg)
    power = relay_power(weights, h1, cfg)
    logger.debug("Восстановление запаса мощности: σ_r²‖W‖² = %.4g", noise_power)
    return weights.scaled(cfg.slack_factor * np.sqrt(cfg.relay_power_budget / power))


def update_weights(state: SolutionState, ch: ChannelRealization,
                   cfg: SystemConfig) -> SolutionState:
    """
    Обновить блок W при фиксированных позициях.

    Новая W принимается, только если SNR не уменьшилось: погрешность
    решателя не должна ломать монотонность трассы.
    """
    h1 = source_relay_channel(state.rx_positions, ch, cfg)
    h2 = relay_dest_channel(state.tx_positions, ch, cfg)
    weights, diagnostics = optimize_weights(h1, h2, cfg)
    snr = end_to_end_snr(weights, h1, h2, cfg)
    current_snr = end_to_end_snr(state.weights, h1, h2, cfg)
    if snr < current_snr:
        logger.debug("W из SDP хуже текущей (%.12g < %.12g), оставляем текущую", snr, current_snr)
        weights, snr = state.weights, current_snr
    return replace(state, weights=weights, snr=snr, rate=achievable_rate(snr),
                   rank_residual=diagnostics.rank_residual, diagnostics=diagnostics)


def iterations_to_within(trace: List[float], tol: float = 1e-3) -> int:
    """Первая итерация, на которой скорость отличается от финальной не более чем на tol (отн.)."""
    final = trace[-1]
    for index, value in enumerate(trace):
        if abs(final - value) <= tol * max(abs(final), 1e-300):
            return index
    return len(trace) - 1


def has_converged(rate: float, previous: float, cfg: SystemConfig) -> bool:
    return abs(rate - previous) <= cfg.ao_tol * max(abs(previous), 1e-300)


def ao_solve(cfg: SystemConfig, ch: ChannelRealization, ga: Optional[GaParams] = None,
             on_iteration: Optional[Callable[[int, SolutionState], None]] = None,
             sweep_trace: Optional[List[SweepRecord]] = None) -> SolutionState:
    """
    Альтернативная оптимизация: r̃, затем t̃, затем W, до сходимости.

    Args:
        cfg: Параметры системы (ao_tol, max_ao_iters и допуски)
        ch: Реализация канала
        ga: Параметры градиентного подъёма (по умолчанию из cfg)
        on_iteration: Вызывается после каждой итерации с (номер, состояние)
        sweep_trace: Список для записей проходов градиентного подъёма

    Returns:
        Итоговое SolutionState; trace не убывает

    Raises:
        SolverError: сбой SDP, с номером итерации
    """
    ga = ga or GaParams.from_config(cfg)
    state = initialize(cfg, ch)
    logger.debug("AO: начальная скорость %.6f", state.rate)

    for iteration in range(1, cfg.max_ao_iters + 1):
        previous = state.rate
        weights = restore_power_slack(state.weights, state.rx_positions, ch, cfg)
        rx = optimize_receive_positions(state.rx_positions, weights, state.tx_positions,
                                        ch, cfg, ga, sweep_trace)
        tx = optimize_transmit_positions(state.tx_positions, weights, rx, ch, cfg, ga, sweep_trace)
        snr = evaluate_state(weights, rx, tx, ch, cfg)
        state = replace(state, weights=weights, rx_positions=rx, tx_positions=tx,
                        snr=snr, rate=achievable_rate(snr))
        try:
            state = update_weights(state, ch, cfg)
        except SolverError as exc:
            exc.iteration = iteration
            raise

        state.trace = state.trace + [state.rate]
        state.iterations = iteration
        if on_iteration is not None:
            on_iteration(iteration, state)
        if has_converged(state.rate, previous, cfg):
            state.converged = True
            break

    logger.debug("AO: %d итераций, скорость %.6f", state.iterations, state.rate)
    return state
