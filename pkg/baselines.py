"""
Модуль эталонных схем для сравнения.

1. FPA - неподвижная равномерная планарная решётка с шагом λ/2,
   W решается один раз через SDP
2. OTPA - одна расстановка ũ на оба этапа (r̃ = t̃ = ũ): градиентный
   подъём по скорости с конечными разностями чередуется с обновлением W

Обе схемы стартуют из той же точки, что и основная (сетка FPA),
поэтому OTPA не хуже FPA на каждой реализации.
"""
import logging
from dataclasses import replace
from typing import Optional

import numpy as np

from ao_driver import (SolutionState, achievable_rate, evaluate_state, has_converged,
                       initialize, restore_power_slack, update_weights)
from channel import (GEOMETRY_TOL, ChannelRealization, PositionSet, SystemConfig,
                     distances_to_others, in_region, source_relay_channel)
from position_opt import GaParams, ascend_position
from relay_weights import AfWeights, SolverError, relay_power

logger = logging.getLogger(__name__)


def fpa_solve(cfg: SystemConfig, ch: ChannelRealization) -> SolutionState:
    """
    Схема FPA: позиции - сетка, W - один раз из SDP.

    Raises:
        LayoutError: если сетка не помещается в область
    """
    state = initialize(cfg, ch)
    state = update_weights(state, ch, cfg)
    return replace(state, trace=[state.rate], scheme="fpa", converged=True)


def _shared_rate(weights: AfWeights, positions: PositionSet, ch: ChannelRealization,
                 cfg: SystemConfig) -> float:
    return achievable_rate(evaluate_state(weights, positions, positions, ch, cfg))


def _shared_feasible(point, n: int, positions: PositionSet, weights: AfWeights,
                     ch: ChannelRealization, cfg: SystemConfig) -> bool:
    """Область, минимальное расстояние и полное ограничение мощности при фиксированной W."""
    if not in_region(point, cfg):
        return False
    if np.any(distances_to_others(point, n, positions) < cfg.min_distance - GEOMETRY_TOL):
        return False
    moved = positions.with_position(n, point)
    h1 = source_relay_channel(moved, ch, cfg)
    return relay_power(weights, h1, cfg) <= cfg.relay_power_budget * (1 + 1e-9)


def optimize_shared_positions(positions: PositionSet, weights: AfWeights,
                              ch: ChannelRealization, cfg: SystemConfig,
                              ga: Optional[GaParams] = None) -> PositionSet:
    """
    Градиентный подъём по общей расстановке ũ.

    Градиент скорости по позиции n-й антенны считается центральными
    конечными разностями с шагом cfg.otpa_fd_step.
    """
    ga = ga or GaParams.from_config(cfg)
    step = cfg.otpa_fd_step
    offsets = np.array([[step, 0.0], [0.0, step]])

    current = positions
    previous = _shared_rate(weights, current, ch, cfg)
    for _ in range(ga.max_outer_iters):
        moved = 0
        for n in range(cfg.n_antennas):
            base = current

            def objective(point, n=n, base=base):
                return _shared_rate(weights, base.with_position(n, point), ch, cfg)

            def gradient(point, objective=objective):
                return np.array([
                    (objective(point + offset) - objective(point - offset)) / (2.0 * step)
                    for offset in offsets
                ])

            record = ascend_position(
                current.coords[n], objective, gradient,
                lambda p, n=n, base=base: _shared_feasible(p, n, base, weights, ch, cfg),
                ga,
            )
            if record.moved:
                moved += 1
                current = current.with_position(n, record.position)

        value = _shared_rate(weights, current, ch, cfg)
        if moved == 0 or abs(value - previous) <= ga.convergence_tol * max(abs(previous), 1e-300):
            break
        previous = value
    return current


def otpa_solve(cfg: SystemConfig, ch: ChannelRealization,
               ga: Optional[GaParams] = None) -> SolutionState:
    """
    Схема OTPA: одна расстановка на приём и передачу.

    Чередуются подъём по ũ (W фиксирована) и обновление W (ũ фиксирована)
    до сходимости по ao_tol или max_ao_iters.

    Raises:
        SolverError: сбой SDP, с номером итерации
    """
    ga = ga or GaParams.from_config(cfg)
    state = replace(initialize(cfg, ch), scheme="otpa")

    for iteration in range(1, cfg.max_ao_iters + 1):
        previous = state.rate
        weights = restore_power_slack(state.weights, state.rx_positions, ch, cfg)
        shared = optimize_shared_positions(state.rx_positions, weights, ch, cfg, ga)
        snr = evaluate_state(weights, shared, shared, ch, cfg)
        state = replace(state, weights=weights, rx_positions=shared, tx_positions=shared,
                        snr=snr, rate=achievable_rate(snr))
        try:
            state = update_weights(state, ch, cfg)
        except SolverError as exc:
            exc.iteration = iteration
            raise

        state.trace = state.trace + [state.rate]
        state.iterations = iteration
        if has_converged(state.rate, previous, cfg):
            state.converged = True
            break

    logger.debug("OTPA: %d итераций, скорость %.6f", state.iterations, state.rate)
    return state
