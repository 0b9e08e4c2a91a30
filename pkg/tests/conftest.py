"""Общие фикстуры тестов."""
import os
import sys

import numpy as np
import pytest

# Модули проекта лежат в корне репозитория
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from channel import (ChannelRealization, SystemConfig, min_pairwise_distance,  # noqa: E402
                     sample_channel, source_relay_channel)
from relay_weights import relay_power  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cfg4():
    """N=4, A=3λ, P_s = P_tot = 10 дБ."""
    return SystemConfig(n_antennas=4, region_size=3.0)


@pytest.fixture
def channel4(cfg4):
    return sample_channel(cfg4, seed=11)


@pytest.fixture
def scalar_cfg():
    """N=1, по одному пути, P_s = σ_r² = σ_d² = 1, P_tot = 10."""
    return SystemConfig(n_antennas=1, n_rx_paths=1, n_tx_paths=1, source_power=1.0,
                        relay_power_budget=10.0, relay_noise_power=1.0, dest_noise_power=1.0)


@pytest.fixture
def unit_channel():
    """Один путь с единичными коэффициентами: |h1| = |h2| = 1 в любой точке."""
    return ChannelRealization(
        rx_elevations=[np.pi / 3], rx_azimuths=[np.pi / 5],
        tx_elevations=[np.pi / 4], tx_azimuths=[np.pi / 7],
        rx_prv=[1.0 + 0j], tx_prv=[1.0 + 0j],
    )


def random_complex(rng, *shape):
    """Комплексный гауссовский массив CN(0, 1)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def assert_feasible_state(state, ch, cfg):
    """Итоговое состояние допустимо: расстояния >= D и мощность в пределах бюджета."""
    assert min_pairwise_distance(state.rx_positions) >= cfg.min_distance - 1e-9
    assert min_pairwise_distance(state.tx_positions) >= cfg.min_distance - 1e-9
    h1 = source_relay_channel(state.rx_positions, ch, cfg)
    assert relay_power(state.weights, h1, cfg) <= cfg.relay_power_budget * (1 + 1e-6)
