"""Тесты модели канала: FRV, каналы, генерация реализаций, геометрия."""
import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.stats import chisquare

from channel import (ChannelRealization, LayoutError, Position, PositionSet, SystemConfig,
                     db_to_linear, distances_to_others, fpa_layout, grid_shape, in_region,
                     linear_to_db, min_pairwise_distance, realization_seed, receive_frv,
                     relay_dest_channel, sample_channel, source_relay_channel, transmit_frv)
from conftest import random_complex


def _single_path(elevation, azimuth, prv=1.0 + 0j):
    return ChannelRealization([elevation], [azimuth], [elevation], [azimuth], [prv], [prv])


class TestSystemConfig:
    def test_from_dict_converts_db(self):
        cfg = SystemConfig.from_dict({"source_power_db": 20.0, "relay_power_budget_db": 0.0})
        assert cfg.source_power == pytest.approx(100.0)
        assert cfg.relay_power_budget == pytest.approx(1.0)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            SystemConfig.from_dict({"n_antenas": 4})

    @pytest.mark.parametrize("changes", [
        {"n_antennas": 0},
        {"n_rx_paths": 0},
        {"region_size": -1.0},
        {"relay_noise_power": 0.0},
        {"min_distance": 4.0, "region_size": 3.0},
        {"slack_factor": 1.0},
        {"wavelength": 0.1},
    ])
    def test_invalid_values(self, changes):
        with pytest.raises(ValueError):
            SystemConfig(**changes)

    def test_grid_must_fit(self):
        # 4x2 с шагом λ/2 занимает 1.5λ по y
        with pytest.raises(LayoutError):
            SystemConfig(n_antennas=8, region_size=1.0)

    def test_default_matches_config_module(self):
        cfg = SystemConfig.default()
        assert cfg.n_antennas == 6
        assert cfg.source_power == pytest.approx(10.0)
        assert cfg.sdp_solver == "CLARABEL"

    def test_dict_roundtrip(self):
        cfg = SystemConfig(n_antennas=4, region_size=2.0)
        assert SystemConfig.from_dict(cfg.to_dict()) == cfg

    def test_db_conversions(self):
        assert db_to_linear(10.0) == pytest.approx(10.0)
        assert linear_to_db(100.0) == pytest.approx(20.0)


class TestFieldResponse:
    def test_origin_gives_ones(self, channel4, cfg4):
        assert_allclose(receive_frv((0.0, 0.0), channel4, cfg4), np.ones(cfg4.n_rx_paths))
        assert_allclose(transmit_frv(Position(0.0, 0.0), channel4, cfg4), np.ones(cfg4.n_tx_paths))

    def test_quarter_wavelength_phase(self, scalar_cfg):
        ch = _single_path(np.pi / 2, 0.0)
        assert_allclose(receive_frv((0.25, 0.0), ch, scalar_cfg), [1j], atol=1e-12)

    def test_matches_scalar_evaluation(self, channel4, cfg4, rng):
        pos = rng.uniform(-1.5, 1.5, 2)
        expected = [
            np.exp(1j * 2 * np.pi * (pos[0] * np.sin(t) * np.cos(p) + pos[1] * np.cos(t)))
            for t, p in zip(channel4.rx_elevations, channel4.rx_azimuths)
        ]
        assert_allclose(receive_frv(pos, channel4, cfg4), expected, rtol=0, atol=1e-12)

    def test_unit_modulus_and_phase_linearity(self, channel4, cfg4, rng):
        point, offset = rng.uniform(-1.5, 1.5, 2), rng.uniform(-0.5, 0.5, 2)
        assert_allclose(np.abs(receive_frv(point, channel4, cfg4)), 1.0, atol=1e-12)
        assert_allclose(receive_frv(point + offset, channel4, cfg4),
                        receive_frv(point, channel4, cfg4) * receive_frv(offset, channel4, cfg4), atol=1e-12)

    def test_zero_elevation_depends_only_on_y(self, cfg4):
        ch = ChannelRealization([0.0] * 3, [0.1, 1.0, 2.0], [0.0] * 3, [0.3, 1.3, 2.3],
                                np.ones(3), np.ones(3))
        left = transmit_frv((-1.0, 0.4), ch, cfg4)
        right = transmit_frv((1.2, 0.4), ch, cfg4)
        assert_allclose(left, right, atol=1e-12)
        assert_allclose(left, np.exp(1j * 2 * np.pi * 0.4) * np.ones(3), atol=1e-12)


class TestChannels:
    def test_single_unit_path(self, scalar_cfg):
        ch = _single_path(0.7, 0.2)
        origin = PositionSet([[0.0, 0.0]])
        assert_allclose(source_relay_channel(origin, ch, scalar_cfg), [1.0])
        assert_allclose(relay_dest_channel(origin, ch, scalar_cfg), [1.0])

    def test_zero_coefficients_give_zero_channel(self, cfg4, channel4):
        ch = ChannelRealization(channel4.rx_elevations, channel4.rx_azimuths,
                                channel4.tx_elevations, channel4.tx_azimuths,
                                np.zeros(5), np.zeros(5))
        grid = fpa_layout(cfg4)
        assert not np.any(source_relay_channel(grid, ch, cfg4))
        assert not np.any(relay_dest_channel(grid, ch, cfg4))

    def test_matches_entrywise_matrix_product(self, cfg4, channel4, rng):
        positions = PositionSet(rng.uniform(-1.5, 1.5, (4, 2)))
        big_f = np.column_stack([receive_frv(p, channel4, cfg4) for p in positions.coords])
        big_g = np.column_stack([transmit_frv(p, channel4, cfg4) for p in positions.coords])
        assert_allclose(source_relay_channel(positions, channel4, cfg4),
                        big_f.conj().T @ channel4.rx_prv, atol=1e-12)
        assert_allclose(relay_dest_channel(positions, channel4, cfg4),
                        big_g.conj().T @ channel4.tx_prv, atol=1e-12)

    def test_magnitude_bound(self, cfg4, channel4, rng):
        positions = PositionSet(rng.uniform(-1.5, 1.5, (4, 2)))
        assert np.all(np.abs(source_relay_channel(positions, channel4, cfg4))
                      <= np.abs(channel4.rx_prv).sum() + 1e-12)
        assert np.all(np.abs(relay_dest_channel(positions, channel4, cfg4))
                      <= np.abs(channel4.tx_prv).sum() + 1e-12)

    def test_size_mismatch(self, cfg4, channel4):
        with pytest.raises(ValueError):
            source_relay_channel(PositionSet([[0.0, 0.0]]), channel4, cfg4)


class TestSampling:
    def test_same_seed_is_bit_identical(self, cfg4):
        first, second = sample_channel(cfg4, 99), sample_channel(cfg4, 99)
        assert_array_equal(first.rx_prv, second.rx_prv)
        assert_array_equal(first.tx_elevations, second.tx_elevations)
        assert first.digest() == second.digest()
        assert sample_channel(cfg4, 100).digest() != first.digest()

    def test_realization_seed(self):
        assert realization_seed(2024, 3) == realization_seed(2024, 3)
        assert realization_seed(2024, 3) != realization_seed(2024, 4)
        assert realization_seed(2024, 3) != realization_seed(2025, 3)

    def test_dict_roundtrip(self, channel4):
        restored = ChannelRealization.from_dict(channel4.to_dict())
        assert_array_equal(restored.rx_prv, channel4.rx_prv)
        assert restored.digest() == channel4.digest()

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ChannelRealization([0.1, 0.2], [0.1], [0.1], [0.1], [1.0, 1.0], [1.0])

    def test_path_power_and_angle_distribution(self):
        cfg = SystemConfig(n_antennas=4, n_rx_paths=5)
        powers, angles = [], []
        for index in range(20000):
            ch = sample_channel(cfg, realization_seed(7, index))
            powers.append(np.abs(ch.rx_prv) ** 2)
            angles.append(ch.rx_elevations)
        powers = np.concatenate(powers)
        angles = np.concatenate(angles)

        assert powers.size == 100000
        assert powers.mean() == pytest.approx(1 / 5, rel=0.02)
        counts, _ = np.histogram(angles, bins=20, range=(0.0, 2 * np.pi))
        assert chisquare(counts).pvalue > 0.001


class TestGeometry:
    def test_min_distance_pair(self):
        assert min_pairwise_distance(PositionSet([[0.0, 0.0], [0.0, 0.5]])) == pytest.approx(0.5)

    def test_min_distance_single(self):
        assert min_pairwise_distance(PositionSet([[0.3, 0.1]])) == float("inf")

    def test_min_distance_brute_force(self, rng):
        coords = rng.uniform(-1.5, 1.5, (6, 2))
        expected = min(np.linalg.norm(a - b) for a, b in itertools.combinations(coords, 2))
        assert min_pairwise_distance(PositionSet(coords)) == pytest.approx(expected, abs=1e-12)

    def test_distances_to_others(self):
        positions = PositionSet([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
        assert_allclose(distances_to_others((0.0, 0.0), 0, positions), [1.0, 2.0])

    def test_in_region(self, cfg4):
        assert in_region((1.5, -1.5), cfg4)
        assert not in_region((1.5 + 1e-6, 0.0), cfg4)

    @pytest.mark.parametrize("n, shape", [(6, (3, 2)), (4, (2, 2)), (5, (5, 1)), (1, (1, 1)), (8, (4, 2))])
    def test_grid_shape(self, n, shape):
        assert grid_shape(n) == shape

    def test_fpa_four_antennas(self, cfg4):
        layout = fpa_layout(cfg4)
        assert sorted(map(tuple, layout.to_list())) == [
            (-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)]
        assert min_pairwise_distance(layout) == pytest.approx(0.5)

    def test_fpa_six_antennas(self):
        layout = fpa_layout(SystemConfig(n_antennas=6))
        assert len(layout) == 6
        assert min_pairwise_distance(layout) == pytest.approx(0.5)
        # строки решётки идут вдоль y
        assert np.unique(layout.coords[:, 1]).size == 3
        assert np.unique(layout.coords[:, 0]).size == 2

    def test_fpa_spacing_is_half_wavelength_unless_d_is_larger(self):
        assert min_pairwise_distance(fpa_layout(SystemConfig(n_antennas=4, min_distance=0.3))) == pytest.approx(0.5)
        assert min_pairwise_distance(fpa_layout(SystemConfig(n_antennas=4, min_distance=0.7))) == pytest.approx(0.7)

    def test_with_position_is_copy(self):
        positions = PositionSet([[0.0, 0.0], [1.0, 0.0]])
        moved = positions.with_position(1, Position(0.0, 1.0))
        assert positions[1] == Position(1.0, 0.0)
        assert moved[1] == Position(0.0, 1.0)
