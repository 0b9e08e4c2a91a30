"""
Модуль канальной модели для ретранслятора с подвижными антеннами.

Канал строится по модели полевого отклика (field response) в дальней зоне:
каждая антенна на позиции (x, y) видит L путей распространения, и фаза
i-го пути равна (2π/λ) * ρ_i, где ρ_i = x sinθ_i cosφ_i + y cosθ_i.

Модуль предоставляет:
1. Типы данных: SystemConfig, Position, PositionSet, ChannelRealization
2. Векторы полевого отклика (FRV) для приёма и передачи
3. Каналы источник -> ретранслятор (h1) и ретранслятор -> приёмник (h2)
4. Генерацию случайных реализаций канала по зерну
5. Сетку FPA (равномерная планарная решётка с шагом λ/2)

Все длины - в длинах волны, область C_r = [-A/2, A/2]^2 центрирована.
"""
import hashlib  # короткий хэш реализации канала для CSV
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from scipy.spatial.distance import cdist, pdist  # попарные расстояния между антеннами

import config

logger = logging.getLogger(__name__)

# Допуск для проверок "точка в области" и "расстояние >= D"
GEOMETRY_TOL = 1e-12

# Шаг сетки FPA, в λ
HALF_WAVELENGTH = 0.5


class LayoutError(ValueError):
    """Сетка антенн не помещается в область C_r."""


def db_to_linear(value_db: float) -> float:
    """Перевести мощность из дБ в линейную шкалу."""
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    """Перевести линейную мощность в дБ."""
    return float(10.0 * np.log10(value))


@dataclass(frozen=True)
class SystemConfig:
    """
    Все скалярные параметры системы и допуски решателей.

    Мощности хранятся в линейной шкале. Для создания из значений в дБ
    используйте SystemConfig.from_dict({"source_power_db": ...}).
    """

    n_antennas: int = 6
    region_size: float = 3.0
    min_distance: float = 0.5
    wavelength: float = 1.0
    n_rx_paths: int = 5
    n_tx_paths: int = 5
    source_power: float = 10.0
    relay_power_budget: float = 10.0
    relay_noise_power: float = 1.0
    dest_noise_power: float = 1.0

    # Допуски SDP
    sdp_solver: str = "CLARABEL"
    sdp_feasibility_tol: float = 1e-8
    sdp_max_iters: int = 200
    rank_tol: float = 1e-5
    snr_rel_tol: float = 1e-6
    degenerate_channel_tol: float = 1e-12
    tau_tol: float = 1e-12

    # Градиентный подъём
    ga_initial_step: float = 1.0
    ga_max_outer_iters: int = 50
    ga_max_halvings: int = 30
    ga_convergence_tol: float = 1e-5

    # Внешний цикл AO
    ao_tol: float = 1e-4
    max_ao_iters: int = 30
    slack_factor: float = 0.999

    # Конечные разности для OTPA
    otpa_fd_step: float = 1e-4

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas должно быть >= 1, получено {self.n_antennas}")
        if self.n_rx_paths < 1 or self.n_tx_paths < 1:
            raise ValueError("Число путей L_r и L_t должно быть >= 1")
        positive = {
            "region_size": self.region_size,
            "min_distance": self.min_distance,
            "wavelength": self.wavelength,
            "source_power": self.source_power,
            "relay_power_budget": self.relay_power_budget,
            "relay_noise_power": self.relay_noise_power,
            "dest_noise_power": self.dest_noise_power,
            "ga_initial_step": self.ga_initial_step,
        }
        for name, value in positive.items():
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} должно быть строго положительным, получено {value}")
        # Все длины задаются в λ, поэтому сама λ фиксирована
        if self.wavelength != 1.0:
            raise ValueError(f"wavelength должна быть равна 1.0 (длины в λ), получено {self.wavelength}")
        if self.min_distance > self.region_size:
            raise ValueError(
                f"min_distance ({self.min_distance}) не может превышать region_size ({self.region_size})"
            )
        if self.ga_max_halvings < 1:
            raise ValueError("ga_max_halvings должно быть >= 1")
        if not 0 < self.slack_factor < 1:
            raise ValueError("slack_factor должен лежать в (0, 1)")
        # Допустимая расстановка существует, если строится сетка FPA
        fpa_layout(self)

    @classmethod
    def default(cls) -> "SystemConfig":
        """Конфигурация по умолчанию из config.py."""
        return cls.from_dict({
            **config.SYSTEM_CONFIG,
            "sdp_solver": config.SDP_CONFIG["solver"],
            "sdp_feasibility_tol": config.SDP_CONFIG["feasibility_tol"],
            "sdp_max_iters": config.SDP_CONFIG["max_iters"],
            "rank_tol": config.SDP_CONFIG["rank_tol"],
            "snr_rel_tol": config.SDP_CONFIG["snr_rel_tol"],
            "degenerate_channel_tol": config.SDP_CONFIG["degenerate_channel_tol"],
            "tau_tol": config.SDP_CONFIG["tau_tol"],
            "ga_initial_step": config.GA_CONFIG["initial_step"],
            "ga_max_outer_iters": config.GA_CONFIG["max_outer_iters"],
            "ga_max_halvings": config.GA_CONFIG["max_halvings"],
            "ga_convergence_tol": config.GA_CONFIG["convergence_tol"],
            "ao_tol": config.AO_CONFIG["ao_tol"],
            "max_ao_iters": config.AO_CONFIG["max_ao_iters"],
            "slack_factor": config.AO_CONFIG["slack_factor"],
            "otpa_fd_step": config.OTPA_CONFIG["fd_step"],
        })

    @classmethod
    def from_dict(cls, data: Dict) -> "SystemConfig":
        """
        Создать конфигурацию из словаря.

        Ключи source_power_db и relay_power_budget_db (в дБ) переводятся
        в линейные source_power и relay_power_budget. Неизвестные ключи
        считаются ошибкой, чтобы опечатки в JSON не терялись молча.

        Args:
            data: Словарь параметров (например, из JSON-файла)

        Returns:
            Новый SystemConfig
        """
        data = dict(data)
        if "source_power_db" in data:
            data["source_power"] = db_to_linear(data.pop("source_power_db"))
        if "relay_power_budget_db" in data:
            data["relay_power_budget"] = db_to_linear(data.pop("relay_power_budget_db"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"Неизвестные параметры системы: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict:
        return asdict(self)

    def replace(self, **changes) -> "SystemConfig":
        """Копия с изменёнными полями (с повторной проверкой)."""
        return replace(self, **changes)

    @property
    def wavenumber(self) -> float:
        """2π/λ."""
        return 2.0 * np.pi / self.wavelength

    @property
    def half_region(self) -> float:
        return self.region_size / 2.0


@dataclass(frozen=True)
class Position:
    """Позиция одной антенны (x, y) в длинах волны."""

    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def from_array(cls, point) -> "Position":
        return cls(float(point[0]), float(point[1]))


@dataclass(frozen=True)
class PositionSet:
    """
    Упорядоченный набор из N позиций антенн.

    Внутри хранится неизменяемый массив формы (N, 2).
    """

    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1, 2)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def positions(self) -> Tuple[Position, ...]:
        return tuple(Position.from_array(row) for row in self.coords)

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __getitem__(self, n: int) -> Position:
        return Position.from_array(self.coords[n])

    def __iter__(self) -> Iterator[Position]:
        return iter(self.positions)

    def with_position(self, n: int, point) -> "PositionSet":
        """Новый набор, в котором n-я антенна перенесена в point."""
        coords = self.coords.copy()
        coords[n] = point.as_array() if isinstance(point, Position) else np.asarray(point, dtype=float)
        return PositionSet(coords)

    def to_list(self):
        return self.coords.tolist()


def _complex_to_pairs(values: np.ndarray):
    return [[float(v.real), float(v.imag)] for v in values]


def _pairs_to_complex(pairs) -> np.ndarray:
    data = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return data[:, 0] + 1j * data[:, 1]


@dataclass(frozen=True)
class ChannelRealization:
    """
    Одна случайная реализация канала.

    rx_* - углы прихода путей источник -> ретранслятор (L_r штук),
    tx_* - углы ухода путей ретранслятор -> приёмник (L_t штук),
    rx_prv (g1) и tx_prv (f2) - комплексные коэффициенты путей (PRV).
    """

    rx_elevations: np.ndarray
    rx_azimuths: np.ndarray
    tx_elevations: np.ndarray
    tx_azimuths: np.ndarray
    rx_prv: np.ndarray
    tx_prv: np.ndarray
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        for name in ("rx_elevations", "rx_azimuths", "tx_elevations", "tx_azimuths"):
            values = np.array(getattr(self, name), dtype=float).ravel()
            if not np.all(np.isfinite(values)):
                raise ValueError(f"{name}: углы должны быть конечными")
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        for name in ("rx_prv", "tx_prv"):
            values = np.array(getattr(self, name), dtype=complex).ravel()
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        if not (len(self.rx_elevations) == len(self.rx_azimuths) == len(self.rx_prv)):
            raise ValueError("Длины rx_elevations, rx_azimuths и rx_prv должны совпадать (L_r)")
        if not (len(self.tx_elevations) == len(self.tx_azimuths) == len(self.tx_prv)):
            raise ValueError("Длины tx_elevations, tx_azimuths и tx_prv должны совпадать (L_t)")

    @property
    def n_rx_paths(self) -> int:
        return len(self.rx_prv)

    @property
    def n_tx_paths(self) -> int:
        return len(self.tx_prv)

    @property
    def rx_directions(self) -> np.ndarray:
        return path_directions(self.rx_elevations, self.rx_azimuths)

    @property
    def tx_directions(self) -> np.ndarray:
        return path_directions(self.tx_elevations, self.tx_azimuths)

    def to_dict(self) -> Dict:
        """Словарь для JSON: комплексные числа как пары [re, im]."""
        return {
            "seed": self.seed,
            "rx_elevations": self.rx_elevations.tolist(),
            "rx_azimuths": self.rx_azimuths.tolist(),
            "tx_elevations": self.tx_elevations.tolist(),
            "tx_azimuths": self.tx_azimuths.tolist(),
            "rx_prv": _complex_to_pairs(self.rx_prv),
            "tx_prv": _complex_to_pairs(self.tx_prv),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ChannelRealization":
        return cls(
            rx_elevations=data["rx_elevations"],
            rx_azimuths=data["rx_azimuths"],
            tx_elevations=data["tx_elevations"],
            tx_azimuths=data["tx_azimuths"],
            rx_prv=_pairs_to_complex(data["rx_prv"]),
            tx_prv=_pairs_to_complex(data["tx_prv"]),
            seed=data.get("seed"),
        )

    def digest(self) -> str:
        """SHA-256 от сырых массивов: одинаков для одинаковых реализаций."""
        sha = hashlib.sha256()
        for values in (self.rx_elevations, self.rx_azimuths, self.tx_elevations,
                       self.tx_azimuths, self.rx_prv, self.tx_prv):
            sha.update(np.ascontiguousarray(values).tobytes())
        return sha.hexdigest()[:16]


# ============================================
# ВЕКТОРЫ ПОЛЕВОГО ОТКЛИКА
# ============================================

def path_directions(elevations: np.ndarray, azimuths: np.ndarray) -> np.ndarray:
    """
    Направляющие коэффициенты путей.

    Returns:
        Массив формы (L, 2): строки [sinθ cosφ, cosθ], так что ρ = dirs @ [x, y]
    """
    elevations = np.asarray(elevations, dtype=float)
    azimuths = np.asarray(azimuths, dtype=float)
    return np.stack([np.sin(elevations) * np.cos(azimuths), np.cos(elevations)], axis=-1)


def _as_point(pos) -> np.ndarray:
    if isinstance(pos, Position):
        return pos.as_array()
    return np.asarray(pos, dtype=float)


def receive_frv(pos, ch: ChannelRealization, cfg: SystemConfig) -> np.ndarray:
    """
    Приёмный вектор полевого отклика f1(r) длины L_r.

    i-й элемент равен exp(j * 2π/λ * ρ_{1,i}(r)); все элементы по модулю равны 1.
    """
    rho = ch.rx_directions @ _as_point(pos)
    return np.exp(1j * cfg.wavenumber * rho)


def transmit_frv(pos, ch: ChannelRealization, cfg: SystemConfig) -> np.ndarray:
    """Передающий вектор полевого отклика g2(t) длины L_t."""
    rho = ch.tx_directions @ _as_point(pos)
    return np.exp(1j * cfg.wavenumber * rho)


def _check_size(positions: PositionSet, cfg: SystemConfig):
    if len(positions) != cfg.n_antennas:
        raise ValueError(
            f"Число позиций ({len(positions)}) не совпадает с n_antennas ({cfg.n_antennas})"
        )


def source_relay_channel(rx_positions: PositionSet, ch: ChannelRealization,
                         cfg: SystemConfig) -> np.ndarray:
    """
    Канал источник -> ретранслятор h1 = F1^H g1.

    Args:
        rx_positions: Позиции антенн на этапе приёма (r̃)
        ch: Реализация канала
        cfg: Параметры системы

    Returns:
        Комплексный вектор длины N, h1[n] = f1(r_n)^H g1
    """
    _check_size(rx_positions, cfg)
    # Строки frv - векторы f1(r_n)^T, форма (N, L_r)
    frv = np.exp(1j * cfg.wavenumber * (rx_positions.coords @ ch.rx_directions.T))
    return frv.conj() @ ch.rx_prv


def relay_dest_channel(tx_positions: PositionSet, ch: ChannelRealization,
                       cfg: SystemConfig) -> np.ndarray:
    """Канал ретранслятор -> приёмник h2 = G2^H f2 (зеркально source_relay_channel)."""
    _check_size(tx_positions, cfg)
    frv = np.exp(1j * cfg.wavenumber * (tx_positions.coords @ ch.tx_directions.T))
    return frv.conj() @ ch.tx_prv


# ============================================
# СЛУЧАЙНЫЕ РЕАЛИЗАЦИИ
# ============================================

def realization_seed(master_seed: int, index: int) -> int:
    """
    Зерно реализации с номером index.

    SeedSequence делает зерно функцией только пары (master_seed, index),
    поэтому реализации не зависят от порядка выполнения и потоков.
    """
    sequence = np.random.SeedSequence([int(master_seed), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def sample_channel(cfg: SystemConfig, seed: int) -> ChannelRealization:
    """
    Сгенерировать реализацию канала.

    Углы (и места, и азимута) равномерны на [0, 2π]; коэффициенты путей
    g1_i ~ CN(0, 1/L_r), f2_i ~ CN(0, 1/L_t). Результат - чистая функция (cfg, seed).
    """
    rng = np.random.default_rng(seed)
    l_r, l_t = cfg.n_rx_paths, cfg.n_tx_paths
    rx_elevations = rng.uniform(0.0, 2.0 * np.pi, l_r)
    rx_azimuths = rng.uniform(0.0, 2.0 * np.pi, l_r)
    tx_elevations = rng.uniform(0.0, 2.0 * np.pi, l_t)
    tx_azimuths = rng.uniform(0.0, 2.0 * np.pi, l_t)
    rx_prv = np.sqrt(0.5 / l_r) * (rng.standard_normal(l_r) + 1j * rng.standard_normal(l_r))
    tx_prv = np.sqrt(0.5 / l_t) * (rng.standard_normal(l_t) + 1j * rng.standard_normal(l_t))
    return ChannelRealization(rx_elevations, rx_azimuths, tx_elevations, tx_azimuths,
                              rx_prv, tx_prv, seed=seed)


# ============================================
# ГЕОМЕТРИЯ
# ============================================

def min_pairwise_distance(positions: PositionSet) -> float:
    """Минимальное попарное расстояние; +inf для одной антенны."""
    if len(positions) < 2:
        return float("inf")
    return float(pdist(positions.coords).min())


def distances_to_others(point, n: int, positions: PositionSet) -> np.ndarray:
    """Расстояния от point до всех антенн набора, кроме n-й."""
    others = np.delete(positions.coords, n, axis=0)
    if others.size == 0:
        return np.empty(0)
    return cdist(_as_point(point)[None, :], others)[0]


def in_region(point, cfg: SystemConfig) -> bool:
    """Лежит ли точка в квадрате [-A/2, A/2]^2."""
    xy = _as_point(point)
    return bool(np.all(np.abs(xy) <= cfg.half_region + GEOMETRY_TOL))


def grid_shape(n_antennas: int) -> Tuple[int, int]:
    """
    Форма решётки rows x cols: разложение N с минимальным |rows - cols|, rows >= cols.

    Например, 6 -> (3, 2), 4 -> (2, 2), 5 -> (5, 1).
    """
    cols = int(np.floor(np.sqrt(n_antennas)))
    while n_antennas % cols:
        cols -= 1
    return n_antennas // cols, cols


def fpa_layout(cfg: SystemConfig) -> PositionSet:
    """
    Центрированная равномерная планарная решётка (FPA).

    Шаг равен max(λ/2, D); строки решётки идут вдоль оси y, столбцы - вдоль x.

    Raises:
        LayoutError: если решётка не помещается в область C_r
    """
    rows, cols = grid_shape(cfg.n_antennas)
    spacing = max(HALF_WAVELENGTH, cfg.min_distance)
    extent = max(rows - 1, cols - 1) * spacing / 2.0
    if extent > cfg.half_region + GEOMETRY_TOL:
        raise LayoutError(
            f"Решётка {rows}x{cols} с шагом {spacing} не помещается в область A={cfg.region_size}"
        )
    ys = (np.arange(rows) - (rows - 1) / 2.0) * spacing
    xs = (np.arange(cols) - (cols - 1) / 2.0) * spacing
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return PositionSet(np.column_stack([grid_x.ravel(), grid_y.ravel()]))
