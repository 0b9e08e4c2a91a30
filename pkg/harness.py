"""
Модуль экспериментов Монте-Карло.

Эксперимент - это набор точек (значений параметра) и реализаций канала.
Для каждой пары (точка, реализация):
1. Строится SystemConfig для значения параметра
2. Генерируется канал с зерном realization_seed(master_seed, индекс)
3. Все запрошенные схемы решаются на ОДНОЙ И ТОЙ ЖЕ реализации
4. Результат каждой схемы - строка ResultRow

Реализации независимы и обрабатываются пулом потоков; строки сортируются
по (значение, реализация, схема), поэтому результат не зависит от порядка
выполнения. Сбой решателя на одной реализации записывается в строку и
не останавливает эксперимент.
"""
import logging
import math  # sqrt для стандартной ошибки, isnan
import time  # замер времени решения каждой схемы
from concurrent.futures import ThreadPoolExecutor, as_completed  # пул рабочих потоков
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import psutil  # число физических ядер и память процесса
from tqdm import tqdm  # индикатор прогресса по реализациям

from ao_driver import SolutionState, achievable_rate, ao_solve
from baselines import fpa_solve, otpa_solve
from channel import SystemConfig, db_to_linear, realization_seed, sample_channel
from position_opt import InfeasiblePositionsError
from relay_weights import SolverError

logger = logging.getLogger(__name__)

KINDS = ("single", "convergence", "sweep_power", "sweep_antennas", "sweep_region")
SCHEMES = ("proposed", "otpa", "fpa")

# Какой параметр меняет каждый вид эксперимента (None - ничего)
SWEEP_PARAMETERS = {
    "single": None,
    "convergence": "n_antennas",
    "sweep_power": "relay_power_budget_db",
    "sweep_antennas": "n_antennas",
    "sweep_region": "region_size",
}

SOLVERS: Dict[str, Callable[[SystemConfig, object], SolutionState]] = {
    "proposed": ao_solve,
    "otpa": otpa_solve,
    "fpa": fpa_solve,
}

# Ошибки одной реализации, которые не должны останавливать эксперимент
RUN_ERRORS = (SolverError, InfeasiblePositionsError, ValueError, np.linalg.LinAlgError)


def default_workers() -> int:
    """Число рабочих потоков по умолчанию - число физических ядер."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentSpec:
    """
    Описание эксперимента.

    Args:
        kind: Вид эксперимента (см. KINDS)
        base: Базовая конфигурация системы
        sweep_values: Значения параметра (непустые, по возрастанию)
        n_realizations: Число реализаций на точку
        master_seed: Главное зерно
        schemes: Подмножество SCHEMES
        output: Базовый путь для файлов результатов
        max_workers: Размер пула потоков (None - по числу ядер)
        record_traces: Сохранять трассы и позиции (для convergence - всегда)
        show_progress: Показывать прогресс tqdm
    """

    kind: str
    base: SystemConfig
    sweep_values: Tuple[float, ...]
    n_realizations: int
    master_seed: int
    schemes: Tuple[str, ...]
    output: Path
    max_workers: Optional[int] = None
    record_traces: bool = False
    show_progress: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"Неизвестный вид эксперимента '{self.kind}', допустимы: {KINDS}")
        values = tuple(float(v) for v in self.sweep_values)
        if not values:
            raise ValueError("Список значений параметра пуст")
        if list(values) != sorted(values):
            raise ValueError(f"Значения параметра должны идти по возрастанию: {values}")
        object.__setattr__(self, "sweep_values", values)
        if self.n_realizations < 1:
            raise ValueError("n_realizations должно быть >= 1")
        schemes = tuple(self.schemes)
        if not schemes or set(schemes) - set(SCHEMES):
            raise ValueError(f"Схемы должны быть непустым подмножеством {SCHEMES}, получено {schemes}")
        object.__setattr__(self, "schemes", tuple(s for s in SCHEMES if s in schemes))
        object.__setattr__(self, "output", Path(self.output))
        if self.max_workers is not None and self.max_workers < 1:
            raise ValueError("max_workers должно быть >= 1")
        # Каждая точка должна давать допустимую конфигурацию (сетка помещается и т.д.)
        for value in values:
            self.config_for(value)

    @property
    def sweep_parameter(self) -> Optional[str]:
        return SWEEP_PARAMETERS[self.kind]

    @property
    def traces_enabled(self) -> bool:
        return self.record_traces or self.kind == "convergence"

    def config_for(self, value: float) -> SystemConfig:
        """Конфигурация системы для значения параметра."""
        parameter = self.sweep_parameter
        if parameter is None:
            return self.base
        if parameter == "n_antennas":
            if value != int(value):
                raise ValueError(f"Число антенн должно быть целым, получено {value}")
            return self.base.replace(n_antennas=int(value))
        if parameter == "relay_power_budget_db":
            return self.base.replace(relay_power_budget=db_to_linear(value))
        return self.base.replace(**{parameter: float(value)})


@dataclass(frozen=True)
class ResultRow:
    """
    Одна строка результатов: схема на одной реализации в одной точке.

    При сбое rate и snr равны NaN, а текст ошибки лежит в error.
    trace и state не пишутся в CSV, они идут в traces.json.
    """

    experiment_kind: str
    sweep_value: float
    scheme: str
    realization: int
    seed: int
    rate: float
    snr: float
    ao_iterations: int
    rank_residual: float
    wall_time: float
    channel_hash: str
    error: str = ""
    trace: Tuple[float, ...] = field(default=(), compare=False)
    state: Optional[Dict] = field(default=None, compare=False, repr=False)

    @property
    def ok(self) -> bool:
        return not self.error

    def as_csv_dict(self, include_timing: bool = True) -> Dict:
        row = {name: getattr(self, name) for name in csv_columns(include_timing)}
        return row


def csv_columns(include_timing: bool = True) -> List[str]:
    """Имена колонок CSV в порядке полей ResultRow."""
    skip = {"trace", "state"}
    if not include_timing:
        skip.add("wall_time")
    return [f.name for f in fields(ResultRow) if f.name not in skip]


@dataclass(frozen=True)
class SummaryRow:
    """Агрегат по (значение, схема): среднее, стандартная ошибка, число успешных строк."""

    sweep_value: float
    scheme: str
    mean_rate: float
    stderr_rate: float
    count: int
    failures: int


def run_realization(spec: ExperimentSpec, value: float, index: int) -> List[ResultRow]:
    """
    Решить все схемы эксперимента на одной реализации.

    Args:
        spec: Описание эксперимента
        value: Значение параметра
        index: Номер реализации

    Returns:
        По одной строке на схему, в порядке spec.schemes
    """
    cfg = spec.config_for(value)
    seed = realization_seed(spec.master_seed, index)
    ch = sample_channel(cfg, seed)
    digest = ch.digest()

    rows = []
    for scheme in spec.schemes:
        started = time.perf_counter()
        try:
            state = SOLVERS[scheme](cfg, ch)
        except RUN_ERRORS as exc:
            elapsed = time.perf_counter() - started
            logger.warning("Сбой схемы %s (значение %s, реализация %d): %s", scheme, value, index, exc)
            rows.append(ResultRow(spec.kind, value, scheme, index, seed, float("nan"), float("nan"),
                                  0, float("nan"), elapsed, digest, error=str(exc) or type(exc).__name__))
            continue
        elapsed = time.perf_counter() - started
        if state.diagnostics is not None:
            logger.debug("SDP %s (реализация %d): %s", scheme, index, state.diagnostics.to_dict())
        record = None
        if spec.traces_enabled:
            record = {**state.to_dict(), "channel": ch.to_dict()}
        rows.append(ResultRow(
            experiment_kind=spec.kind,
            sweep_value=value,
            scheme=scheme,
            realization=index,
            seed=seed,
            rate=achievable_rate(state.snr),
            snr=state.snr,
            ao_iterations=state.iterations,
            rank_residual=state.rank_residual,
            wall_time=elapsed,
            channel_hash=digest,
            trace=tuple(state.trace),
            state=record,
        ))
    return rows


def _row_order(row: ResultRow):
    return row.sweep_value, row.realization, SCHEMES.index(row.scheme)


def run_experiment(spec: ExperimentSpec) -> List[ResultRow]:
    """
    Запустить эксперимент: все точки x все реализации x все схемы.

    Результат детерминирован для фиксированного spec (кроме wall_time).
    """
    tasks = [(value, index) for value in spec.sweep_values for index in range(spec.n_realizations)]
    workers = min(spec.max_workers or default_workers(), len(tasks))
    logger.info("Эксперимент %s: %d точек x %d реализаций, схемы %s, потоков %d",
                spec.kind, len(spec.sweep_values), spec.n_realizations, ",".join(spec.schemes), workers)

    # Каждая задача - одна реализация канала со всеми схемами сразу,
    # поэтому схемы сравниваются на одном и том же канале
    rows: List[ResultRow] = []
    started = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run_realization, spec, value, index) for value, index in tasks]
        progress = tqdm(as_completed(futures), total=len(futures), desc=spec.kind,
                        disable=not spec.show_progress)
        for future in progress:
            rows.extend(future.result())

    # Потоки завершаются в произвольном порядке - восстанавливаем порядок для CSV
    rows.sort(key=_row_order)
    failures = sum(1 for row in rows if not row.ok)
    # Память процесса в МБ
    rss_mb = psutil.Process().memory_info().rss / 1024 / 1024
    logger.info("Эксперимент завершён за %.1f с: %d строк, сбоев %d, память процесса %.0f МБ",
                time.perf_counter() - started, len(rows), failures, rss_mb)
    return rows


def summarize(rows: Sequence[ResultRow]) -> List[SummaryRow]:
    """
    Средняя скорость по (значение, схема) со стандартной ошибкой.

    Строки со сбоями не входят в среднее, но учитываются в failures.

    Raises:
        ValueError: если rows пуст
    """
    if not rows:
        raise ValueError("Нет строк для агрегации")
    groups: Dict[Tuple[float, str], List[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.sweep_value, row.scheme), []).append(row)

    summary = []
    for (value, scheme) in sorted(groups, key=lambda key: (key[0], SCHEMES.index(key[1]))):
        group = groups[(value, scheme)]
        rates = np.array([row.rate for row in group if row.ok], dtype=float)
        count = rates.size
        if count == 0:
            mean, stderr = float("nan"), float("nan")
        else:
            mean = float(rates.mean())
            stderr = float(rates.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        summary.append(SummaryRow(value, scheme, mean, stderr, count, len(group) - count))
    return summary
