"""
Модуль для сохранения результатов экспериментов.

Сохраняет:
- Строки результатов (<out>.csv)
- Сводку по точкам и схемам (<out>.summary.csv)
- Трассы AO и итоговые позиции (<out>.traces.json), если они есть

Колонка wall_time по умолчанию не пишется: без неё CSV побайтно
совпадает при повторном запуске с тем же описанием эксперимента.
"""
import csv      # таблицы результатов и сводки
import json     # трассы AO, позиции и диагностика SDP
import logging
import math
import os       # создание директории для результатов
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from harness import ResultRow, SummaryRow, csv_columns

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["sweep_value", "scheme", "mean_rate", "stderr_rate", "count", "failures"]


def _format_value(value):
    """Числа с плавающей точкой - в repr (точно и детерминированно), NaN - как 'nan'."""
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return value


def _json_safe(value):
    """NaN и inf не допускаются в строгом JSON - заменяем на None."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


class ResultWriter:
    """Класс для записи результатов эксперимента на диск."""

    def __init__(self, output: str, include_timing: bool = False):
        """
        Инициализация записи результатов.

        Args:
            output: Базовый путь без расширения (например, results/experiment)
            include_timing: Добавлять ли колонку wall_time в CSV
        """
        self.output = Path(output)
        self.include_timing = include_timing
        # Создаем директорию, если её нет
        if self.output.parent != Path(""):
            os.makedirs(self.output.parent, exist_ok=True)

    @property
    def rows_path(self) -> Path:
        return self.output.with_name(self.output.name + ".csv")

    @property
    def summary_path(self) -> Path:
        return self.output.with_name(self.output.name + ".summary.csv")

    @property
    def traces_path(self) -> Path:
        return self.output.with_name(self.output.name + ".traces.json")

    def write_rows(self, rows: Sequence[ResultRow]) -> Path:
        """
        Записать строки результатов.

        Raises:
            OSError: при ошибке записи
        """
        columns = csv_columns(self.include_timing)
        with open(self.rows_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                record = row.as_csv_dict(self.include_timing)
                writer.writerow({key: _format_value(value) for key, value in record.items()})
        logger.info("Результаты записаны: %s (%d строк)", self.rows_path, len(rows))
        return self.rows_path

    def write_summary(self, summary: Sequence[SummaryRow]) -> Path:
        """Записать сводку: среднее и стандартная ошибка скорости."""
        with open(self.summary_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for item in summary:
                writer.writerow({key: _format_value(value) for key, value in asdict(item).items()})
        logger.info("Сводка записана: %s", self.summary_path)
        return self.summary_path

    def write_traces(self, rows: Sequence[ResultRow]) -> Optional[Path]:
        """
        Записать трассы и позиции для строк, где они сохранены.

        Returns:
            Путь к файлу или None, если записывать нечего
        """
        records: List[Dict] = []
        for row in rows:
            if row.state is None:
                continue
            records.append({
                "sweep_value": row.sweep_value,
                "scheme": row.scheme,
                "realization": row.realization,
                "seed": row.seed,
                "channel_hash": row.channel_hash,
                **row.state,
            })
        if not records:
            return None
        with open(self.traces_path, "w", encoding="utf-8") as handle:
            json.dump(_json_safe(records), handle, ensure_ascii=False, indent=2, allow_nan=False)
        logger.info("Трассы записаны: %s (%d записей)", self.traces_path, len(records))
        return self.traces_path

    def write_all(self, rows: Sequence[ResultRow], summary: Sequence[SummaryRow]) -> List[Path]:
        """Записать все файлы эксперимента."""
        paths = [self.write_rows(rows), self.write_summary(summary)]
        traces = self.write_traces(rows)
        if traces is not None:
            paths.append(traces)
        return paths
