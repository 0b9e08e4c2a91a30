"""
Точка входа: эксперименты Монте-Карло для AF-ретранслятора с подвижными антеннами.

Этот файл:
1. Разбирает командную строку (подкоманда = вид эксперимента)
2. Собирает описание эксперимента: config.py < JSON (--config) < флаги
3. Запускает эксперимент в пуле потоков
4. Пишет результаты: <out>.csv, <out>.summary.csv, <out>.traces.json

Коды выхода: 0 - успех, 1 - неверное описание эксперимента (включая
ошибки разбора флагов), 2 - ошибка ввода-вывода при записи результатов.

Примеры:
    python app.py single --seed 1 --realizations 10 --out results/single
    python app.py sweep-power --values 0 10 20 --schemes proposed,fpa
    python app.py convergence --antennas 6 --config experiment_config.json
"""
import argparse  # разбор командной строки: подкоманды и флаги
import copy      # глубокая копия EXPERIMENT_CONFIG, чтобы не портить модуль config
import json      # чтение JSON-файла конфигурации (--config)
import logging   # логирование вместо print, уровень из LOGGING_CONFIG
import sys       # sys.exit с кодом выхода
from typing import Dict, List, Optional

import config   # значения по умолчанию (система, решатели, эксперимент)
from channel import SystemConfig
from harness import KINDS, SCHEMES, ExperimentSpec, run_experiment, summarize
from result_writer import ResultWriter  # запись CSV и JSON с результатами

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2

# Флаги командной строки -> ключи SYSTEM_CONFIG
SYSTEM_FLAGS = {
    "antennas": "n_antennas",
    "region": "region_size",
    "min_dist": "min_distance",
    "ps_db": "source_power_db",
    "ptot_db": "relay_power_budget_db",
}

# Флаги командной строки -> ключи EXPERIMENT_CONFIG
EXPERIMENT_FLAGS = {
    "seed": "master_seed",
    "realizations": "n_realizations",
    "schemes": "schemes",
    "out": "output",
    "workers": "max_workers",
}


def setup_logging(level: Optional[str] = None):
    """Настроить корневой логгер по LOGGING_CONFIG."""
    level_name = (level or config.LOGGING_CONFIG["level"]).upper()
    if not isinstance(logging.getLevelName(level_name), int):
        raise ValueError(f"Неизвестный уровень логирования '{level_name}'")
    logging.basicConfig(level=level_name, format=config.LOGGING_CONFIG["format"], force=True)


class ExperimentArgumentParser(argparse.ArgumentParser):
    """
    Парсер, который не завершает процесс при ошибке разбора.

    argparse по умолчанию вызывает sys.exit(2), а код 2 зарезервирован
    за ошибками ввода-вывода. Здесь ошибка превращается в ValueError,
    и main() возвращает код 1 как для любого неверного описания.
    Подпарсеры наследуют этот класс через add_subparsers.
    """

    def error(self, message):
        raise ValueError(f"{self.prog}: {message}")


def parse_schemes(text: str) -> List[str]:
    """Разобрать список схем через запятую: 'proposed,fpa' -> ['proposed', 'fpa']."""
    schemes = [item.strip() for item in text.split(",") if item.strip()]
    if not schemes:
        raise argparse.ArgumentTypeError("пустой список схем")
    unknown = [item for item in schemes if item not in SCHEMES]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"неизвестные схемы {unknown}, допустимы: {', '.join(SCHEMES)}")
    return schemes


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="главное зерно генератора")
    common.add_argument("--realizations", type=int, help="число реализаций канала на точку")
    common.add_argument("--antennas", type=int, help="число антенн N")
    common.add_argument("--region", type=float, help="размер области A, в λ")
    common.add_argument("--ps-db", type=float, help="мощность источника P_s, дБ")
    common.add_argument("--ptot-db", type=float, help="бюджет мощности ретранслятора P_tot, дБ")
    common.add_argument("--paths", type=int, help="число путей L_r = L_t")
    common.add_argument("--min-dist", type=float, help="минимальное расстояние D, в λ")
    common.add_argument("--schemes", type=parse_schemes,
                        help="схемы через запятую: " + ",".join(SCHEMES))
    common.add_argument("--out", help="базовый путь для файлов результатов")
    common.add_argument("--config", help="JSON-файл с секциями system и experiment")
    common.add_argument("--values", nargs="+", type=float, help="значения параметра эксперимента")
    common.add_argument("--workers", type=int, help="число рабочих потоков")
    common.add_argument("--traces", action="store_true", help="сохранять трассы и позиции")
    common.add_argument("--timing", action="store_true", help="добавить колонку wall_time в CSV")
    common.add_argument("--no-progress", action="store_true", help="не показывать прогресс")
    common.add_argument("--log-level", help="уровень логирования (DEBUG, INFO, ...)")

    parser = ExperimentArgumentParser(
        description="Моделирование AF-ретранслятора с подвижными антеннами (Монте-Карло)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        subparsers.add_parser(kind.replace("_", "-"), parents=[common],
                              help=f"эксперимент {kind}")
    return parser


def load_config_file(path: str) -> Dict:
    """
    Прочитать JSON-файл конфигурации.

    Raises:
        ValueError: если файл не читается, не является JSON или содержит лишние секции
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ValueError(f"Не удалось прочитать конфигурацию {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"Некорректный JSON в {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValueError(f"Конфигурация {path} должна быть объектом JSON")
    unknown = set(data) - {"system", "experiment"}
    if unknown:
        raise ValueError(f"Неизвестные секции конфигурации: {sorted(unknown)}")
    return data


def build_spec(args: argparse.Namespace) -> ExperimentSpec:
    """
    Собрать описание эксперимента: config.py < JSON < флаги.

    Raises:
        ValueError: при неверных параметрах
    """
    kind = args.command.replace("-", "_")
    system = SystemConfig.default().to_dict()
    experiment = copy.deepcopy(config.EXPERIMENT_CONFIG)

    if args.config:
        data = load_config_file(args.config)
        system.update(data.get("system", {}))
        file_experiment = data.get("experiment", {})
        sweep_values = file_experiment.pop("sweep_values", {})
        unknown = set(file_experiment) - set(experiment)
        if unknown:
            raise ValueError(f"Неизвестные ключи секции experiment: {sorted(unknown)}")
        experiment.update(file_experiment)
        experiment["sweep_values"].update(sweep_values)

    for flag, key in SYSTEM_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            system[key] = value
    if args.paths is not None:
        system["n_rx_paths"] = system["n_tx_paths"] = args.paths
    for flag, key in EXPERIMENT_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            experiment[key] = value

    values: List[float] = args.values if args.values is not None else experiment["sweep_values"][kind]
    return ExperimentSpec(
        kind=kind,
        base=SystemConfig.from_dict(system),
        sweep_values=tuple(values),
        n_realizations=int(experiment["n_realizations"]),
        master_seed=int(experiment["master_seed"]),
        schemes=tuple(experiment["schemes"]),
        output=experiment["output"],
        max_workers=experiment["max_workers"],
        record_traces=args.traces,
        show_progress=not args.no_progress,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Запустить эксперимент из командной строки, вернуть код выхода."""
    try:
        args = build_parser().parse_args(argv)
    except ValueError as exc:
        setup_logging()
        logger.error("Неверные аргументы командной строки: %s", exc)
        return EXIT_INVALID

    try:
        setup_logging(args.log_level)
        spec = build_spec(args)
    except ValueError as exc:
        logger.error("Неверное описание эксперимента: %s", exc)
        return EXIT_INVALID

    rows = run_experiment(spec)
    summary = summarize(rows)
    for item in summary:
        logger.info("%s=%g %-8s скорость %.4f ± %.4f (n=%d, сбоев %d)",
                    spec.sweep_parameter or "точка", item.sweep_value, item.scheme,
                    item.mean_rate, item.stderr_rate, item.count, item.failures)

    try:
        writer = ResultWriter(str(spec.output), include_timing=args.timing)
        writer.write_all(rows, summary)
    except OSError as exc:
        logger.error("Ошибка записи результатов: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
