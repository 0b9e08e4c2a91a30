"""
Конфигурация моделирования AF-ретранслятора с подвижными антеннами (MA).

Этот файл содержит все настройки по умолчанию. Здесь можно:
1. Изменить параметры системы (число антенн, размер области, мощности)
2. Настроить SDP-решатель для матрицы весов W
3. Настроить градиентный подъём по позициям антенн
4. Настроить внешний цикл альтернативной оптимизации (AO)
5. Задать параметры экспериментов Монте-Карло и логирования

Порядок переопределения: этот файл < JSON-файл (--config) < флаги командной строки.
"""


# ============================================
# ПАРАМЕТРЫ СИСТЕМЫ
# ============================================
# Все длины измеряются в длинах волны (λ = 1.0 внутри программы).
# Мощности здесь заданы в дБ, SystemConfig переводит их в линейную шкалу.

SYSTEM_CONFIG = {
    # Число подвижных антенн на ретрансляторе (N)
    "n_antennas": 6,

    # Длина стороны квадратной области перемещения (A), в λ
    # Область центрирована: [-A/2, A/2] x [-A/2, A/2]
    "region_size": 3.0,

    # Минимальное расстояние между антеннами (D), в λ
    # Защищает от взаимной связи антенн
    "min_distance": 0.5,

    # Длина волны. Все длины (A, D, позиции) заданы в λ,
    # поэтому допускается только 1.0
    "wavelength": 1.0,

    # Число путей распространения источник -> ретранслятор (L_r)
    # и ретранслятор -> приёмник (L_t)
    "n_rx_paths": 5,
    "n_tx_paths": 5,

    # Мощность источника P_s и бюджет мощности ретранслятора P_tot, в дБ
    "source_power_db": 10.0,
    "relay_power_budget_db": 10.0,

    # Мощности шума на ретрансляторе (σ_r²) и приёмнике (σ_d²), линейные
    "relay_noise_power": 1.0,
    "dest_noise_power": 1.0,
}


# ============================================
# НАСТРОЙКИ SDP (МАТРИЦА ВЕСОВ W)
# ============================================
# SDP решается методом внутренней точки через cvxpy

SDP_CONFIG = {
    # Имя решателя cvxpy. CLARABEL - решатель методом внутренней точки
    # с поддержкой конусов PSD
    "solver": "CLARABEL",

    # Точность решателя (зазор двойственности и невязка допустимости)
    "feasibility_tol": 1e-8,

    # Максимальное число итераций метода внутренней точки
    "max_iters": 200,

    # Порог невязки ранга: 1 - λ_max/Tr(Q) должно быть меньше этого значения
    "rank_tol": 1e-5,

    # Допустимое относительное расхождение SNR восстановленного W и оптимума SDP
    "snr_rel_tol": 1e-6,

    # Если ‖h1‖ или ‖h2‖ меньше этого значения - канал считается нулевым
    "degenerate_channel_tol": 1e-12,

    # Минимальное допустимое τ при восстановлении Q = Q̃/τ
    "tau_tol": 1e-12,
}


# ============================================
# НАСТРОЙКИ ГРАДИЕНТНОГО ПОДЪЁМА (ПОЗИЦИИ АНТЕНН)
# ============================================

GA_CONFIG = {
    # Начальный шаг μ_ini, в λ
    # Одна длина волны соответствует масштабу осцилляций целевой функции
    "initial_step": 1.0,

    # Максимальное число полных проходов по антеннам n = 1..N
    "max_outer_iters": 50,

    # Максимальное число делений шага пополам в одном линейном поиске
    # 30 делений дают разрешение меньше 1e-9 λ
    "max_halvings": 30,

    # Относительное изменение целевой функции за проход для остановки
    "convergence_tol": 1e-5,
}


# ============================================
# НАСТРОЙКИ АЛЬТЕРНАТИВНОЙ ОПТИМИЗАЦИИ (AO)
# ============================================

AO_CONFIG = {
    # Относительное изменение скорости для остановки
    "ao_tol": 1e-4,

    # Максимальное число итераций AO
    "max_ao_iters": 30,

    # Если σ_r²‖W‖² >= P_tot, W умножается на slack_factor * sqrt(P_tot / мощность)
    "slack_factor": 0.999,
}


# ============================================
# НАСТРОЙКИ OTPA (ОДНОКРАТНАЯ ПОДСТРОЙКА ПОЗИЦИЙ)
# ============================================

OTPA_CONFIG = {
    # Шаг центральных конечных разностей для градиента, в λ
    "fd_step": 1e-4,
}


# ============================================
# НАСТРОЙКИ ЭКСПЕРИМЕНТОВ
# ============================================

EXPERIMENT_CONFIG = {
    # Число реализаций канала на каждую точку
    # 100 - для настольного запуска, для гладких кривых задайте --realizations 1000
    "n_realizations": 100,

    # Главное зерно генератора. Зерно реализации выводится из (master_seed, индекс)
    "master_seed": 2024,

    # Схемы для сравнения: proposed (двухэтапная MA), otpa, fpa
    "schemes": ["proposed", "otpa", "fpa"],

    # Базовый путь для результатов: <out>.csv, <out>.summary.csv, <out>.traces.json
    "output": "results/experiment",

    # Число рабочих потоков. None - по числу физических ядер (psutil)
    "max_workers": None,

    # Значения по умолчанию для каждого вида эксперимента
    "sweep_values": {
        "single": [0.0],
        # Число антенн N для графиков сходимости
        "convergence": [4, 6, 8],
        # Бюджет мощности ретранслятора P_tot, в дБ
        "sweep_power": [0.0, 5.0, 10.0, 15.0, 20.0],
        # Число антенн N
        "sweep_antennas": [2, 4, 6, 8],
        # Размер области A, в λ
        "sweep_region": [1.0, 2.0, 3.0, 4.0],
    },
}


# ============================================
# НАСТРОЙКИ ЛОГИРОВАНИЯ
# ============================================

LOGGING_CONFIG = {
    # Уровень логирования: "DEBUG", "INFO", "WARNING", "ERROR"
    "level": "INFO",

    # Формат строки лога
    "format": "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
}
