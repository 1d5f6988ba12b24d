"""Multilevel Picard estimator for semilinear PIDEs.

For level ``n`` and Monte Carlo base ``M`` the estimator at (t, x) is

    U_n = 1/M^n sum_i g(Y_T^(0,-i))
          + sum_{l<n} (T-t)/M^(n-l) sum_i [ f(R, Y_R, U_l(R, Y_R))
                                            - 1_{l>0} f(R, Y_R, U_{l-1}(R, Y_R)) ]

with R uniform on [t, T], every path and every recursive estimator an
independent copy, and U_0 = 0.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import CostLedger
from .levy import LevyMeasure
from .randomness import StreamKey, child, uniform01
from .sde import CoefficientSet, EulerConfig, simulate

# children of a sample node (level tag, sample index)
PATH, TIME, RECURSION = 0, 1, 2

MAX_SAMPLES = 2**31


@dataclass(frozen=True)
class AssumptionConstants:
    """Constants of the regularity assumptions; metadata for bound checks only."""

    L: float = 1.0
    p: float = 0.0
    q: float = 1.0
    K: float = 1.0


@dataclass(frozen=True)
class PIDEProblem:
    coeffs: CoefficientSet
    measure: LevyMeasure
    f: Callable  # f(t, x, v) -> float
    g: Callable  # g(x) -> float
    d: int
    T: float
    constants: AssumptionConstants = field(default_factory=AssumptionConstants)
    name: str = "custom"


@dataclass(frozen=True)
class MLPConfig:
    n: int
    M: int
    euler: EulerConfig = field(default_factory=EulerConfig)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"level n must be nonnegative, got {self.n}")
        if self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if self.M**self.n > MAX_SAMPLES:
            raise ValueError(f"M^n = {self.M}^{self.n} exceeds 2^31 samples")


@dataclass
class RunStats:
    avg_sol: float
    std_dev: float
    avg_time_s: float
    avg_evals: float
    ledger: CostLedger = field(default_factory=CostLedger, repr=False)
    estimates: list[float] = field(default_factory=list, repr=False)


def sample_eval_time(t: float, T: float, key: StreamKey, counter: int = 0) -> float:
    if t > T:
        raise ValueError(f"t={t} exceeds T={T}")
    return t + (T - t) * uniform01(key, counter)


def _terminal_sample(problem, t, x, cfg, key, i):
    led = CostLedger()
    path_key = child(child(child(key, 0), -i), PATH)
    y = simulate(t, x, problem.T, problem.T, problem.coeffs, problem.measure,
                 cfg.euler, path_key, led)
    led.add(g_evals=1)
    return float(problem.g(y.state)), led


def _level_sample(problem, t, x, cfg, key, l, i):
    """One summand of level l: f at U_l minus f at U_{l-1}, on a shared (R, Y_R)."""
    led = CostLedger()
    node = child(child(key, l), i)
    r = sample_eval_time(t, problem.T, child(node, TIME))
    led.add(scalar_rvs=1)
    y = simulate(t, x, r, problem.T, problem.coeffs, problem.measure, cfg.euler,
                 child(node, PATH), led)
    led.note_path(led.path_work)
    upper = _estimate(problem, r, y.state, l, cfg, child(node, RECURSION), led)
    value = problem.f(r, y.state, upper)
    led.add(f_evals=1)
    if l > 0:
        lower_key = child(child(child(key, -l), i), RECURSION)
        lower = _estimate(problem, r, y.state, l - 1, cfg, lower_key, led)
        value -= problem.f(r, y.state, lower)
        led.add(f_evals=1)
    return float(value), led


def _estimate(problem, t, x, n, cfg, key, ledger, executor=None):
    if n == 0:
        return 0.0
    M = cfg.M
    horizon = problem.T - t

    def run(tasks):
        if executor is None:
            return [fn(*args) for fn, *args in tasks]
        futures = [executor.submit(fn, *args) for fn, *args in tasks]
        return [fut.result() for fut in futures]

    terminal = run([(_terminal_sample, problem, t, x, cfg, key, i)
                    for i in range(1, M**n + 1)])
    for _, led in terminal:
        ledger.merge_in(led)
    u = math.fsum(v for v, _ in terminal) / M**n

    for l in range(n):
        m = M ** (n - l)
        samples = run([(_level_sample, problem, t, x, cfg, key, l, i)
                       for i in range(1, m + 1)])
        for _, led in samples:
            ledger.merge_in(led)
        u += horizon / m * math.fsum(v for v, _ in samples)
    return u


def mlp_estimate(
    problem: PIDEProblem,
    t: float,
    x,
    cfg: MLPConfig,
    key: StreamKey,
    ledger: CostLedger,
    executor: Executor | None = None,
) -> float:
    """One realization of the level-``cfg.n`` estimator at (t, x).

    With an ``executor`` the top-level samples are evaluated concurrently;
    the result does not depend on scheduling.
    """
    if not 0 <= t <= problem.T:
        raise ValueError(f"t={t} outside [0, {problem.T}]")
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.d,):
        raise ValueError(f"x must have shape ({problem.d},), got {x.shape}")
    return _estimate(problem, t, x, cfg.n, cfg, key, ledger, executor)


def run_key(seed: int, run: int) -> StreamKey:
    return child(StreamKey(seed), run)


def run_experiment(
    problem: PIDEProblem,
    cfg: MLPConfig,
    t: float,
    x,
    runs: int,
    seed: int,
    threads: int = 1,
) -> RunStats:
    """Repeat the estimator ``runs`` times on independent keys and summarize."""
    if runs < 1:
        raise ValueError(f"runs must be positive, got {runs}")

    def one(r, executor=None):
        led = CostLedger()
        start = time.perf_counter()
        value = mlp_estimate(problem, t, x, cfg, run_key(seed, r), led, executor)
        return value, time.perf_counter() - start, led

    if threads > 1 and runs > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(runs)))
    elif threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = [one(0, pool)]
    else:
        results = [one(r) for r in range(runs)]

    values = np.array([v for v, _, _ in results])
    total = CostLedger()
    for _, _, led in results:
        total.merge_in(led)
    return RunStats(
        avg_sol=math.fsum(values) / runs,
        std_dev=float(values.std(ddof=1)) if runs > 1 else 0.0,
        avg_time_s=math.fsum(dt for _, dt, _ in results) / runs,
        avg_evals=total.total / runs,
        ledger=total,
        estimates=values.tolist(),
    )
