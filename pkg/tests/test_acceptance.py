"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion k: PASS|FAIL ...`` line; the lines are
also collected into the terminal summary. Run with::

    pytest tests/test_acceptance.py -s
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from coupling import Scheme, coupled_endpoints, loglog_slope, mse
from mlp_pide.cli import CSV_HEADER, ExperimentConfig, format_csv, main, read_csv, run_grid
from mlp_pide.cost import CostLedger, closed_bound, recursion_cost
from mlp_pide.levy import UniformCubeMeasure
from mlp_pide.mlp import MLPConfig, PIDEProblem, mlp_estimate, run_experiment
from mlp_pide.problems import (
    VasicekJumpParams,
    linear_probe_problem,
    linear_probe_solution,
    vasicek_coefficients,
    vasicek_problem,
)
from mlp_pide.randomness import StreamKey, child, poisson_array, uniforms
from mlp_pide.sde import EulerConfig


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def few_inversions(seq, allowed=1):
    return sum(b > a for a, b in zip(seq, seq[1:])) <= allowed


def test_criterion_1_recursion_identities():
    t0 = time.perf_counter()
    params = VasicekJumpParams(d=1)
    base = vasicek_problem(params)
    euler = EulerConfig(N=12, delta=0.1, mc_comp=200)

    def toy(f, g):
        return PIDEProblem(base.coeffs, base.measure, f, g, 1, params.T, base.constants)

    worst = 0.0
    zero = mlp_estimate(base, 0.0, [100.0], MLPConfig(0, 3, euler), StreamKey(1), CostLedger())
    ok = zero == 0.0
    for n in (1, 2, 3):
        for M in (1, 2, 3):
            key = StreamKey(100 + 10 * n + M)
            c = mlp_estimate(toy(lambda t, x, v: 0.0, lambda x: 1.75), 0.0, [100.0],
                             MLPConfig(n, M, euler), key, CostLedger())
            a = mlp_estimate(toy(lambda t, x, v: 0.6, lambda x: 0.0), 0.1, [100.0],
                             MLPConfig(n, M, euler), key, CostLedger())
            worst = max(worst, abs(c - 1.75), abs(a - 0.6 * 0.4))
    ok = ok and worst <= 1e-12
    report(1, ok, f"max abs deviation {worst:.2e} (tol 1e-12), {time.perf_counter() - t0:.2f}s")


@pytest.mark.parametrize("d", [1, 10])
def test_criterion_2_linear_probe(d):
    params = VasicekJumpParams(d=d)
    x = [120.0] * d
    cfg = MLPConfig(4, 4, EulerConfig(N=12, delta=0.1, mc_comp=200))
    out = run_experiment(linear_probe_problem(params), cfg, 0.0, x, runs=10, seed=2024, threads=4)
    exact = linear_probe_solution(params, 0.0, x)
    tol = 3 * out.std_dev / math.sqrt(10) + 0.05 * d
    err = abs(out.avg_sol - exact)
    report(2, err <= tol, f"d={d} avg={out.avg_sol:.6f} exact={exact:.6f} |err|={err:.4g} tol={tol:.4g}")


def test_criterion_3_euler_rate():
    params = VasicekJumpParams(d=1)
    m = UniformCubeMeasure(1, params.lam)
    ref = Scheme(4096)  # exact compensator at the reference resolution
    coarse = [Scheme(N, 200) for N in (8, 32, 128)]
    out = coupled_endpoints(vasicek_coefficients(params), m, 100.0, params.T, coarse + [ref],
                            10**4, 4096, 33)
    errs = [mse(out[s], out[ref]) for s in coarse]
    slope = loglog_slope([8, 32, 128], errs)
    ok = -1.3 <= slope <= -0.7
    report(3, ok, f"MSE {['%.3e' % e for e in errs]} slope={slope:.3f} (range [-1.3, -0.7])")


def test_criterion_4_compensator_rate():
    params = VasicekJumpParams(d=1)
    m = UniformCubeMeasure(1, params.lam)
    oracle = Scheme(64)
    mc = [Scheme(64, k) for k in (10, 40, 160)]
    out = coupled_endpoints(vasicek_coefficients(params), m, 100.0, params.T, mc + [oracle],
                            10**4, 64, 44)
    errs = [mse(out[s], out[oracle]) for s in mc]
    slope = loglog_slope([10, 40, 160], errs)
    ok = -1.3 <= slope <= -0.7
    report(4, ok, f"MSE {['%.3e' % e for e in errs]} slope={slope:.3f} (range [-1.3, -0.7])")


def test_criterion_5_samplers():
    n = 10**5
    z, _ = UniformCubeMeasure(1, 0.5).sample_marks(0.1, StreamKey(501), n)
    mark_ok = abs(z.mean() - 0.55) <= 0.008

    p = poisson_array(StreamKey(502), np.full(n, 4.5))
    mean_band = 3 * math.sqrt(4.5 / n)
    # Var of the sample variance for Poisson: (mu4 - sigma^4 (n-3)/(n-1)) / n, mu4 = lam + 3 lam^2
    var_band = 3 * math.sqrt((4.5 + 3 * 4.5**2 - 4.5**2 * (n - 3) / (n - 1)) / n)
    pois_ok = abs(p.mean() - 4.5) <= mean_band and abs(p.var(ddof=1) - 4.5) <= var_band

    u = uniforms(StreamKey(503), 0, n)
    ks_p = stats.kstest(u, "uniform").pvalue
    ks_ok = ks_p > 0.01

    parent = StreamKey(504)
    rho = np.corrcoef(uniforms(child(parent, 1), 0, n), uniforms(child(parent, 2), 0, n))[0, 1]
    rho_ok = abs(rho) < 0.02

    ok = mark_ok and pois_ok and ks_ok and rho_ok
    report(5, ok, f"mark mean={z.mean():.4f} poisson mean={p.mean():.4f} var={p.var(ddof=1):.4f} "
                  f"ks p={ks_p:.3f} rho={rho:+.4f}")


def test_criterion_6_cost_accounting():
    hand = [recursion_cost(1, 1, 1, 1, 1), recursion_cost(2, 1, 1, 1, 1),
            closed_bound(1, 1, 1, 1), closed_bound(2, 1, 1, 1)]
    hand_ok = hand == [4, 10, 2592, 1492992]

    params = VasicekJumpParams(d=1)
    problem = vasicek_problem(params)
    euler = EulerConfig(N=12, delta=0.1, mc_comp=200)
    measured, margins, ok = [], [], hand_ok
    worst_path = 0
    for k in range(1, 5):
        led = CostLedger()
        mlp_estimate(problem, 0.0, [100.0], MLPConfig(k, k, euler), StreamKey(600 + k), led)
        e = led.max_path_cost
        worst_path = max(worst_path, e)
        bound = recursion_cost(k, k, e, 1, 1)
        measured.append(led.total)
        margins.append(led.total / bound)
        ok = ok and led.total <= bound
    total_bound = closed_bound(3, worst_path, 1, 1)
    ok = ok and sum(measured) <= total_bound
    report(6, ok, f"hand values {hand}; measured/recursion {['%.3g' % r for r in margins]}; "
                  f"sum={sum(measured)} <= closed_bound(3)={total_bound}")


def test_criterion_7_level_behaviour():
    cfg = ExperimentConfig(dims=[10], levels=[(k, k) for k in range(1, 5)], runs=10, seed=7,
                           threads=4)
    cells = run_grid(cfg)
    std = [c.stats.std_dev for c in cells]
    avg = [c.stats.avg_sol for c in cells]
    diffs = [abs(b - a) for a, b in zip(avg, avg[1:])]
    rows = read_csv(format_csv(cells))
    schema_ok = list(rows[0]) == list(CSV_HEADER) and all(
        all(math.isfinite(r[k]) for k in ("avg_sol", "std_dev", "avg_time_s", "avg_evals"))
        for r in rows
    )
    ok = few_inversions(std) and few_inversions(diffs) and schema_ok and len(rows) == 4
    report(7, ok, f"avg={['%.5f' % a for a in avg]} std={['%.4g' % s for s in std]} "
                  f"|diff|={['%.4g' % x for x in diffs]}")


def test_criterion_8_thread_determinism(tmp_path):
    outputs = []
    for threads in (1, 4, 8):
        path = tmp_path / f"t{threads}.csv"
        rc = main(["run", "--dim", "1,3", "--levels", "1,2,3", "--runs", "8", "--seed", "88",
                   "--threads", str(threads), "--no-timing", "--out", str(path)])
        assert rc == 0
        outputs.append(path.read_bytes())
    ok = outputs[0] == outputs[1] == outputs[2]
    report(8, ok, f"CSV bytes identical at 1/4/8 threads ({len(outputs[0])} bytes)")


def test_criterion_9_scale_smoke():
    params = VasicekJumpParams(d=1000)
    cfg = MLPConfig(2, 2, EulerConfig(N=12, delta=0.1, mc_comp=200))
    t0 = time.perf_counter()
    with np.errstate(all="raise"):
        out = run_experiment(vasicek_problem(params), cfg, 0.0, params.initial_state, runs=3,
                             seed=9, threads=3)
    dt = time.perf_counter() - t0
    ok = math.isfinite(out.avg_sol) and all(math.isfinite(v) for v in out.estimates)
    report(9, ok, f"d=1000 avg={out.avg_sol:.5f} std={out.std_dev:.4g} "
                  f"evals/run={out.avg_evals:.4g} {dt:.1f}s")
