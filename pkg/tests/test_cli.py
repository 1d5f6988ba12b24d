import json
import subprocess
import sys

import pytest

from mlp_pide.cli import (
    CSV_HEADER,
    ConfigError,
    ExperimentConfig,
    format_csv,
    main,
    parse_config_text,
    read_csv,
    run_grid,
)


def small(**kw):
    base = dict(dims=[1], levels=[(1, 1)], runs=2, N=4, mc_comp=60, seed=5, timing=False)
    base.update(kw)
    return ExperimentConfig(**base)


def test_defaults_follow_experiment_design():
    cfg = ExperimentConfig()
    assert (cfg.N, cfg.delta, cfg.mc_comp, cfg.runs) == (12, 0.1, 200, 10)
    assert cfg.levels == [(k, k) for k in range(1, 6)]
    assert cfg.params.T == 0.5 and cfg.params.x0 == 100.0


def test_parse_config_text():
    cfg = parse_config_text(
        """
        # experiment
        problem = linear-probe
        dim = 1, 10
        levels = 1,2,3:2
        steps = 8
        delta = 0.2
        mc_comp = 30
        runs = 4
        seed = 99
        x = 120
        alpha = 0.02
        lambda = 0.7
        warn-only = yes
        """
    )
    assert cfg.problem == "linear-probe"
    assert cfg.dims == [1, 10]
    assert cfg.levels == [(1, 1), (2, 2), (3, 2)]
    assert (cfg.N, cfg.delta, cfg.mc_comp, cfg.runs, cfg.seed) == (8, 0.2, 30, 4, 99)
    assert cfg.x == [120.0] and cfg.initial_state(3) == [120.0] * 3
    assert cfg.params.alpha == 0.02 and cfg.params.lam == 0.7
    assert cfg.warn_only


@pytest.mark.parametrize("text", ["bogus = 1", "runs", "runs = many"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("changes", [
    dict(problem="nope"), dict(dims=[0]), dict(runs=0), dict(levels=[(1, 0)]),
    dict(x=[1.0, 2.0], dims=[3]), dict(delta=1.5), dict(t=2.0), dict(format="xml"),
])
def test_validation_messages(changes):
    with pytest.raises(ConfigError):
        small(**changes).validate()


def test_grid_single_cell_linear_probe():
    cells = run_grid(small(problem="linear-probe", runs=1))
    assert len(cells) == 1 and cells[0].stats.std_dev == 0.0


def test_grid_shape_and_columns():
    cells = run_grid(small(levels=[(1, 1), (2, 2)]))
    assert [(c.d, c.n, c.M) for c in cells] == [(1, 1, 1), (1, 2, 2)]
    text = format_csv(cells)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    rows = read_csv(text)
    for row, cell in zip(rows, cells):
        assert row["avg_sol"] == cell.stats.avg_sol
        assert row["std_dev"] == cell.stats.std_dev
        assert row["avg_evals"] == cell.stats.avg_evals


def test_compensator_gate():
    cfg = small(mc_comp=10)
    with pytest.raises(ConfigError, match="warn-only"):
        run_grid(cfg)
    cfg.warn_only = True
    with pytest.warns(UserWarning):
        assert len(run_grid(cfg)) == 1


def test_main_csv_to_file(tmp_path):
    out = tmp_path / "t.csv"
    rc = main(["run", "--dim", "1", "--levels", "1,2", "--runs", "2", "--steps", "4",
               "--mc-comp", "60", "--seed", "3", "--out", str(out), "--no-timing"])
    assert rc == 0
    rows = read_csv(out.read_text())
    assert len(rows) == 2 and all(r["avg_time_s"] == 0.0 for r in rows)


def test_main_json_stdout(capsys):
    rc = main(["run", "--dim", "2", "--levels", "1", "--runs", "2", "--steps", "4",
               "--mc-comp", "60", "--format", "json", "--problem", "linear-probe", "--x", "120"])
    assert rc == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["d"] == 2 and set(rows[0]) == set(CSV_HEADER)
    assert rows[0]["avg_time_s"] > 0


def test_main_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("dim = 1\nlevels = 1\nruns = 3\nsteps = 4\nmc_comp = 60\n")
    assert main(["run", "--config", str(cfg), "--runs", "1"]) == 0
    rows = read_csv(capsys.readouterr().out)
    assert rows[0]["runs"] == 1


def test_main_errors(capsys):
    assert main(["run", "--dim", "1", "--mc-comp", "5", "--levels", "1", "--runs", "1"]) != 0
    assert "warn-only" in capsys.readouterr().err
    assert main(["run", "--dim", "0"]) != 0
    assert main(["run", "--config", "/nonexistent/file"]) != 0


def test_bound_subcommand(capsys):
    assert main(["bound", "--n", "2", "--M", "1"]) == 0
    out = capsys.readouterr().out
    assert "recursion_cost=10" in out and "closed_bound=1492992" in out


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "mlp_pide", "run", "--dim", "1", "--levels", "1", "--runs", "1",
         "--steps", "2", "--mc-comp", "60", "--no-timing"],
        capture_output=True, text=True, check=True,
    )
    assert res.stdout.startswith("d,n,M,N,delta")


def test_reproducible_csv():
    a = format_csv(run_grid(small(levels=[(2, 2)], threads=1)), timing=False)
    b = format_csv(run_grid(small(levels=[(2, 2)], threads=3)), timing=False)
    assert a == b
