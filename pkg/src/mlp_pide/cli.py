"""Experiment harness: grids of dimensions and levels, CSV/JSON tables.

Configuration comes from an optional ``key = value`` file, overridden by
command-line flags::

    mlp-pide run --problem vasicek-jump --dim 1,10 --levels 1,2,3 --runs 10
    mlp-pide run --config experiment.cfg --format json --out table.json
    mlp-pide bound --n 3 --M 3 --e 1 --g 1 --f 1
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass, field, fields

from .cost import closed_bound, recursion_cost
from .mlp import MLPConfig, RunStats, run_experiment
from .problems import PROBLEMS, VasicekJumpParams, make_problem
from .sde import EulerConfig, SampleAbort

log = logging.getLogger("mlp_pide")

CSV_HEADER = (
    "d", "n", "M", "N", "delta", "mc_comp", "runs",
    "avg_sol", "std_dev", "avg_time_s", "avg_evals",
)


class ConfigError(ValueError):
    pass


def _int_list(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(" ", "").split(",") if v]


def _levels(text) -> list[tuple[int, int]]:
    """'1,2,3' gives n = M pairs; 'n:M' items set them separately."""
    if isinstance(text, (list, tuple)):
        return [tuple(v) if isinstance(v, (list, tuple)) else (int(v), int(v)) for v in text]
    out = []
    for item in str(text).replace(" ", "").split(","):
        if not item:
            continue
        if ":" in item:
            n, M = item.split(":")
            out.append((int(n), int(M)))
        else:
            out.append((int(item), int(item)))
    return out


@dataclass
class ExperimentConfig:
    problem: str = "vasicek-jump"
    params: VasicekJumpParams = field(default_factory=VasicekJumpParams)
    t: float = 0.0
    x: list[float] | None = None  # None broadcasts params.x0
    dims: list[int] = field(default_factory=lambda: [1])
    levels: list[tuple[int, int]] = field(default_factory=lambda: [(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)])
    N: int = 12
    delta: float = 0.1
    mc_comp: int = 200
    runs: int = 10
    seed: int = 0
    format: str = "csv"
    threads: int = 1
    warn_only: bool = False
    timing: bool = True

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if not self.dims or any(d < 1 for d in self.dims):
            raise ConfigError(f"dimensions must be positive integers, got {self.dims}")
        if not self.levels:
            raise ConfigError("at least one level is required")
        for n, M in self.levels:
            if n < 0 or M < 1:
                raise ConfigError(f"invalid level n={n}, M={M}: need n >= 0 and M >= 1")
        if self.runs < 1:
            raise ConfigError(f"runs must be positive, got {self.runs}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        if not 0 <= self.t <= self.params.T:
            raise ConfigError(f"t={self.t} must lie in [0, T={self.params.T}]")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.x is not None and len(self.x) != 1:
            bad = [d for d in self.dims if d != len(self.x)]
            if bad:
                raise ConfigError(
                    f"x has length {len(self.x)} but the grid includes dimensions {bad}; "
                    "give one value to broadcast or one per coordinate"
                )
        try:
            EulerConfig(self.N, self.delta, self.mc_comp)
            for n, M in self.levels:
                MLPConfig(n, M)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def initial_state(self, d: int) -> list[float]:
        if self.x is None:
            return [self.params.x0] * d
        if len(self.x) == 1:
            return list(self.x) * d
        return list(self.x)


_PARAM_KEYS = {f.name for f in fields(VasicekJumpParams)} - {"d"}
_ALIASES = {
    "dim": "dims", "dims": "dims", "levels": "levels", "steps": "N", "n_steps": "N",
    "mc-comp": "mc_comp", "mc_comp": "mc_comp", "lambda": "lam", "warn-only": "warn_only",
}


def _coerce(key: str, value: str, cfg: ExperimentConfig) -> None:
    key = _ALIASES.get(key, key).replace("-", "_")
    if key in _PARAM_KEYS:
        cfg.params = cfg.params.with_(**{key: float(value)})
    elif key == "dims":
        cfg.dims = _int_list(value)
    elif key == "levels":
        cfg.levels = _levels(value)
    elif key == "x":
        cfg.x = [float(v) for v in str(value).split(",") if v.strip()]
    elif key in ("N", "mc_comp", "runs", "seed", "threads"):
        setattr(cfg, key, int(value))
    elif key in ("t", "delta"):
        setattr(cfg, key, float(value))
    elif key in ("problem", "format"):
        setattr(cfg, key, str(value).strip())
    elif key in ("warn_only", "timing"):
        setattr(cfg, key, str(value).strip().lower() in ("1", "true", "yes", "on"))
    else:
        raise ConfigError(f"unknown configuration key {key!r}")


def parse_config_text(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            _coerce(key, value, cfg)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    return cfg


@dataclass
class GridCell:
    d: int
    n: int
    M: int
    N: int
    delta: float
    mc_comp: int
    runs: int
    stats: RunStats

    def row(self, timing: bool = True) -> dict:
        return {
            "d": self.d, "n": self.n, "M": self.M, "N": self.N,
            "delta": self.delta, "mc_comp": self.mc_comp, "runs": self.runs,
            "avg_sol": self.stats.avg_sol,
            "std_dev": self.stats.std_dev,
            "avg_time_s": self.stats.avg_time_s if timing else 0.0,
            "avg_evals": self.stats.avg_evals,
        }


def run_grid(cfg: ExperimentConfig) -> list[GridCell]:
    """One RunStats cell per (dimension, level), in grid order."""
    cfg.validate()
    euler = EulerConfig(cfg.N, cfg.delta, cfg.mc_comp)
    cells = []
    for d in cfg.dims:
        params = cfg.params.with_(d=d)
        problem = make_problem(cfg.problem, params)
        c = problem.constants
        floor = euler.compensator_floor(c.K, d, c.p)
        if cfg.mc_comp < floor:
            if not cfg.warn_only:
                raise ConfigError(
                    f"mc_comp={cfg.mc_comp} is below delta^-2 K d^p = {floor:.6g} at d={d}; "
                    "raise --mc-comp or pass --warn-only"
                )
            euler.check_compensator(c.K, d, c.p)
        x = cfg.initial_state(d)
        for n, M in cfg.levels:
            log.info("d=%d n=%d M=%d", d, n, M)
            stats = run_experiment(
                problem, MLPConfig(n, M, euler), cfg.t, x, cfg.runs, cfg.seed, cfg.threads
            )
            cells.append(GridCell(d, n, M, cfg.N, cfg.delta, cfg.mc_comp, cfg.runs, stats))
    return cells


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_csv(cells: list[GridCell], timing: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for cell in cells:
        row = cell.row(timing)
        writer.writerow([_fmt(row[k]) for k in CSV_HEADER])
    return buf.getvalue()


def format_json(cells: list[GridCell], timing: bool = True) -> str:
    return json.dumps([cell.row(timing) for cell in cells], indent=2) + "\n"


def read_csv(text: str) -> list[dict]:
    """Parse a table written by :func:`format_csv` back into typed rows."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append({
            k: (int(v) if k in ("d", "n", "M", "N", "mc_comp", "runs") else float(v))
            for k, v in rec.items()
        })
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlp-pide", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and print a results table")
    run.add_argument("--config", help="key = value configuration file")
    run.add_argument("--problem", choices=sorted(PROBLEMS))
    run.add_argument("--dim", help="comma-separated dimensions, e.g. 1,10,100")
    run.add_argument("--levels", help="comma-separated levels (n = M) or n:M pairs")
    run.add_argument("--runs", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--steps", type=int, dest="N", help="time steps N")
    run.add_argument("--delta", type=float, help="jump truncation level")
    run.add_argument("--mc-comp", type=int, dest="mc_comp", help="compensator samples per step")
    run.add_argument("--t", type=float, help="evaluation time")
    run.add_argument("--x", help="initial state: one value to broadcast or d values")
    run.add_argument("--threads", type=int)
    run.add_argument("--out", help="output file (default: standard output)")
    run.add_argument("--format", choices=("csv", "json"))
    run.add_argument("--warn-only", action="store_true", default=None,
                     help="only warn when mc_comp < delta^-2 K d^p")
    run.add_argument("--no-timing", action="store_false", dest="timing", default=None,
                     help="write avg_time_s as 0 so tables are reproducible byte for byte")
    run.add_argument("-v", "--verbose", action="store_true")

    bound = sub.add_parser("bound", help="evaluate the cost recursion and closed bound")
    bound.add_argument("--n", type=int, required=True)
    bound.add_argument("--M", type=int, required=True)
    bound.add_argument("--e", type=int, default=1)
    bound.add_argument("--g", type=int, default=1)
    bound.add_argument("--f", type=int, default=1)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            cfg = parse_config_text(fh.read(), cfg)
    overrides = {
        "problem": args.problem, "dims": args.dim, "levels": args.levels,
        "runs": args.runs, "seed": args.seed, "N": args.N, "delta": args.delta,
        "mc_comp": args.mc_comp, "t": args.t, "x": args.x, "threads": args.threads,
        "format": args.format, "warn_only": args.warn_only, "timing": args.timing,
    }
    for key, value in overrides.items():
        if value is not None:
            _coerce(key, str(value), cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bound":
        rec = recursion_cost(args.n, args.M, args.e, args.g, args.f)
        print(f"recursion_cost={rec}")
        if args.n >= 1:
            print(f"closed_bound={closed_bound(args.n, args.e, args.g, args.f)}")
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        cfg = config_from_args(args)
        cells = run_grid(cfg)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SampleAbort as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3
    text = (format_csv if cfg.format == "csv" else format_json)(cells, cfg.timing)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
