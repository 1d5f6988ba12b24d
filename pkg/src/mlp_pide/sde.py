"""Euler scheme for jump SDEs with truncated jumps and a Monte Carlo compensator.

On each step of the grid ``t + k (T - t) / N`` the state moves by

    mu dt + sigma sqrt(dt) W + sum_j eta(Z_j) - dt nu(A_delta) / Mc * sum_j eta(V_j)

with coefficients frozen at the left grid time, ``P ~ Poisson(nu(A_delta) dt)``
jump marks ``Z`` and ``Mc`` compensator marks ``V`` drawn from nu_delta.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cost import CostLedger
from .levy import LevyMeasure
from .randomness import StreamKey, child, normals, poisson_array

# children of a path (or step) key, one per source of randomness
BROWNIAN, JUMP_COUNT, JUMP_MARKS, COMP_MARKS = 0, 1, 2, 3


class SampleAbort(FloatingPointError):
    """A simulated state became NaN or infinite."""


@dataclass(frozen=True)
class CoefficientSet:
    """Drift, diffusion and jump amplitude of the SDE.

    All three take batched states ``x`` of shape ``(..., d)``. ``sigma`` may
    return a scalar or a ``(..., d)`` array, both acting as a diagonal, or a
    full ``(..., d, d)`` matrix. ``eta(t, x, z)`` broadcasts ``x`` against
    marks ``z`` of shape ``(..., m, d)``.
    """

    mu: Callable
    sigma: Callable
    eta: Callable


@dataclass(frozen=True)
class EulerConfig:
    N: int = 12
    delta: float = 0.1
    mc_comp: int = 200

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.mc_comp < 1:
            raise ValueError(f"mc_comp must be a positive integer, got {self.mc_comp}")

    def compensator_floor(self, K: float, d: int, p: float) -> float:
        return self.delta**-2 * K * d**p

    def check_compensator(self, K: float, d: int, p: float) -> bool:
        """Warn when mc_comp is below delta^-2 K d^p; return whether it is met."""
        floor = self.compensator_floor(K, d, p)
        if self.mc_comp < floor:
            warnings.warn(
                f"mc_comp={self.mc_comp} is below delta^-2 K d^p = {floor:.6g}; "
                "the error bound of the scheme does not apply",
                stacklevel=2,
            )
            return False
        return True


@dataclass(frozen=True)
class PathEndpoint:
    time: float
    state: np.ndarray


def grid_time(t: float, T: float, N: int, s: float) -> float:
    """Left grid point of ``s`` on the uniform N-step grid of [t, T]."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    if not t <= s <= T:
        raise ValueError(f"s={s} outside [{t}, {T}]")
    if T == t:
        return t
    h = (T - t) / N
    return t + math.floor(N * (s - t) / (T - t)) * h


def apply_sigma(sig, dw: np.ndarray) -> np.ndarray:
    sig = np.asarray(sig)
    if sig.ndim >= 2 and sig.shape[-2:] == (dw.shape[-1], dw.shape[-1]):
        return np.einsum("...ij,...j->...i", sig, dw)
    return sig * dw


def euler_increment(
    t: float,
    x: np.ndarray,
    dt: float,
    coeffs: CoefficientSet,
    nu_mass: float,
    dw: np.ndarray,
    jump_marks: np.ndarray | None = None,
    comp_marks: np.ndarray | None = None,
    *,
    jump_mask: np.ndarray | None = None,
    comp_exact: np.ndarray | None = None,
    ledger: CostLedger | None = None,
) -> np.ndarray:
    """One Euler step from supplied randomness.

    ``dw`` is a standard normal vector (scaled by ``sqrt(dt)`` here).
    ``jump_marks`` has shape ``(..., P, d)``; an optional boolean
    ``jump_mask`` of shape ``(..., P)`` switches marks off, which lets
    batched callers pad ragged jump counts. The compensator is either the
    Monte Carlo average over ``comp_marks`` or the supplied integral
    ``comp_exact`` of eta against nu over A_delta.
    """
    x = np.asarray(x, dtype=float)
    drift = np.asarray(coeffs.mu(t, x))
    out = x + drift * dt + apply_sigma(coeffs.sigma(t, x), dw) * math.sqrt(dt)
    n_eta = 0
    xb = x[..., None, :]
    if jump_marks is not None and jump_marks.shape[-2] > 0:
        amp = coeffs.eta(t, xb, jump_marks)
        if jump_mask is not None:
            amp = amp * jump_mask[..., None]
            n_eta += int(np.count_nonzero(jump_mask))
        else:
            n_eta += math.prod(jump_marks.shape[:-1])
        out = out + amp.sum(axis=-2)
    if comp_exact is not None:
        out = out - dt * np.asarray(comp_exact)
    elif comp_marks is not None and comp_marks.shape[-2] > 0:
        mc = comp_marks.shape[-2]
        amp = coeffs.eta(t, xb, comp_marks)
        n_eta += math.prod(comp_marks.shape[:-1])
        out = out - (dt * nu_mass / mc) * amp.sum(axis=-2)
    if ledger is not None:
        batch = math.prod(x.shape[:-1])
        ledger.add(mu_evals=batch, sigma_evals=batch, eta_evals=n_eta)
    return out


def _check_finite(state: np.ndarray, time: float) -> None:
    if not np.all(np.isfinite(state)):
        raise SampleAbort(f"non-finite state at time {time}: {state}")


def euler_step(
    state: np.ndarray,
    eval_time: float,
    dt: float,
    coeffs: CoefficientSet,
    measure: LevyMeasure,
    cfg: EulerConfig,
    key: StreamKey,
    ledger: CostLedger,
    *,
    jump_count: int | None = None,
    comp_marks: np.ndarray | None = None,
) -> np.ndarray:
    """Advance ``state`` by one step of length ``dt`` using randomness from ``key``.

    ``jump_count`` and ``comp_marks`` override the corresponding draws.
    """
    if dt <= 0:
        raise ValueError(f"step length must be positive, got {dt}")
    state = np.asarray(state, dtype=float)
    _check_finite(state, eval_time)
    d = state.shape[-1]
    nu_mass = measure.mass_above(cfg.delta)
    draws = d
    dw = normals(child(key, BROWNIAN), 0, d)
    if jump_count is None:
        jump_count = int(poisson_array(child(key, JUMP_COUNT), [nu_mass * dt])[0])
        draws += 1
    jumps = np.empty((0, d))
    if jump_count > 0:
        jumps, used = measure.sample_marks(cfg.delta, child(key, JUMP_MARKS), jump_count)
        draws += used
    if comp_marks is None:
        if nu_mass > 0:
            comp_marks, used = measure.sample_marks(
                cfg.delta, child(key, COMP_MARKS), cfg.mc_comp
            )
            draws += used
    else:
        comp_marks = np.asarray(comp_marks, dtype=float).reshape(-1, d)
    out = euler_increment(
        eval_time, state, dt, coeffs, nu_mass, dw, jumps, comp_marks, ledger=ledger
    )
    ledger.add(scalar_rvs=draws)
    _check_finite(out, eval_time + dt)
    return out


def step_schedule(t: float, s: float, T: float, N: int) -> list[tuple[float, float]]:
    """(grid time, step length) pairs that carry a path from t to s.

    Full steps of length (T - t)/N, then one partial step when s is off-grid.
    """
    if not t <= s <= T:
        raise ValueError(f"s={s} outside [{t}, {T}]")
    if s == t:
        return []
    h = (T - t) / N
    k = min(math.floor(N * (s - t) / (T - t)), N)
    steps = [(t + j * h, h) for j in range(k)]
    rest = s - (t + k * h)
    if k < N and rest > 0:
        steps.append((t + k * h, rest))
    return steps


def simulate(
    t: float,
    x,
    s: float,
    T: float,
    coeffs: CoefficientSet,
    measure: LevyMeasure,
    cfg: EulerConfig,
    key: StreamKey,
    ledger: CostLedger,
) -> PathEndpoint:
    """Euler path from (t, x) evaluated at time s.

    Randomness for the whole path is drawn up front from four children of
    ``key``: step j uses normal vector j, Poisson draw j, the next jump
    marks in order, and compensator marks ``j*Mc .. (j+1)*Mc - 1``.
    """
    x = np.array(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a vector")
    steps = step_schedule(t, s, T, cfg.N)
    if not steps:
        return PathEndpoint(t, x)
    _check_finite(x, t)
    d = x.shape[0]
    n_steps = len(steps)
    nu_mass = measure.mass_above(cfg.delta)
    dts = np.array([dt for _, dt in steps])

    dw = normals(child(key, BROWNIAN), 0, n_steps * d).reshape(n_steps, d)
    counts = poisson_array(child(key, JUMP_COUNT), nu_mass * dts)
    draws = n_steps * d + n_steps
    n_jumps = int(counts.sum())
    jumps = np.empty((0, d))
    if n_jumps:
        jumps, used = measure.sample_marks(cfg.delta, child(key, JUMP_MARKS), n_jumps)
        draws += used
    comp = None
    if nu_mass > 0:
        comp, used = measure.sample_marks(
            cfg.delta, child(key, COMP_MARKS), n_steps * cfg.mc_comp
        )
        comp = comp.reshape(n_steps, cfg.mc_comp, d)
        draws += used

    local = CostLedger()
    offsets = np.concatenate(([0], np.cumsum(counts)))
    state = x
    for j, (tk, dt) in enumerate(steps):
        state = euler_increment(
            tk,
            state,
            dt,
            coeffs,
            nu_mass,
            dw[j],
            jumps[offsets[j] : offsets[j + 1]],
            None if comp is None else comp[j],
            ledger=local,
        )
    _check_finite(state, s)
    local.add(scalar_rvs=draws)
    ledger.merge_in(local)
    ledger.note_path(local.path_work)
    return PathEndpoint(s, state)
