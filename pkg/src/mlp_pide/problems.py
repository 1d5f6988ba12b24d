"""Shipped problems: counterparty-risk pricing under a Vasicek jump model.

Dynamics (per coordinate, compensated form)::

    dX = alpha (mu0 - X) dt + sigma0 dW + int z 1_[0,1]^d(z) (pi - nu)(dz, dt),
    nu(dz) = lambda 1_[0,1]^d(z) dz.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .levy import UniformCubeMeasure
from .mlp import AssumptionConstants, PIDEProblem
from .sde import CoefficientSet


@dataclass(frozen=True)
class VasicekJumpParams:
    alpha: float = 0.01
    mu0: float = 100.0
    sigma0: float = 2.0
    lam: float = 0.5
    beta: float = 0.03
    K1: float = 80.0
    K2: float = 100.0
    L0: float = 5.0
    d: int = 1
    T: float = 0.5
    x0: float = 100.0

    def __post_init__(self):
        if self.alpha <= 0 or self.sigma0 <= 0 or self.lam <= 0:
            raise ValueError("alpha, sigma0 and lambda must be positive")
        if not self.K1 < self.K2:
            raise ValueError(f"need K1 < K2, got K1={self.K1}, K2={self.K2}")
        if self.d < 1:
            raise ValueError(f"invalid dimension d={self.d}")
        if self.T <= 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")

    def with_(self, **changes) -> "VasicekJumpParams":
        return replace(self, **changes)

    @property
    def initial_state(self) -> np.ndarray:
        return np.full(self.d, float(self.x0))


def vasicek_coefficients(params: VasicekJumpParams) -> CoefficientSet:
    alpha, mu0, sigma0 = params.alpha, params.mu0, params.sigma0

    def mu(t, x):
        return alpha * (mu0 - x)

    def sigma(t, x):
        # sigma0 * I_d, applied as a scalar
        return sigma0

    def eta(t, x, z):
        inside = (z.min(axis=-1) >= 0.0) & (z.max(axis=-1) <= 1.0)
        return z * inside[..., None]

    return CoefficientSet(mu=mu, sigma=sigma, eta=eta)


def payoff(params: VasicekJumpParams, x) -> float:
    m = float(np.min(x))
    return max(m - params.K1, 0.0) - max(m - params.K2, 0.0) - params.L0


def _constants(params: VasicekJumpParams) -> AssumptionConstants:
    # K = lambda, p = 0 as declared for this model; the small-jump moment
    # lambda * int_{|z|<delta, z in cube} |z|^2 dz is O(delta^(d+2)) <= O(delta^3)
    L = max(params.alpha**2, params.beta**2, params.T)
    return AssumptionConstants(L=L, p=0.0, q=3.0, K=params.lam)


def vasicek_problem(params: VasicekJumpParams) -> PIDEProblem:
    beta = params.beta

    def f(t, x, v):
        return -beta * min(v, 0.0)

    def g(x):
        return payoff(params, x)

    return PIDEProblem(
        coeffs=vasicek_coefficients(params),
        measure=UniformCubeMeasure(params.d, params.lam),
        f=f,
        g=g,
        d=params.d,
        T=params.T,
        constants=_constants(params),
        name="vasicek-jump",
    )


def linear_probe_problem(params: VasicekJumpParams) -> PIDEProblem:
    """f = 0, g(x) = sum(x) under the same dynamics; solvable in closed form."""

    def f(t, x, v):
        return 0.0

    def g(x):
        return math.fsum(x)

    return PIDEProblem(
        coeffs=vasicek_coefficients(params),
        measure=UniformCubeMeasure(params.d, params.lam),
        f=f,
        g=g,
        d=params.d,
        T=params.T,
        constants=_constants(params),
        name="linear-probe",
    )


def linear_probe_solution(params: VasicekJumpParams, t: float, x) -> float:
    """sum_i mu0 + (x_i - mu0) exp(-alpha (T - t)); compensated jumps have mean zero."""
    x = np.asarray(x, dtype=float)
    decay = math.exp(-params.alpha * (params.T - t))
    return math.fsum(params.mu0 + (x - params.mu0) * decay)


PROBLEMS = {
    "vasicek-jump": vasicek_problem,
    "linear-probe": linear_probe_problem,
}


def make_problem(name: str, params: VasicekJumpParams) -> PIDEProblem:
    try:
        return PROBLEMS[name](params)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; known: {sorted(PROBLEMS)}") from None
