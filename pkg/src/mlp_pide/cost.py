"""Evaluation-cost accounting and the theoretical cost recursion/bound."""
from __future__ import annotations

from dataclasses import dataclass, fields
from functools import lru_cache

COUNTER_MAX = 2**64 - 1

ROLES = ("g_evals", "f_evals", "mu_evals", "sigma_evals", "eta_evals", "scalar_rvs")


class CounterOverflowError(OverflowError):
    pass


@dataclass
class CostLedger:
    """Counts of function evaluations and scalar random draws.

    ``max_path_cost`` is the largest path-simulation cost (coefficient
    evaluations plus scalar draws) seen by this ledger. Merging takes the
    maximum, so the merge stays a commutative monoid with the zero ledger
    as identity.
    """

    g_evals: int = 0
    f_evals: int = 0
    mu_evals: int = 0
    sigma_evals: int = 0
    eta_evals: int = 0
    scalar_rvs: int = 0
    max_path_cost: int = 0

    def add(self, **counts: int) -> None:
        for role, n in counts.items():
            if n < 0:
                raise ValueError(f"counters never decrease ({role} += {n})")
            value = getattr(self, role) + int(n)
            if value > COUNTER_MAX:
                raise CounterOverflowError(f"{role} counter overflow")
            setattr(self, role, value)

    def note_path(self, cost: int) -> None:
        if cost > self.max_path_cost:
            self.max_path_cost = int(cost)

    @property
    def path_work(self) -> int:
        """Randomness plus mu/sigma/eta evaluations (the per-path cost unit)."""
        return self.mu_evals + self.sigma_evals + self.eta_evals + self.scalar_rvs

    @property
    def total(self) -> int:
        return self.path_work + self.g_evals + self.f_evals

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "CostLedger":
        return CostLedger(**self.as_dict())

    def merge_in(self, other: "CostLedger") -> None:
        self.add(**{role: getattr(other, role) for role in ROLES})
        self.note_path(other.max_path_cost)

    def __add__(self, other: "CostLedger") -> "CostLedger":
        return merge(self, other)


def merge(a: CostLedger, b: CostLedger) -> CostLedger:
    out = a.copy()
    out.merge_in(b)
    return out


def recursion_cost(n: int, M: int, e, g, f):
    """Cost recursion read as an equality, with zero cost at n = 0 and n = -1.

    Integer inputs give exact integer results.
    """
    if n < -1:
        raise ValueError(f"n must be >= -1, got {n}")
    if M < 1:
        raise ValueError(f"M must be positive, got {M}")

    path = M**M * e

    @lru_cache(maxsize=None)
    def cost(k):
        if k <= 0:
            return 0
        total = M**k * (path + g)
        for l in range(k):
            total += M ** (k - l) * (path + f + cost(l) + cost(l - 1))
        return total

    return cost(n)


def closed_bound(n: int, e, g, f):
    """12 (3e + g + 2f) 36^n n^(2n), a bound on the sum of costs at n = M = 1..n+1."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return 12 * (3 * e + g + 2 * f) * 36**n * n ** (2 * n)
