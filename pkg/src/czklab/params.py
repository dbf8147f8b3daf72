"""Height weighting used to sample splice addresses and to score trees."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .protocol import ConfigurationError


def ceil_log(base: int, n: int) -> int:
    """Smallest e >= 0 with base**e >= n, in exact integers."""
    if base < 2 or n < 1:
        raise ConfigurationError("ceil_log needs base >= 2 and n >= 1")
    e, p = 0, 1
    while p < n:
        p *= base
        e += 1
    return e


@dataclass(frozen=True)
class WeightParams:
    k: int
    N: int
    beta: int
    m: int = 1

    def f(self, h: int) -> int:
        return h**self.beta

    def F(self, h: int) -> int:
        return sum(j**self.beta for j in range(1, h + 1))

    @property
    def total(self) -> int:
        return self.F(self.k)

    @property
    def c(self) -> Fraction:
        return Fraction(1, self.total)

    def height(self, level: int) -> int:
        return self.k - level + 1

    def address_weight(self, level: int) -> Fraction:
        """Probability of any single address at ``level``."""
        return self.c * self.f(self.height(level)) / self.N

    def level_probability(self, level: int) -> Fraction:
        return self.c * self.f(self.height(level))

    def short_threshold(self) -> int:
        return 10 * (self.beta + 1)

    def short_snake_allowance(self) -> Fraction:
        return 2 * self.c * self.short_threshold() ** self.beta


def weight_params(k: int, N: int, m: int = 1, beta: int | None = None) -> WeightParams:
    if k < 2:
        raise ConfigurationError("weighting needs k >= 2")
    if N < 1:
        raise ConfigurationError("N must be at least 1")
    if beta is None:
        beta = 1 + ceil_log(k, N)
    return WeightParams(k, N, beta, m)


def f_bound_holds(h: int, beta: int) -> bool:
    """F(h) >= h^(beta+1)/(beta+1), exactly."""
    F = sum(j**beta for j in range(1, h + 1))
    return F * (beta + 1) >= h ** (beta + 1)
