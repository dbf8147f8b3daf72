"""Seed derivation, Wilson intervals and contingency tests."""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Iterable

from scipy import stats as sps

Z95 = 1.959963984540054


def derive_seed(master: int, label: str, index: int = 0) -> int:
    """64-bit child seed; stable across runs and platforms."""
    h = hashlib.blake2b(f"{master}|{label}|{index}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


@dataclass(frozen=True)
class Estimate:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int

    def to_dict(self) -> dict:
        return {
            "point": self.point,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "trials": self.trials,
            "successes": self.successes,
        }


def wilson(successes: int, trials: int, z: float = Z95) -> Estimate:
    if trials <= 0:
        return Estimate(0.0, 0.0, 1.0, 0, 0)
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return Estimate(p, max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half)), trials, successes)


def two_sample_chi2(
    a: Iterable[Hashable], b: Iterable[Hashable], min_expected: float = 5.0
) -> tuple[float, int, float]:
    """Homogeneity test of two categorical samples; sparse categories are pooled.

    Returns (statistic, degrees of freedom, p-value).
    """
    ca, cb = Counter(a), Counter(b)
    na, nb = sum(ca.values()), sum(cb.values())
    cats = sorted(set(ca) | set(cb), key=repr)
    rows_a, rows_b = [], []
    pool_a = pool_b = 0
    for c in cats:
        ea = (ca[c] + cb[c]) * na / (na + nb)
        eb = (ca[c] + cb[c]) * nb / (na + nb)
        if min(ea, eb) < min_expected:
            pool_a += ca[c]
            pool_b += cb[c]
        else:
            rows_a.append(ca[c])
            rows_b.append(cb[c])
    if pool_a + pool_b:
        rows_a.append(pool_a)
        rows_b.append(pool_b)
    if len(rows_a) < 2:
        return 0.0, 0, 1.0
    stat, p, dof, _ = sps.chi2_contingency([rows_a, rows_b], correction=False)
    return float(stat), int(dof), float(p)


def chi2_gof(observed, expected) -> tuple[float, float]:
    """Goodness of fit against expected counts; returns (statistic, p-value)."""
    stat, p = sps.chisquare(observed, expected)
    return float(stat), float(p)
