"""Numeric inner loops, each with a numba path and a pure-numpy path.

The public wrappers pick the numba path when numba is importable and not
disabled through ``CZKLAB_DISABLE_NUMBA``; pass ``backend=`` to force one.
Both paths must agree bit-for-bit on the integer kernels and to within
float rounding on the probability kernels.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import NUMBA_ENABLED, njit

# GF(2^8) with the AES reduction polynomial x^8 + x^4 + x^3 + x + 1.
GF256_POLY = 0x11B
GF256_GENERATOR = 0x03


def _build_gf256_tables() -> tuple[np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.int64)
    log = np.zeros(256, dtype=np.int64)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        # multiply by the generator 0x03 = x + 1
        x2 = x << 1
        if x2 & 0x100:
            x2 ^= GF256_POLY
        x = x2 ^ x
    for i in range(255, 512):
        exp[i] = exp[i - 255]
    return exp, log


GF256_EXP, GF256_LOG = _build_gf256_tables()


def gf256_mul(a: int, b: int) -> int:
    """Schoolbook multiply in GF(2^8); the table-free reference."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= GF256_POLY
    return out


def default_backend() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


@njit(cache=True)
def _horner_gf256_numba(coeffs, points, exp, log, out):
    n_members, degree_plus_one = coeffs.shape
    n_points = points.shape[0]
    for mi in range(n_members):
        for pi in range(n_points):
            x = points[pi]
            acc = 0
            for d in range(degree_plus_one - 1, -1, -1):
                if acc != 0 and x != 0:
                    acc = exp[log[acc] + log[x]]
                else:
                    acc = 0
                acc ^= coeffs[mi, d]
            out[mi, pi] = acc


def _horner_gf256_numpy(coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    coeffs = coeffs.astype(np.int64)
    x = points.astype(np.int64)[None, :]
    acc = np.zeros((coeffs.shape[0], x.shape[1]), dtype=np.int64)
    log_x = GF256_LOG[x]
    for d in range(coeffs.shape[1] - 1, -1, -1):
        nz = (acc != 0) & (x != 0)
        prod = np.where(nz, GF256_EXP[GF256_LOG[acc] + log_x], 0)
        acc = prod ^ coeffs[:, d][:, None]
    return acc.astype(np.uint8)


def poly_eval_gf256(coeffs, points, backend: str | None = None) -> np.ndarray:
    """Evaluate many GF(2^8) polynomials at many points.

    ``coeffs`` has shape (members, t) with the constant term first; the
    result has shape (members, points).
    """
    coeffs = np.ascontiguousarray(coeffs, dtype=np.uint8)
    points = np.ascontiguousarray(points, dtype=np.uint8)
    if coeffs.ndim != 2:
        raise ValueError("coeffs must be a 2-d array (members, t)")
    backend = backend or default_backend()
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but numba is disabled")
        out = np.empty((coeffs.shape[0], points.shape[0]), dtype=np.uint8)
        _horner_gf256_numba(
            coeffs.astype(np.int64), points.astype(np.int64), GF256_EXP, GF256_LOG, out
        )
        return out
    if backend == "numpy":
        return _horner_gf256_numpy(coeffs, points)
    raise ValueError(f"unknown backend {backend!r}")


@njit(cache=True)
def _binomial_outside_numba(m, rho, inside_lo, inside_hi):
    # Kahan-compensated sum of the pmf over l < inside_lo and l > inside_hi.
    log_rho = math.log(rho)
    log_1m = math.log1p(-rho)
    lg_m = math.lgamma(m + 1.0)
    total = 0.0
    comp = 0.0
    for l in range(m + 1):
        if inside_lo <= l <= inside_hi:
            continue
        term = math.exp(
            lg_m - math.lgamma(l + 1.0) - math.lgamma(m - l + 1.0)
            + l * log_rho + (m - l) * log_1m
        )
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def _binomial_outside_numpy(m: int, rho: float, inside_lo: int, inside_hi: int) -> float:
    from scipy.special import gammaln

    ell = np.arange(m + 1, dtype=np.float64)
    logpmf = (
        gammaln(m + 1.0) - gammaln(ell + 1.0) - gammaln(m - ell + 1.0)
        + ell * math.log(rho) + (m - ell) * math.log1p(-rho)
    )
    mask = (ell < inside_lo) | (ell > inside_hi)
    return math.fsum(np.exp(logpmf[mask]).tolist())


def binomial_outside_mass(
    m: int, rho: float, inside_lo: int, inside_hi: int, backend: str | None = None
) -> float:
    """Pr[l outside [inside_lo, inside_hi]] for l ~ Binomial(m, rho), in floats."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if not 0.0 < rho <= 1.0:
        raise ValueError("rho must lie in (0, 1]")
    if rho == 1.0:
        return 0.0 if inside_lo <= m <= inside_hi else 1.0
    backend = backend or default_backend()
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but numba is disabled")
        return float(_binomial_outside_numba(int(m), float(rho), int(inside_lo), int(inside_hi)))
    if backend == "numpy":
        return _binomial_outside_numpy(int(m), float(rho), int(inside_lo), int(inside_hi))
    raise ValueError(f"unknown backend {backend!r}")


def sample_levels(cum_weights: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw 0-based level indices with integer weights, exactly proportionally.

    ``cum_weights`` is the inclusive cumulative sum of the integer weights.
    """
    total = int(cum_weights[-1])
    u = rng.integers(0, total, size=size, dtype=np.int64)
    return np.searchsorted(cum_weights, u, side="right")
