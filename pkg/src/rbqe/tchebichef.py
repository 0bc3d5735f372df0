"""Orthonormal discrete Tchebichef bases and patch moment transforms.

The order-n basis is the unique orthonormal family obtained from the
monomials 1, x, ..., x^(n-1) on the sample points 0..n-1, with signs fixed
so that every non-constant row is positive at its last sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTED_ORDERS = (4, 8)


@dataclass(frozen=True)
class MomentBasis:
    """n x n orthonormal basis; row r samples the degree-r polynomial at x=0..n-1."""

    n: int
    rows: np.ndarray

    def __post_init__(self):
        self.rows.flags.writeable = False


@dataclass(frozen=True)
class MomentMatrix:
    """Moment coefficients m[i, j] of one n x n patch."""

    n: int
    m: np.ndarray


_cache: dict[int, MomentBasis] = {}


def build_basis(n: int) -> MomentBasis:
    """Build (and cache) the order-n basis, n in {4, 8}."""
    if n not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported basis order {n}; expected one of {SUPPORTED_ORDERS}")
    cached = _cache.get(n)
    if cached is not None:
        return cached
    x = np.arange(n, dtype=np.float64)
    vander = np.vander(x, n, increasing=True)  # columns 1, x, x^2, ...
    q, _ = np.linalg.qr(vander)
    rows = q.T.copy()
    for r in range(n):
        if rows[r, -1] < 0:
            rows[r] = -rows[r]
    basis = MomentBasis(n=n, rows=rows)
    _cache[n] = basis
    return basis


def moments(patch: np.ndarray, basis: MomentBasis) -> MomentMatrix:
    """Transform one patch: M = T X T^t.

    Evaluated in DC-split form (transform the mean-free part, then add the
    mean's exact DC contribution) so constant patches produce exact zeros in
    every non-DC cell instead of 1e-16 residue. Both forms are algebraically
    identical because every non-constant row sums to zero.
    """
    patch = np.asarray(patch, dtype=np.float64)
    if patch.shape != (basis.n, basis.n):
        raise ValueError(f"patch shape {patch.shape} does not match basis order {basis.n}")
    t = basis.rows
    mean = patch.mean()
    m = t @ (patch - mean) @ t.T
    m[0, 0] += mean * basis.n
    return MomentMatrix(n=basis.n, m=m)


def moments_stack(patches: np.ndarray, basis: MomentBasis) -> np.ndarray:
    """Transform a (N, n, n) stack of patches in one shot; returns (N, n, n)."""
    patches = np.asarray(patches, dtype=np.float64)
    if patches.ndim != 3 or patches.shape[1:] != (basis.n, basis.n):
        raise ValueError(f"expected (N, {basis.n}, {basis.n}) stack, got {patches.shape}")
    t = basis.rows
    means = patches.mean(axis=(1, 2))
    m = np.einsum("ab,nbc,dc->nad", t, patches - means[:, None, None], t, optimize=True)
    m[:, 0, 0] += means * basis.n
    return m


def sstm(m: MomentMatrix | np.ndarray) -> float:
    """Sum of squared non-DC moments: total energy minus the DC term."""
    a = m.m if isinstance(m, MomentMatrix) else np.asarray(m, dtype=np.float64)
    return float(np.sum(a * a) - a.flat[0] ** 2)
