"""Uniform order statistics, gapped order statistics and the ordered Dirichlet family.

The normalizations come from the factor product
``f_n(a,b) = Γ(s(n+1)) / |b-a|^{s(n+1)-1}``, ``g_n(b,x) = |b-x|^{sn-1} / Γ(sn)``,
``h(x,a) = |x-a|^{s-1} / Γ(s)``, so the joint density carries
``Γ(s(n+1)) / Γ(s)^{n+1} / |b-a|^{s(n+1)-1}``.  Integer factorials go
through ``gammaln`` as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .core import (
    BoundaryPair,
    DensityFamily,
    FamilyFactors,
    OrderedTuple,
    interior_mask,
    support_mask,
)
from .errors import ConfigError, IndexOutOfRange


@dataclass(frozen=True)
class DirichletParams:
    s: float

    def __post_init__(self):
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ConfigError(f"Dirichlet shape must be positive and finite, got {self.s!r}")


def _dist(u, v, d):
    return np.abs(np.asarray(u, dtype=float) - v) if d is None else np.asarray(d, dtype=float)


class DirichletFactors(FamilyFactors):
    def __init__(self, s: float, n_max=None):
        self.s = DirichletParams(float(s)).s
        self.max_level = n_max

    def log_f(self, n, a, b):
        k = self.s * (n + 1)
        with np.errstate(divide="ignore"):
            return gammaln(k) - (k - 1.0) * np.log(np.abs(np.asarray(b, float) - a))

    def log_g(self, n, b, x, d=None):
        k = self.s * n
        with np.errstate(divide="ignore", invalid="ignore"):
            return (k - 1.0) * np.log(_dist(b, x, d)) - gammaln(k)

    def log_h(self, x, a, d=None):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (self.s - 1.0) * np.log(_dist(x, a, d)) - gammaln(self.s)


class OrderStatsFactors(FamilyFactors):
    """``f_n = n! |b-a|^{-n}``, ``g_n = |b-x|^{n-1} / (n-1)!``, ``h = 1``."""

    def __init__(self, n_max=None):
        self.max_level = n_max

    def log_f(self, n, a, b):
        with np.errstate(divide="ignore"):
            return gammaln(n + 1.0) - n * np.log(np.abs(np.asarray(b, float) - a))

    def log_g(self, n, b, x, d=None):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (n - 1.0) * np.log(_dist(b, x, d)) - gammaln(float(n))

    def log_h(self, x, a, d=None):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(a)))


def orderstats_factors(n_max: int) -> OrderStatsFactors:
    return OrderStatsFactors(n_max)


def dirichlet_factors(s: float, n_max: int) -> DirichletFactors:
    return DirichletFactors(s, n_max)


def dirichlet_joint(s, n, a, b, theta):
    """Closed-form ordered Dirichlet joint log-density (vectorized)."""
    theta = np.asarray(theta, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if n == 0:
        return np.zeros(np.broadcast_shapes(a.shape, b.shape))
    shape = np.broadcast_shapes(theta.shape[:-1], a.shape, b.shape)
    theta = np.broadcast_to(theta, shape + (n,))
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)
    chain = np.concatenate([a[..., None], theta, b[..., None]], axis=-1)
    k = s * (n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        spacings = np.abs(np.diff(chain, axis=-1))
        val = (
            gammaln(k)
            - (n + 1) * gammaln(s)
            - (k - 1.0) * np.log(np.abs(b - a))
            + (s - 1.0) * np.sum(np.log(spacings), axis=-1)
        )
    out = np.where(support_mask(a, b, theta), val, -np.inf)
    return out[()] if out.ndim == 0 else out


def dirichlet_marginal(s, n, i, a, b, x, dl=None, dr=None):
    """Site-``i`` marginal: a Beta(is, (n+1-i)s) law rescaled to ``I_{a,b}``."""
    if not 1 <= i <= n:
        raise IndexOutOfRange(f"site {i} not in 1..{n}")
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    inside = interior_mask(a, b, x, dl, dr)
    p, q = i * s, (n + 1 - i) * s
    dl = np.abs(x - a) if dl is None else np.asarray(dl, dtype=float)
    dr = np.abs(b - x) if dr is None else np.asarray(dr, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (
            gammaln(p + q) - gammaln(p) - gammaln(q)
            + (p - 1.0) * np.log(dl) + (q - 1.0) * np.log(dr)
            - (p + q - 1.0) * np.log(np.abs(b - a))
        )
    out = np.where(inside, val, -np.inf)
    return out[()] if out.ndim == 0 else out


def orderstats_marginal_log(n: int, i: int, boundary: BoundaryPair, theta):
    """``n!/((i-1)!(n-i)!) |b-a|^{-n} |b-θ|^{n-i} |θ-a|^{i-1}`` in log form."""
    if not 1 <= i <= n:
        raise IndexOutOfRange(f"site {i} not in 1..{n}")
    a, b = boundary.left, boundary.right
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (
            gammaln(n + 1.0) - gammaln(float(i)) - gammaln(n - i + 1.0)
            - n * math.log(abs(b - a))
            + (n - i) * np.log(np.abs(b - theta))
            + (i - 1) * np.log(np.abs(theta - a))
        )
    out = np.where(boundary.interval.contains(theta), val, -np.inf)
    return out[()] if out.ndim == 0 else out


class DirichletFamily(DensityFamily):
    """Ordered Dirichlet family with shape ``s``; ``s = 1`` is order statistics."""

    kind = "dirichlet"

    def __init__(self, s: float, max_level=None):
        super().__init__(DirichletFactors(s, max_level), max_level)
        self.s = self.factors.s

    def describe(self):
        return {"kind": self.kind, "s": self.s}

    def log_joint(self, n, a, b, theta):
        self._check(n)
        return dirichlet_joint(self.s, n, a, b, theta)

    def log_marginal(self, n, i, a, b, x, dl=None, dr=None):
        self._check(n)
        return dirichlet_marginal(self.s, n, i, a, b, x, dl, dr)


class GappedFamily(DirichletFamily):
    """Every ``s``-th order statistic of ``s(n+1)-1`` uniforms (integer ``s``)."""

    kind = "gapped"

    def __init__(self, s: int, max_level=None):
        if int(s) != s or s < 1:
            raise ConfigError(f"gap size must be a positive integer, got {s!r}")
        super().__init__(int(s), max_level)


class OrderStatsFamily(DensityFamily):
    kind = "order-stats"
    s = 1.0

    def __init__(self, max_level=None):
        super().__init__(OrderStatsFactors(max_level), max_level)

    def log_joint(self, n, a, b, theta):
        self._check(n)
        return dirichlet_joint(1.0, n, a, b, theta)

    def log_marginal(self, n, i, a, b, x, dl=None, dr=None):
        self._check(n)
        return dirichlet_marginal(1.0, n, i, a, b, x, dl, dr)


def gapped_joint_log(s: int, boundary: BoundaryPair, tup) -> float:
    """Gapped order-statistics joint density, i.e. the integer-``s`` Dirichlet joint."""
    if int(s) != s or s < 1:
        raise ConfigError(f"gap size must be a positive integer, got {s!r}")
    vals = tup.as_array() if isinstance(tup, OrderedTuple) else np.asarray(tup, dtype=float)
    return float(dirichlet_joint(float(s), vals.shape[-1], boundary.left, boundary.right, vals))
