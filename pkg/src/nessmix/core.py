"""Domain types and factor-based evaluation of ordered n-site densities.

A family is described by per-level factors ``(f_n, g_n, h)`` whose product
``f_n(a, b) g_n(b, x) h(x, a)`` is the first-site marginal on ``I_{a,b}``.
The joint density then follows by chaining first marginals, each site
becoming the new left boundary of the remaining block.

All evaluators work on log-values and broadcast over numpy arrays.  The
orientation of a boundary pair never needs special casing: every factor is
written in terms of absolute distances, and the support test follows the
sign of ``b - a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateInterval,
    IndexOutOfRange,
    LevelExceeded,
    NonPositiveBoundary,
    OutOfSupport,
)

INCREASING = "increasing"
DECREASING = "decreasing"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    orientation: str = INCREASING

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x > self.lo) & (x < self.hi)


@dataclass(frozen=True)
class BoundaryPair:
    """Reservoir parameters ``(a, b)``; ``a`` sits next to site 1."""

    left: float
    right: float
    limiting: bool = field(default=False, compare=False)

    @property
    def interval(self) -> Interval:
        lo, hi = sorted((self.left, self.right))
        return Interval(lo, hi, INCREASING if self.left < self.right else DECREASING)

    @property
    def increasing(self) -> bool:
        return self.left < self.right

    def swapped(self) -> "BoundaryPair":
        return BoundaryPair(self.right, self.left, self.limiting)

    def __iter__(self):
        yield self.left
        yield self.right


def _check_pair(a, b, allow_zero):
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise NonPositiveBoundary(f"boundaries must be finite, got ({a}, {b})")
    if allow_zero:
        if a < 0 or b < 0:
            raise NonPositiveBoundary(f"boundaries must be >= 0, got ({a}, {b})")
    elif a <= 0 or b <= 0:
        raise NonPositiveBoundary(f"boundaries must be > 0, got ({a}, {b})")
    if a == b:
        raise DegenerateInterval(f"a = b = {a} gives an empty interval")
    return a, b


def make_boundary(a: float, b: float) -> BoundaryPair:
    """Validated boundary pair with strictly positive reservoir parameters."""
    return BoundaryPair(*_check_pair(a, b, allow_zero=False))


def limiting_boundary(a: float, b: float) -> BoundaryPair:
    """Boundary pair that also admits an endpoint at 0.

    Every density here is continuous in the boundary parameters, so the
    unit interval ``(0, 1)`` serves as a limiting fixture for tests and
    worked examples even though reservoir parameters are positive.
    """
    return BoundaryPair(*_check_pair(a, b, allow_zero=True), limiting=True)


@dataclass(frozen=True)
class OrderedTuple:
    values: tuple
    boundary: BoundaryPair

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def support_mask(a, b, theta) -> np.ndarray:
    """True where ``a, theta_1, ..., theta_n, b`` is strictly monotone."""
    theta = np.asarray(theta, dtype=float)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    a, b, theta = np.broadcast_arrays(a, b, theta)
    chain = np.concatenate([a[..., :1], theta, b[..., :1]], axis=-1)
    sign = np.sign(b[..., 0] - a[..., 0])[..., None]
    return np.all(sign * np.diff(chain, axis=-1) > 0, axis=-1) & (sign[..., 0] != 0)


def interior_mask(a, b, x, dl=None, dr=None) -> np.ndarray:
    """True where ``x`` lies strictly inside ``I_{a,b}``.

    When the exact distances ``dl = |x - a|`` and ``dr = |b - x|`` are
    supplied they decide strictness, so abscissae that round onto an
    endpoint still count as interior.
    """
    sign = np.sign(b - a)
    if dl is None or dr is None:
        return (sign * (x - a) > 0) & (sign * (b - x) > 0)
    return (sign != 0) & (sign * (x - a) >= 0) & (sign * (b - x) >= 0) & (dl > 0) & (dr > 0)


def validate_ordered(boundary: BoundaryPair, values: Sequence[float]) -> OrderedTuple:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise OutOfSupport("an ordered tuple needs at least one value")
    if not bool(support_mask(boundary.left, boundary.right, np.array(vals))):
        raise OutOfSupport(
            f"{list(vals)} is not strictly {boundary.interval.orientation} "
            f"inside {boundary.interval.lo, boundary.interval.hi}"
        )
    return OrderedTuple(vals, boundary)


class FamilyFactors:
    """Per-level factors of a family, evaluated in the log domain.

    Subclasses implement ``log_f``, ``log_g`` and ``log_h``.  The optional
    ``d`` argument carries the exact distance ``|b - x|`` (for ``log_g``) or
    ``|x - a|`` (for ``log_h``) when the caller knows it more accurately
    than the difference of the two floats.
    """

    max_level: Optional[int] = None

    def log_f(self, n: int, a, b):
        raise NotImplementedError

    def log_g(self, n: int, b, x, d=None):
        raise NotImplementedError

    def log_h(self, x, a, d=None):
        raise NotImplementedError

    def check_level(self, n: int):
        if n < 0:
            raise IndexOutOfRange(f"level must be >= 0, got {n}")
        if self.max_level is not None and n > self.max_level:
            raise LevelExceeded(f"level {n} exceeds max level {self.max_level}")


def _as_float(x):
    return np.asarray(x, dtype=float)


def first_marginal_from_factors(factors: FamilyFactors, n, a, b, x, dl=None, dr=None):
    factors.check_level(n)
    a, b, x = np.broadcast_arrays(_as_float(a), _as_float(b), _as_float(x))
    inside = interior_mask(a, b, x, dl, dr)
    dl = np.abs(x - a) if dl is None else np.broadcast_to(_as_float(dl), x.shape)
    dr = np.abs(b - x) if dr is None else np.broadcast_to(_as_float(dr), x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = factors.log_f(n, a, b) + factors.log_g(n, b, x, dr) + factors.log_h(x, a, dl)
    out = np.where(inside, val, -np.inf)
    return out[()] if out.ndim == 0 else out


def joint_from_factors(factors: FamilyFactors, n, a, b, theta):
    """Vectorized product of first marginals; ``theta`` has shape ``(..., n)``."""
    theta = _as_float(theta)
    if n == 0:
        return np.zeros(np.broadcast_shapes(np.shape(a), np.shape(b)))
    factors.check_level(n)
    if theta.shape[-1] != n:
        raise IndexOutOfRange(f"expected {n} coordinates, got {theta.shape[-1]}")
    a, b = _as_float(a), _as_float(b)
    shape = np.broadcast_shapes(theta.shape[:-1], a.shape, b.shape)
    theta = np.broadcast_to(theta, shape + (n,))
    a = np.broadcast_to(a, shape)
    b = np.broadcast_to(b, shape)
    ok = support_mask(a, b, theta)
    total = np.zeros(shape)
    prev = a
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(n):
            cur = theta[..., i]
            level = n - i
            total = total + (
                factors.log_f(level, prev, b)
                + factors.log_g(level, b, cur, np.abs(b - cur))
                + factors.log_h(cur, prev, np.abs(cur - prev))
            )
            prev = cur
    out = np.where(ok, total, -np.inf)
    return out[()] if out.ndim == 0 else out


class DensityFamily:
    """Evaluate joint, marginal and conditional log-densities of a family.

    ``kind`` is a short label used in reports; ``factors`` supplies the
    per-level factors.  Closed-form subclasses override ``log_marginal``
    with exact formulas.
    """

    kind = "generic"

    def __init__(self, factors: FamilyFactors, max_level: Optional[int] = None):
        self.factors = factors
        self.max_level = max_level if max_level is not None else factors.max_level

    def describe(self) -> dict:
        return {"kind": self.kind}

    def _check(self, n):
        if n < 0:
            raise IndexOutOfRange(f"n must be >= 0, got {n}")
        if self.max_level is not None and n > self.max_level:
            raise LevelExceeded(f"level {n} exceeds max level {self.max_level}")

    def log_joint(self, n: int, a, b, theta):
        self._check(n)
        return joint_from_factors(self.factors, n, a, b, theta)

    def log_first_marginal(self, n: int, a, b, x, dl=None, dr=None):
        self._check(n)
        return first_marginal_from_factors(self.factors, n, a, b, x, dl, dr)

    def log_last_marginal(self, n: int, a, b, x, dl=None, dr=None):
        # Λ^{n,n}_{a,b} = Λ^{n,1}_{b,a}; dl/dr keep their meaning w.r.t. (a, b).
        return self.log_first_marginal(n, b, a, x, dr, dl)

    def log_marginal(self, n: int, i: int, a, b, x, dl=None, dr=None):
        """Marginal of site ``i``; the generic path handles the end sites only."""
        if not 1 <= i <= n:
            raise IndexOutOfRange(f"site {i} not in 1..{n}")
        if i == 1:
            return self.log_first_marginal(n, a, b, x, dl, dr)
        if i == n:
            return self.log_last_marginal(n, a, b, x, dl, dr)
        raise NotImplementedError(
            "interior marginals need transition operators (nessmix.transition)"
        )

    def log_conditional_split(self, n: int, j: int, a, b, theta):
        """log Λ^{j-1}_{a,θ_j}(θ_<j) + log Λ^{n-j}_{θ_j,b}(θ_>j)."""
        if not 1 <= j <= n:
            raise IndexOutOfRange(f"split index {j} not in 1..{n}")
        theta = _as_float(theta)
        pivot = theta[..., j - 1]
        left = self.log_joint(j - 1, a, pivot, theta[..., : j - 1])
        right = self.log_joint(n - j, pivot, b, theta[..., j:])
        return left + right

    def log_normalizer_hint(self):
        return None


def _values(tup):
    if isinstance(tup, OrderedTuple):
        return tup.as_array()
    return np.asarray(tup, dtype=float)


def log_joint_from_factors(factors: FamilyFactors, boundary: BoundaryPair, tup) -> float:
    """Joint log-density from the product of first marginals.

    Raw value sequences are accepted as well as :class:`OrderedTuple`;
    out-of-support raw input gives ``-inf``.
    """
    vals = _values(tup)
    return float(joint_from_factors(factors, vals.shape[-1], boundary.left, boundary.right, vals))


def log_first_marginal(factors: FamilyFactors, n: int, boundary: BoundaryPair, x):
    return first_marginal_from_factors(factors, n, boundary.left, boundary.right, x)


def log_last_marginal(factors: FamilyFactors, n: int, boundary: BoundaryPair, x):
    return first_marginal_from_factors(factors, n, boundary.right, boundary.left, x)


def log_conditional_split(family: DensityFamily, boundary: BoundaryPair, tup, j: int) -> float:
    vals = _values(tup)
    return float(
        family.log_conditional_split(vals.shape[-1], j, boundary.left, boundary.right, vals)
    )
