"""Build a symmetric two-sided Markov family from a generating factor ``g``.

With ``Z_0 = g`` and ``Z_{n+1}(a, b) = ∫_{I_{a,b}} g(x, a) Z_n(x, b) dx`` the
level-``n`` factors are ``f_n = 1 / Z_n``, ``g_n = Z_{n-1}`` (``g_1 = g``) and
``h = g``.  ``Z_n`` is the integral of ``∏ g`` over the edges of an
ordered chain with ``n`` interior points, so it is symmetric in ``(a, b)``.

Each ``log Z_n`` is cached as a Chebyshev interpolant over the declared
working box.  Near the diagonal ``Z_n(a, b) ~ |b-a|^{n + (n+1)σ}`` where
``σ`` is the diagonal exponent of ``g``; that power is divided out before
fitting so the interpolated remainder stays smooth.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import numpy as np

from .chebcache import ChebCache
from .core import BoundaryPair, DensityFamily, FamilyFactors, interior_mask
from .errors import (
    BoxExceeded,
    ConfigError,
    IndexOutOfRange,
    NumericError,
    QuadratureFailure,
)
from .kernels import GeneratingFactor
from .quadrature import QuadratureSpec, integrate_log_batch

log = logging.getLogger(__name__)

DEFAULT_DEGREE = 64


def f_next(log_f_n: Callable, log_h1: Callable, boundary: BoundaryPair,
           quad: Optional[QuadratureSpec] = None) -> float:
    """One recursion step: ``-log ∫_{I_{a,b}} exp(-log f_n(b,x) + log h_1(x,a)) dx``.

    ``log_f_n(b, x, d)`` and ``log_h1(x, a, d)`` are vectorized callables;
    ``d`` is the exact distance between their two arguments.
    """
    quad = quad or QuadratureSpec()
    a, b = boundary.left, boundary.right
    lo, hi = boundary.interval.lo, boundary.interval.hi

    def integrand(x, dlo, dhi, rows):
        da, db = (dlo, dhi) if a < b else (dhi, dlo)
        return -log_f_n(b, x, db) + log_h1(x, a, da)

    return -float(integrate_log_batch(integrand, [lo], [hi], quad.rel_tol, quad.max_levels)[0])


class RecursionFactors(FamilyFactors):
    """Factors generated by ``g``; ``log_Z(n, ...)`` is the cached normalization."""

    def __init__(self, g: GeneratingFactor, box, quad: QuadratureSpec, n_max: int,
                 sigma: float, caches=None):
        self.g = g
        self.box = (float(box[0]), float(box[1]))
        self.quad = quad
        self.max_level = n_max
        self.sigma = sigma
        self.caches = caches  # None: evaluate by nested quadrature

    def exponent(self, n: int) -> float:
        return n + (n + 1) * self.sigma

    def _check_box(self, *arrays):
        z1, z2 = self.box
        slack = 1e-10 * (z2 - z1)
        for arr in arrays:
            arr = np.asarray(arr)
            if np.any(arr < z1 - slack) or np.any(arr > z2 + slack):
                raise BoxExceeded(f"argument outside working box [{z1}, {z2}]")

    def log_Z(self, n: int, a, b, d=None, rel_tol=None):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = np.abs(b - a) if d is None else np.asarray(d, dtype=float)
        if n == 0:
            return self.g.log_value(a, b, d)
        self.check_level(n)
        self._check_box(a, b)
        a, b, d = np.broadcast_arrays(a, b, d)
        lo = np.minimum(a, b)
        if self.caches is None:
            return self._direct(n, lo, d, rel_tol or self.quad.rel_tol)
        with np.errstate(divide="ignore"):
            return self.caches[n - 1](lo, d) + self.exponent(n) * np.log(d)

    def _direct(self, n, lo, d, rel_tol):
        """Nested quadrature without interpolation (cost grows like Q^n).

        Inner integrals run 100x tighter than the outer one so their noise
        does not stall the outer convergence test.
        """
        shape = lo.shape
        lo = lo.ravel()
        d = d.ravel()
        out = np.full(lo.shape, -np.inf)
        ok = d > 0
        if ok.any():
            out[ok] = _level_integral(self, n, lo[ok], lo[ok] + d[ok], rel_tol,
                                      self.quad.max_levels, d[ok])
        return out.reshape(shape)

    def log_f(self, n, a, b):
        return -self.log_Z(n, a, b)

    def log_g(self, n, b, x, d=None):
        if n == 1:
            return self.g.log_value(b, x, d)
        return self.log_Z(n - 1, b, x, d)

    def log_h(self, x, a, d=None):
        return self.g.log_value(x, a, d)


def _level_integral(factors: RecursionFactors, n, lo, hi, rel_tol, max_levels, width=None):
    """``log Z_n(lo, hi) = log ∫ g(x, lo) Z_{n-1}(x, hi) dx`` for arrays of pairs."""
    inner_tol = max(rel_tol * 1e-2, 1e-14)

    def integrand(x, dlo, dhi, rows):
        left = factors.g.log_value(x, lo[rows][:, None], dlo)
        right = factors.log_Z(n - 1, x, hi[rows][:, None], dhi, inner_tol)
        return left + right

    return integrate_log_batch(integrand, lo, hi, rel_tol, max_levels, width)


def build_factors(g: GeneratingFactor, n_max: int, quad: Optional[QuadratureSpec] = None,
                  box=(0.5, 4.0), cache: bool = True, degree: int = DEFAULT_DEGREE) -> RecursionFactors:
    """Generate the factors of levels ``1..n_max`` from ``g`` on ``box``."""
    if n_max < 1:
        raise ConfigError(f"n_max must be >= 1, got {n_max}")
    z1, z2 = float(box[0]), float(box[1])
    if not (0 <= z1 < z2 and math.isfinite(z2)):
        raise ConfigError(f"invalid working box {box!r}")
    quad = quad or QuadratureSpec()
    probe_box = (max(z1, 1e-3 * (z2 - z1)), z2)
    g.validate(probe_box)
    sigma = g.diagonal_exponent(probe_box)
    factors = RecursionFactors(g, (z1, z2), quad, n_max, sigma, caches=None if not cache else [])
    if not cache:
        return factors
    fit_tol = max(quad.rel_tol, 1e-13)
    for n in range(1, n_max + 1):
        p = factors.exponent(n)

        def remainder(lo, hi, d, n=n, p=p):
            return _level_integral(factors, n, lo, hi, quad.rel_tol, quad.max_levels, d) - p * np.log(d)

        try:
            cache_n = ChebCache.fit(remainder, (z1, z2), tol=fit_tol, max_degree=degree)
        except NumericError as exc:
            raise type(exc)(f"level {n}: {exc}") from exc
        except FloatingPointError as exc:
            raise QuadratureFailure(f"level {n}: {exc}") from exc
        log.debug("level %d cache: degree %s, tail %.2g", n, cache_n.degree, cache_n.tail)
        factors.caches.append(cache_n)
    return factors


class RecursionFamily(DensityFamily):
    """Family generated by a symmetric kernel via the normalization recursion."""

    kind = "recursion"

    def __init__(self, g: GeneratingFactor, n_max: int, box=(0.5, 4.0),
                 quad: Optional[QuadratureSpec] = None, cache: bool = True,
                 degree: int = DEFAULT_DEGREE):
        factors = build_factors(g, n_max, quad, box, cache, degree)
        super().__init__(factors, n_max)
        self.g = g
        self.box = factors.box
        self.quad = factors.quad

    def describe(self):
        return {"kind": self.kind, "g": self.g.describe(), "box": list(self.box),
                "max_level": self.max_level}

    def log_Z(self, n, a, b, d=None):
        return self.factors.log_Z(n, a, b, d)

    def log_marginal(self, n, i, a, b, x, dl=None, dr=None):
        """``Z_{i-1}(a, x) Z_{n-i}(x, b) / Z_n(a, b)`` on ``I_{a,b}``."""
        self._check(n)
        if not 1 <= i <= n:
            raise IndexOutOfRange(f"site {i} not in 1..{n}")
        a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
        inside = interior_mask(a, b, x, dl, dr)
        dl = np.abs(x - a) if dl is None else np.asarray(dl, dtype=float)
        dr = np.abs(b - x) if dr is None else np.asarray(dr, dtype=float)
        xs = np.where(inside, x, 0.5 * (a + b))
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (self.log_Z(i - 1, a, xs, dl) + self.log_Z(n - i, xs, b, dr)
                   - self.log_Z(n, a, b))
        out = np.where(inside, val, -np.inf)
        return out[()] if out.ndim == 0 else out
