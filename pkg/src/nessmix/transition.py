"""Raising and lowering operators between single-site marginals.

For a two-sided Markov family the site-``i`` marginals are linked by

``P f(x) = ∫_{I_{a,x}} f(y) Λ^{n-i,1}_{y,b}(x) dy``  (site ``i`` to ``i+1``)
``Q f(x) = ∫_{I_{x,b}} f(y) Λ^{i-1,i-1}_{a,y}(x) dy``  (site ``i`` to ``i-1``)

Both operators are applied lazily: the result is a new
:class:`MarginalFunction` whose values are computed by quadrature at the
points where it is queried.  A dense fixed-grid version is provided for
quick sweeps where a few digits are enough.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .core import BoundaryPair, DensityFamily, Interval, interior_mask
from .errors import ConfigError, EmptySupport, IndexOutOfRange
from .quadrature import QuadratureSpec, integrate_log_batch

__all__ = [
    "MarginalFunction",
    "first_marginal",
    "last_marginal",
    "family_marginal",
    "raise_",
    "lower",
    "marginal_by_propagation",
    "marginal_by_lowering",
    "numeric_support",
    "discrete_raise",
    "discrete_lower",
    "discrete_fixed_point_residual",
]


def _inner_tol(rel_tol: float) -> float:
    # Integrands that are themselves quadratures must be more accurate than
    # the outer rule, otherwise their noise stalls its convergence test.
    return max(rel_tol * 1e-2, 1e-14)


class MarginalFunction:
    """A one-site log-density on ``I_{a,b}``, tagged with its ``(n, i)``.

    Parameters
    ----------
    log_fn : callable
        ``log_fn(x, dl, dr, rel_tol)`` returning log-density values for a
        flat array of interior points; ``dl = |x - a|`` and ``dr = |b - x|``
        are exact distances and ``rel_tol`` is the accuracy requested from
        lazily evaluated operators (closed forms may ignore it).
    n, i : int
        Level and site index.
    boundary : BoundaryPair
    quad : QuadratureSpec, optional
        Accuracy used for lazily evaluated integrals.
    """

    def __init__(self, log_fn: Callable, n: int, i: int, boundary: BoundaryPair,
                 quad: Optional[QuadratureSpec] = None, label: str = ""):
        self._log_fn = log_fn
        self.n = int(n)
        self.i = int(i)
        self.boundary = boundary
        self.quad = quad or QuadratureSpec()
        self.label = label

    def __repr__(self):
        a, b = self.boundary
        return f"MarginalFunction(n={self.n}, i={self.i}, boundary=({a}, {b}), {self.label!r})"

    @property
    def interval(self) -> Interval:
        return self.boundary.interval

    def log_pdf(self, x, dl=None, dr=None, rel_tol: Optional[float] = None):
        """Log-density at ``x``; ``-inf`` outside the open interval."""
        a, b = self.boundary
        x = np.asarray(x, dtype=float)
        dl = np.abs(x - a) if dl is None else np.broadcast_to(np.asarray(dl, dtype=float), x.shape)
        dr = np.abs(b - x) if dr is None else np.broadcast_to(np.asarray(dr, dtype=float), x.shape)
        inside = interior_mask(a, b, x, dl, dr)
        out = np.full(x.shape, -np.inf)
        if inside.any():
            tol = self.quad.rel_tol if rel_tol is None else rel_tol
            vals = self._log_fn(x[inside], dl[inside], dr[inside], tol)
            out[inside] = np.asarray(vals, dtype=float).reshape(-1)
        return out[()] if out.ndim == 0 else out

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def __call__(self, x):
        return self.pdf(x)

    def log_integral(self, lo, width, rel_tol: Optional[float] = None):
        """``log ∫_{lo}^{lo + width} f`` for arrays of sub-intervals of ``I_{a,b}``."""
        tol = self.quad.rel_tol if rel_tol is None else rel_tol
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        width = np.broadcast_to(np.asarray(width, dtype=float), lo.shape)
        a, b = self.boundary
        ilo, ihi = self.interval.lo, self.interval.hi
        inner = _inner_tol(tol)
        off_lo = lo - ilo
        off_hi = ihi - (lo + width)

        def integrand(y, dlo, dhi, rows):
            # distances to the ends of I_{a,b}, exact when a sub-interval touches them
            ol = off_lo[rows][:, None]
            oh = off_hi[rows][:, None]
            d_ilo = np.where(ol <= 0, dlo, ol + dlo)
            d_ihi = np.where(oh <= 0, dhi, oh + dhi)
            dl, dr = (d_ilo, d_ihi) if b > a else (d_ihi, d_ilo)
            return self.log_pdf(y, dl, dr, rel_tol=inner)

        return integrate_log_batch(integrand, lo, lo + width, tol, self.quad.max_levels, width)

    def mass(self, rel_tol: Optional[float] = None) -> float:
        """``∫_{I_{a,b}} f``; equals 1 for a normalized marginal."""
        iv = self.interval
        return float(np.exp(self.log_integral([iv.lo], [iv.width], rel_tol)[0]))

    def cdf(self, x, rel_tol: Optional[float] = None):
        """``∫_{lo}^{x} f`` along the numeric axis (``lo`` the smaller endpoint)."""
        iv = self.interval
        x = np.asarray(x, dtype=float)
        width = np.clip(x.ravel(), iv.lo, iv.hi) - iv.lo
        out = np.exp(self.log_integral(np.full(width.shape, iv.lo), width, rel_tol))
        out = out.reshape(x.shape)
        return out[()] if out.ndim == 0 else out


def _check_index(n, i, lo, hi, what):
    if not lo <= i <= hi:
        raise IndexOutOfRange(f"{what} needs {lo} <= i <= {hi}, got i={i} for n={n}")


def family_marginal(family: DensityFamily, n: int, i: int, boundary: BoundaryPair,
                    quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """Site-``i`` marginal as provided by the family itself."""
    _check_index(n, i, 1, n, "family_marginal")
    a, b = boundary

    def log_fn(x, dl, dr, tol):
        return family.log_marginal(n, i, a, b, x, dl, dr)

    return MarginalFunction(log_fn, n, i, boundary, quad, f"{family.kind} marginal")


def first_marginal(family: DensityFamily, n: int, boundary: BoundaryPair,
                   quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """``Λ^{n,1}_{a,b}`` from the family's factors."""
    _check_index(n, 1, 1, n, "first_marginal")
    a, b = boundary

    def log_fn(x, dl, dr, tol):
        return family.log_first_marginal(n, a, b, x, dl, dr)

    return MarginalFunction(log_fn, n, 1, boundary, quad, f"{family.kind} first marginal")


def last_marginal(family: DensityFamily, n: int, boundary: BoundaryPair,
                  quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """``Λ^{n,n}_{a,b} = Λ^{n,1}_{b,a}`` from the family's factors."""
    a, b = boundary

    def log_fn(x, dl, dr, tol):
        return family.log_last_marginal(n, a, b, x, dl, dr)

    return MarginalFunction(log_fn, n, n, boundary, quad, f"{family.kind} last marginal")


def _check_tags(f: MarginalFunction, n: int, i: int):
    if f.n != n or f.i != i:
        raise ConfigError(f"operator for (n={n}, i={i}) applied to a marginal tagged "
                          f"(n={f.n}, i={f.i})")


def raise_(family: DensityFamily, n: int, i: int, f: MarginalFunction,
           quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """Map the site-``i`` marginal to the site-``i+1`` marginal.

    ``P f(x) = ∫_{I_{a,x}} f(y) Λ^{n-i,1}_{y,b}(x) dy``, evaluated by
    quadrature whenever the result is queried.
    """
    _check_index(n, i, 1, n - 1, "raise")
    _check_tags(f, n, i)
    quad = quad or f.quad
    a, b = f.boundary
    inc = b > a
    k = n - i

    def log_fn(x, dl, dr, tol):
        lo = np.minimum(a, x)
        inner = _inner_tol(tol)

        def integrand(y, dlo, dhi, rows):
            # interval runs from a to x (or x to a when decreasing)
            da, dx = (dlo, dhi) if inc else (dhi, dlo)
            drr = dr[rows][:, None]
            left = f.log_pdf(y, da, dx + drr, rel_tol=inner)
            right = family.log_first_marginal(k, y, b, x[rows][:, None], dx, drr)
            return left + right

        return integrate_log_batch(integrand, lo, lo + dl, tol, quad.max_levels, dl)

    return MarginalFunction(log_fn, n, i + 1, f.boundary, quad, f"P({f.label})")


def lower(family: DensityFamily, n: int, i: int, f: MarginalFunction,
          quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """Map the site-``i`` marginal to the site-``i-1`` marginal.

    ``Q f(x) = ∫_{I_{x,b}} f(y) Λ^{i-1,i-1}_{a,y}(x) dy``.
    """
    _check_index(n, i, 2, n, "lower")
    _check_tags(f, n, i)
    quad = quad or f.quad
    a, b = f.boundary
    inc = b > a
    k = i - 1

    def log_fn(x, dl, dr, tol):
        lo = np.minimum(x, b)
        inner = _inner_tol(tol)

        def integrand(y, dlo, dhi, rows):
            # interval runs from x to b (or b to x when decreasing)
            dx, db = (dlo, dhi) if inc else (dhi, dlo)
            dll = dl[rows][:, None]
            left = f.log_pdf(y, dll + dx, db, rel_tol=inner)
            right = family.log_last_marginal(k, a, y, x[rows][:, None], dll, dx)
            return left + right

        return integrate_log_batch(integrand, lo, lo + dr, tol, quad.max_levels, dr)

    return MarginalFunction(log_fn, n, i - 1, f.boundary, quad, f"Q({f.label})")


def marginal_by_propagation(family: DensityFamily, n: int, i: int, boundary: BoundaryPair,
                            quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """``Λ^{n,i}`` as ``i - 1`` successive raises of the first marginal."""
    _check_index(n, i, 1, n, "marginal_by_propagation")
    f = first_marginal(family, n, boundary, quad)
    for site in range(1, i):
        f = raise_(family, n, site, f, quad)
    return f


def marginal_by_lowering(family: DensityFamily, n: int, i: int, boundary: BoundaryPair,
                         quad: Optional[QuadratureSpec] = None) -> MarginalFunction:
    """``Λ^{n,i}`` as ``n - i`` successive lowerings of the last marginal."""
    _check_index(n, i, 1, n, "marginal_by_lowering")
    f = last_marginal(family, n, boundary, quad)
    for site in range(n, i, -1):
        f = lower(family, n, site, f, quad)
    return f


def numeric_support(f, threshold: float = 1e-12, grid_size: int = 1024) -> Interval:
    """Smallest and largest cell midpoints where ``f`` exceeds ``threshold · max f``.

    ``threshold = 0`` keeps every point with a strictly positive density.
    The comparison is done on log-values, so densities far below the
    floating-point range are still resolved.

    Raises
    ------
    EmptySupport
        If no grid point passes.
    """
    if grid_size < 16:
        raise ConfigError(f"grid_size must be >= 16, got {grid_size}")
    if threshold < 0:
        raise ConfigError(f"threshold must be >= 0, got {threshold}")
    iv = f.interval
    h = iv.width / grid_size
    k = np.arange(grid_size)
    x = iv.lo + (k + 0.5) * h
    d_lo = (k + 0.5) * h
    d_hi = (grid_size - k - 0.5) * h
    a, b = f.boundary
    dl, dr = (d_lo, d_hi) if b > a else (d_hi, d_lo)
    if isinstance(f, MarginalFunction):
        logs = f.log_pdf(x, dl, dr)
    else:
        with np.errstate(divide="ignore"):
            logs = np.log(np.asarray(f(x), dtype=float))
    logs = np.where(np.isnan(logs), -np.inf, logs)
    top = logs.max()
    if not np.isfinite(top) and top < 0:
        raise EmptySupport("density is zero on every grid point")
    cut = -np.inf if threshold == 0 else top + math.log(threshold)
    keep = np.flatnonzero(logs > cut)
    if keep.size == 0:
        raise EmptySupport("density is below the threshold on every grid point")
    return Interval(float(x[keep[0]]), float(x[keep[-1]]), iv.orientation)


# -- dense fixed-grid variant -------------------------------------------------

def _grid(boundary: BoundaryPair, size: int):
    iv = boundary.interval
    x = np.linspace(iv.lo, iv.hi, size)
    return x, x[1] - x[0]


def _trapezoid_rows(mask, h):
    """Trapezoid weights along each row restricted to the contiguous ``mask``."""
    w = mask.astype(float) * h
    first = np.argmax(mask, axis=1)
    last = mask.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    rows = np.arange(mask.shape[0])
    has = mask.any(axis=1)
    w[rows[has], first[has]] *= 0.5
    w[rows[has], last[has]] *= 0.5
    return w


def _near(X, Y, h):
    # Coinciding points are moved 1e-9 cells apart, which replaces a finite
    # density or kernel by its limiting value there.
    return np.maximum(np.abs(X - Y), 1e-9 * h)


def _dense(logs):
    with np.errstate(over="ignore"):
        vals = np.exp(logs)
    return np.where(np.isfinite(vals), vals, 0.0)


def discrete_raise(family: DensityFamily, n: int, i: int, values, boundary: BoundaryPair,
                   size: int = 512):
    """Raise operator on the fixed grid ``linspace(lo, hi, size)`` (trapezoid rule).

    Grid values where the density is infinite (endpoint singularities) are
    treated as zero and finite values at coinciding points are taken as
    limits, so this path is a quick approximation, reliable for bounded
    densities only.
    """
    _check_index(n, i, 1, n - 1, "raise")
    a, b = boundary
    x, h = _grid(boundary, size)
    X, Y = np.meshgrid(x, x, indexing="ij")  # rows: output x, columns: source y
    sign = 1.0 if b > a else -1.0
    mask = (sign * (Y - a) >= 0) & (sign * (X - Y) >= 0)
    K = _dense(family.log_first_marginal(n - i, Y, b, X, _near(X, Y, h), _near(b, X, h)))
    return (_trapezoid_rows(mask, h) * K) @ np.asarray(values, dtype=float)


def discrete_lower(family: DensityFamily, n: int, i: int, values, boundary: BoundaryPair,
                   size: int = 512):
    """Lowering operator on the same fixed grid as :func:`discrete_raise`."""
    _check_index(n, i, 2, n, "lower")
    a, b = boundary
    x, h = _grid(boundary, size)
    X, Y = np.meshgrid(x, x, indexing="ij")
    sign = 1.0 if b > a else -1.0
    mask = (sign * (Y - X) >= 0) & (sign * (b - Y) >= 0)
    K = _dense(family.log_last_marginal(i - 1, a, Y, X, _near(X, a, h), _near(X, Y, h)))
    return (_trapezoid_rows(mask, h) * K) @ np.asarray(values, dtype=float)


def discrete_fixed_point_residual(family: DensityFamily, n: int, boundary: BoundaryPair,
                                  size: int = 512) -> float:
    """``max |Q P Λ^{n,1} - Λ^{n,1}|`` over interior grid points (fast, approximate)."""
    x, h = _grid(boundary, size)
    a, b = boundary
    f0 = _dense(family.log_first_marginal(n, a, b, x, _near(x, a, h), _near(b, x, h)))
    f2 = discrete_raise(family, n, 1, f0, boundary, size)
    back = discrete_lower(family, n, 2, f2, boundary, size)
    return float(np.max(np.abs(back - f0)[1:-1]))
