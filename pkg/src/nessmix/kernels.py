"""Symmetric generating factors ``g(x, y)`` evaluated as log-values.

Each factor knows (or estimates) its diagonal exponent ``σ`` with
``g(x, y) ~ C(x) |x - y|^σ`` as ``y -> x``.  The recursion engine divides
the matching power of ``|b - a|`` out of the normalizations before
interpolating them, which keeps the interpolants smooth.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.special import gammaln

from . import expr as ex
from .errors import KernelRejected

_SYM_TOL = 1e-12


class GeneratingFactor:
    """A symmetric nonnegative kernel with a vectorized ``log_value``.

    ``log_fn(x, y, d)`` receives the exact distance ``d = |x - y|``.
    ``diag_exponent`` may be ``None``; it is then estimated numerically
    by :meth:`diagonal_exponent`.
    """

    def __init__(self, kind: str, log_fn: Callable, params: Optional[dict] = None,
                 diag_exponent: Optional[float] = None):
        self.kind = kind
        self.params = dict(params or {})
        self._log_fn = log_fn
        self._diag = diag_exponent

    def __repr__(self):
        return f"GeneratingFactor({self.kind!r}, {self.params!r})"

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params}

    def log_value(self, x, y, d=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if d is None:
            d = np.abs(x - y)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.asarray(self._log_fn(x, y, np.asarray(d, dtype=float)), dtype=float)

    def value(self, x, y):
        return np.exp(self.log_value(x, y))

    def diagonal_exponent(self, box=(0.5, 4.0)) -> float:
        if self._diag is not None:
            return self._diag
        z1, z2 = box
        span = z2 - z1
        xs = z1 + span * np.array([0.2, 0.35, 0.5, 0.65, 0.8])
        d1, d2 = 1e-7 * span, 1e-6 * span
        est = (self.log_value(xs, xs + d1, d1) - self.log_value(xs, xs + d2, d2)) / math.log(d1 / d2)
        if not np.all(np.isfinite(est)):
            raise KernelRejected(f"{self.kind} kernel is not finite and positive near the diagonal")
        sigma = round(float(np.median(est)) * 1000.0) / 1000.0
        if sigma <= -1.0:
            raise KernelRejected(
                f"diagonal exponent {sigma} <= -1: g(b,.)g(.,a) is not integrable"
            )
        self._diag = sigma
        return sigma

    def validate(self, box=(0.5, 4.0), probes: int = 20) -> None:
        """Symmetry, nonnegativity and off-diagonal positivity on a probe grid."""
        z1, z2 = box
        pts = np.linspace(z1, z2, probes + 2)[1:-1]
        xx, yy = np.meshgrid(pts, pts, indexing="ij")
        u = self.log_value(xx, yy)
        v = self.log_value(yy, xx)
        off = xx != yy
        if np.isnan(u[off]).any():
            raise KernelRejected(f"{self.kind} kernel is negative or undefined on the probe grid")
        with np.errstate(invalid="ignore"):
            same = (u == v) | (np.abs(u - v) < _SYM_TOL) | ~off
        if not same.all():
            raise KernelRejected(f"{self.kind} kernel is not symmetric: g(x,y) != g(y,x)")
        if np.isneginf(u[off]).any() or np.isposinf(u[off]).any():
            raise KernelRejected(
                f"{self.kind} kernel vanishes or blows up off the diagonal; "
                "first marginals would not have full support"
            )
        self.diagonal_exponent(box)


def power_kernel(s: float) -> GeneratingFactor:
    """``g = |x - y|^{s-1} / Γ(s)``: generates the ordered Dirichlet family."""
    s = float(s)
    if not s > 0:
        raise KernelRejected(f"power kernel needs s > 0, got {s}")
    c = gammaln(s)

    def log_fn(x, y, d):
        if s == 1.0:
            return np.zeros(np.shape(d))
        return (s - 1.0) * np.log(d) - c

    return GeneratingFactor("power", log_fn, {"s": s}, s - 1.0)


def exp_kernel(rate: float = 1.0) -> GeneratingFactor:
    """``g = exp(-rate |x - y|)``."""
    rate = float(rate)
    return GeneratingFactor("exp", lambda x, y, d: -rate * d, {"rate": rate}, 0.0)


def _profile(src: str, var: str = "r"):
    node = ex.parse(src, variables=(var,))
    return node


def _log_of(values):
    values = np.asarray(values, dtype=float)
    return np.where(values < 0, np.nan, np.log(np.abs(values)))


def distance_kernel(phi: str) -> GeneratingFactor:
    """``g(x, y) = Φ(|x - y|)`` with ``Φ`` given as an expression in ``r``."""
    node = _profile(phi)

    def log_fn(x, y, d):
        return _log_of(ex.evaluate_array(node, r=d))

    return GeneratingFactor("distance", log_fn, {"phi": ex.pretty(node)})


def scale_only_kernel(s: float, u: float, phi: str = "1") -> GeneratingFactor:
    """Scale-covariant kernel ``M^s exp(u (M-1)(1 - m/M)) φ(m/M)``, ``m, M = min, max``.

    The resulting family is scale invariant but, in general, not shift invariant.
    """
    s, u = float(s), float(u)
    node = _profile(phi)

    def log_fn(x, y, d):
        big = np.maximum(x, y)
        small = np.minimum(x, y)
        return (
            s * np.log(big)
            + u * (big - 1.0) * d / big
            + _log_of(ex.evaluate_array(node, r=small / big))
        )

    return GeneratingFactor("scale-only", log_fn, {"s": s, "u": u, "phi": ex.pretty(node)})


def shift_only_kernel(v: float, w: float, phi: str = "1") -> GeneratingFactor:
    """Shift-covariant kernel ``exp(v m + w m |x-y|) φ(|x-y|)`` with ``m = min(x, y)``."""
    v, w = float(v), float(w)
    node = _profile(phi)

    def log_fn(x, y, d):
        small = np.minimum(x, y)
        return v * small + w * small * d + _log_of(ex.evaluate_array(node, r=d))

    return GeneratingFactor("shift-only", log_fn, {"v": v, "w": w, "phi": ex.pretty(node)})


def expression_kernel(src: str, probes: int = 20) -> GeneratingFactor:
    """Kernel ``g(x, y)`` from an expression; rejected unless it passes the symmetry gate."""
    node = ex.parse(src, variables=("x", "y"))
    if not ex.check_symmetry(node, probes):
        raise KernelRejected(f"expression {src!r} is not symmetric in x and y")

    def log_fn(x, y, d):
        return _log_of(ex.evaluate_array(node, x=x, y=y))

    return GeneratingFactor("expression", log_fn, {"expr": ex.pretty(node)})


def tabulated_kernel(grid, values) -> GeneratingFactor:
    """Kernel tabulated on ``grid x grid``; log-linear interpolation in between."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size, grid.size):
        raise KernelRejected("tabulated kernel needs a square table matching the grid")
    if np.any(values < 0):
        raise KernelRejected("tabulated kernel has negative entries")
    if not np.allclose(values, values.T, rtol=1e-12, atol=0):
        raise KernelRejected("tabulated kernel is not symmetric")
    with np.errstate(divide="ignore"):
        interp = RegularGridInterpolator((grid, grid), np.log(values), bounds_error=False,
                                         fill_value=np.nan)

    def log_fn(x, y, d):
        x, y = np.broadcast_arrays(x, y)
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        pts = np.stack([lo.ravel(), hi.ravel()], axis=-1)
        return interp(pts).reshape(x.shape)

    return GeneratingFactor("tabulated", log_fn, {"size": int(grid.size)})
