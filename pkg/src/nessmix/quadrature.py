"""Log-domain tanh-sinh (double-exponential) quadrature.

Integrands are supplied as *log* values so that densities whose magnitude
spans hundreds of orders of magnitude can be integrated without overflow.
The batch driver integrates many intervals at once; rows converge
independently and only unconverged rows are refined.

Every integrand callback receives the abscissae together with their exact
distances to the two interval endpoints.  Near an endpoint ``x - lo`` is
not representable in floating point, but the distance is known exactly
from the transformation, which keeps endpoint power singularities such as
``(x - a) ** -0.5`` accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DivergentIntegral, QuadratureFailure

__all__ = [
    "QuadratureSpec",
    "integrate_log_batch",
    "quadrature",
    "log_cumulative",
]

T_MAX = 5.0
_HALF_PI = 0.5 * math.pi
_MIN_LEVEL = 3


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerance settings for the tanh-sinh driver."""

    rel_tol: float = 1e-9
    max_levels: int = 12
    method: str = "tanh-sinh"

    def __post_init__(self):
        if not (self.rel_tol > 0 and math.isfinite(self.rel_tol)):
            raise ConfigError(f"rel_tol must be positive, got {self.rel_tol!r}")
        if self.max_levels < _MIN_LEVEL:
            raise ConfigError(f"max_levels must be >= {_MIN_LEVEL}")
        if self.method != "tanh-sinh":
            raise ConfigError(f"unsupported quadrature method {self.method!r}")

    def with_tol(self, rel_tol: float) -> "QuadratureSpec":
        return QuadratureSpec(rel_tol=rel_tol, max_levels=self.max_levels)


def _log_cosh(z):
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


@lru_cache(maxsize=None)
def _level_nodes(level: int):
    """New nodes of ``level``: (side, log relative endpoint distance, log weight).

    ``side`` is -1 for nodes in the left half, +1 for the right half and 0
    for the midpoint.  The relative distance is measured in units of the
    half width of the interval.
    """
    h = 2.0 ** -level
    if level == 0:
        t = np.arange(-T_MAX, T_MAX + 0.5)
    else:
        k_max = int(T_MAX / h)
        t = np.arange(-k_max + 1, k_max, 2) * h
    s = _HALF_PI * np.sinh(np.abs(t))
    # 1 - |tanh(s)| = 2 e^{-2s} / (1 + e^{-2s})
    log_rel = math.log(2.0) - 2.0 * s - np.log1p(np.exp(-2.0 * s))
    log_rel = np.where(t == 0, 0.0, log_rel)
    log_w = math.log(_HALF_PI) + _log_cosh(t) - 2.0 * _log_cosh(s)
    side = np.sign(t).astype(int)
    for arr in (side, log_rel, log_w):
        arr.setflags(write=False)
    return side, log_rel, log_w


def _nodes_for(lo, hi, width, level):
    side, log_rel, log_w = _level_nodes(level)
    width = width[:, None]
    near = 0.5 * width * np.exp(log_rel)[None, :]
    left = side[None, :] <= 0
    dlo = np.where(left, near, width - near)
    dhi = np.where(left, width - near, near)
    x = np.where(left, lo[:, None] + dlo, hi[:, None] - dhi)
    return x, dlo, dhi, log_w


def integrate_log_batch(
    log_integrand: Callable,
    lo,
    hi,
    rel_tol: float = 1e-9,
    max_levels: int = 12,
    width=None,
) -> np.ndarray:
    """Return ``log ∫_{lo_k}^{hi_k} exp(log_integrand)`` for every row ``k``.

    ``log_integrand(x, dlo, dhi, rows)`` gets arrays of shape ``(m, q)``
    (abscissae, distance to ``lo``, distance to ``hi``) and the indices of
    the ``m`` rows being evaluated; it must return log-values of the same
    shape.  Rows with ``lo == hi`` integrate to ``-inf``.

    ``width`` optionally gives the exact interval lengths; pass it when
    ``hi`` was formed as ``lo + width`` and the width is tiny compared
    with ``lo``, since ``hi - lo`` then loses most of its digits.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    lo = lo.astype(float, copy=True)
    hi = hi.astype(float, copy=True)
    m = lo.shape[0]
    if np.any(hi < lo):
        raise ConfigError("integration limits must satisfy lo <= hi")
    if width is None:
        width = hi - lo
    else:
        width = np.broadcast_to(np.asarray(width, dtype=float), lo.shape).copy()
        if np.any(width < 0):
            raise ConfigError("interval widths must be nonnegative")

    result = np.full(m, -np.inf)
    acc = np.full(m, -np.inf)
    edge = np.full(m, -np.inf)
    history = [np.full(m, np.nan) for _ in range(3)]
    active = np.flatnonzero(width > 0)
    log_half = np.full(m, -np.inf)
    log_half[active] = np.log(0.5 * width[active])

    for level in range(max_levels + 1):
        if active.size == 0:
            break
        x, dlo, dhi, log_w = _nodes_for(lo[active], hi[active], width[active], level)
        vals = np.asarray(log_integrand(x, dlo, dhi, active), dtype=float)
        vals = np.broadcast_to(vals, x.shape)
        if np.isnan(vals).any() or np.isposinf(vals).any():
            bad = active[np.any(np.isnan(vals) | np.isposinf(vals), axis=1)]
            raise DivergentIntegral(
                f"integrand is undefined or infinite on rows {bad[:5].tolist()}"
            )
        terms = vals + log_w[None, :]
        acc[active] = np.logaddexp(acc[active], logsumexp(terms, axis=1))
        if level == 0:
            edge[active] = np.maximum(terms[:, 0], terms[:, -1])
        est = acc[active] + log_half[active] - level * math.log(2.0)

        prev1 = history[0][active]
        prev2 = history[1][active]
        done = np.zeros(active.size, dtype=bool)
        if level >= _MIN_LEVEL:
            zero = np.isneginf(est) & np.isneginf(prev1)
            with np.errstate(invalid="ignore", over="ignore"):
                d1 = np.abs(np.expm1(prev1 - est))
                d2 = np.abs(np.expm1(prev2 - est))
                err = np.where(d2 > d1, np.minimum(d1, d1 * d1 / d2), d1)
            err = np.where(np.isnan(err), np.inf, err)
            done = zero | (err <= rel_tol)
        history = [history[0].copy(), history[0], history[1]]
        history[0][active] = est
        result[active] = est
        active = active[~done]

    # The outermost level-0 nodes sit ~1e-101 half-widths from the endpoints;
    # a non-negligible contribution there means the tail is not integrable.
    with np.errstate(invalid="ignore"):
        tail = edge + log_half - acc - log_half
    tail = np.where(np.isneginf(acc), -np.inf, tail)
    if np.any(tail > math.log(max(rel_tol, 1e-14))):
        raise DivergentIntegral("endpoint singularity is not integrable")
    if active.size:
        raise QuadratureFailure(
            f"tolerance {rel_tol:g} not reached in {max_levels} levels "
            f"for {active.size} of {m} integrals"
        )
    return result


def quadrature(log_integrand: Callable, interval, quad: QuadratureSpec | None = None) -> float:
    """Log of ``∫ exp(log_integrand(x)) dx`` over an :class:`Interval`.

    ``log_integrand`` takes a numpy array of abscissae.  Abscissae that
    round onto an endpoint are skipped, so integrable endpoint
    singularities are allowed.
    """
    quad = quad or QuadratureSpec()
    lo, hi = float(interval.lo), float(interval.hi)

    def wrapped(x, dlo, dhi, rows):
        inside = (x > lo) & (x < hi)
        out = np.full(x.shape, -np.inf)
        out[inside] = log_integrand(x[inside])
        return out

    return float(integrate_log_batch(wrapped, [lo], [hi], quad.rel_tol, quad.max_levels)[0])


def log_cumulative(log_pdf_rows: Callable, lo, x, rel_tol=1e-10, max_levels=12) -> np.ndarray:
    """Log of ``∫_{lo_k}^{x_k}`` of a row-dependent density, for CDF evaluation."""
    return integrate_log_batch(log_pdf_rows, lo, x, rel_tol, max_levels)
