"""Two-dimensional Chebyshev interpolants on a triangular working box.

A symmetric function of a boundary pair only needs its values for
``lo < hi`` inside ``[z1, z2]``.  The triangle is mapped onto a rectangle
by ``(lo, t)`` with ``hi = lo + t (z2 - lo)``, ``t`` in ``[0, 1]``; a tensor
Chebyshev series is fitted there on first-kind nodes, with the degree
doubled until the trailing coefficients fall below tolerance.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import BoxExceeded

log = logging.getLogger(__name__)

_SIZES = (9, 17, 33, 65, 129)


def _nodes(n):
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def _coefficients(values):
    n = values.shape[0]
    theta = np.pi * (np.arange(n) + 0.5) / n
    T = np.cos(np.outer(np.arange(n), theta))
    coef = (2.0 / n) ** 2 * T @ values @ T.T
    coef[0, :] *= 0.5
    coef[:, 0] *= 0.5
    return coef


def _trim(coef, tol):
    """Smallest leading block whose discarded coefficients sum below ``tol``."""
    mag = np.abs(coef)
    rows = np.cumsum(mag.sum(axis=1)[::-1])[::-1]  # mass in rows i..end
    cols = np.cumsum(mag.sum(axis=0)[::-1])[::-1]
    ni = next((i for i in range(1, len(rows)) if rows[i] <= tol), len(rows))
    nj = next((j for j in range(1, len(cols)) if cols[j] <= tol), len(cols))
    return coef[:ni, :nj].copy()


class ChebCache:
    """Interpolant of ``value(lo, d)`` for ``z1 <= lo < lo + d <= z2``."""

    def __init__(self, coef, box, tail: float, size: int):
        self.coef = coef
        self.box = (float(box[0]), float(box[1]))
        self.tail = tail
        self.size = size

    @property
    def degree(self):
        return tuple(d - 1 for d in self.coef.shape)

    @classmethod
    def fit(cls, func: Callable, box, tol: float = 1e-9, max_degree: int = 64) -> "ChebCache":
        """Fit ``func(lo, hi)`` (vectorized over pairs) on the box."""
        z1, z2 = map(float, box)
        sizes = [n for n in _SIZES if n - 1 <= max_degree] or [_SIZES[0]]
        coef = tail = None
        for n in sizes:
            xi = _nodes(n)
            lo = z1 + 0.5 * (z2 - z1) * (xi + 1.0)
            t = 0.5 * (_nodes(n) + 1.0)
            LO, TT = np.meshgrid(lo, t, indexing="ij")
            D = TT * (z2 - LO)
            values = np.asarray(func(LO.ravel(), (LO + D).ravel(), D.ravel()), dtype=float)
            values = values.reshape(n, n)
            if not np.all(np.isfinite(values)):
                raise FloatingPointError("non-finite value while fitting the cache")
            coef = _coefficients(values)
            k = max(2, n // 8)
            tail = max(np.abs(coef[-k:, :]).max(), np.abs(coef[:, -k:]).max())
            if tail <= tol:
                break
        else:
            log.warning("Chebyshev cache did not converge: tail %.3g > tol %.3g", tail, tol)
        return cls(_trim(coef, tol / 4.0), (z1, z2), float(tail), n)

    def _map(self, lo, d):
        z1, z2 = self.box
        slack = 1e-10 * (z2 - z1)
        if np.any(lo < z1 - slack) or np.any(lo + d > z2 + slack) or np.any(d < 0):
            raise BoxExceeded(f"boundary pair outside working box [{z1}, {z2}]")
        room = np.maximum(z2 - lo, np.finfo(float).tiny)
        t = np.clip(d / room, 0.0, 1.0)
        xi = np.clip((2.0 * lo - z1 - z2) / (z2 - z1), -1.0, 1.0)
        return xi, 2.0 * t - 1.0

    def __call__(self, lo, d):
        lo = np.asarray(lo, dtype=float)
        d = np.asarray(d, dtype=float)
        lo, d = np.broadcast_arrays(lo, d)
        xi, eta = self._map(lo, d)
        if self.coef.shape == (1, 1):
            return np.full(lo.shape, self.coef[0, 0])
        return C.chebval2d(xi, eta, self.coef)
