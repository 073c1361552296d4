"""Exact and generic samplers for ordered families.

Closed-form families have direct constructions (sorted uniforms, every
``s``-th order statistic, cumulative Gamma sums).  Any other family is
sampled site by site: ``θ_1`` from the first marginal, then each next site
from the first marginal of the remaining block with the previous site as
its left boundary.  Inversion of the first-marginal CDF is batched over
all samples.
"""

from __future__ import annotations

import math
from typing import Optional, Union

import numpy as np

from .core import BoundaryPair, DensityFamily, Interval, OrderedTuple
from .errors import ConfigError, InversionFailure, NumericError
from .quadrature import QuadratureSpec, integrate_log_batch

__all__ = [
    "RngHandle",
    "sample_orderstats",
    "sample_gapped",
    "sample_dirichlet_ordered",
    "sample_sequential",
    "sample_first_sites",
    "inverse_cdf",
]


class RngHandle:
    """Seeded stream of pseudo-random numbers.

    ``split(k)`` spawns ``k`` statistically independent child streams; the
    children depend only on the parent seed and the number of previous
    splits, so parallel work stays reproducible.
    """

    def __init__(self, seed: Union[int, np.random.SeedSequence, None] = None):
        if isinstance(seed, np.random.SeedSequence):
            self.seed_seq = seed
        else:
            self.seed_seq = np.random.SeedSequence(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed_seq))

    def split(self, k: int) -> list["RngHandle"]:
        if k < 1:
            raise ConfigError(f"split needs k >= 1, got {k}")
        return [RngHandle(child) for child in self.seed_seq.spawn(k)]

    def uniform(self, size=None):
        return self.generator.random(size)

    def gamma(self, shape: float, size=None):
        """Gamma(shape, 1) variates; shapes below 1 use ``Gamma(shape+1) U^{1/shape}``."""
        if shape < 1.0:
            g = self.generator.standard_gamma(shape + 1.0, size)
            u = self.generator.random(size)
            return g * u ** (1.0 / shape)
        return self.generator.standard_gamma(shape, size)

    def exponential(self, scale, size=None):
        return self.generator.exponential(scale, size)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _orient(fractions, boundary: BoundaryPair):
    """Map increasing fractions in [0, 1] onto ``a + (b - a) u``, strictly ordered.

    Ties and endpoint hits have probability zero but appear after rounding,
    most often for small Dirichlet shapes where neighbouring fractions differ
    by less than the spacing of floats near the image point.  Such values
    are nudged apart one ulp at a time so every tuple lies strictly inside
    ``I_{a,b}`` and is strictly monotone.
    """
    a, b = float(boundary.left), float(boundary.right)
    first = np.nextafter(a, b)
    last = np.nextafter(b, a)
    values = np.clip(a + (b - a) * fractions, min(first, last), max(first, last))
    toward = 1.0 if b > a else -1.0
    # forward pass separates ties, backward pass pulls back anything pushed past b
    for k in range(1, values.shape[-1]):
        prev = values[..., k - 1]
        values[..., k] = np.where(toward * (values[..., k] - prev) <= 0, np.nextafter(prev, b),
                                  values[..., k])
    values[..., -1] = np.where(toward * (values[..., -1] - last) > 0, last, values[..., -1])
    for k in range(values.shape[-1] - 2, -1, -1):
        nxt = values[..., k + 1]
        values[..., k] = np.where(toward * (nxt - values[..., k]) <= 0, np.nextafter(nxt, a),
                                  values[..., k])
    if np.any(toward * (values[..., 0] - first) < 0):
        raise NumericError("ordered sample does not fit strictly inside the interval")
    return values


def _package(values, boundary, size):
    if size is None:
        return OrderedTuple(tuple(float(v) for v in values[0]), boundary)
    return values


def sample_orderstats(n: int, boundary: BoundaryPair, rng: RngHandle, size: Optional[int] = None):
    """Sorted i.i.d. uniforms on ``I_{a,b}``, ordered from ``a`` towards ``b``.

    Returns an :class:`OrderedTuple` when ``size`` is None, otherwise an
    array of shape ``(size, n)``.
    """
    n = _check_n(n)
    m = 1 if size is None else int(size)
    u = np.sort(rng.uniform((m, n)), axis=1)
    return _package(_orient(u, boundary), boundary, size)


def sample_gapped(s: int, n: int, boundary: BoundaryPair, rng: RngHandle,
                  size: Optional[int] = None):
    """Every ``s``-th order statistic of ``N = s(n+1) - 1`` uniforms."""
    if int(s) != s or s < 1:
        raise ConfigError(f"gap size must be a positive integer, got {s!r}")
    n, s = _check_n(n), int(s)
    m = 1 if size is None else int(size)
    total = s * (n + 1) - 1
    u = np.sort(rng.uniform((m, total)), axis=1)
    picked = u[:, s - 1::s][:, :n]
    return _package(_orient(picked, boundary), boundary, size)


def sample_dirichlet_ordered(s: float, n: int, boundary: BoundaryPair, rng: RngHandle,
                             size: Optional[int] = None):
    """Cumulative sums of ``n + 1`` Gamma(s) weights, normalized and placed on ``I_{a,b}``."""
    if not (s > 0 and math.isfinite(s)):
        raise ConfigError(f"Dirichlet shape must be positive, got {s!r}")
    n = _check_n(n)
    m = 1 if size is None else int(size)
    g = rng.gamma(float(s), (m, n + 1))
    # Rescale each row before summing: for small s the weights can underflow.
    g = g / g.max(axis=1, keepdims=True)
    fractions = np.cumsum(g[:, :n], axis=1) / g.sum(axis=1, keepdims=True)
    return _package(_orient(fractions, boundary), boundary, size)


# -- generic inversion --------------------------------------------------------

def _first_marginal_integrals(family, level, left, b, t0, width_t, rel_tol, max_levels):
    """``∫`` of ``Λ^{level,1}_{left,b}`` over ``[t0, t0 + width_t]`` in distance-from-left units."""
    total = np.abs(b - left)
    sign = np.sign(b - left)

    def integrand(t, dlo, dhi, rows):
        start = t0[rows][:, None]
        dist_left = np.where(start == 0, dlo, start + dlo)
        end_gap = (total[rows] - t0[rows] - width_t[rows])[:, None]
        dist_right = np.where(end_gap <= 0, dhi, end_gap + dhi)
        x = left[rows][:, None] + sign[rows][:, None] * dist_left
        return family.log_first_marginal(level, left[rows][:, None], b, x, dist_left, dist_right)

    return np.exp(integrate_log_batch(integrand, t0, t0 + width_t, rel_tol, max_levels, width_t))


def _invert_first_sites(family, level, left, b, u, quad, tol, cells=8):
    """For each row solve ``F(t) = u`` where ``F`` is the first-marginal CDF from ``left``.

    A table of equal sub-intervals gives a bracket; a safeguarded Newton
    iteration (bisection fallback) finishes in it.  The table is built once
    per distinct ``left``, and rows sharing a start point get a finer table
    (up to 64 cells) for the same cost.
    """
    m = left.size
    total = np.abs(b - left)
    rel = min(quad.rel_tol, tol)
    uniq, inv = np.unique(left, return_inverse=True)
    cells = int(max(cells, min(64, cells * m // uniq.size)))
    edges = np.linspace(0.0, 1.0, cells + 1)
    u_total = np.abs(b - uniq)
    starts = (u_total[:, None] * edges[None, :-1]).ravel()
    widths = np.diff(u_total[:, None] * edges[None, :], axis=1).ravel()
    rep = np.repeat(np.arange(uniq.size), cells)
    table = _first_marginal_integrals(family, level, uniq[rep], b, starts, widths,
                                      rel, quad.max_levels).reshape(uniq.size, cells)
    parts = table[inv]
    cum = np.concatenate([np.zeros((m, 1)), np.cumsum(parts, axis=1)], axis=1)
    mass = cum[:, -1]
    target = u * mass
    cell = np.clip((cum[:, 1:] < target[:, None]).sum(axis=1), 0, cells - 1)
    rows = np.arange(m)
    lo_t = total * edges[cell]
    hi_t = total * edges[cell + 1]
    base = cum[rows, cell]
    frac = np.where(parts[rows, cell] > 0, (target - base) / np.maximum(parts[rows, cell], 1e-300), 0.5)
    t = lo_t + np.clip(frac, 0.0, 1.0) * (hi_t - lo_t)
    sign = np.sign(b - left)
    active = np.arange(m)
    for _ in range(200):
        if active.size == 0:
            break
        la = lo_t[active]
        step_w = np.maximum(t[active] - la, 0.0)
        inc = _first_marginal_integrals(family, level, left[active], b, la, step_w,
                                        rel, quad.max_levels)
        resid = base[active] + inc - target[active]
        done = np.abs(resid) <= tol * mass[active]
        # shrink the bracket
        below = resid < 0
        new_lo = np.where(below, t[active], lo_t[active])
        new_base = np.where(below, base[active] + inc, base[active])
        new_hi = np.where(below, hi_t[active], t[active])
        x = left[active] + sign[active] * t[active]
        dens = np.exp(family.log_first_marginal(level, left[active], b, x,
                                                t[active], total[active] - t[active]))
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = t[active] - resid / dens
        ok = np.isfinite(newton) & (newton > new_lo) & (newton < new_hi)
        t_next = np.where(ok, newton, 0.5 * (new_lo + new_hi))
        tiny = (new_hi - new_lo) <= 4 * np.finfo(float).eps * np.maximum(total[active], 1.0)
        done = done | tiny
        lo_t[active] = new_lo
        hi_t[active] = new_hi
        base[active] = new_base
        t[active] = np.where(done, t[active], t_next)
        active = active[~done]
    if active.size:
        raise InversionFailure(f"{active.size} inversions did not converge in 200 iterations")
    return t


def sample_first_sites(family: DensityFamily, n: int, boundary: BoundaryPair, rng: RngHandle,
                       size: int, quad: Optional[QuadratureSpec] = None, tol: float = 1e-10):
    """``size`` independent draws of ``Θ_1`` from ``Λ^{n,1}_{a,b}`` by inverse CDF."""
    quad = quad or QuadratureSpec()
    a, b = boundary
    u = rng.uniform(size)
    t = _invert_first_sites(family, n, np.full(size, float(a)), float(b), u, quad, tol)
    return a + np.sign(b - a) * t


def sample_sequential(family: DensityFamily, n: int, boundary: BoundaryPair, rng: RngHandle,
                      quad: Optional[QuadratureSpec] = None, size: Optional[int] = None,
                      tol: float = 1e-10, chunk: int = 2000):
    """Site-by-site sampler for any family: ``θ_{k+1} ~ Λ^{n-k,1}_{θ_k, b}``.

    Uses one uniform per site, drawn as a ``(size, n)`` block, so the output
    only depends on the seed.
    """
    n = _check_n(n)
    quad = quad or QuadratureSpec()
    m = 1 if size is None else int(size)
    a, b = float(boundary.left), float(boundary.right)
    u = rng.uniform((m, n))
    out = np.empty((m, n))
    for start in range(0, m, chunk):
        sl = slice(start, min(start + chunk, m))
        left = np.full(sl.stop - sl.start, a)
        for k in range(n):
            t = _invert_first_sites(family, n - k, left, b, u[sl, k], quad, tol)
            left = left + np.sign(b - left) * t
            out[sl, k] = left
    return _package(out, boundary, size)


def _log_pdf_of(density):
    if hasattr(density, "log_pdf"):
        return density.log_pdf

    def log_pdf(x, dl=None, dr=None, rel_tol=None):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(density(x), dtype=float))

    return log_pdf


def inverse_cdf(density, interval: Interval, u: float, tol: float = 1e-10,
                quad: Optional[QuadratureSpec] = None) -> float:
    """Solve ``CDF(x) = u`` by bisection on the quadrature CDF.

    ``density`` is a :class:`~nessmix.transition.MarginalFunction` or any
    vectorized callable returning density values on ``interval``.
    ``u <= 0`` and ``u >= 1`` return the interval endpoints.
    """
    lo, hi = float(interval.lo), float(interval.hi)
    if u <= 0.0:
        return lo
    if u >= 1.0:
        return hi
    quad = quad or QuadratureSpec()
    log_pdf = _log_pdf_of(density)
    rel = min(quad.rel_tol, tol)

    def log_mass(x0, width):
        def integrand(x, dlo, dhi, rows):
            return np.asarray(log_pdf(x), dtype=float) * np.ones_like(x)

        return integrate_log_batch(integrand, [x0], [x0 + width], rel, quad.max_levels, [width])[0]

    total = math.exp(log_mass(lo, hi - lo))
    left, right = lo, hi
    for _ in range(200):
        mid = 0.5 * (left + right)
        val = math.exp(log_mass(lo, mid - lo)) / total
        if abs(val - u) <= tol or right - left <= 2 * np.finfo(float).eps * max(abs(mid), 1.0):
            return mid
        if val < u:
            left = mid
        else:
            right = mid
    raise InversionFailure(f"bisection for u={u} did not converge in 200 iterations")
