"""Numerical residual checks for the structural identities of ordered families.

Every check compares log-densities on a deterministic grid of ordered
tuples and returns a :class:`ResidualReport`.  Grids are built by stick
breaking: each site takes a fixed fraction of the distance that remains
between the previous site and ``b``, with the fractions spaced
logistically so that they approach both ends geometrically without ever
touching them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .core import BoundaryPair, DensityFamily
from .errors import ConfigError, IndexOutOfRange
from .kernels import GeneratingFactor
from .quadrature import QuadratureSpec, integrate_log_batch
from .transition import (
    first_marginal,
    last_marginal,
    lower,
    raise_,
)

__all__ = [
    "ResidualReport",
    "TupleGrid",
    "KSResult",
    "site_marginal",
    "check_two_sided_markov",
    "check_symmetry",
    "check_separability",
    "check_scale_invariance",
    "check_shift_invariance",
    "check_factorization",
    "check_marginal_reversal",
    "check_normalization",
    "ks_test",
    "ks_two_sample",
    "KS_COEFFICIENT",
]

KS_COEFFICIENT = 1.63  # asymptotic 1% critical value of sqrt(N) * D


@dataclass
class ResidualReport:
    """Outcome of one residual check.

    ``passed`` is true exactly when ``max_abs_residual < tol``; a residual
    that cannot be evaluated (one side finite, the other not) counts as
    infinite.
    """

    check: str
    max_abs_residual: float
    tol: float
    argmax: Optional[dict] = None
    grid: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_residual < self.tol)

    def to_dict(self) -> dict:
        out = asdict(self)
        res = out["max_abs_residual"]
        out["max_abs_residual"] = res if math.isfinite(res) else "inf"
        out["pass"] = self.passed
        return out


@dataclass(frozen=True)
class TupleGrid:
    """Stick-breaking grid with ``per_axis`` fractions per site."""

    per_axis: int = 8
    spread: float = 4.5

    def fractions(self) -> np.ndarray:
        z = np.linspace(-self.spread, self.spread, self.per_axis)
        return 1.0 / (1.0 + np.exp(-z))

    def tuples(self, boundary: BoundaryPair, n: int) -> np.ndarray:
        """Array of shape ``(per_axis ** n, n)`` of ordered tuples inside ``I_{a,b}``."""
        if n < 1:
            return np.zeros((1, 0))
        u = self.fractions()
        idx = np.array(list(itertools.product(range(self.per_axis), repeat=n)))
        frac = u[idx]
        a, b = float(boundary.left), float(boundary.right)
        out = np.empty(frac.shape)
        prev = np.full(frac.shape[0], a)
        for k in range(n):
            prev = prev + (b - prev) * frac[:, k]
            out[:, k] = prev
        return out

    def points(self, boundary: BoundaryPair) -> np.ndarray:
        """Single-site points ``a + (b - a) u``."""
        a, b = float(boundary.left), float(boundary.right)
        return a + (b - a) * self.fractions()

    def describe(self, boundary: Optional[BoundaryPair] = None) -> dict:
        out = {"kind": "stick-breaking", "per_axis": self.per_axis, "spread": self.spread}
        if boundary is not None:
            out["boundary"] = [boundary.left, boundary.right]
        return out


def _as_grid(grid) -> TupleGrid:
    if grid is None:
        return TupleGrid()
    if isinstance(grid, TupleGrid):
        return grid
    return TupleGrid(int(grid))


def _residual(lhs, rhs):
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    with np.errstate(invalid="ignore"):
        r = np.abs(lhs - rhs)
    same_inf = np.isinf(lhs) & np.isinf(rhs) & (np.sign(lhs) == np.sign(rhs))
    r = np.where(same_inf, 0.0, r)
    return np.where(np.isnan(r), np.inf, r)


def _report(check, resid, tol, where, grid_desc, params):
    resid = np.asarray(resid, dtype=float)
    if resid.size == 0:
        return ResidualReport(check, 0.0, float(tol), None, grid_desc, params)
    k = int(np.argmax(resid))
    return ResidualReport(check, float(resid.flat[k]), float(tol), where(k), grid_desc, params)


def _family_info(family):
    describe = getattr(family, "describe", None)
    return describe() if callable(describe) else {"kind": type(family).__name__}


# -- site marginals -----------------------------------------------------------

def site_marginal(family: DensityFamily, n: int, j: int, boundary: BoundaryPair,
                  method: str = "family", quad: Optional[QuadratureSpec] = None) -> Callable:
    """Vectorized ``log Λ^{n,j}_{a,b}``.

    ``method="family"`` uses the family's own marginal formula;
    ``method="operators"`` starts from the nearer end marginal (built from
    the factors) and applies raising or lowering operators.
    """
    if not 1 <= j <= n:
        raise IndexOutOfRange(f"site {j} not in 1..{n}")
    a, b = boundary
    if method == "family":
        return lambda x: family.log_marginal(n, j, a, b, x)
    if method != "operators":
        raise ConfigError(f"unknown marginal method {method!r}")
    if j - 1 <= n - j:
        f = first_marginal(family, n, boundary, quad)
        for site in range(1, j):
            f = raise_(family, n, site, f, quad)
    else:
        f = last_marginal(family, n, boundary, quad)
        for site in range(n, j, -1):
            f = lower(family, n, site, f, quad)
    return f.log_pdf


# -- checks -------------------------------------------------------------------

def check_two_sided_markov(family: DensityFamily, n: int, boundary: BoundaryPair,
                           grid=None, tol: float = 1e-8, method: str = "family",
                           quad: Optional[QuadratureSpec] = None) -> ResidualReport:
    """``log Λ^n(θ) - log Λ^{n,j}(θ_j) - log[Λ^{j-1}_{a,θ_j} Λ^{n-j}_{θ_j,b}]`` over all ``j``."""
    if n < 2:
        raise ConfigError("the two-sided Markov check needs n >= 2")
    g = _as_grid(grid)
    theta = g.tuples(boundary, n)
    a, b = boundary
    joint = family.log_joint(n, a, b, theta)
    worst = []
    for j in range(1, n + 1):
        marg = site_marginal(family, n, j, boundary, method, quad)
        uniq, inv = np.unique(theta[:, j - 1], return_inverse=True)
        m = np.asarray(marg(uniq))[inv]
        split = family.log_conditional_split(n, j, a, b, theta)
        worst.append(_residual(joint, m + split))
    resid = np.stack(worst, axis=1)
    nj = resid.shape[1]
    return _report(
        "two-sided-markov", resid.ravel(), tol,
        lambda k: {"theta": theta[k // nj].tolist(), "j": k % nj + 1},
        g.describe(boundary), {"family": _family_info(family), "n": n, "method": method},
    )


def check_symmetry(family, n: int, boundary: BoundaryPair, grid=None,
                   tol: float = 1e-10) -> ResidualReport:
    """``log Λ^n_{a,b}(θ_1..θ_n) - log Λ^n_{b,a}(θ_n..θ_1)``.

    ``family`` may be any object with ``log_joint(n, a, b, theta)``.
    """
    g = _as_grid(grid)
    theta = g.tuples(boundary, n)
    a, b = boundary
    lhs = family.log_joint(n, a, b, theta)
    rhs = family.log_joint(n, b, a, theta[:, ::-1])
    return _report(
        "symmetry", _residual(lhs, rhs), tol,
        lambda k: {"theta": theta[k].tolist()},
        g.describe(boundary), {"family": _family_info(family), "n": n},
    )


def check_separability(family: DensityFamily, n: int, boundary: BoundaryPair, grid=None,
                       tol: float = 1e-8) -> ResidualReport:
    """``Λ^{n,1}_{a,b}(x) / Λ^{n,n}_{a,b}(y) = Λ^{n-1,1}_{a,y}(x) / Λ^{n-1,n-1}_{x,b}(y)``.

    Checked on ordered pairs ``(x, y) = (θ_1, θ_n)``.
    """
    if n < 2:
        raise ConfigError("the separability check needs n >= 2")
    g = _as_grid(grid)
    pairs = g.tuples(boundary, 2)
    x, y = pairs[:, 0], pairs[:, 1]
    a, b = boundary
    lhs = family.log_first_marginal(n, a, b, x) - family.log_last_marginal(n, a, b, y)
    rhs = family.log_first_marginal(n - 1, a, y, x) - family.log_last_marginal(n - 1, x, b, y)
    return _report(
        "separability", _residual(lhs, rhs), tol,
        lambda k: {"theta_1": float(x[k]), "theta_n": float(y[k])},
        g.describe(boundary), {"family": _family_info(family), "n": n},
    )


def check_scale_invariance(family, n: int, gamma: float, boundary: BoundaryPair, grid=None,
                           tol: float = 1e-8) -> ResidualReport:
    """``log Λ^n_{a,b}(θ) - n log γ - log Λ^n_{γa,γb}(γθ)``."""
    if not gamma > 0:
        raise ConfigError(f"scale factor must be positive, got {gamma}")
    g = _as_grid(grid)
    theta = g.tuples(boundary, n)
    a, b = boundary
    lhs = family.log_joint(n, a, b, theta)
    rhs = n * math.log(gamma) + family.log_joint(n, gamma * a, gamma * b, gamma * theta)
    return _report(
        "scale-invariance", _residual(lhs, rhs), tol,
        lambda k: {"theta": theta[k].tolist()},
        g.describe(boundary), {"family": _family_info(family), "n": n, "gamma": gamma},
    )


def check_shift_invariance(family, n: int, gamma: float, boundary: BoundaryPair, grid=None,
                           tol: float = 1e-8) -> ResidualReport:
    """``log Λ^n_{a,b}(θ) - log Λ^n_{a+γ,b+γ}(θ+γ)``."""
    a, b = boundary
    if not gamma > -min(a, b):
        raise ConfigError(f"shift {gamma} would move the boundary out of the positive axis")
    g = _as_grid(grid)
    theta = g.tuples(boundary, n)
    lhs = family.log_joint(n, a, b, theta)
    rhs = family.log_joint(n, a + gamma, b + gamma, theta + gamma)
    return _report(
        "shift-invariance", _residual(lhs, rhs), tol,
        lambda k: {"theta": theta[k].tolist()},
        g.describe(boundary), {"family": _family_info(family), "n": n, "gamma": gamma},
    )


DEFAULT_PAIRS = ((0.5, 1.5), (1.0, 3.0), (3.0, 1.0), (0.8, 2.2), (2.5, 0.6))


def check_factorization(lambda1, g: GeneratingFactor, pairs: Sequence = DEFAULT_PAIRS,
                        grid=None, tol: float = 1e-9,
                        quad: Optional[QuadratureSpec] = None) -> ResidualReport:
    """Compare ``log Λ^1_{a,b}(x)`` with ``-log ∫ g(b,y) g(y,a) dy + log g(b,x) + log g(x,a)``.

    ``lambda1`` is a family (its level-1 first marginal is used) or a
    callable ``log_lambda1(a, b, x)``.
    """
    quad = quad or QuadratureSpec()
    grid_ = _as_grid(grid)
    if hasattr(lambda1, "log_first_marginal"):
        fam = lambda1

        def lambda1(a, b, x):
            return fam.log_first_marginal(1, a, b, x)

    pairs = [tuple(map(float, p)) for p in pairs]
    aa = np.array([p[0] for p in pairs])
    bb = np.array([p[1] for p in pairs])
    lo = np.minimum(aa, bb)
    width = np.abs(bb - aa)
    inc = bb > aa

    def integrand(y, dlo, dhi, rows):
        da = np.where(inc[rows][:, None], dlo, dhi)
        db = np.where(inc[rows][:, None], dhi, dlo)
        return (g.log_value(bb[rows][:, None], y, db) + g.log_value(y, aa[rows][:, None], da))

    log_norm = integrate_log_batch(integrand, lo, lo + width, quad.rel_tol, quad.max_levels, width)
    u = grid_.fractions()
    A = np.repeat(aa, u.size)
    Bv = np.repeat(bb, u.size)
    X = A + (Bv - A) * np.tile(u, len(pairs))
    lhs = np.asarray(lambda1(A, Bv, X), dtype=float)
    rhs = -np.repeat(log_norm, u.size) + g.log_value(Bv, X) + g.log_value(X, A)
    return _report(
        "factorization", _residual(lhs, rhs), tol,
        lambda k: {"a": float(A[k]), "b": float(Bv[k]), "x": float(X[k])},
        {"kind": "pairs x fractions", "pairs": [list(p) for p in pairs], "per_axis": grid_.per_axis},
        {"g": g.describe()},
    )


def check_marginal_reversal(family: DensityFamily, n: int, boundary: BoundaryPair, grid=None,
                            tol: float = 1e-8, method: str = "family",
                            quad: Optional[QuadratureSpec] = None) -> ResidualReport:
    """``log Λ^{n,j}_{a,b}(x) - log Λ^{n,n-j+1}_{b,a}(x)`` for every ``j``."""
    g = _as_grid(grid)
    x = g.points(boundary)
    swapped = boundary.swapped()
    rows = []
    for j in range(1, n + 1):
        lhs = site_marginal(family, n, j, boundary, method, quad)(x)
        rhs = site_marginal(family, n, n - j + 1, swapped, method, quad)(x)
        rows.append(_residual(lhs, rhs))
    resid = np.stack(rows)
    npts = x.size
    return _report(
        "marginal-reversal", resid.ravel(), tol,
        lambda k: {"j": k // npts + 1, "x": float(x[k % npts])},
        g.describe(boundary), {"family": _family_info(family), "n": n, "method": method},
    )


def check_normalization(family: DensityFamily, n: int, boundary: BoundaryPair,
                        tol: float = 1e-7, quad: Optional[QuadratureSpec] = None) -> ResidualReport:
    """``|∫ Λ^{k,1}_{a,b} - 1|`` for every level ``k = 1..n``."""
    masses = np.array([first_marginal(family, k, boundary, quad).mass() for k in range(1, n + 1)])
    return _report(
        "normalization", np.abs(masses - 1.0), tol,
        lambda k: {"level": k + 1, "mass": float(masses[k])},
        {"kind": "quadrature", "boundary": [boundary.left, boundary.right]},
        {"family": _family_info(family), "n": n},
    )


# -- Kolmogorov-Smirnov -------------------------------------------------------

@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.critical

    def to_dict(self):
        return {"statistic": self.statistic, "critical": self.critical, "pass": self.passed}


def ks_test(samples, cdf: Callable) -> KSResult:
    """One-sample KS statistic against a vectorized ``cdf``; passes below ``1.63/√N``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 100:
        raise ConfigError(f"ks_test needs at least 100 samples, got {samples.size}")
    d = stats.kstest(samples, cdf).statistic
    return KSResult(float(d), KS_COEFFICIENT / math.sqrt(samples.size))


def ks_two_sample(x, y) -> KSResult:
    """Two-sample KS statistic with the 1% critical value ``1.63 √((n+m)/(n m))``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if min(x.size, y.size) < 100:
        raise ConfigError("ks_two_sample needs at least 100 samples per side")
    d = stats.ks_2samp(x, y).statistic
    return KSResult(float(d), KS_COEFFICIENT * math.sqrt((x.size + y.size) / (x.size * y.size)))
