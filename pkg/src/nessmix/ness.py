"""Steady states as mixtures of product measures over hidden parameters.

A configuration of ``n`` sites is drawn in two stages: hidden parameters
``θ`` from an ordered family ``Λ^n_{θ_L, θ_R}``, then each site
independently from the equilibrium law ``ν_{θ_i}``.  With equal boundary
values the hidden law degenerates to a point mass and the sites are
i.i.d. from ``ν_θ``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .closed_forms import DirichletFamily, GappedFamily, OrderStatsFamily
from .core import BoundaryPair, DensityFamily
from .errors import ConfigError
from .quadrature import QuadratureSpec
from .sampling import (
    RngHandle,
    sample_dirichlet_ordered,
    sample_gapped,
    sample_orderstats,
    sample_sequential,
)

__all__ = [
    "EquilibriumMarginal",
    "MixtureSpec",
    "equilibrium_spec",
    "sample_hidden",
    "sample_ness",
    "sample_many",
    "estimate_profile",
    "estimate_covariance",
    "ProfileEstimate",
    "CovarianceEstimate",
]

_KINDS = ("exponential", "dirac", "inverse-cdf-table")


@dataclass(frozen=True)
class EquilibriumMarginal:
    """Per-site law ``ν_θ``.

    ``exponential``: mean ``θ``.  ``dirac``: point mass at ``θ``.
    ``inverse-cdf-table``: ``quantile(u, θ)`` supplied by the caller, for
    equilibrium families that are not built in.
    """

    kind: str = "exponential"
    quantile: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown marginal kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "inverse-cdf-table" and self.quantile is None:
            raise ConfigError("inverse-cdf-table marginals need a quantile(u, theta) callable")

    def draw(self, theta, rng: RngHandle):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "dirac":
            return theta.copy()
        if self.kind == "exponential":
            return rng.exponential(1.0, theta.shape) * theta
        return np.asarray(self.quantile(rng.uniform(theta.shape), theta), dtype=float)


@dataclass
class MixtureSpec:
    family: DensityFamily
    boundary: BoundaryPair
    n: int
    marginal: EquilibriumMarginal = field(default_factory=EquilibriumMarginal)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        self.n = int(self.n)
        max_level = getattr(self.family, "max_level", None)
        if max_level is not None and self.n > max_level:
            raise ConfigError(f"hidden family supports levels up to {max_level}, not {self.n}")

    @property
    def equilibrium(self) -> bool:
        return self.boundary.left == self.boundary.right


def equilibrium_spec(family, theta: float, n: int, marginal=None) -> MixtureSpec:
    """Spec with ``θ_L = θ_R``; the density machinery is never touched."""
    return MixtureSpec(family, BoundaryPair(float(theta), float(theta)), n,
                       marginal or EquilibriumMarginal())


def sample_hidden(spec: MixtureSpec, rng: RngHandle, size: int) -> np.ndarray:
    """``(size, n)`` draws of the hidden parameters."""
    fam, bd, n = spec.family, spec.boundary, spec.n
    if spec.equilibrium:
        return np.full((size, n), float(bd.left))
    if isinstance(fam, OrderStatsFamily):
        return sample_orderstats(n, bd, rng, size)
    if isinstance(fam, GappedFamily):
        return sample_gapped(int(fam.s), n, bd, rng, size)
    if isinstance(fam, DirichletFamily):
        if fam.s == 1.0:
            return sample_orderstats(n, bd, rng, size)
        return sample_dirichlet_ordered(fam.s, n, bd, rng, size)
    return sample_sequential(fam, n, bd, rng, spec.quad, size)


def sample_ness(spec: MixtureSpec, rng: RngHandle, size: Optional[int] = None):
    """One configuration (``size=None``) or a ``(size, n)`` block of them."""
    m = 1 if size is None else int(size)
    hidden = sample_hidden(spec, rng, m)
    x = spec.marginal.draw(hidden, rng)
    return x[0] if size is None else x


def _chunks(total: int, chunk: int):
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def _run_streams(spec, rng, n_samples, chunk, jobs, fn):
    """Apply ``fn(block)`` to sample blocks drawn from split streams, in stream order."""
    sizes = _chunks(n_samples, chunk)
    streams = rng.split(len(sizes))

    def work(k):
        return fn(sample_ness(spec, streams[k], sizes[k]))

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(work, range(len(sizes))))
    return [work(k) for k in range(len(sizes))]


def sample_many(spec: MixtureSpec, rng: RngHandle, count: int, chunk: int = 20000,
                jobs: int = 1) -> np.ndarray:
    """``(count, n)`` configurations from split streams; independent of ``jobs``."""
    if count < 1:
        raise ConfigError(f"count must be >= 1, got {count}")
    return np.concatenate(_run_streams(spec, rng, count, chunk, jobs, lambda x: x), axis=0)


@dataclass
class ProfileEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def to_dict(self):
        return {"mean": self.mean.tolist(), "stderr": self.stderr.tolist(),
                "n_samples": self.n_samples}


@dataclass
class CovarianceEstimate:
    cov: np.ndarray
    stderr: np.ndarray
    n_samples: int

    def to_dict(self):
        return {"cov": self.cov.tolist(), "stderr": self.stderr.tolist(),
                "n_samples": self.n_samples}


def estimate_profile(spec: MixtureSpec, n_samples: int, rng: RngHandle,
                     chunk: int = 20000, jobs: int = 1) -> ProfileEstimate:
    """Per-site means with standard errors.

    The result depends only on the seed, ``n_samples`` and ``chunk``, not on
    ``jobs``.
    """
    if n_samples < 100:
        raise ConfigError(f"n_samples must be >= 100, got {n_samples}")
    parts = _run_streams(spec, rng, n_samples, chunk, jobs,
                         lambda x: (x.shape[0], x.sum(axis=0), (x * x).sum(axis=0)))
    count = sum(p[0] for p in parts)
    s1 = sum(p[1] for p in parts)
    s2 = sum(p[2] for p in parts)
    mean = s1 / count
    var = np.maximum(s2 / count - mean**2, 0.0) * count / (count - 1)
    return ProfileEstimate(mean, np.sqrt(var / count), count)


def estimate_covariance(spec: MixtureSpec, n_samples: int, rng: RngHandle,
                        chunk: int = 20000, jobs: int = 1) -> CovarianceEstimate:
    """Sample covariance matrix with a standard error for every entry.

    The error of ``Cov(X_i, X_j)`` is estimated from the spread of the
    centred products ``(X_i - m_i)(X_j - m_j)``.
    """
    if n_samples < 1000:
        raise ConfigError(f"n_samples must be >= 1000, got {n_samples}")
    x = sample_many(spec, rng, n_samples, chunk, jobs)
    count = x.shape[0]
    c = x - x.mean(axis=0)
    cov = c.T @ c / (count - 1)
    prod_sq = (c * c).T @ (c * c) / count
    var_prod = np.maximum(prod_sq - (c.T @ c / count) ** 2, 0.0)
    return CovarianceEstimate(cov, np.sqrt(var_prod / count), count)
