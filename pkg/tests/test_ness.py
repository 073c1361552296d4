import numpy as np
import pytest

from nessmix.closed_forms import DirichletFamily, OrderStatsFamily
from nessmix.core import make_boundary
from nessmix.errors import ConfigError
from nessmix.kernels import exp_kernel
from nessmix.ness import (
    EquilibriumMarginal,
    MixtureSpec,
    equilibrium_spec,
    estimate_covariance,
    estimate_profile,
    sample_hidden,
    sample_many,
    sample_ness,
)
from nessmix.recursion import RecursionFamily
from nessmix.sampling import RngHandle

OS = OrderStatsFamily()


def test_equilibrium_is_iid(b13):
    spec = equilibrium_spec(OS, 2.0, 4)
    assert spec.equilibrium
    hidden = sample_hidden(spec, RngHandle(0), 10)
    assert np.all(hidden == 2.0)
    x = sample_many(spec, RngHandle(1), 50_000)
    assert np.allclose(x.mean(axis=0), 2.0, atol=4 * 2.0 / np.sqrt(50_000))
    c = np.corrcoef(x, rowvar=False)
    assert np.max(np.abs(c - np.eye(4))) < 0.02


def test_equilibrium_never_builds_densities():
    # equal boundary values: hidden draws are constant, no quadrature runs
    spec = equilibrium_spec(RecursionFamily(exp_kernel(1.0), 3), 1.5, 3)
    x = sample_ness(spec, RngHandle(2), 100)
    assert x.shape == (100, 3)


def test_order_stats_profile(b13):
    spec = MixtureSpec(OS, b13, 3)
    est = estimate_profile(spec, 200_000, RngHandle(3))
    for m, se, ref in zip(est.mean, est.stderr, (1.5, 2.0, 2.5)):
        assert abs(m - ref) < 3.5 * se
    assert est.to_dict()["n_samples"] == 200_000


def test_dirichlet_dirac_profile(unit):
    spec = MixtureSpec(DirichletFamily(2.0), unit, 2, EquilibriumMarginal("dirac"))
    est = estimate_profile(spec, 100_000, RngHandle(4))
    for m, se, ref in zip(est.mean, est.stderr, (1 / 3, 2 / 3)):
        assert abs(m - ref) < 3.5 * se


def test_dirac_covariance(unit):
    spec = MixtureSpec(OS, unit, 3, EquilibriumMarginal("dirac"))
    est = estimate_covariance(spec, 200_000, RngHandle(5))
    assert abs(est.cov[0, 2] - 0.0125) < 3.5 * est.stderr[0, 2]
    np.testing.assert_allclose(est.cov, est.cov.T)


def test_jobs_do_not_change_results(b13):
    spec = MixtureSpec(DirichletFamily(1.5), b13, 3)
    one = estimate_profile(spec, 30_000, RngHandle(6), chunk=4000, jobs=1)
    four = estimate_profile(spec, 30_000, RngHandle(6), chunk=4000, jobs=4)
    np.testing.assert_array_equal(one.mean, four.mean)
    np.testing.assert_array_equal(one.stderr, four.stderr)
    a = sample_many(spec, RngHandle(7), 9000, chunk=2000, jobs=1)
    b = sample_many(spec, RngHandle(7), 9000, chunk=2000, jobs=3)
    np.testing.assert_array_equal(a, b)


def test_inverse_cdf_table_marginal(b13):
    # uniform on [0, 2θ] has mean θ
    marg = EquilibriumMarginal("inverse-cdf-table", quantile=lambda u, t: 2 * t * u)
    est = estimate_profile(MixtureSpec(OS, b13, 1, marg), 50_000, RngHandle(8))
    assert abs(est.mean[0] - 2.0) < 3.5 * est.stderr[0]


def test_errors(b13):
    with pytest.raises(ConfigError):
        EquilibriumMarginal("gaussian")
    with pytest.raises(ConfigError):
        EquilibriumMarginal("inverse-cdf-table")
    with pytest.raises(ConfigError):
        MixtureSpec(OS, b13, 0)
    with pytest.raises(ConfigError):
        MixtureSpec(RecursionFamily(exp_kernel(1.0), 2), make_boundary(1.0, 2.0), 3)
    spec = MixtureSpec(OS, b13, 2)
    with pytest.raises(ConfigError):
        estimate_profile(spec, 10, RngHandle(0))
    with pytest.raises(ConfigError):
        estimate_covariance(spec, 100, RngHandle(0))
    with pytest.raises(ConfigError):
        sample_many(spec, RngHandle(0), 0)
