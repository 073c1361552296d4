import math

import numpy as np
import pytest

from nessmix.closed_forms import DirichletFamily, OrderStatsFamily
from nessmix.core import limiting_boundary, make_boundary
from nessmix.errors import ConfigError, EmptySupport, IndexOutOfRange
from nessmix.kernels import exp_kernel, power_kernel
from nessmix.quadrature import QuadratureSpec
from nessmix.recursion import RecursionFamily
from nessmix.transition import (
    MarginalFunction,
    discrete_fixed_point_residual,
    discrete_lower,
    discrete_raise,
    family_marginal,
    first_marginal,
    last_marginal,
    lower,
    marginal_by_lowering,
    marginal_by_propagation,
    numeric_support,
    raise_,
)

OS = OrderStatsFamily()


class TestOperators:
    def test_raise_examples(self, unit):
        f = first_marginal(OS, 2, unit)
        p = raise_(OS, 2, 1, f)
        assert p.i == 2
        np.testing.assert_allclose(p(np.array([0.5, 0.25])), [1.0, 0.5], rtol=1e-10)

    def test_lower_example(self, unit):
        q = lower(OS, 2, 2, last_marginal(OS, 2, unit))
        assert q.i == 1
        assert float(q(0.3)) == pytest.approx(1.4, rel=1e-10)

    def test_propagation_interior(self, unit):
        m = marginal_by_propagation(OS, 3, 2, unit)
        assert float(m(0.5)) == pytest.approx(1.5, rel=1e-10)
        assert marginal_by_propagation(OS, 3, 1, unit).label == first_marginal(OS, 3, unit).label

    @pytest.mark.parametrize("s", [0.5, 2.5])
    def test_propagation_matches_closed_form(self, s):
        fam = DirichletFamily(s)
        bd = make_boundary(3.0, 1.0)
        x = np.linspace(1.1, 2.9, 9)
        for i in (2, 3):
            up = marginal_by_propagation(fam, 3, i, bd)
            down = marginal_by_lowering(fam, 3, i, bd)
            ref = fam.log_marginal(3, i, 3.0, 1.0, x)
            np.testing.assert_allclose(up.log_pdf(x), ref, atol=1e-8)
            np.testing.assert_allclose(down.log_pdf(x), ref, atol=1e-8)

    def test_recursion_family_propagation(self, b12):
        fam = RecursionFamily(exp_kernel(1.0), 3)
        m = marginal_by_propagation(fam, 3, 3, b12)
        ref = last_marginal(fam, 3, b12)
        x = np.linspace(1.05, 1.95, 7)
        np.testing.assert_allclose(m.log_pdf(x), ref.log_pdf(x), atol=1e-9)

    @pytest.mark.parametrize("s", [1.0, 2.0])
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_fixed_point(self, s, n):
        fam = DirichletFamily(s)
        bd = make_boundary(1.0, 2.5)
        f = first_marginal(fam, n, bd)
        back = lower(fam, n, 2, raise_(fam, n, 1, f))
        x = np.linspace(1.0, 2.5, 52)[1:-1]
        assert np.max(np.abs(back(x) - f(x))) < 1e-6

    def test_tag_and_index_checks(self, unit):
        f = first_marginal(OS, 3, unit)
        with pytest.raises(ConfigError):
            raise_(OS, 3, 2, f)
        with pytest.raises(ConfigError):
            raise_(OS, 4, 1, f)
        with pytest.raises(IndexOutOfRange):
            raise_(OS, 3, 3, family_marginal(OS, 3, 3, unit))
        with pytest.raises(IndexOutOfRange):
            lower(OS, 3, 1, f)
        with pytest.raises(IndexOutOfRange):
            family_marginal(OS, 3, 4, unit)


class TestMarginalFunction:
    def test_mass_cdf_and_outside(self, b13):
        f = family_marginal(DirichletFamily(0.5), 3, 2, b13)
        assert f.mass() == pytest.approx(1.0, abs=1e-9)
        assert float(f.cdf(3.0)) == pytest.approx(1.0, abs=1e-9)
        assert float(f.cdf(1.0)) == 0.0
        assert f.log_pdf(np.array([0.5, 3.5])).tolist() == [-math.inf, -math.inf]
        assert "n=3" in repr(f)

    def test_decreasing_cdf_runs_along_axis(self):
        f = first_marginal(OS, 1, make_boundary(3.0, 1.0))
        assert float(f.cdf(2.0)) == pytest.approx(0.5, rel=1e-10)


def _signed_parts(boundary):
    """f(y) = sin³(2π (y - lo)/w) split into its positive and negative parts.

    The cube keeps both parts smooth at the sign changes, which tanh-sinh
    needs to converge at a useful rate.
    """
    iv = boundary.interval

    def part(sign):
        def log_fn(x, dl, dr, tol):
            v = sign * np.sin(2 * np.pi * (x - iv.lo) / iv.width) ** 3
            with np.errstate(divide="ignore"):
                return np.where(v > 0, np.log(np.abs(v)), -np.inf)
        return log_fn

    return part(1.0), part(-1.0)


@pytest.mark.parametrize("family,n", [(OS, 3), (DirichletFamily(2.0), 3)])
def test_l1_contraction(family, n):
    bd = make_boundary(1.0, 2.0)
    pos, neg = _signed_parts(bd)
    x = 1.0 + (np.arange(800) + 0.5) / 800
    h = 1.0 / 800
    f_l1 = 4.0 / (3.0 * math.pi)  # ∫ |sin³ 2πu| du over a unit interval
    quad = QuadratureSpec(rel_tol=1e-5)
    for op, i in ((raise_, 1), (lower, 2)):
        fp = MarginalFunction(pos, n, i, bd, quad)
        fm = MarginalFunction(neg, n, i, bd, quad)
        assert fp.mass() == pytest.approx(f_l1 / 2, rel=1e-5)
        gp, gm = op(family, n, i, fp)(x), op(family, n, i, fm)(x)
        # nonnegative parts keep their mass (midpoint rule on the grid)
        assert np.sum(gp) * h == pytest.approx(f_l1 / 2, rel=1e-4)
        assert np.sum(gm) * h == pytest.approx(f_l1 / 2, rel=1e-4)
        assert np.sum(np.abs(gp - gm)) * h <= f_l1 + 1e-4


def test_l1_contraction_dense(b12):
    x = np.linspace(1.0, 2.0, 512)
    h = x[1] - x[0]
    f = np.sin(2 * np.pi * (x - 1.0))
    l1 = np.sum(np.abs(f)) * h
    for fam in (OS, DirichletFamily(2.0)):
        up = discrete_raise(fam, 3, 1, f, b12)
        down = discrete_lower(fam, 3, 2, f, b12)
        assert np.sum(np.abs(up)) * h <= l1 + 1e-6
        assert np.sum(np.abs(down)) * h <= l1 + 1e-6


class TestSupport:
    def test_order_stats(self, unit):
        iv = numeric_support(first_marginal(OS, 3, unit))
        cell = 1.0 / 1024
        assert iv.lo <= 2 * cell and iv.hi >= 1 - 2 * cell

    def test_dirichlet_s3_threshold0(self, b12):
        f = first_marginal(DirichletFamily(3.0), 2, b12)
        iv = numeric_support(f, threshold=0.0)
        cell = 1.0 / 1024
        assert iv.lo - 1.0 <= 2 * cell and 2.0 - iv.hi <= 2 * cell

    def test_default_threshold_trims_vanishing_ends(self, b12):
        f = first_marginal(DirichletFamily(3.0), 2, b12)
        assert 2.0 - numeric_support(f).hi > 2.0 / 1024

    def test_step_and_empty(self, unit):
        step = MarginalFunction(lambda x, dl, dr, tol: np.where(x > 0.5, 0.0, -np.inf), 1, 1, unit)
        iv = numeric_support(step, grid_size=64)
        assert iv.lo == pytest.approx(0.5 + 0.5 / 64)
        zero = MarginalFunction(lambda x, dl, dr, tol: np.full(x.shape, -np.inf), 1, 1, unit)
        with pytest.raises(EmptySupport):
            numeric_support(zero)
        with pytest.raises(ConfigError):
            numeric_support(first_marginal(OS, 1, unit), grid_size=8)


class TestDense:
    def test_fixed_point_bounded_density(self, b12):
        assert discrete_fixed_point_residual(DirichletFamily(2.0), 3, b12) < 1e-3
        assert discrete_fixed_point_residual(OS, 2, b12) < 1e-5

    def test_dense_matches_lazy(self, unit):
        x = np.linspace(0.0, 1.0, 512)
        f0 = 2 * (1 - x)
        up = discrete_raise(OS, 2, 1, f0, unit)
        np.testing.assert_allclose(up[1:-1], 2 * x[1:-1], atol=1e-10)
        down = discrete_lower(OS, 2, 2, up, unit)
        np.testing.assert_allclose(down[1:-1], f0[1:-1], atol=1e-5)

    def test_power_kernel_family(self):
        fam = RecursionFamily(power_kernel(2.0), 3)
        assert discrete_fixed_point_residual(fam, 3, limiting_boundary(1.0, 3.0)) < 1e-3
