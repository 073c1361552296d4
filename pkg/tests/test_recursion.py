import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gammaln

from nessmix.closed_forms import DirichletFamily
from nessmix.core import make_boundary
from nessmix.errors import BoxExceeded, ConfigError, IndexOutOfRange, KernelRejected, LevelExceeded
from nessmix.kernels import distance_kernel, exp_kernel, expression_kernel, power_kernel
from nessmix.quadrature import QuadratureSpec
from nessmix.recursion import RecursionFamily, build_factors, f_next


def _f(factors, n, a, b):
    return math.exp(float(factors.log_f(n, a, b)))


class TestFactors:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_order_stats_generator(self, n):
        fac = build_factors(power_kernel(1.0), 4, box=(0.0, 2.0))
        assert _f(fac, n, 0.0, 1.0) == pytest.approx(math.factorial(n), rel=1e-8)

    def test_dirichlet_s2(self):
        fac = build_factors(power_kernel(2.0), 3, box=(0.5, 4.0))
        assert _f(fac, 3, 1.0, 2.0) == pytest.approx(5040.0, rel=1e-6)

    def test_dirichlet_f2_unit(self):
        # Γ(6)/1 = 120 with the box reaching down to 0
        fac = build_factors(power_kernel(2.0), 2, box=(0.0, 1.0))
        assert _f(fac, 2, 0.0, 1.0) == pytest.approx(120.0, rel=1e-8)

    def test_exp_kernel_oracle(self):
        fac = build_factors(exp_kernel(1.0), 3, box=(0.0, 2.0))
        assert _f(fac, 1, 0.0, 1.0) == pytest.approx(math.e, rel=1e-9)
        assert _f(fac, 2, 0.0, 1.0) == pytest.approx(2 * math.e, rel=1e-9)
        assert _f(fac, 3, 0.0, 1.0) == pytest.approx(6 * math.e, rel=1e-9)

    def test_cache_matches_direct_nested_quadrature(self):
        g = distance_kernel("exp(-r^2)")
        quad = QuadratureSpec(rel_tol=1e-10)
        cached = build_factors(g, 3, quad, box=(0.5, 4.0))
        direct = build_factors(g, 3, quad, box=(0.5, 4.0), cache=False)
        a = np.array([0.7, 1.0, 3.9, 2.0])
        b = np.array([3.1, 2.0, 0.6, 2.001])
        for n in (1, 2, 3):
            np.testing.assert_allclose(cached.log_f(n, a, b), direct.log_f(n, a, b),
                                       rtol=0, atol=1e-7)

    def test_direct_matches_scipy(self):
        g = distance_kernel("exp(-r^2)")
        fac = build_factors(g, 1, box=(0.5, 4.0), cache=False)
        ref, _ = integrate.quad(lambda x: math.exp(-(2.5 - x) ** 2 - (x - 1.0) ** 2), 1.0, 2.5,
                                epsabs=0, epsrel=1e-13)
        assert float(fac.log_Z(1, 1.0, 2.5)) == pytest.approx(math.log(ref), abs=1e-10)

    def test_f_symmetric(self):
        fac = build_factors(expression_kernel("x*y + abs(x-y)"), 3, box=(0.5, 4.0))
        a = np.linspace(0.6, 3.8, 9)
        b = a[::-1] + 0.05
        for n in (1, 2, 3):
            np.testing.assert_allclose(fac.log_f(n, a, b), fac.log_f(n, b, a), rtol=1e-14)

    def test_f_next_step(self):
        # f_2 of order statistics from f_1 = 1/|b-a| and h_1 = 1
        bd = make_boundary(1.0, 3.0)
        val = f_next(lambda b, x, d: -np.log(d), lambda x, a, d: np.zeros_like(x), bd)
        assert math.exp(val) == pytest.approx(2.0 / 4.0, rel=1e-10)

    @pytest.mark.parametrize("s", [0.5, 3.5])
    def test_matches_dirichlet_closed_form(self, s):
        fac = build_factors(power_kernel(s), 4, box=(0.5, 4.0))
        rng = np.random.default_rng(1)
        a, b = rng.uniform(0.5, 4.0, 40), rng.uniform(0.5, 4.0, 40)
        for n in range(1, 5):
            ref = gammaln(s * (n + 1)) - (s * (n + 1) - 1) * np.log(np.abs(b - a))
            np.testing.assert_allclose(fac.log_f(n, a, b), ref, rtol=0, atol=1e-9)


class TestFamily:
    def test_marginals_normalize(self):
        fam = RecursionFamily(distance_kernel("exp(-r^2)"), 3, box=(0.5, 4.0))
        for i in (1, 2, 3):
            val, _ = integrate.quad(lambda x: math.exp(fam.log_marginal(3, i, 1.0, 3.0, x)),
                                    1.0, 3.0, epsabs=1e-12)
            assert val == pytest.approx(1.0, abs=1e-8)

    def test_power_family_matches_closed_form_marginal(self):
        fam = RecursionFamily(power_kernel(2.0), 3)
        ref = DirichletFamily(2.0)
        x = np.linspace(1.05, 2.95, 11)
        for i in (1, 2, 3):
            np.testing.assert_allclose(fam.log_marginal(3, i, 1.0, 3.0, x),
                                       ref.log_marginal(3, i, 1.0, 3.0, x), atol=1e-9)

    def test_joint_symmetry(self):
        fam = RecursionFamily(distance_kernel("exp(-r^2)"), 3)
        theta = np.array([1.2, 1.9, 2.4])
        assert fam.log_joint(3, 1.0, 3.0, theta) == pytest.approx(
            fam.log_joint(3, 3.0, 1.0, theta[::-1]), abs=1e-12)

    def test_errors(self):
        fam = RecursionFamily(exp_kernel(1.0), 2, box=(1.0, 3.0))
        with pytest.raises(LevelExceeded):
            fam.log_joint(3, 1.0, 2.0, np.array([1.2, 1.4, 1.6]))
        with pytest.raises(BoxExceeded):
            fam.log_Z(1, 0.5, 2.0)
        with pytest.raises(IndexOutOfRange):
            fam.log_marginal(2, 3, 1.0, 2.0, 1.5)
        with pytest.raises(ConfigError):
            build_factors(exp_kernel(1.0), 0)
        with pytest.raises(ConfigError):
            build_factors(exp_kernel(1.0), 2, box=(3.0, 1.0))
        with pytest.raises(KernelRejected):
            RecursionFamily(distance_kernel("r^(-2)"), 2)

    def test_describe(self):
        fam = RecursionFamily(exp_kernel(2.0), 2)
        info = fam.describe()
        assert info["kind"] == "recursion" and info["g"]["rate"] == 2.0 and info["max_level"] == 2
