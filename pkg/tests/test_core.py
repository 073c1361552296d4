import math

import numpy as np
import pytest

from nessmix import errors
from nessmix.closed_forms import DirichletFamily, OrderStatsFamily, orderstats_factors
from nessmix.core import (
    DECREASING,
    INCREASING,
    BoundaryPair,
    interior_mask,
    limiting_boundary,
    log_conditional_split,
    log_first_marginal,
    log_joint_from_factors,
    log_last_marginal,
    make_boundary,
    support_mask,
    validate_ordered,
)
from nessmix.kernels import exp_kernel
from nessmix.recursion import build_factors


def test_error_hierarchy():
    assert issubclass(errors.ConfigError, errors.NessMixError)
    assert issubclass(errors.NumericError, errors.NessMixError)
    for cls in (errors.NonPositiveBoundary, errors.DegenerateInterval, errors.OutOfSupport,
                errors.LevelExceeded, errors.IndexOutOfRange, errors.BoxExceeded,
                errors.KernelRejected):
        assert issubclass(cls, errors.ConfigError)
    for cls in (errors.QuadratureFailure, errors.DivergentIntegral, errors.InversionFailure,
                errors.EmptySupport):
        assert issubclass(cls, errors.NumericError)


class TestBoundary:
    def test_increasing(self):
        bd = make_boundary(1.0, 3.0)
        iv = bd.interval
        assert (iv.lo, iv.hi, iv.orientation) == (1.0, 3.0, INCREASING)
        assert bd.increasing

    def test_decreasing(self):
        iv = make_boundary(3.0, 1.0).interval
        assert (iv.lo, iv.hi, iv.orientation) == (1.0, 3.0, DECREASING)

    def test_degenerate(self):
        with pytest.raises(errors.DegenerateInterval):
            make_boundary(2.0, 2.0)

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 2.0), (1.0, math.inf), (math.nan, 1.0)])
    def test_nonpositive(self, a, b):
        with pytest.raises(errors.NonPositiveBoundary):
            make_boundary(a, b)

    def test_limiting_admits_zero(self):
        bd = limiting_boundary(0.0, 1.0)
        assert bd.limiting and bd.interval.width == 1.0
        with pytest.raises(errors.NonPositiveBoundary):
            limiting_boundary(-0.1, 1.0)

    def test_swapped_and_iter(self):
        bd = make_boundary(1.0, 3.0)
        assert tuple(bd.swapped()) == (3.0, 1.0)
        assert bd.swapped().swapped() == bd


class TestValidateOrdered:
    def test_increasing(self):
        tup = validate_ordered(make_boundary(0.5, 1.5), [0.7, 1.1])
        assert tup.values == (0.7, 1.1) and len(tup) == 2

    def test_decreasing(self):
        tup = validate_ordered(make_boundary(1.5, 0.5), [1.1, 0.7])
        assert tup.as_array().tolist() == [1.1, 0.7]

    @pytest.mark.parametrize("vals", [[1.1, 0.7], [0.5, 1.0], [0.7, 0.7], [0.7, 1.6], []])
    def test_rejects(self, vals):
        with pytest.raises(errors.OutOfSupport):
            validate_ordered(make_boundary(0.5, 1.5), vals)


def test_masks():
    theta = np.array([[0.2, 0.5], [0.5, 0.2], [0.0, 0.5]])
    assert support_mask(0.0, 1.0, theta).tolist() == [True, False, False]
    assert support_mask(1.0, 0.0, theta).tolist() == [False, True, False]
    assert interior_mask(0.0, 1.0, np.array([0.0, 0.5, 1.0])).tolist() == [False, True, False]
    # exact distances decide strictness when x rounds onto an endpoint
    assert bool(interior_mask(1.0, 2.0, 1.0, dl=1e-300, dr=1.0))
    assert not bool(interior_mask(1.0, 2.0, 1.0, dl=0.0, dr=1.0))


class TestFactorEvaluation:
    def test_orderstats_joint(self, unit):
        val = log_joint_from_factors(orderstats_factors(4), unit, [0.3, 0.7])
        assert val == pytest.approx(math.log(2.0), abs=1e-14)

    def test_dirichlet_joint(self, unit):
        fam = DirichletFamily(2.0)
        val = log_joint_from_factors(fam.factors, unit, [0.5])
        assert val == pytest.approx(math.log(1.5), abs=1e-14)

    def test_exp_kernel_joint(self, unit):
        # f_1(a, b) = e^{b-a}/(b-a) for g = e^{-|x-y|}
        factors = build_factors(exp_kernel(1.0), 2, box=(0.0, 2.0))
        val = log_joint_from_factors(factors, unit, [0.5])
        assert val == pytest.approx(0.0, abs=1e-9)

    def test_out_of_support_is_neg_inf(self, unit):
        assert log_joint_from_factors(orderstats_factors(4), unit, [0.7, 0.3]) == -math.inf

    def test_first_last_marginal(self, unit, b13):
        fac = orderstats_factors(4)
        assert float(log_first_marginal(fac, 2, unit, 0.3)) == pytest.approx(math.log(1.4))
        assert float(log_first_marginal(fac, 1, b13, 2.0)) == pytest.approx(math.log(0.5))
        assert float(log_last_marginal(fac, 2, unit, 0.3)) == pytest.approx(math.log(0.6))
        assert float(log_first_marginal(fac, 2, unit, 1.3)) == -math.inf

    def test_last_marginal_dirichlet(self, unit):
        fam = DirichletFamily(2.0)
        assert float(fam.log_last_marginal(1, 0.0, 1.0, 0.5)) == pytest.approx(math.log(1.5))

    def test_conditional_split(self, unit):
        fam = OrderStatsFamily()
        val = log_conditional_split(fam, unit, [0.2, 0.5, 0.9], 2)
        assert val == pytest.approx(math.log(4.0))
        # j = n reduces to the (n-1)-site joint on (a, θ_n)
        end = log_conditional_split(fam, unit, [0.2, 0.5, 0.9], 3)
        assert end == pytest.approx(float(fam.log_joint(2, 0.0, 0.9, np.array([0.2, 0.5]))))

    def test_conditional_split_dirichlet(self, unit):
        val = log_conditional_split(DirichletFamily(2.0), unit, [0.25, 0.75], 1)
        assert math.exp(val) == pytest.approx(6.0 / 0.75**3 * 0.5 * 0.25, rel=1e-12)
        assert math.exp(val) == pytest.approx(1.7777777777777777, rel=1e-12)

    def test_split_index_range(self, unit):
        with pytest.raises(errors.IndexOutOfRange):
            OrderStatsFamily().log_conditional_split(2, 3, 0.0, 1.0, np.array([0.2, 0.5]))

    def test_level_exceeded(self):
        with pytest.raises(errors.LevelExceeded):
            OrderStatsFamily(max_level=2).log_joint(3, 0.0, 1.0, np.array([0.1, 0.2, 0.3]))


def test_boundary_pair_equality_ignores_limiting():
    assert BoundaryPair(1.0, 2.0) == BoundaryPair(1.0, 2.0, limiting=True)
