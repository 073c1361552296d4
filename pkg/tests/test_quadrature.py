import math

import numpy as np
import pytest

from nessmix.core import Interval
from nessmix.errors import ConfigError, DivergentIntegral, QuadratureFailure
from nessmix.quadrature import QuadratureSpec, integrate_log_batch, log_cumulative, quadrature


def test_beta22_normalization():
    val = quadrature(lambda x: np.log(6 * x * (1 - x)), Interval(0.0, 1.0))
    assert val == pytest.approx(0.0, abs=1e-10)


def test_endpoint_singularity():
    val = quadrature(lambda x: -0.5 * np.log(x), Interval(0.0, 1.0))
    assert val == pytest.approx(math.log(2.0), abs=1e-9)


def test_constant():
    assert quadrature(lambda x: np.zeros_like(x), Interval(1.0, 3.0)) == pytest.approx(math.log(2.0))


def test_batch_rows_and_empty_rows():
    lo = np.array([0.0, 1.0, 2.0])
    hi = np.array([1.0, 3.0, 2.0])
    out = integrate_log_batch(lambda x, dlo, dhi, rows: np.log(x + 1.0), lo, hi)
    assert out[0] == pytest.approx(math.log(1.5))
    assert out[1] == pytest.approx(math.log(6.0))
    assert out[2] == -math.inf


def test_exact_width_resolves_tiny_intervals():
    # (dlo * dhi)^(-1/2) over an interval of width 1e-12 placed at 3.0
    w = 1e-12

    def f(x, dlo, dhi, rows):
        return -0.5 * (np.log(dlo) + np.log(dhi))

    out = integrate_log_batch(f, [3.0], [3.0 + w], 1e-10, 12, [w])
    assert out[0] == pytest.approx(math.log(math.pi), abs=1e-8)


def test_log_domain_underflow():
    # e^{-2000} scale integrand: exact answer is -2000 + log 1
    out = integrate_log_batch(lambda x, dlo, dhi, rows: np.full(x.shape, -2000.0), [0.0], [1.0])
    assert out[0] == pytest.approx(-2000.0)


def test_log_cumulative():
    with np.errstate(divide="ignore"):
        out = log_cumulative(lambda x, dlo, dhi, rows: np.log(2 * (1 - x)), [0.0, 0.0], [0.5, 1.0])
    np.testing.assert_allclose(np.exp(out), [0.75, 1.0], rtol=1e-10)


def test_divergent():
    with pytest.raises(DivergentIntegral):
        quadrature(lambda x: -np.log(x), Interval(0.0, 1.0))
    with pytest.raises(DivergentIntegral):
        integrate_log_batch(lambda x, dlo, dhi, rows: np.full(x.shape, np.nan), [0.0], [1.0])


def test_failure_when_levels_exhausted():
    # highly oscillating integrand cannot converge in 3 levels at 1e-14
    with pytest.raises(QuadratureFailure):
        integrate_log_batch(lambda x, dlo, dhi, rows: np.log(2 + np.sin(200 * x)),
                            [0.0], [1.0], 1e-14, 3)


def test_spec_validation():
    with pytest.raises(ConfigError):
        QuadratureSpec(rel_tol=0)
    with pytest.raises(ConfigError):
        QuadratureSpec(max_levels=1)
    with pytest.raises(ConfigError):
        QuadratureSpec(method="gauss")
    assert QuadratureSpec().with_tol(1e-6).rel_tol == 1e-6
    with pytest.raises(ConfigError):
        integrate_log_batch(lambda *a: 0.0, [1.0], [0.0])
