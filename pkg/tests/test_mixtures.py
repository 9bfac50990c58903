import math

import numpy as np
import pytest

from gakde.density import DataSet, SparseKde, sparse_kde_from_chromosome, uniform_beta
from gakde.errors import InvalidArgumentError, UnsupportedDimensionError
from gakde.ga import make_rng
from gakde.mixtures import (
    GaussianComponent,
    GaussianMixture,
    builtin_mixture,
    ise_exact,
    ise_numeric,
    ise_terms,
    mixture_pdf,
    mixture_sample,
)

from oracles import nested_trapezoid


def test_type_c_parameters():
    m = builtin_mixture("type_c")
    np.testing.assert_allclose(m.weights, [0.2, 0.2, 0.6])
    c3 = m.components[2]
    np.testing.assert_allclose(c3.mean, [13 / 12, 13 / 12])
    np.testing.assert_allclose(np.diag(c3.cov), [(5 / 9) ** 2] * 2)
    assert c3.cov[0, 1] == 0.0


def test_type_l_parameters():
    m = builtin_mixture("type_l")
    np.testing.assert_allclose(m.weights, [1 / 8, 3 / 8, 1 / 8, 3 / 8])
    rho = [c.cov[0, 1] / math.sqrt(c.cov[0, 0] * c.cov[1, 1]) for c in m.components]
    np.testing.assert_allclose(rho, [2 / 5, 3 / 5, -7 / 10, -1 / 2], rtol=1e-14)
    np.testing.assert_allclose([c.mean for c in m.components], [[-1, 1], [-1, 1], [-1, 1], [1, 1]])


def test_type_c_3d_parameters():
    m = builtin_mixture("type_c_3d")
    assert m.dim == 3
    np.testing.assert_allclose([c.mean for c in m.components], [[0] * 3, [0.5] * 3, [13 / 12] * 3])
    for c in m.components:
        assert np.count_nonzero(c.cov - np.diag(np.diag(c.cov))) == 0


def test_type_c_mean_by_hand():
    m = builtin_mixture("type_c")
    np.testing.assert_allclose(m.mean(), [0.2 * 0 + 0.2 * 0.5 + 0.6 * 13 / 12] * 2)


def test_unknown_mixture():
    with pytest.raises(InvalidArgumentError):
        builtin_mixture("type_z")


def test_invalid_components():
    with pytest.raises(InvalidArgumentError):
        GaussianComponent(1.0, [0, 0], [[1, 0], [0, 0]])
    with pytest.raises(InvalidArgumentError):
        GaussianMixture((GaussianComponent(0.5, [0], [[1]]),))


def test_pdf_standard_normal_origin():
    m = GaussianMixture((GaussianComponent(1.0, [0, 0], np.eye(2)),))
    assert mixture_pdf(m, [0, 0]) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


@pytest.mark.parametrize("name", ["type_c", "type_l"])
def test_pdf_integrates_to_one(name):
    m = builtin_mixture(name)
    lo, hi = m.mean() - 8, m.mean() + 8
    assert nested_trapezoid(lambda x: mixture_pdf(m, x), lo, hi, 241) == pytest.approx(1.0, abs=1e-4)


def test_pdf_tail_ordering():
    m = builtin_mixture("type_c")
    assert mixture_pdf(m, [13 / 12, 13 / 12]) > mixture_pdf(m, [5.0, 5.0])


def test_sample_moments_and_occupancy():
    m = builtin_mixture("type_c")
    n = 100_000
    rng = make_rng(2024)
    ds = mixture_sample(m, n, rng)
    se = np.sqrt(np.diag(m.cov()) / n)
    assert np.all(np.abs(ds.points.mean(axis=0) - m.mean()) < 3 * se)
    # component occupancy via the same label draw the sampler makes first
    labels = make_rng(2024).choice(3, size=n, p=m.weights)
    for k, w in enumerate(m.weights):
        assert abs(np.mean(labels == k) - w) < 3 * math.sqrt(w * (1 - w) / n)


def test_sample_deterministic():
    m = builtin_mixture("type_l")
    a = mixture_sample(m, 50, make_rng(5)).points
    b = mixture_sample(m, 50, make_rng(5)).points
    assert np.array_equal(a, b)


def test_ise_zero_when_estimator_equals_truth():
    m = GaussianMixture((GaussianComponent(1.0, [0, 0], np.eye(2)),))
    kde = sparse_kde_from_chromosome(DataSet(np.zeros((1, 2))), [0], [1.0], 1.0)
    assert ise_exact(kde, None, m) == pytest.approx(0.0, abs=1e-15)
    assert ise_numeric(kde, None, m, 200) < 1e-10


def test_ise_dimension_mismatch():
    kde = sparse_kde_from_chromosome(DataSet(np.zeros((1, 3))), [0], [1.0], 1.0)
    with pytest.raises(InvalidArgumentError):
        ise_exact(kde, None, builtin_mixture("type_c"))


def test_ise_numeric_rejects_high_dim():
    m = GaussianMixture((GaussianComponent(1.0, np.zeros(4), np.eye(4)),))
    kde = sparse_kde_from_chromosome(DataSet(np.zeros((1, 4))), [0], [1.0], 1.0)
    with pytest.raises(UnsupportedDimensionError):
        ise_numeric(kde, None, m, 20)


def _random_kde(rng, m, b=6, h=0.4):
    ds = mixture_sample(m, 40, rng)
    return ds, sparse_kde_from_chromosome(ds, rng.integers(0, 40, size=b), uniform_beta(b), h)


def test_ise_exact_vs_fine_grid():
    rng = make_rng(11)
    m = builtin_mixture("type_c")
    ds, kde = _random_kde(rng, m)
    exact = ise_exact(kde, ds, m)
    assert exact >= 0
    assert ise_numeric(kde, ds, m, 400) == pytest.approx(exact, abs=1e-6)


def test_ise_terms_each_match_quadrature():
    rng = make_rng(12)
    m = builtin_mixture("type_c")
    ds, kde = _random_kde(rng, m)
    fhat2, cross, f2 = ise_terms(kde, m)
    lo, hi = m.mean() - 9, m.mean() + 9
    q = lambda f: nested_trapezoid(f, lo, hi, 301)
    assert q(lambda x: kde(x) ** 2) == pytest.approx(fhat2, abs=1e-6)
    assert q(lambda x: kde(x) * mixture_pdf(m, x)) == pytest.approx(cross, abs=1e-6)
    assert q(lambda x: mixture_pdf(m, x) ** 2) == pytest.approx(f2, abs=1e-6)


def test_ise_numeric_at_least_second_order():
    # trapezoid on Gaussian integrands converges faster than h^2; each doubling must gain >= 4x
    m = builtin_mixture("type_c")
    ds = mixture_sample(m, 40, make_rng(13))
    kde = sparse_kde_from_chromosome(ds, np.arange(10), uniform_beta(10), 0.5)
    exact = ise_exact(kde, ds, m)
    errs = [abs(ise_numeric(kde, ds, m, n) - exact) for n in (17, 33, 65)]
    assert errs[0] / errs[1] >= 4 and errs[1] / errs[2] >= 4
    assert errs[2] < 1e-6


def test_ise_numeric_grid_stability_type_l():
    m = builtin_mixture("type_l")
    ds, kde = _random_kde(make_rng(14), m)
    assert abs(ise_numeric(kde, ds, m, 200) - ise_numeric(kde, ds, m, 400)) < 1e-6


def test_ise_nonnegative_random():
    rng = make_rng(15)
    for name in ("type_c", "type_l", "type_c_3d"):
        m = builtin_mixture(name)
        for _ in range(10):
            ds, kde = _random_kde(rng, m, b=int(rng.integers(1, 8)), h=float(rng.uniform(0.05, 2)))
            assert ise_exact(kde, ds, m) >= 0
