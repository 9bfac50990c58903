"""
Gaussian-mixture ground truths, sampling and integrated squared error.

The built-in mixtures are the skewed (``type_c``) and quadrimodal (``type_l``)
bivariate normal mixtures of Wand & Jones (1993) and a trivariate skewed
analogue (``type_c_3d``).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction as F
from typing import Tuple

import numpy as np

from .density import DataSet, SparseKde
from .errors import InvalidArgumentError, UnsupportedDimensionError

BUILTIN_MIXTURES = ("type_c", "type_l", "type_c_3d")


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise InvalidArgumentError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise InvalidArgumentError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0:
            raise InvalidArgumentError("covariance must be positive definite")
        if not self.weight > 0:
            raise InvalidArgumentError("component weight must be positive")
        for arr in (mean, cov):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class GaussianMixture:
    components: Tuple[GaussianComponent, ...]
    name: str = "custom"

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidArgumentError("mixture needs at least one component")
        if len({c.dim for c in comps}) != 1:
            raise InvalidArgumentError("all components must share one dimension")
        if abs(math.fsum(c.weight for c in comps) - 1.0) > 1e-12:
            raise InvalidArgumentError("component weights must sum to 1")
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def mean(self) -> np.ndarray:
        return sum(c.weight * c.mean for c in self.components)

    def cov(self) -> np.ndarray:
        mu = self.mean()
        return sum(c.weight * (c.cov + np.outer(c.mean - mu, c.mean - mu)) for c in self.components)


def _bivariate(mx, my, vx, vy, rho) -> Tuple[np.ndarray, np.ndarray]:
    c = float(rho) * math.sqrt(float(vx) * float(vy))
    return np.array([float(mx), float(my)]), np.array([[float(vx), c], [c, float(vy)]])


def _component(w, mean_cov) -> GaussianComponent:
    mean, cov = mean_cov
    return GaussianComponent(float(w), mean, cov)


def builtin_mixture(name: str) -> GaussianMixture:
    if name == "type_c":
        comps = [
            _component(F(1, 5), _bivariate(0, 0, 1, 1, 0)),
            _component(F(1, 5), _bivariate(F(1, 2), F(1, 2), F(2, 3) ** 2, F(2, 3) ** 2, 0)),
            _component(F(3, 5), _bivariate(F(13, 12), F(13, 12), F(5, 9) ** 2, F(5, 9) ** 2, 0)),
        ]
    elif name == "type_l":
        v = F(2, 3) ** 2
        comps = [
            _component(F(1, 8), _bivariate(-1, 1, v, v, F(2, 5))),
            _component(F(3, 8), _bivariate(-1, 1, v, v, F(3, 5))),
            _component(F(1, 8), _bivariate(-1, 1, v, v, F(-7, 10))),
            _component(F(3, 8), _bivariate(1, 1, v, v, F(-1, 2))),
        ]
    elif name == "type_c_3d":
        comps = [
            GaussianComponent(0.2, np.zeros(3), np.eye(3)),
            GaussianComponent(0.2, np.full(3, 0.5), np.eye(3) * float(F(2, 3) ** 2)),
            GaussianComponent(0.6, np.full(3, 13 / 12), np.eye(3) * float(F(5, 9) ** 2)),
        ]
    else:
        raise InvalidArgumentError(f"unknown mixture {name!r}; choose from {', '.join(BUILTIN_MIXTURES)}")
    return GaussianMixture(tuple(comps), name=name)


def _mvn_pdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Normal density at the rows of ``x`` (M x d)."""
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise InvalidArgumentError("covariance is singular or not positive definite") from exc
    d = mean.size
    z = np.linalg.solve(chol, (x - mean).T)
    log_det = 2.0 * np.sum(np.log(np.diag(chol)))
    return np.exp(-0.5 * np.sum(z * z, axis=0) - 0.5 * (d * math.log(2 * math.pi) + log_det))


def mixture_pdf(m: GaussianMixture, x) -> np.ndarray | float:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != m.dim:
        raise InvalidArgumentError(f"point dimension {x.shape[1]} != mixture dimension {m.dim}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("evaluation points must be finite")
    out = sum(c.weight * _mvn_pdf(x, c.mean, c.cov) for c in m.components)
    return float(out[0]) if single else out


def mixture_sample(m: GaussianMixture, n: int, rng: np.random.Generator) -> DataSet:
    """Draw ``n`` points: a component label per point, then a Cholesky-transformed normal."""
    if n < 1:
        raise InvalidArgumentError("sample size must be >= 1")
    labels = rng.choice(len(m.components), size=n, p=m.weights)
    z = rng.standard_normal((n, m.dim))
    out = np.empty((n, m.dim))
    for k, c in enumerate(m.components):
        sel = labels == k
        out[sel] = c.mean + z[sel] @ np.linalg.cholesky(c.cov).T
    return DataSet(out)


def _check_dims(kde: SparseKde, m: GaussianMixture):
    if kde.dim != m.dim:
        raise InvalidArgumentError(f"estimator dimension {kde.dim} != mixture dimension {m.dim}")


def ise_terms(kde: SparseKde, m: GaussianMixture) -> Tuple[float, float, float]:
    """``(int fhat^2, int fhat f, int f^2)`` in closed form."""
    _check_dims(kde, m)
    d = m.dim
    h2 = kde.h_star ** 2
    fhat2 = kde.squared_integral()
    cross = math.fsum(
        c.weight * float(kde.gamma @ _mvn_pdf(kde.points, c.mean, c.cov + h2 * np.eye(d)))
        for c in m.components
    )
    f2 = math.fsum(
        a.weight * b.weight * float(_mvn_pdf(a.mean[None, :], b.mean, a.cov + b.cov)[0])
        for a, b in itertools.product(m.components, repeat=2)
    )
    return fhat2, cross, f2


def ise_exact(kde: SparseKde, data: DataSet | None, m: GaussianMixture) -> float:
    """Exact integrated squared error between a sparse KDE and a mixture.

    ``data`` is accepted for interface symmetry; the estimator already carries
    its support coordinates.
    """
    if data is not None and data.dim != kde.dim:
        raise InvalidArgumentError("data and estimator dimensions differ")
    fhat2, cross, f2 = ise_terms(kde, m)
    # clamp the rounding floor; the true value is a square integral
    return max(fhat2 - 2.0 * cross + f2, 0.0)


def quadrature_box(kde: SparseKde, m: GaussianMixture, pad: float = 6.0) -> Tuple[np.ndarray, np.ndarray]:
    sd_max = max(math.sqrt(float(np.linalg.eigvalsh(c.cov).max())) for c in m.components)
    centre = m.mean()
    lo_pts = np.vstack([kde.points, np.array([c.mean for c in m.components])])
    half = pad * (sd_max + kde.h_star)
    lo = np.minimum(centre - half, lo_pts.min(axis=0) - pad * kde.h_star)
    hi = np.maximum(centre + half, lo_pts.max(axis=0) + pad * kde.h_star)
    return lo, hi


def trapezoid_grid(lo, hi, n: int):
    """Axis nodes and the tensor-product trapezoid weights for a box."""
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    w1 = []
    for ax in axes:
        w = np.full(n, ax[1] - ax[0])
        w[0] *= 0.5
        w[-1] *= 0.5
        w1.append(w)
    weights = w1[0]
    for w in w1[1:]:
        weights = np.multiply.outer(weights, w)
    nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    return nodes, weights.ravel()


def ise_numeric(kde: SparseKde, data: DataSet | None, m: GaussianMixture, grid_per_dim: int = 200) -> float:
    """Trapezoid-quadrature ISE; an independent check on :func:`ise_exact`.

    The box spans the mixture mean +/- 6 (largest component sd + h) per axis,
    widened if needed so every support point and component mean sits 6 h inside.
    """
    _check_dims(kde, m)
    if m.dim > 3:
        raise UnsupportedDimensionError("numeric ISE supports d <= 3")
    if grid_per_dim < 16:
        raise InvalidArgumentError("grid_per_dim must be >= 16")
    lo, hi = quadrature_box(kde, m)
    nodes, weights = trapezoid_grid(lo, hi, grid_per_dim)
    total = 0.0
    for start in range(0, nodes.shape[0], 200_000):
        x = nodes[start:start + 200_000]
        diff = kde(x) - mixture_pdf(m, x)
        total += float(weights[start:start + 200_000] @ (diff * diff))
    return total
