"""
Gaussian kernel primitives, weighted KDE evaluation and closed-form integrals.

All estimators here use a universal scalar bandwidth ``h`` (smoothing matrix
``h**2 * I_d``) and an isotropic Gaussian kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArgumentError

__all__ = [
    "DataSet",
    "SparseKde",
    "kernel_eval",
    "kde_eval",
    "kde_squared_integral",
    "sparse_kde_from_chromosome",
    "uniform_beta",
    "check_bandwidth",
]


def check_bandwidth(h: float) -> float:
    h = float(h)
    if not math.isfinite(h) or h <= 0.0:
        raise InvalidArgumentError(f"bandwidth must be positive and finite, got {h!r}")
    return h


@dataclass(frozen=True)
class DataSet:
    """The original N x d sample. Row ``i`` has stable id ``i``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidArgumentError(f"expected an N x d array with N, d >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("data contains non-finite coordinates")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.size)

    def rows(self, indices) -> np.ndarray:
        return self.points[self.check_indices(indices)]

    def check_indices(self, indices) -> np.ndarray:
        idx = np.asarray(indices)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidArgumentError("index list must be a non-empty 1-d sequence")
        if not np.issubdtype(idx.dtype, np.integer):
            raise InvalidArgumentError(f"row indices must be integers, got dtype {idx.dtype}")
        if idx.min() < 0 or idx.max() >= self.size:
            raise InvalidArgumentError(f"row index out of range [0, {self.size})")
        return idx.astype(np.intp, copy=False)


def uniform_beta(b: int) -> np.ndarray:
    return np.full(b, 1.0 / b)


def _check_beta(beta, b: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (b,):
        raise InvalidArgumentError(f"weight vector has length {beta.size}, expected {b}")
    if np.any(beta < 0) or not np.all(np.isfinite(beta)):
        raise InvalidArgumentError("weights must be finite and non-negative")
    if abs(beta.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(f"weights must sum to 1, got {beta.sum()!r}")
    return beta


def kernel_eval(diff, h: float) -> float:
    """Isotropic Gaussian kernel ``(2 pi)^(-d/2) h^(-d) exp(-|diff|^2 / (2 h^2))``."""
    h = check_bandwidth(h)
    diff = np.atleast_1d(np.asarray(diff, dtype=float))
    if not np.all(np.isfinite(diff)):
        raise InvalidArgumentError("kernel argument must be finite")
    d = diff.size
    sq = float(diff @ diff)
    return (2.0 * math.pi) ** (-d / 2) * h ** (-d) * math.exp(-sq / (2.0 * h * h))


def _gauss_from_sq(sq: np.ndarray, var: float, d: int) -> np.ndarray:
    # N(0, var * I_d) density given squared distances
    return (2.0 * math.pi * var) ** (-d / 2) * np.exp(-sq / (2.0 * var))


def sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``a`` and ``b``."""
    out = np.zeros((a.shape[0], b.shape[0]))
    for j in range(a.shape[1]):
        out += (a[:, j, None] - b[None, :, j]) ** 2
    return out


def kde_eval(data: DataSet, indices, beta, h: float, x) -> float:
    idx = data.check_indices(indices)
    beta = _check_beta(beta, idx.size)
    h = check_bandwidth(h)
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    if x.shape[1] != data.dim:
        raise InvalidArgumentError(f"evaluation point has dimension {x.shape[1]}, data has {data.dim}")
    sq = sq_dists(data.points[idx], x)[:, 0]
    return float(beta @ _gauss_from_sq(sq, h * h, data.dim))


def kde_squared_integral(data: DataSet, indices, beta, h: float) -> float:
    """Closed-form integral of the squared KDE.

    Uses the convolution identity: the product integral of two Gaussian
    kernels with variance ``h^2`` is a Gaussian with variance ``2 h^2``
    evaluated at the difference of their centres.
    """
    idx = data.check_indices(indices)
    beta = _check_beta(beta, idx.size)
    h = check_bandwidth(h)
    pts = data.points[idx]
    return float(beta @ _gauss_from_sq(sq_dists(pts, pts), 2.0 * h * h, data.dim) @ beta)


@dataclass(frozen=True)
class SparseKde:
    """Distinct support rows with merged weights and a scalar bandwidth."""

    support: np.ndarray
    gamma: np.ndarray
    h_star: float
    dim: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        check_bandwidth(self.h_star)
        if self.support.size != np.unique(self.support).size:
            raise InvalidArgumentError("support indices must be distinct")
        if np.any(self.gamma <= 0) or abs(self.gamma.sum() - 1.0) > 1e-12:
            raise InvalidArgumentError("gamma must be positive and sum to 1")

    def __call__(self, x) -> np.ndarray:
        """Evaluate at one point (d-vector) or many (M x d)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise InvalidArgumentError(f"evaluation points have dimension {x.shape[1]}, estimator has {self.dim}")
        vals = self.gamma @ _gauss_from_sq(sq_dists(self.points, x), self.h_star ** 2, self.dim)
        return float(vals[0]) if single else vals

    def squared_integral(self) -> float:
        sq = sq_dists(self.points, self.points)
        return float(self.gamma @ _gauss_from_sq(sq, 2.0 * self.h_star ** 2, self.dim) @ self.gamma)

    @property
    def size(self) -> int:
        return self.support.size


def sparse_kde_from_chromosome(data: DataSet, chrom: Sequence[int], beta, h: float) -> SparseKde:
    """Merge repeated genes into distinct support rows.

    ``gamma[i]`` is the total weight of the gene slots holding row
    ``support[i]``; support is sorted by row index.
    """
    idx = data.check_indices(chrom)
    beta = _check_beta(beta, idx.size)
    support, inverse = np.unique(idx, return_inverse=True)
    gamma = np.bincount(inverse, weights=beta, minlength=support.size)
    keep = gamma > 0
    support, gamma = support[keep], gamma[keep]
    # renormalise away rounding drift from the bincount summation
    gamma = gamma / math.fsum(gamma)
    return SparseKde(
        support=support,
        gamma=gamma,
        h_star=check_bandwidth(h),
        dim=data.dim,
        points=data.points[support],
    )
