"""
Leave-training-out least-squares cross-validation fitness for a chromosome.

For a chromosome (vector of ``b`` row indices into the sample) with weights
``beta`` and scalar bandwidth ``h`` the criterion is

    crit(h) = int fhat^2  -  (2 / C) * sum_k sum_l [k != gene_l] beta_l K_h(X_k - X_gene_l)

with ``C`` the number of (test row, gene slot) pairs whose row indices differ.
Lower is better; the fitness ``v`` is ``-crit``.

The ``per-test-mean`` variant replaces the second term by twice the average,
over test rows with at least one admissible gene, of the beta-weighted mean
kernel value over that row's admissible genes.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from .density import DataSet, _check_beta, check_bandwidth, sq_dists
from .errors import DegenerateFitnessError, InvalidArgumentError, ZeroSpreadError
from .search import golden_section_log

CV_VARIANTS = ("paper", "per-test-mean")


@dataclass(frozen=True)
class FitnessValue:
    criterion: float
    h_star: float
    c_pairs: int

    @property
    def v(self) -> float:
        return -self.criterion


@dataclass(frozen=True)
class BandwidthSearchConfig:
    h_lo_factor: float = 0.05
    h_hi_factor: float = 5.0
    rel_tol: float = 1e-3
    max_iters: int = 60

    def __post_init__(self):
        if not (0 < self.h_lo_factor < self.h_hi_factor) or not math.isfinite(self.h_hi_factor):
            raise InvalidArgumentError("need 0 < h_lo_factor < h_hi_factor < inf")
        if not (0 < self.rel_tol < 1):
            raise InvalidArgumentError("rel_tol must lie in (0, 1)")
        if self.max_iters < 1:
            raise InvalidArgumentError("max_iters must be >= 1")


class _Prepared:
    """Distance tables for one chromosome; each criterion call is O(N * u) exps.

    Genes are merged by row index into ``u`` distinct rows with summed weights,
    which leaves both terms of the criterion unchanged.
    """

    def __init__(self, data: DataSet, chrom, beta, variant: str):
        if variant not in CV_VARIANTS:
            raise InvalidArgumentError(f"unknown cv variant {variant!r}")
        idx = data.check_indices(chrom)
        beta = _check_beta(beta, idx.size)
        n, b = data.size, idx.size
        support, inverse = np.unique(idx, return_inverse=True)
        w = np.bincount(inverse, weights=beta, minlength=support.size)
        counts = np.bincount(inverse, minlength=support.size)

        self.d = data.dim
        self.variant = variant
        self.w = w
        self.c_pairs = n * b - b  # each slot matches exactly its own row
        pts = data.points[support]
        self.sq_ss = sq_dists(pts, pts)
        sq_ns = sq_dists(data.points, pts)
        # leave-training-out: a test row never meets a gene slot holding that same row
        sq_ns[support, np.arange(support.size)] = np.inf
        self.sq_ns = sq_ns

        if variant == "paper":
            if self.c_pairs == 0:
                raise DegenerateFitnessError("every test row coincides with every gene slot (C = 0)")
        else:
            # admissible weight per test row: total beta minus the beta sitting on that row
            own = np.zeros(n)
            own[support] = w
            own_slots = np.zeros(n, dtype=int)
            own_slots[support] = counts
            wk = 1.0 - own
            ok = (own_slots < b) & (wk > 0)
            if not ok.any():
                raise DegenerateFitnessError("no test row has an admissible gene")
            self.row_ok = ok
            self.row_w = wk[ok]
            self.sq_ns = sq_ns[ok]

    def criterion(self, h: float) -> float:
        var = h * h
        d = self.d
        c1 = (4.0 * math.pi * var) ** (-d / 2)
        first = c1 * float(self.w @ np.exp(self.sq_ss * (-0.25 / var)) @ self.w)
        c2 = (2.0 * math.pi * var) ** (-d / 2)
        per_row = np.exp(self.sq_ns * (-0.5 / var)) @ self.w
        if self.variant == "paper":
            second = 2.0 * c2 * float(per_row.sum()) / self.c_pairs
        else:
            second = 2.0 * c2 * float(np.mean(per_row / self.row_w))
        return first - second


def cv_criterion(data: DataSet, chrom: Sequence[int], beta, h: float, variant: str = "per-test-mean") -> FitnessValue:
    h = check_bandwidth(h)
    prep = _Prepared(data, chrom, beta, variant)
    return FitnessValue(prep.criterion(h), h, prep.c_pairs)


def reference_bandwidth(data: DataSet, chrom) -> float:
    """Normal-reference scale for a chromosome: the search bracket is built around it.

    ``sigma`` is the mean marginal standard deviation of the gene points,
    falling back to the full sample when the chromosome is a single repeated row.
    """
    pts = data.rows(chrom)
    b, d = pts.shape
    sigma = float(np.mean(pts.std(axis=0)))
    if sigma == 0.0:
        sigma = float(np.mean(data.points.std(axis=0)))
    if sigma == 0.0:
        raise ZeroSpreadError("chromosome and data both have zero spread")
    return (4.0 / (d + 2)) ** (1.0 / (d + 4)) * b ** (-1.0 / (d + 4)) * sigma


def optimize_bandwidth(
    data: DataSet,
    chrom: Sequence[int],
    beta,
    cfg: BandwidthSearchConfig = BandwidthSearchConfig(),
    variant: str = "per-test-mean",
) -> FitnessValue:
    h_ref = reference_bandwidth(data, chrom)
    prep = _Prepared(data, chrom, beta, variant)
    h, crit, _ = golden_section_log(
        prep.criterion,
        cfg.h_lo_factor * h_ref,
        cfg.h_hi_factor * h_ref,
        rel_tol=cfg.rel_tol,
        max_iters=cfg.max_iters,
    )
    return FitnessValue(crit, h, prep.c_pairs)


class FitnessCache:
    """Thread-safe memo of optimised fitness keyed by the sorted gene vector.

    Only valid for a fixed (data, beta, search config, variant); with
    non-uniform beta the slot order matters, so the key is the raw gene vector.
    """

    def __init__(self, data: DataSet, beta, cfg: BandwidthSearchConfig, variant: str = "per-test-mean"):
        self.data = data
        self.beta = np.asarray(beta, dtype=float)
        self.cfg = cfg
        self.variant = variant
        self._uniform = bool(np.all(self.beta == self.beta[0]))
        self._memo: Dict[bytes, FitnessValue] = {}
        self._lock = threading.Lock()
        self.evaluations = 0
        self.hits = 0

    def _key(self, genes: np.ndarray) -> bytes:
        g = np.sort(genes) if self._uniform else genes
        return np.ascontiguousarray(g, dtype=np.int64).tobytes()

    def lookup(self, genes: np.ndarray) -> Optional[FitnessValue]:
        with self._lock:
            return self._memo.get(self._key(genes))

    def __call__(self, genes: np.ndarray) -> FitnessValue:
        key = self._key(genes)
        with self._lock:
            hit = self._memo.get(key)
            if hit is not None:
                self.hits += 1
                return hit
        # canonical gene order so permuted duplicates give bit-identical values
        canon = np.sort(genes) if self._uniform else genes
        fv = optimize_bandwidth(self.data, canon, self.beta, self.cfg, self.variant)
        with self._lock:
            # a concurrent worker may have stored the same key; the value is identical
            self._memo.setdefault(key, fv)
            self.evaluations += 1
        return fv
