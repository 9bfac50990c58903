"""
Experiment-level statistics: condensation counts, ISE* over repeated runs,
MISE over fresh datasets, and a full-sample LSCV baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .density import DataSet, SparseKde, sparse_kde_from_chromosome, sq_dists, uniform_beta
from .errors import InvalidArgumentError, ZeroSpreadError
from .fitness import BandwidthSearchConfig
from .ga import GaConfig, GaResult, make_rng, run
from .mixtures import GaussianMixture, ise_exact, mixture_sample
from .search import golden_section_log


@dataclass(frozen=True)
class CondensationStats:
    distinct_count: int
    max_multiplicity: int
    dcr: float
    multiplicity_histogram: Dict[int, int]


def condensation_stats(kde: Optional[SparseKde], chrom, n: int) -> CondensationStats:
    """Counts over gene row indices. ``chrom`` may be a Chromosome or an index vector."""
    genes = np.asarray(getattr(chrom, "genes", chrom))
    if genes.size < 1:
        raise InvalidArgumentError("chromosome must have at least one gene")
    rows, counts = np.unique(genes, return_counts=True)
    return CondensationStats(
        distinct_count=int(rows.size),
        max_multiplicity=int(counts.max()),
        dcr=rows.size / n,
        multiplicity_histogram={int(r): int(c) for r, c in zip(rows, counts)},
    )


def _mean_sd(values: Sequence[float]) -> Tuple[float, float, bool]:
    """Mean and sample SD in fixed index order; SD is 0 and flagged undefined for one value."""
    vals = [float(v) for v in values]
    mean = math.fsum(vals) / len(vals)
    if len(vals) < 2:
        return mean, 0.0, False
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)), True


@dataclass
class TrialSummary:
    ise_per_run: List[float]
    ise_star: float
    ise_star_sd: float
    sd_defined: bool
    ise_trace: List[float]
    results: List[GaResult] = field(repr=False, default_factory=list)
    stats: List[CondensationStats] = field(repr=False, default_factory=list)

    @property
    def mean_distinct(self) -> float:
        return _mean_sd([s.distinct_count for s in self.stats])[0]

    @property
    def mean_max_multiplicity(self) -> float:
        return _mean_sd([s.max_multiplicity for s in self.stats])[0]

    @property
    def mean_dcr(self) -> float:
        return _mean_sd([s.dcr for s in self.stats])[0]


def incumbent_ise_trace(result: GaResult, data: DataSet, truth: GaussianMixture, beta) -> List[float]:
    """ISE of the best-so-far chromosome at every generation."""
    out = []
    prev = None
    for rec in result.trace:
        key = (rec.best_genes.tobytes(), rec.best_h)
        if key != prev:
            kde = sparse_kde_from_chromosome(data, rec.best_genes, beta, rec.best_h)
            val = ise_exact(kde, data, truth)
            prev = key
        out.append(val)
    return out


def ise_star(
    data: DataSet,
    truth: GaussianMixture,
    cfg: GaConfig,
    t: int = 10,
    seeds: Optional[Sequence[int]] = None,
    with_traces: bool = True,
) -> TrialSummary:
    """Run the GA ``t`` times on one dataset and average the exact ISEs.

    Run ``i`` uses ``seeds[i]`` (default ``cfg.seed + i``). ``ise_trace[g-1]``
    is ISE*(g): the per-generation incumbent ISE averaged over runs.
    """
    if t < 1:
        raise InvalidArgumentError("t must be >= 1")
    if seeds is None:
        seeds = [cfg.seed + i for i in range(t)]
    if len(seeds) != t:
        raise InvalidArgumentError("need exactly t seeds")
    beta = cfg.weights
    results, ises, traces, stats = [], [], [], []
    for s in seeds:
        res = run(data, replace(cfg, seed=int(s)))
        results.append(res)
        ises.append(ise_exact(res.kde, data, truth))
        stats.append(condensation_stats(res.kde, res.best, data.size))
        if with_traces:
            traces.append(incumbent_ise_trace(res, data, truth, beta))
    mean, sd, ok = _mean_sd(ises)
    trace = [_mean_sd(col)[0] for col in zip(*traces)] if traces else []
    return TrialSummary(ises, mean, sd, ok, trace, results, stats)


@dataclass
class MiseSummary:
    ise_per_dataset: List[float]
    mise: float
    sd: float
    dcr: List[float]


def mise(
    truth: GaussianMixture,
    cfg: GaConfig,
    s: int,
    n: int,
    seeds: Optional[Sequence[int]] = None,
) -> MiseSummary:
    """One GA run on each of ``s`` fresh datasets of size ``n``.

    Dataset ``i`` is sampled with ``seeds[i]`` and the GA run on it also uses
    ``seeds[i]`` (default ``cfg.seed + i``).
    """
    if s < 1:
        raise InvalidArgumentError("s must be >= 1")
    seeds = list(seeds) if seeds is not None else [cfg.seed + i for i in range(s)]
    if len(seeds) != s:
        raise InvalidArgumentError("need exactly s seeds")
    ises, dcrs = [], []
    for sd_ in seeds:
        data = mixture_sample(truth, n, make_rng(int(sd_)))
        res = run(data, replace(cfg, seed=int(sd_)))
        ises.append(ise_exact(res.kde, data, truth))
        dcrs.append(res.kde.size / n)
    mean, sd, _ = _mean_sd(ises)
    return MiseSummary(ises, mean, sd, dcrs)


def lscv_score(sq: np.ndarray, h: float, d: int) -> float:
    """Classical leave-one-out LSCV score for a uniform-weight full-sample KDE."""
    n = sq.shape[0]
    var = h * h
    s2 = float(np.exp(sq * (-0.25 / var)).sum())
    first = (4.0 * math.pi * var) ** (-d / 2) * s2 / (n * n)
    off = float(np.exp(sq * (-0.5 / var)).sum()) - n
    second = 2.0 * (2.0 * math.pi * var) ** (-d / 2) * off / (n * (n - 1))
    return first - second


def lscv_baseline(data: DataSet, cfg: BandwidthSearchConfig = BandwidthSearchConfig()) -> Tuple[float, SparseKde]:
    """Full-sample KDE with weights 1/N and the LSCV-optimal scalar bandwidth."""
    n, d = data.size, data.dim
    if n < 2:
        raise InvalidArgumentError("LSCV needs at least two rows")
    sigma = float(np.mean(data.points.std(axis=0)))
    if sigma == 0.0:
        raise ZeroSpreadError("data has zero spread")
    h_ref = (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4)) * sigma
    sq = sq_dists(data.points, data.points)
    h, _, _ = golden_section_log(
        lambda h: lscv_score(sq, h, d),
        cfg.h_lo_factor * h_ref,
        cfg.h_hi_factor * h_ref,
        rel_tol=cfg.rel_tol,
        max_iters=cfg.max_iters,
    )
    kde = sparse_kde_from_chromosome(data, np.arange(n), uniform_beta(n), h)
    return h, kde
