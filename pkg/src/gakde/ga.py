"""
Genetic algorithm that condenses a sample into a weighted subsample.

A chromosome is a length-``b`` vector of row indices drawn with replacement.
Each generation the population is sorted by fitness, adjacent pairs breed two
children slot by slot (mutation, uniform crossover or reproduction), and the
next population is the top ``n_elite`` parents followed by the best children.

Random draws are consumed from one seeded ``numpy`` generator in a fixed
order: initial genes row by row, then per pair (in sorted order) one uniform
per slot followed by the mutation draws for that pair. Fitness evaluation
never touches the generator, so worker count cannot change results.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .density import DataSet, SparseKde, _check_beta, sparse_kde_from_chromosome, uniform_beta
from .errors import InvalidArgumentError
from .fitness import CV_VARIANTS, BandwidthSearchConfig, FitnessCache, FitnessValue

log = logging.getLogger(__name__)

MUTATION_SOURCES = ("elite", "original")


@dataclass(frozen=True)
class GaConfig:
    b: int = 25
    B: int = 50
    G: int = 100
    p_u: float = 0.475
    p_m: float = 0.05
    p_e: float = 0.1
    mutation_source: str = "elite"
    beta: Optional[Tuple[float, ...]] = None
    bw_cfg: BandwidthSearchConfig = field(default_factory=BandwidthSearchConfig)
    cv_variant: str = "per-test-mean"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.b < 1:
            raise InvalidArgumentError("b must be >= 1")
        if self.B < 2 or self.B % 2:
            raise InvalidArgumentError("B must be an even number >= 2")
        if self.G < 1:
            raise InvalidArgumentError("G must be >= 1")
        if self.p_u < 0 or self.p_m < 0 or self.p_u + self.p_m > 1:
            raise InvalidArgumentError("need p_u >= 0, p_m >= 0 and p_u + p_m <= 1")
        if not 0 <= self.p_e < 1:
            raise InvalidArgumentError("p_e must lie in [0, 1)")
        if self.mutation_source not in MUTATION_SOURCES:
            raise InvalidArgumentError(f"mutation_source must be one of {MUTATION_SOURCES}")
        if self.cv_variant not in CV_VARIANTS:
            raise InvalidArgumentError(f"cv_variant must be one of {CV_VARIANTS}")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(float(x) for x in _check_beta(self.beta, self.b)))

    @property
    def weights(self) -> np.ndarray:
        return uniform_beta(self.b) if self.beta is None else np.array(self.beta)

    @property
    def n_elite(self) -> int:
        # at least one elite keeps the incumbent; at least two children survive
        return min(max(int(round(self.p_e * self.B)), 1), self.B - 2) if self.B > 2 else 1


@dataclass
class Chromosome:
    genes: np.ndarray
    fitness: Optional[FitnessValue] = None

    def __post_init__(self):
        g = np.array(self.genes, dtype=np.int64)
        g.setflags(write=False)
        self.genes = g

    @property
    def criterion(self) -> float:
        return self.fitness.criterion

    @property
    def h_star(self) -> float:
        return self.fitness.h_star


@dataclass
class Population:
    members: List[Chromosome]
    generation: int = 1


@dataclass(frozen=True)
class TraceRecord:
    generation: int
    best_criterion: float
    best_h: float
    distinct_count: int
    best_genes: np.ndarray = field(repr=False, compare=False)


@dataclass
class GaResult:
    best: Chromosome
    kde: SparseKde
    trace: List[TraceRecord]
    evaluations: int


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Evaluator:
    """Fills in missing fitness values, optionally across worker threads."""

    def __init__(self, data: DataSet, cfg: GaConfig):
        self.cache = FitnessCache(data, cfg.weights, cfg.bw_cfg, cfg.cv_variant)
        self.threads = cfg.threads
        self._pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None

    @property
    def evaluations(self) -> int:
        return self.cache.evaluations

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __call__(self, chroms: Sequence[Chromosome]):
        todo = {}
        for c in chroms:
            if c.fitness is None:
                hit = self.cache.lookup(c.genes)
                if hit is not None:
                    c.fitness = hit
                else:
                    todo.setdefault(self.cache._key(c.genes), c.genes)
        if todo:
            genes = list(todo.values())
            if self._pool is None:
                list(map(self.cache, genes))
            else:
                list(self._pool.map(self.cache, genes))
        for c in chroms:
            if c.fitness is None:
                c.fitness = self.cache(c.genes)


def init_population(data: DataSet, cfg: GaConfig, rng: np.random.Generator) -> Population:
    genes = rng.integers(0, data.size, size=(cfg.B, cfg.b))
    return Population([Chromosome(row) for row in genes], generation=1)


def evaluate_and_sort(pop: Population, data: DataSet, cfg: GaConfig, evaluator: Optional[Evaluator] = None) -> Population:
    """Evaluate every member, then order by ascending criterion (descending fitness), stable."""
    own = evaluator is None
    if own:
        evaluator = Evaluator(data, cfg)
    try:
        evaluator(pop.members)
    finally:
        if own:
            evaluator.close()
    order = sorted(range(len(pop.members)), key=lambda i: pop.members[i].criterion)
    return Population([pop.members[i] for i in order], pop.generation)


def breed_pair(
    parent_a: Chromosome,
    parent_b: Chromosome,
    elite: Chromosome,
    data: DataSet,
    cfg: GaConfig,
    rng: np.random.Generator,
) -> Tuple[Chromosome, Chromosome]:
    """Slot-wise breeding.

    One uniform ``u`` per slot: ``u < p_m`` mutates (both children get
    independent draws from the elite's genes, or from all rows when
    ``mutation_source == "original"``), ``u < p_m + p_u`` swaps the slot,
    anything else copies it.
    """
    a, b = parent_a.genes, parent_b.genes
    u = rng.random(a.size)
    mutate = u < cfg.p_m
    swap = ~mutate & (u < cfg.p_m + cfg.p_u)
    child_a = np.where(swap, b, a)
    child_b = np.where(swap, a, b)
    n_mut = int(mutate.sum())
    if n_mut:
        if cfg.mutation_source == "elite":
            draws = elite.genes[rng.integers(0, elite.genes.size, size=(n_mut, 2))]
        else:
            draws = rng.integers(0, data.size, size=(n_mut, 2))
        child_a[mutate] = draws[:, 0]
        child_b[mutate] = draws[:, 1]
    return Chromosome(child_a), Chromosome(child_b)


def step_generation(
    pop: Population,
    data: DataSet,
    cfg: GaConfig,
    rng: np.random.Generator,
    evaluator: Optional[Evaluator] = None,
) -> Population:
    own = evaluator is None
    if own:
        evaluator = Evaluator(data, cfg)
    try:
        parents = evaluate_and_sort(pop, data, cfg, evaluator).members
        elite = parents[0]
        children: List[Chromosome] = []
        for k in range(0, len(parents), 2):
            children.extend(breed_pair(parents[k], parents[k + 1], elite, data, cfg, rng))
        children = evaluate_and_sort(Population(children), data, cfg, evaluator).members
    finally:
        if own:
            evaluator.close()
    n_elite = cfg.n_elite
    return Population(parents[:n_elite] + children[: cfg.B - n_elite], pop.generation + 1)


def run(data: DataSet, cfg: GaConfig) -> GaResult:
    """Run generations ``1..G`` and return the best chromosome ever evaluated."""
    if data.size < 2:
        raise InvalidArgumentError("need at least two data rows")
    rng = make_rng(cfg.seed)
    evaluator = Evaluator(data, cfg)
    trace: List[TraceRecord] = []
    best: Optional[Chromosome] = None
    try:
        pop = init_population(data, cfg, rng)
        while True:
            pop = evaluate_and_sort(pop, data, cfg, evaluator)
            top = pop.members[0]
            if best is None or top.criterion < best.criterion:
                best = top
            trace.append(
                TraceRecord(
                    generation=pop.generation,
                    best_criterion=best.criterion,
                    best_h=best.h_star,
                    distinct_count=int(np.unique(best.genes).size),
                    best_genes=best.genes,
                )
            )
            log.debug("generation %d: criterion %.6g, h %.4g", pop.generation, best.criterion, best.h_star)
            if pop.generation >= cfg.G:
                break
            pop = step_generation(pop, data, cfg, rng, evaluator)
    finally:
        evaluator.close()
    kde = sparse_kde_from_chromosome(data, best.genes, cfg.weights, best.h_star)
    return GaResult(best=best, kde=kde, trace=trace, evaluations=evaluator.evaluations)
