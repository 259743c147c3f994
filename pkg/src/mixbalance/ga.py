"""Genetic search over the three-pool mixing simplex.

A genotype is 12 bits read as three big-endian 4-bit weights; the weights
normalized to sum 1 give the share of the needed synthetic positives drawn
from each pool. Fitness is the G-mean of a classifier trained on the real
rows plus the mixed synthetic rows, scored on held-out real rows.
"""
from __future__ import annotations

import math
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .classifiers import ClassifierSpec, fit_classifier, predict
from .data import POSITIVE, FeatureDataset, stratified_split
from .generators import SyntheticPool
from .metrics import confusion_matrix, g_mean

N_POOLS = 3
GROUP_BITS = 4
GENOME_LENGTH = N_POOLS * GROUP_BITS


# --- encoding ---------------------------------------------------------------

def genotype_weights(bits) -> tuple[int, ...]:
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.shape != (GENOME_LENGTH,):
        raise ValueError(f"genotype must have {GENOME_LENGTH} bits, got {bits.size}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("genotype bits must be 0 or 1")
    place = 1 << np.arange(GROUP_BITS - 1, -1, -1)
    return tuple(int(g @ place) for g in bits.reshape(N_POOLS, GROUP_BITS))


@dataclass(frozen=True)
class MixRatio:
    """Shares of the synthetic draw per pool; non-negative and summing to 1."""

    r: tuple[float, float, float]

    def __post_init__(self):
        r = tuple(float(x) for x in self.r)
        if len(r) != N_POOLS or min(r) < 0 or abs(sum(r) - 1.0) > 1e-9:
            raise ValueError(f"not a point on the {N_POOLS}-simplex: {r}")
        object.__setattr__(self, "r", r)

    @classmethod
    def from_weights(cls, weights) -> MixRatio:
        w = [int(x) for x in weights]
        if sum(w) == 0:
            w = [1] * N_POOLS
        total = sum(w)
        return cls(tuple(x / total for x in w))

    def __iter__(self):
        return iter(self.r)

    def __getitem__(self, i):
        return self.r[i]

    def __str__(self) -> str:
        return ":".join(f"{x:.3f}" for x in self.r)


def decode_genotype(bits) -> MixRatio:
    """Three 4-bit weights -> simplex point; all-zero decodes to uniform."""
    return MixRatio.from_weights(genotype_weights(bits))


def ratio_key(bits) -> tuple[int, ...]:
    """Reduced weight triple; genotypes with the same key decode identically."""
    w = genotype_weights(bits)
    if sum(w) == 0:
        return (1,) * N_POOLS
    g = math.gcd(*w)
    return tuple(x // g for x in w)


def bits_to_str(bits) -> str:
    return "".join(str(int(b)) for b in np.asarray(bits).ravel())


def str_to_bits(s: str) -> np.ndarray:
    return np.array([int(c) for c in s.replace(" ", "")], dtype=np.int8)


# --- balanced-set assembly --------------------------------------------------

def largest_remainder(ratio, total: int) -> np.ndarray:
    """Integer shares of ``total`` proportional to ``ratio``; ties favour lower index."""
    quotas = np.asarray(list(ratio), dtype=float) * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        rem = np.round(quotas - counts, 12)
        order = np.lexsort((np.arange(len(rem)), -rem))
        counts[order[:short]] += 1
    return counts


class PoolExhaustedWarning(UserWarning):
    pass


def assemble_balanced_set(real_train: FeatureDataset, pools, ratio: MixRatio, seed: int,
                          notes: list | None = None) -> FeatureDataset:
    """Real rows plus ``#neg - #pos`` synthetic positives split across pools by ``ratio``.

    Synthetic rows get negative ids. Draws are without replacement unless a
    pool is smaller than its share, in which case a note is appended to
    ``notes`` and that pool is sampled with replacement.
    """
    if len(pools) != N_POOLS:
        raise ValueError(f"expected {N_POOLS} pools, got {len(pools)}")
    need = real_train.n_negative - real_train.n_positive
    if need <= 0:
        raise ValueError("training data already has at least as many positives as negatives")
    counts = largest_remainder(ratio, need)
    rng = np.random.default_rng(seed)
    parts = [real_train]
    next_id = -1
    for i, (pool, c) in enumerate(zip(pools, counts)):
        if c == 0:
            continue
        if len(pool) == 0:
            raise ValueError(f"pool {i} is empty but was assigned {c} rows")
        replace = c > len(pool)
        if replace and notes is not None:
            notes.append(f"pool {i} has {len(pool)} rows < {c} requested; sampled with replacement")
        idx = rng.choice(len(pool), size=int(c), replace=replace)
        ids = np.arange(next_id, next_id - c, -1)
        next_id -= c
        parts.append(FeatureDataset(pool.rows[idx], np.full(c, POSITIVE), real_train.schema, ids))
    return FeatureDataset.concat(parts)


# --- fitness ----------------------------------------------------------------

def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


class FitnessContext:
    """Classifier-in-the-loop fitness with a ratio-keyed cache.

    By default the real training rows are split once (stratified) into an
    inner training part and a validation part; only real rows are ever
    scored. With ``validation`` given, all of ``train`` is used for fitting
    and fitness is measured on ``validation``. Pools should be generated
    from rows that are not in the validation part, otherwise interpolating
    generators copy validation positives into the training mix.

    ``classifier`` is a :class:`ClassifierSpec` or any callable
    ``(dataset, seed) -> model`` with a ``predict`` method.
    """

    def __init__(self, train: FeatureDataset, pools, classifier, seed: int = 0,
                 validation_fraction: float = 0.25, validation: FeatureDataset | None = None,
                 audit: Callable[[FeatureDataset, str], None] | None = None,
                 folds: list | None = None):
        self.classifier = classifier
        self.seed = int(seed)
        self.audit = audit
        self.external_validation = validation is not None
        if folds is None:
            if validation is None:
                train, validation = stratified_split(
                    train, validation_fraction, _derive_seed(self.seed, 0x5EED))
            folds = [(train, pools, validation)]
        self.folds = []
        for fit_rows, fold_pools, held_out in folds:
            if len(fold_pools) != N_POOLS:
                raise ValueError(f"expected {N_POOLS} pools, got {len(fold_pools)}")
            if (held_out.ids < 0).any():
                raise ValueError("validation rows must be real (non-synthetic)")
            self.folds.append((fit_rows, list(fold_pools), held_out))
        self.inner_train, self.pools, self.validation = self.folds[0]
        self._cache: dict[tuple, float] = {}
        self._lock = threading.Lock()
        self.trainings = 0
        self.cache_hits = 0
        self.errors: list[str] = []
        self.notes: list[str] = []

    @classmethod
    def from_folds(cls, folds, classifier, seed: int = 0,
                   audit: Callable[[FeatureDataset, str], None] | None = None) -> FitnessContext:
        """Fitness averaged over several ``(fit_rows, pools, validation)`` triples."""
        return cls(None, None, classifier, seed, audit=audit, folds=list(folds))

    def _fit(self, ds: FeatureDataset, seed: int):
        if isinstance(self.classifier, ClassifierSpec):
            return fit_classifier(self.classifier, ds, seed)
        return self.classifier(ds, seed)

    def _score_fold(self, fold: int, ratio: MixRatio, seed: int) -> float:
        fit_rows, pools, held_out = self.folds[fold]
        balanced = assemble_balanced_set(fit_rows, pools, ratio, seed, self.notes)
        if self.audit is not None:
            self.audit(balanced, "ga-fitness")
        # structural guard: the scored rows are real rows only
        assert (held_out.ids >= 0).all()
        try:
            model = self._fit(balanced, seed)
            if isinstance(self.classifier, ClassifierSpec):
                pred = predict(model, held_out.rows)
            else:
                pred = np.asarray(model.predict(held_out.rows))
        except Exception as exc:  # degenerate mixtures must not stop the search
            with self._lock:
                self.errors.append(f"{ratio}: {type(exc).__name__}: {exc}")
            return 0.0
        return g_mean(confusion_matrix(held_out.labels, pred))

    def _compute(self, key) -> float:
        ratio = MixRatio.from_weights(key)
        scores = [self._score_fold(f, ratio, _derive_seed(self.seed, f, *key))
                  for f in range(len(self.folds))]
        return float(sum(scores) / len(scores))

    def __call__(self, bits) -> float:
        key = ratio_key(bits)
        with self._lock:
            if key in self._cache:
                self.cache_hits += 1
                return self._cache[key]
        value = self._compute(key)
        with self._lock:
            if key in self._cache:
                self.cache_hits += 1
            else:
                self.trainings += 1
                self._cache[key] = value
            return self._cache[key]


def evaluate_fitness(bits, ctx: FitnessContext) -> float:
    return ctx(bits)


# --- GA operators -----------------------------------------------------------

@dataclass(frozen=True)
class GaConfig:
    population_size: int = 150
    iterations: int = 50
    crossover_probability: float = 0.8
    mutation_probability: float = 0.01
    elite_count: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError("population_size must be an even number >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        for name in ("crossover_probability", "mutation_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elite_count <= self.population_size:
            raise ValueError("elite_count must lie in [0, population_size]")

    def to_dict(self) -> dict:
        return asdict(self)


def roulette_select(fitness: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn with probability proportional to fitness (uniform if all zero)."""
    f = np.asarray(fitness, dtype=float)
    total = f.sum()
    if total <= 0:
        return rng.integers(0, len(f), size=n)
    return rng.choice(len(f), size=n, p=f / total)


def single_point_crossover(a: np.ndarray, b: np.ndarray, point: int):
    return (np.concatenate([a[:point], b[point:]]),
            np.concatenate([b[:point], a[point:]]))


def mutate(bits: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    flip = rng.random(bits.shape) < p
    return np.where(flip, 1 - bits, bits).astype(bits.dtype)


def next_generation(population: np.ndarray, fitness: np.ndarray, cfg: GaConfig,
                    rng: np.random.Generator, events: list | None = None) -> np.ndarray:
    """Elites copied unchanged, the rest bred by roulette, crossover and mutation."""
    M, L = population.shape
    fitness = np.asarray(fitness, dtype=float)
    elite_idx = np.sort(np.argsort(-fitness, kind="stable")[:cfg.elite_count])
    children = [population[i].copy() for i in elite_idx]
    n_fill = M - len(children)
    if n_fill and fitness.sum() <= 0 and events is not None:
        events.append("all fitnesses zero; uniform parent selection")
    n_pairs = (n_fill + 1) // 2
    parents = roulette_select(fitness, 2 * n_pairs, rng).reshape(n_pairs, 2)
    offspring = []
    for i, j in parents:
        a, b = population[i], population[j]
        if rng.random() < cfg.crossover_probability:
            a, b = single_point_crossover(a, b, int(rng.integers(1, L)))
        offspring += [a, b]
    for child in offspring[:n_fill]:
        children.append(mutate(child, cfg.mutation_probability, rng))
    return np.array(children, dtype=population.dtype).reshape(M, L)


# --- driver -----------------------------------------------------------------

@dataclass
class GaResult:
    best_genotype: str
    best_ratio: list[float]
    best_fitness: float
    history: list[dict] = field(default_factory=list)
    evaluations: int = 0
    trainings: int = 0
    cache_hits: int = 0
    events: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> GaResult:
        return cls(**d)

    @property
    def ratio(self) -> MixRatio:
        return decode_genotype(str_to_bits(self.best_genotype))


def _evaluate_population(pop: np.ndarray, fitness_fn, workers: int) -> np.ndarray:
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return np.array(list(ex.map(fitness_fn, pop)), dtype=float)
    return np.array([fitness_fn(g) for g in pop], dtype=float)


def run_ga(cfg: GaConfig, fitness_fn: Callable[[np.ndarray], float], workers: int = 1,
           progress: bool = False) -> GaResult:
    """Evolve ``cfg.iterations`` generations after evaluating a random start.

    ``history`` holds one ``{generation, best, mean}`` entry per bred
    generation; with elitism its ``best`` column never decreases.
    """
    rng = np.random.default_rng(cfg.seed)
    pop = rng.integers(0, 2, size=(cfg.population_size, GENOME_LENGTH)).astype(np.int8)
    fit = _evaluate_population(pop, fitness_fn, workers)
    evaluations = len(pop)
    best_i = int(np.argmax(fit))
    best_bits, best_fit = pop[best_i].copy(), float(fit[best_i])
    history, events = [], []
    for t in range(1, cfg.iterations + 1):
        pop = next_generation(pop, fit, cfg, rng, events)
        fit = _evaluate_population(pop, fitness_fn, workers)
        evaluations += len(pop)
        i = int(np.argmax(fit))
        if fit[i] > best_fit:
            best_bits, best_fit = pop[i].copy(), float(fit[i])
        history.append({"generation": t, "best": float(fit.max()), "mean": float(fit.mean())})
        if progress:
            print(f"generation {t} best {fit.max():.6f} mean {fit.mean():.6f}", file=sys.stderr)
    return GaResult(
        best_genotype=bits_to_str(best_bits),
        best_ratio=list(decode_genotype(best_bits).r),
        best_fitness=best_fit,
        history=history,
        evaluations=evaluations,
        trainings=getattr(fitness_fn, "trainings", evaluations),
        cache_hits=getattr(fitness_fn, "cache_hits", 0),
        events=events + list(getattr(fitness_fn, "errors", [])),
    )
