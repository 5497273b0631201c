"""Mutation-only genetic refinement of interpolation indices.

Individuals are index sets. Each generation keeps the ``elite`` best unchanged
and refills the population with mutants of parents drawn uniformly from the
elite; a mutation shifts each index, with some probability, to a nearby
admissible location. Fitness is the mean relative reconstruction error over a
validation set, with any misclassification making the individual infeasible.
"""

from dataclasses import dataclass, field, replace
import logging
import math
import warnings

import numpy as np

from .deim import IndexSet
from .errors import ConfigError, NumericalError, ValidationError
from .library import SampledLibrary, noisy_trials

log = logging.getLogger(__name__)

INFEASIBLE = math.inf
MAX_RETRIES = 20


@dataclass(frozen=True)
class NoiseSettings:
    """Noisy-classification gate: per-regime accuracy over ``rounds`` must reach ``accuracy``."""

    sigma_frac: float = 0.1
    rounds: int = 400
    seed: int = 7
    accuracy: float = 0.95


@dataclass(frozen=True)
class GAConfig:
    population: int = 100
    elite: int = 10
    generations: int = 10
    mutation_prob: float = 0.5
    mutation_radius: int = 3
    index_window: tuple = None
    seed: int = 7

    def __post_init__(self):
        if self.population < 2:
            raise ConfigError("population must be at least 2")
        if not 1 <= self.elite < self.population:
            raise ConfigError("elite must satisfy 1 <= elite < population")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if not 0 < self.mutation_prob <= 1:
            raise ConfigError("mutation_prob must lie in (0, 1]")
        if self.mutation_radius < 1:
            raise ConfigError("mutation_radius must be >= 1")

    def candidates(self, n):
        """Sorted admissible 1-based indices."""
        if self.index_window is None:
            return np.arange(1, n + 1)
        w = np.unique(np.asarray(self.index_window, dtype=int))
        if w[0] < 1 or w[-1] > n:
            raise ConfigError(f"index window outside [1, {n}]")
        return w


@dataclass(frozen=True)
class FitnessRecord:
    index_set: IndexSet
    error: float
    feasible: bool
    generation: int = 0
    raw_error: float = math.nan
    min_accuracy: float = math.nan
    misclassified: int = 0

    def rank_key(self):
        # feasible first, then error, then lower first index, then lexicographic;
        # infeasible sets order by how badly they violate the classification
        # constraint before their (diagnostic) error
        if self.feasible:
            return (0, 0, 0.0, self.error, self.index_set.indices[0], self.index_set.indices)
        err = self.raw_error if np.isfinite(self.raw_error) else math.inf
        acc = self.min_accuracy if np.isfinite(self.min_accuracy) else 0.0
        return (1, self.misclassified, -acc, err, self.index_set.indices[0],
                self.index_set.indices)

    def at_generation(self, g):
        return FitnessRecord(self.index_set, self.error, self.feasible, g,
                             self.raw_error, self.min_accuracy, self.misclassified)


def mutate(idx, cfg, rng, n=None, candidates=None):
    """Shift each index with probability ``mutation_prob`` to a nearby admissible location.

    Shifts are uniform on ``{-R..-1, 1..R}`` positions of the admissible list
    (grid indices, or window entries when a window is set), clamped at its
    ends. A move onto an index already in the set is redrawn; after
    ``MAX_RETRIES`` failed draws the index stays put.
    """
    n = idx.n if n is None else n
    cand = cfg.candidates(n) if candidates is None else np.asarray(candidates)
    if cand.size < idx.m:
        raise ConfigError(f"window of {cand.size} locations cannot hold {idx.m} indices")
    pos = np.searchsorted(cand, idx.indices)
    if np.any(pos >= cand.size) or np.any(cand[np.minimum(pos, cand.size - 1)] != idx.indices):
        raise ConfigError(f"index set {idx.indices} not inside the admissible window")
    pos = [int(p) for p in pos]
    R = cfg.mutation_radius
    last = cand.size - 1
    for i in range(len(pos)):
        if rng.random() >= cfg.mutation_prob:
            continue
        for _ in range(MAX_RETRIES):
            v = int(rng.integers(0, 2 * R))
            shift = v - R if v < R else v - R + 1
            new = min(max(pos[i] + shift, 0), last)
            if new == pos[i] or new not in pos:
                pos[i] = new
                break
    return IndexSet(tuple(int(cand[p]) for p in pos), idx.n)


def _group_validation(validation):
    groups = {}
    for rid, state in validation:
        groups.setdefault(rid, []).append(np.asarray(state))
    return {r: np.column_stack(v) for r, v in groups.items()}


class FitnessEvaluator:
    """Memoising fitness for one (library, validation set, noise gate) triple.

    ``error_reference`` selects what a reconstruction is compared against:
    ``"state"`` uses the validation state itself; ``"projection"`` uses its
    orthogonal projection onto the winning sublibrary, which removes the
    truncation error no choice of sensors can recover.
    """

    def __init__(self, lib, validation, noise=None, error_reference="state"):
        if error_reference not in ("state", "projection"):
            raise ConfigError(f"unknown error reference {error_reference!r}")
        self.lib = lib
        self.states = _group_validation(validation) if not isinstance(validation, dict) \
            else {r: np.asarray(v) for r, v in validation.items()}
        if not self.states:
            raise ValidationError("validation set is empty")
        unknown = set(self.states) - set(lib.regime_ids)
        if unknown:
            raise ValidationError(f"validation regimes {sorted(unknown)} not in library")
        self.noise = noise
        self.error_reference = error_reference
        self._targets = {}
        for r, X in self.states.items():
            if error_reference == "projection":
                Psi = lib.sublibraries[r].modes
                self._targets[r] = Psi @ (Psi.conj().T @ X)
            else:
                self._targets[r] = X
        self._norms = {r: np.linalg.norm(X, axis=0) for r, X in self.states.items()}
        self.cache = {}
        self.calls = 0

    def __call__(self, idx, generation=0):
        # the sampled set, not its order, determines fitness
        key = tuple(sorted(idx.indices))
        rec = self.cache.get(key)
        if rec is None:
            rec = self._evaluate(idx)
            self.cache[key] = rec
        elif rec.index_set.indices != idx.indices:
            rec = replace(rec, index_set=idx)
        return rec.at_generation(generation)

    def _sampled(self, idx, sampled):
        if sampled is None or sampled.idx.indices != idx.indices:
            sampled = SampledLibrary(self.lib, idx)
        return sampled

    def classification(self, idx, sampled=None):
        """Number of noiselessly misclassified validation states."""
        idx = idx.sorted()
        sampled = self._sampled(idx, sampled)
        wrong = 0
        for r, X in self.states.items():
            pred, _ = sampled.predict(X[idx.rows])
            wrong += int(np.sum(pred != self.lib.regime_ids.index(r)))
        return wrong

    def errors(self, idx, sampled=None):
        """Per-state relative reconstruction errors using each state's true regime."""
        idx = idx.sorted()
        sampled = self._sampled(idx, sampled)
        out = []
        for r, X in self.states.items():
            a = sampled.coefficients(r, X[idx.rows])
            rec = self.lib.sublibraries[r].modes @ a
            out.append(np.linalg.norm(self._targets[r] - rec, axis=0) / self._norms[r])
        return np.concatenate(out)

    def accuracy(self, idx, sampled=None):
        if self.noise is None:
            return None
        idx = idx.sorted()
        sampled = self._sampled(idx, sampled)
        return noisy_trials(self.lib, idx, self.states, self.noise.sigma_frac,
                            self.noise.rounds, self.noise.seed, sampled=sampled)

    def _evaluate(self, idx):
        self.calls += 1
        orig, idx = idx, idx.sorted()
        try:
            sampled = SampledLibrary(self.lib, idx)
            wrong = self.classification(idx, sampled)
            raw = float(np.mean(self.errors(idx, sampled)))
            min_acc = np.nan
            feasible = wrong == 0
            if feasible and self.noise is not None:
                acc = self.accuracy(idx, sampled)
                min_acc = min(acc.values())
                feasible = min_acc >= self.noise.accuracy
        except (np.linalg.LinAlgError, NumericalError) as exc:
            log.debug("fitness solve failed for %s: %s", idx.indices, exc)
            return FitnessRecord(orig, INFEASIBLE, False, raw_error=math.inf)
        if not np.isfinite(raw):
            feasible = False
        return FitnessRecord(orig, raw if feasible else INFEASIBLE, feasible,
                             raw_error=raw, min_accuracy=float(min_acc), misclassified=wrong)


def fitness(idx, lib, validation, noise=None, error_reference="state"):
    """Fitness of one index set; see ``FitnessEvaluator``."""
    return FitnessEvaluator(lib, validation, noise, error_reference)(idx)


@dataclass
class GAResult:
    best: FitnessRecord
    trace: list
    feasible_counts: list
    best_per_generation: list = field(default_factory=list)
    evaluations: int = 0


def _stream(seed, generation, slot):
    return np.random.default_rng([seed, generation, slot])


def evolve(start, lib, validation, cfg, noise=None, error_reference="state", evaluator=None):
    """Run the elitist mutation-only search from ``start``.

    Generation 0 is ``start`` plus ``population - 1`` mutants of it. The
    trace holds the best error of generations ``0..generations`` and is
    non-increasing because the elite is carried over unchanged.
    """
    ev = evaluator or FitnessEvaluator(lib, validation, noise, error_reference)
    cand = cfg.candidates(start.n)
    pop = [start] + [mutate(start, cfg, _stream(cfg.seed, 0, s), candidates=cand)
                     for s in range(1, cfg.population)]
    trace, counts, bests = [], [], []
    elite = None
    for g in range(cfg.generations + 1):
        if g > 0:
            children = []
            for s in range(cfg.elite, cfg.population):
                rng = _stream(cfg.seed, g, s)
                parent = elite[int(rng.integers(len(elite)))].index_set
                children.append(mutate(parent, cfg, rng, candidates=cand))
            pop = [rec.index_set for rec in elite] + children
        records = [ev(ind, g) for ind in pop]
        records.sort(key=FitnessRecord.rank_key)
        elite = records[:cfg.elite]
        best = records[0]
        trace.append(best.error if best.feasible else INFEASIBLE)
        counts.append(sum(r.feasible for r in records))
        bests.append(best)
        log.info("generation %d: best %.6g feasible %d/%d", g, trace[-1], counts[-1], len(records))
    best = min(bests, key=FitnessRecord.rank_key)
    if not best.feasible:
        warnings.warn("no feasible index set found; returning the lowest-error infeasible one",
                      RuntimeWarning, stacklevel=2)
    return GAResult(best, trace, counts, bests, ev.calls)
