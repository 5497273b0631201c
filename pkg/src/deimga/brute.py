"""Exhaustive search over small index subsets of a window."""

from dataclasses import dataclass, field
import itertools
import logging
import math

import numpy as np

from .deim import IndexSet
from .errors import ValidationError
from .ga import FitnessEvaluator, NoiseSettings
from .library import SampledLibrary, noisy_trials

log = logging.getLogger(__name__)

MAX_SUBSETS = 10_000_000


@dataclass(frozen=True)
class BruteRecord:
    index_set: IndexSet
    error: float
    accuracy: float


@dataclass
class BruteResult:
    ranked: list
    evaluated: int
    stage1: int
    stage2: int
    window: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def best(self):
        return self.ranked[0] if self.ranked else None


def exhaustive_search(lib, k, window, validation, noise=NoiseSettings(),
                      error_reference="state", evaluator=None):
    """Rank every ``k``-subset of ``window`` that passes both classification stages.

    Stage 1 keeps subsets that classify every validation state correctly
    without noise. Stage 2 keeps those whose per-regime accuracy over
    ``noise.rounds`` noisy rounds reaches ``noise.accuracy`` (skipped when
    ``noise`` is None). Survivors are sorted by mean relative reconstruction
    error, ties broken by index order. Index sets are stored sorted.
    """
    window = tuple(int(i) for i in np.unique(np.asarray(window, dtype=int)))
    if not 1 <= k <= len(window):
        raise ValidationError(f"cannot choose {k} of {len(window)} window locations")
    total = math.comb(len(window), k)
    if total > MAX_SUBSETS:
        raise ValidationError(f"C({len(window)}, {k}) = {total} subsets exceeds {MAX_SUBSETS}")
    ev = evaluator or FitnessEvaluator(lib, validation, None, error_reference)
    evaluated = stage1 = 0
    survivors = []
    for combo in itertools.combinations(window, k):
        evaluated += 1
        idx = IndexSet(combo, lib.n)
        sampled = SampledLibrary(lib, idx)
        if ev.classification(idx, sampled):
            continue
        stage1 += 1
        acc = 1.0
        if noise is not None:
            accs = noisy_trials(lib, idx, ev.states, noise.sigma_frac, noise.rounds,
                                noise.seed, sampled=sampled)
            acc = min(accs.values())
            if acc < noise.accuracy:
                continue
        err = float(np.mean(ev.errors(idx, sampled)))
        survivors.append(BruteRecord(idx, err, acc))
    survivors.sort(key=lambda r: (r.error, r.index_set.indices))
    diag = {"evaluated": evaluated, "stage1": stage1, "stage2": len(survivors)}
    if not survivors:
        log.warning("exhaustive search found no admissible subset: %s", diag)
    return BruteResult(survivors, evaluated, stage1, len(survivors), window, diag)


def position_histograms(ranked, k, window):
    """Counts of each window position per sorted slot, shape (k, len(window))."""
    window = np.asarray(window, dtype=int)
    hist = np.zeros((k, window.size), dtype=int)
    lookup = {int(w): i for i, w in enumerate(window)}
    for rec in ranked:
        idx = rec.index_set if isinstance(rec, BruteRecord) else rec
        s = sorted(idx.indices if isinstance(idx, IndexSet) else idx)
        if len(s) != k:
            raise ValidationError(f"expected {k} indices, got {len(s)}")
        for j, i in enumerate(s):
            hist[j, lookup[int(i)]] += 1
    return hist
