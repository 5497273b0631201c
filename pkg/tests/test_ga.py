import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from deimga.deim import IndexSet
from deimga.errors import ConfigError
from deimga.ga import (INFEASIBLE, FitnessEvaluator, FitnessRecord, GAConfig, NoiseSettings,
                       evolve, fitness, mutate)
from deimga.library import build_library
from deimga.pod import SnapshotSet
from oracles import orthonormal


class ScriptedStream:
    """Stand-in generator returning fixed draws."""

    def __init__(self, uniform, integer=0):
        self.uniform, self.integer = uniform, integer

    def random(self):
        return self.uniform

    def integers(self, lo, hi):
        return self.integer


def _problem(seed, n=40, p=15, ranks=(2, 2, 2), noise=1e-2):
    rng = np.random.default_rng(seed)
    sets, validation = [], {}
    for i, r in enumerate(ranks):
        V = orthonormal(n, r, rng)
        X = V @ rng.standard_normal((r, p)) + noise * rng.standard_normal((n, p))
        sets.append(SnapshotSet(X[:, :-4], np.arange(p - 4.0), regime=f"R{i}"))
        validation[f"R{i}"] = X[:, -4:]
    return build_library(sets, energy=0.999, max_rank=2), validation


def test_identity_mutation():
    idx = IndexSet((3, 9, 14), 20)
    assert mutate(idx, GAConfig(mutation_prob=0.5), ScriptedStream(0.99)) == idx


def test_clamping_at_lower_edge():
    cfg = GAConfig(mutation_prob=1.0, mutation_radius=1)
    # integers() -> 0 encodes the shift -1
    out = mutate(IndexSet((1,), 5), cfg, ScriptedStream(0.0, 0))
    assert out.indices == (1,)
    rng = np.random.default_rng(0)
    seen = {mutate(IndexSet((1,), 5), cfg, rng).indices[0] for _ in range(200)}
    assert seen == {1, 2}


def test_shift_distribution_uniform():
    from scipy.stats import chisquare
    R = 3
    cfg = GAConfig(mutation_prob=1.0, mutation_radius=R)
    rng = np.random.default_rng(11)
    start = IndexSet((50,), 100)
    counts = {s: 0 for s in (*range(-R, 0), *range(1, R + 1))}
    for _ in range(100_000):
        counts[mutate(start, cfg, rng).indices[0] - 50] += 1
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_mutation_respects_window_and_distinctness():
    cfg = GAConfig(mutation_prob=1.0, mutation_radius=2, index_window=tuple(range(10, 31, 2)))
    rng = np.random.default_rng(5)
    idx = IndexSet((12, 14, 16), 40)
    for _ in range(500):
        idx = mutate(idx, cfg, rng)
        assert set(idx.indices) <= set(range(10, 31, 2))
        assert len(set(idx.indices)) == 3


def test_window_too_small():
    cfg = GAConfig(index_window=(4, 5))
    with pytest.raises(ConfigError):
        mutate(IndexSet((4, 5, 6), 10), cfg, np.random.default_rng(0))


def test_start_outside_window():
    cfg = GAConfig(index_window=(4, 5, 6, 7))
    with pytest.raises(ConfigError):
        mutate(IndexSet((1, 5), 10), cfg, np.random.default_rng(0))


@pytest.mark.parametrize("kw", [dict(population=1), dict(elite=0), dict(elite=100),
                                dict(generations=-1), dict(mutation_prob=0.0),
                                dict(mutation_prob=1.5), dict(mutation_radius=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        GAConfig(**kw)


def test_fitness_exact_span():
    lib, _ = _problem(1, noise=0.0)
    rng = np.random.default_rng(2)
    validation = [(r, lib.sublibraries[r].modes @ rng.standard_normal(2))
                  for r in lib.regime_ids for _ in range(3)]
    rec = fitness(IndexSet((3, 8, 15, 22, 29, 36), 40), lib, validation)
    assert rec.feasible
    assert rec.error <= 1e-8


def test_fitness_constraint_violation():
    e = np.eye(4)
    a = SnapshotSet(np.outer(e[0] + e[2], [1, 2]), np.arange(2.0), regime="a")
    b = SnapshotSet(np.outer(e[0] + e[3], [1, 3]), np.arange(2.0), regime="b")
    lib = build_library([a, b])
    validation = [("a", e[0] + e[2]), ("b", e[0] + e[3])]
    # one sample at row 1 cannot tell the regimes apart
    rec = fitness(IndexSet((1,), 4), lib, validation)
    assert not rec.feasible and rec.error == INFEASIBLE
    assert rec.misclassified == 1
    assert fitness(IndexSet((3, 4), 4), lib, validation).feasible


def test_fitness_is_order_invariant():
    lib, val = _problem(4)
    ev = FitnessEvaluator(lib, val, NoiseSettings(0.05, 50, 1))
    a = ev(IndexSet((30, 4, 17, 9), 40))
    b = ev(IndexSet((4, 9, 17, 30), 40))
    assert (a.error, a.feasible, a.raw_error) == (b.error, b.feasible, b.raw_error)
    assert a.index_set.indices == (30, 4, 17, 9)
    assert ev.calls == 1


def test_error_reference_projection_removes_truncation():
    lib, val = _problem(6, noise=0.05)
    idx = IndexSet(tuple(range(2, 40, 4)), 40)
    state = FitnessEvaluator(lib, val, error_reference="state")(idx)
    proj = FitnessEvaluator(lib, val, error_reference="projection")(idx)
    assert proj.raw_error < state.raw_error
    with pytest.raises(ConfigError):
        FitnessEvaluator(lib, val, error_reference="other")


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.integers(0, 3), st.floats(0, 1))
def test_feasibility_dominance(feasible_err, raw, wrong, acc):
    idx_a, idx_b = IndexSet((5, 9), 20), IndexSet((1, 2), 20)
    good = FitnessRecord(idx_a, feasible_err, True, raw_error=feasible_err)
    bad = FitnessRecord(idx_b, INFEASIBLE, False, raw_error=raw, min_accuracy=acc,
                        misclassified=wrong)
    assert good.rank_key() < bad.rank_key()


def test_ties_break_by_first_index_then_lexicographic():
    recs = [FitnessRecord(IndexSet(ix, 20), 0.5, True) for ix in [(7, 2), (3, 9), (3, 4)]]
    ranked = sorted(recs, key=FitnessRecord.rank_key)
    assert [r.index_set.indices for r in ranked] == [(3, 4), (3, 9), (7, 2)]


class RecordingEvaluator(FitnessEvaluator):
    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.generations = {}

    def __call__(self, idx, generation=0):
        self.generations.setdefault(generation, []).append(idx)
        return super().__call__(idx, generation)


@given(st.integers(0, 2**31), st.integers(0, 1000))
def test_evolve_invariants(problem_seed, ga_seed):
    lib, val = _problem(problem_seed % 50)
    cfg = GAConfig(population=20, elite=4, generations=4, mutation_radius=2, seed=ga_seed,
                   index_window=tuple(range(1, 41)))
    ev = RecordingEvaluator(lib, val, NoiseSettings(0.05, 40, 3))
    start = IndexSet((5, 12, 20, 33), 40)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = evolve(start, lib, val, cfg, evaluator=ev)
        again = evolve(start, lib, val, cfg, NoiseSettings(0.05, 40, 3))
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))
    assert res.trace == again.trace and res.best == again.best
    assert len(res.trace) == cfg.generations + 1
    assert sorted(ev.generations) == list(range(cfg.generations + 1))
    for g, pop in ev.generations.items():
        assert len(pop) == cfg.population
        assert all(len(set(p.indices)) == 4 and p.n == 40 for p in pop)
    assert ev.generations[0][0] == start
    if res.best.feasible:
        assert res.best.error == min(res.trace)


def test_degenerate_window_keeps_start():
    lib, val = _problem(3)
    start = IndexSet((4, 18, 27, 36), 40)
    cfg = GAConfig(population=10, elite=2, generations=3, index_window=start.indices)
    res = evolve(start, lib, val, cfg)
    assert len(set(res.trace)) == 1
    assert res.best.index_set == start


def test_no_feasible_warns():
    e = np.eye(4)
    a = SnapshotSet(np.outer(e[0] + e[2], [1, 2]), np.arange(2.0), regime="a")
    b = SnapshotSet(np.outer(e[0] + e[3], [1, 3]), np.arange(2.0), regime="b")
    lib = build_library([a, b])
    val = [("a", e[0] + e[2]), ("b", e[0] + e[3])]
    cfg = GAConfig(population=4, elite=1, generations=2, index_window=(1, 2))
    with pytest.warns(RuntimeWarning):
        res = evolve(IndexSet((1,), 4), lib, val, cfg)
    assert not res.best.feasible
    assert all(math.isinf(t) for t in res.trace)


@pytest.mark.slow
def test_cqgle_deim_plus_one_starts_lower(cqgle_evaluator, cqgle_starts):
    deim, deim1 = (cqgle_evaluator(s) for s in cqgle_starts)
    assert deim1.raw_error < deim.raw_error
