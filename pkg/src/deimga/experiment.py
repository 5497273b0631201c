"""Experiment assembly: data sources, the sampling-strategy scorecard and full runs.

A *problem* bundles a regime library, held-out validation states and the
admissible sampling window. It can come from CQGLE simulations (cached on
disk), from ingested matrix files, or from a synthetic multi-regime family.
"""

from dataclasses import asdict, dataclass, field
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import warnings

import numpy as np

from . import __version__
from .brute import MAX_SUBSETS, exhaustive_search, position_histograms
from .config import ExperimentConfig
from .cqgle import GLDomain, linear_symbol, nonlinear_term, regime_params, simulate
from .deim import IndexSet, build_projector, deim_indices, deim_plus_k
from .errors import ConfigError, DeimgaError, DimensionError, ValidationError
from .ga import FitnessEvaluator, GAConfig, NoiseSettings, evolve
from .gappy import select_condition_number, select_extrema, select_random
from .library import build_library, noisy_trials
from .matrix_io import read_matrix, write_indices
from .integrate import StepStats
from .pod import SnapshotSet, compute_pod, project
from .rom import CountingNonlinearity, galerkin_reduce, rom_integrate, spectral_operator

log = logging.getLogger(__name__)

SOLVER_TAG = "cqgle-lawson-dp54-v1"
STRATEGIES = ("Gappy 1", "Gappy 2", "Gappy 3", "Gappy 4", "Gappy 5", "DEIM NL all",
              "DEIM PRE", "DEIM+1 PRE", "GA", "Brute force")
GAPPY4_M = 10


# --------------------------------------------------------------------------- data

def default_cache_dir():
    env = os.environ.get("DEIMGA_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "deimga"


def _sim_key(params, domain):
    d = asdict(domain)
    d.pop("discard_transient")
    blob = json.dumps({"tag": SOLVER_TAG, "params": asdict(params), "domain": d},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:24]


def cached_simulate(regime, domain=None, cache_dir=None):
    """Full ``[0, t_final]`` simulation of a named regime, memoised on disk."""
    domain = domain or GLDomain()
    params = regime_params(regime)
    cache = Path(cache_dir) if cache_dir else default_cache_dir()
    path = cache / f"sim-{regime}-{_sim_key(params, domain)}.npz"
    if path.exists():
        with np.load(path) as z:
            return SnapshotSet(z["data"], z["times"], regime=regime, grid=z["grid"])
    full = GLDomain(**{**asdict(domain), "discard_transient": False})
    S = simulate(params, full).with_regime(regime)
    cache.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, data=S.data, times=S.times, grid=S.grid)
    os.replace(tmp, path)
    return S


def drop_transient(S, t_final):
    keep = S.times >= t_final / 4
    return SnapshotSet(S.data[:, keep], S.times[keep], S.regime, S.grid)


def ingest_snapshots(path, field_kind=None, regime_label=None):
    """Snapshot set from a matrix file; columns are states, times are column numbers."""
    X = read_matrix(path, field=field_kind)
    return SnapshotSet(X, np.arange(X.shape[1], dtype=float), regime=regime_label)


RE_LABELS = ("Re40", "Re150", "Re300", "Re1000")


def synthetic_regimes(count=4, n=256, p=120, seed=0, labels=None):
    """Real-valued wake-like travelling-wave families, one per regime.

    Regime ``j`` superposes decaying travelling harmonics with a
    regime-specific wavenumber, frequency and envelope; the envelope drifts
    slowly in time, so the snapshot sets have a decaying singular spectrum
    rather than an exact low rank.
    """
    if labels is None:
        labels = RE_LABELS[:count] if count <= len(RE_LABELS) else \
            tuple(f"Re{40 * (j + 1)}" for j in range(count))
    if len(labels) != count:
        raise ValidationError("need one label per synthetic regime")
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, 1.0, n, endpoint=False)[:, None]
    t = np.linspace(0.0, 2 * np.pi, p, endpoint=False)
    sets = []
    for j, lab in enumerate(labels):
        k = 6.0 + 3.0 * j
        omega = 1.0 + 0.5 * j
        width = 0.08 + 0.03 * j
        centre = 0.15 + 0.05 * j + 0.02 * np.sin(0.5 * omega * t + rng.uniform(0, 2 * np.pi))
        env = np.exp(-((x - centre) / width) ** 2)
        amps = (1.0 + 0.1 * rng.standard_normal(6)) / np.arange(1, 7) ** 1.5
        X = 0.3 * env * (1 + 0.2 * np.sin(omega * t))
        for h, a in enumerate(amps, start=1):
            X = X + a * env * np.cos(2 * np.pi * h * k * x - h * omega * t)
        sets.append(SnapshotSet(X, t, regime=lab, grid=x[:, 0]))
    return sets


@dataclass(frozen=True, eq=False)
class Problem:
    library: object
    validation: dict
    training: dict
    candidates: np.ndarray
    window: tuple
    m: int
    nonlinear: dict = field(default_factory=dict)
    grid: np.ndarray = None

    @property
    def n(self):
        return self.library.n


def _snapshot_sets(cfg, cache_dir):
    if cfg.source == "cqgle":
        domain = GLDomain(n=cfg.n, t_final=cfg.t_final, snapshot_count=cfg.snapshots)
        sets = []
        for r in cfg.regimes:
            S = cached_simulate(r, domain, cache_dir)
            sets.append(drop_transient(S, cfg.t_final) if cfg.discard_transient else S)
        return sets
    if cfg.source == "ingest":
        for p in cfg.ingest_paths:
            if not Path(p).exists():
                raise ValidationError(f"missing input file {p}")
        return [ingest_snapshots(p, None, lab)
                for p, lab in zip(cfg.ingest_paths, cfg.ingest_labels)]
    return synthetic_regimes(cfg.synthetic_regimes, cfg.synthetic_n,
                             cfg.synthetic_snapshots, cfg.synthetic_seed)


def candidate_lattice(n, start, stride):
    if not 1 <= start <= n or stride < 1:
        raise ConfigError(f"bad candidate lattice start={start} stride={stride} for n={n}")
    return np.arange(start, n + 1, stride)


def build_problem(cfg, cache_dir=None, sets=None):
    """Library, validation split and sampling window for a configuration."""
    cache_dir = cache_dir or cfg.cache_dir or None
    sets = sets if sets is not None else _snapshot_sets(cfg, cache_dir)
    training, validation, nonlinear = {}, {}, {}
    for S in sets:
        train, held = S.split(cfg.holdout)
        if held is None:
            raise ConfigError("holdout must be positive to form a validation set")
        training[S.regime] = train
        validation[S.regime] = held.data
        if cfg.source == "cqgle":
            nonlinear[S.regime] = nonlinear_term(train.data, regime_params(S.regime))
    lib = build_library(list(training.values()), cfg.energy, max_rank=cfg.library_max_rank)
    n = lib.n
    if cfg.candidate_start is not None:
        start = cfg.candidate_start
    elif cfg.source == "cqgle":
        start = GLDomain(n=cfg.n).center_index
    else:
        start = 1
    cand = candidate_lattice(n, start, cfg.candidate_stride)
    if cand.size < cfg.window_size:
        raise ConfigError(f"lattice holds {cand.size} points, window needs {cfg.window_size}")
    window = tuple(int(i) for i in cand[:cfg.window_size])
    return Problem(lib, validation, training, cand, window, cfg.m, nonlinear, sets[0].grid)


def noise_settings(cfg):
    return NoiseSettings(cfg.noise_sigma, cfg.noise_rounds, cfg.noise_seed, cfg.accuracy)


def ga_settings(cfg, window):
    return GAConfig(cfg.population, cfg.elite, cfg.generations, cfg.mutation_prob,
                    cfg.mutation_radius, tuple(window), cfg.seed)


def make_evaluator(problem, cfg, error_reference=None):
    return FitnessEvaluator(problem.library, problem.validation, noise_settings(cfg),
                            error_reference or cfg.error_reference)


def deim_starts(problem, m=None):
    """DEIM and DEIM+1 index sets on the concatenated library, within the window."""
    m = m or problem.m
    return (deim_indices(problem.library.concat, m, problem.window),
            deim_plus_k(problem.library.concat, m, 1, problem.window))


def deim_nl_all(problem, m=None):
    """DEIM on the POD of all regimes' nonlinearity snapshots, concatenated."""
    if not problem.nonlinear:
        return None
    m = m or problem.m
    N = np.hstack([problem.nonlinear[r] for r in problem.library.regime_ids])
    xi = compute_pod(N, rank=m)
    return deim_indices(xi, m, problem.window)


# --------------------------------------------------------------------------- reduced model

@dataclass
class RomRun:
    times: np.ndarray
    errors: np.ndarray
    model: object
    counter: CountingNonlinearity
    stats: StepStats


def rom_experiment(regime="b5", rank=None, m=None, indices=None, tspan=(0.0, 10.0), t0=10.0,
                   energy=0.999, domain=None, cache_dir=None, rtol=1e-8, atol=1e-10):
    """Reduced CQGLE model against the full simulation it was built from.

    The state basis and the nonlinearity basis come from the POD of the full
    run and of its nonlinear term; ``rank``/``m`` of None select them at
    ``energy``. The reduced model starts from the projection of the snapshot
    at ``t0 + tspan[0]`` and is compared with every snapshot up to
    ``t0 + tspan[1]``.
    """
    domain = domain or GLDomain()
    params = regime_params(regime)
    S = cached_simulate(regime, domain, cache_dir)
    psi = compute_pod(S, rank=rank) if rank else compute_pod(S, energy=energy)
    N = nonlinear_term(S.data, params)
    xi = compute_pod(N, rank=m) if m else compute_pod(N, energy=energy)
    if indices is None:
        idx = deim_indices(xi, xi.rank)
    else:
        idx = IndexSet(tuple(indices), S.n)
        if idx.m != xi.rank:
            raise DimensionError(f"{idx.m} indices for a rank-{xi.rank} nonlinearity basis")
    proj = build_projector(xi, idx)
    model = galerkin_reduce(spectral_operator(linear_symbol(domain.wavenumbers, params)), psi,
                            proj)
    lo, hi = t0 + tspan[0], t0 + tspan[1]
    tol = 1e-9 * max(1.0, domain.t_final)
    sel = np.flatnonzero((S.times >= lo - tol) & (S.times <= hi + tol))
    if sel.size < 2 or abs(S.times[sel[0]] - lo) > tol:
        raise ValidationError(f"start time {lo} is not a snapshot time or span is too short")
    counter = CountingNonlinearity(lambda u: nonlinear_term(u, params))
    stats = StepStats()
    a = rom_integrate(model, project(S.data[:, sel[0]], psi), S.times[sel], counter,
                      rtol=rtol, atol=atol, stats=stats)
    U = psi.modes @ a.T
    ref = S.data[:, sel]
    err = np.linalg.norm(U - ref, axis=0) / np.linalg.norm(ref, axis=0)
    return RomRun(S.times[sel], err, model, counter, stats)


# --------------------------------------------------------------------------- scorecard

@dataclass(frozen=True)
class ScoreRow:
    strategy: str
    indices: tuple
    error: float
    state_error: float
    misclassification: float
    misclassified_noiseless: int
    comparable: bool

    @property
    def m(self):
        return len(self.indices)


def score(problem, cfg, strategy, idx, evaluators):
    ev, ev_state = evaluators
    if idx is None:
        return ScoreRow(strategy, (), math.nan, math.nan, math.nan, -1, False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        err = float(np.mean(ev.errors(idx)))
        state_err = float(np.mean(ev_state.errors(idx)))
        wrong = ev.classification(idx)
        acc = noisy_trials(problem.library, idx.sorted(), problem.validation, cfg.noise_sigma,
                           cfg.noise_rounds, cfg.noise_seed)
    win = set(problem.window)
    comparable = idx.m == problem.m and all(i in win for i in idx.indices)
    return ScoreRow(strategy, idx.indices, err, state_err, 1.0 - min(acc.values()), wrong,
                    comparable)


def compare_strategies(problem, cfg, ga_result=None, brute_result=None, evaluator=None):
    """One scorecard row per sampling strategy, in the fixed reporting order.

    Gappy 1 draws randomly inside the window and Gappy 2 over the whole
    domain; Gappy 3 and 4 minimise the Gram condition number with ``m`` and
    ten points; Gappy 5 walks mode extrema. GA and brute force are run here
    unless results are passed in.
    """
    lib, m, n = problem.library, problem.m, problem.n
    ev = evaluator or make_evaluator(problem, cfg)
    ev_state = make_evaluator(problem, cfg, "state") if ev.error_reference != "state" else ev
    d0, d1 = deim_starts(problem)
    if ga_result is None:
        ga_result = run_ga(problem, cfg, d1, ev)
    if brute_result is None and cfg.brute:
        brute_result = run_brute(problem, cfg, ev)
    basis = lib.as_basis()
    picks = {
        "Gappy 1": select_random(n, m, problem.window, cfg.seed),
        "Gappy 2": select_random(n, m, None, cfg.seed),
        "Gappy 3": select_condition_number(basis, m, problem.window),
        "Gappy 4": select_condition_number(basis, min(GAPPY4_M, len(problem.window)),
                                           problem.window),
        "Gappy 5": _extrema_or_none(basis, m, problem.window),
        "DEIM NL all": deim_nl_all(problem),
        "DEIM PRE": d0,
        "DEIM+1 PRE": d1,
        "GA": ga_result.best.index_set,
        "Brute force": brute_result.best.index_set if brute_result and brute_result.best
        else None,
    }
    return [score(problem, cfg, s, picks[s], (ev, ev_state)) for s in STRATEGIES]


def _extrema_or_none(basis, m, window):
    try:
        return select_extrema(basis, m, window)
    except ValidationError as exc:
        log.warning("extrema selection unavailable: %s", exc)
        return None


def run_ga(problem, cfg, start, evaluator=None):
    ev = evaluator or make_evaluator(problem, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return evolve(start, problem.library, problem.validation,
                      ga_settings(cfg, problem.window), evaluator=ev)


def run_brute(problem, cfg, evaluator=None):
    """Exhaustive search over the window, or None when it exceeds the subset guard."""
    if math.comb(len(problem.window), problem.m) > MAX_SUBSETS:
        log.warning("brute force skipped: C(%d, %d) exceeds %d", len(problem.window),
                    problem.m, MAX_SUBSETS)
        return None
    ev = evaluator or make_evaluator(problem, cfg)
    return exhaustive_search(problem.library, problem.m, problem.window, problem.validation,
                             noise_settings(cfg), ev.error_reference, evaluator=ev)


# --------------------------------------------------------------------------- reports

def _num(v):
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else ("inf" if math.isinf(v) else format(float(v), ".17g"))
    return str(v)


def write_csv(path, header, rows, cfg=None):
    """CSV with a provenance comment line (tool version and config hash)."""
    digest = cfg.digest() if cfg is not None else "none"
    lines = [f"# deimga {__version__} config={digest}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_num(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _idx_field(indices):
    return " ".join(str(i) for i in indices)


def write_trace(path, result, cfg=None):
    rows = [(g, e, c) for g, (e, c) in enumerate(zip(result.trace, result.feasible_counts))]
    write_csv(path, ("generation", "best_error", "feasible_count"), rows, cfg)


def write_brute(path, result, cfg=None):
    rows = [(k + 1, _idx_field(r.index_set.indices), r.error, r.accuracy)
            for k, r in enumerate(result.ranked)]
    write_csv(path, ("rank", "indices", "error", "min_regime_accuracy"), rows, cfg)


def write_scorecard(path, rows, cfg=None):
    write_csv(path, ("strategy", "m", "indices", "error", "state_error", "misclassification",
                     "misclassified_noiseless", "comparable"),
              [(r.strategy, r.m, _idx_field(r.indices), r.error, r.state_error,
                r.misclassification, r.misclassified_noiseless, int(r.comparable))
               for r in rows], cfg)


@dataclass
class RunSummary:
    out_dir: Path
    status: str
    stages: list
    problem: Problem = None
    ga: dict = field(default_factory=dict)
    brute: object = None
    scorecard: list = None
    error: str = ""
    exception: object = None


def _write_status(out, status, stages, error=""):
    payload = {"status": status, "stages_completed": stages, "error": error}
    (out / "status.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def end_to_end(cfg, out_dir, cache_dir=None):
    """Data, library, DEIM starts, GA, brute force and reports in ``out_dir``.

    A ``status.json`` file records the completed stages; on failure it reads
    ``failed: <stage>`` with the error message, and the exception is not
    propagated.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    summary = RunSummary(out, "running", [])
    _write_status(out, "running", [])
    stage = "ingest"
    try:
        sets = _snapshot_sets(cfg, cache_dir or cfg.cache_dir or None)
        summary.stages.append(stage)

        stage = "library"
        problem = build_problem(cfg, cache_dir, sets=sets)
        summary.problem = problem
        lib = problem.library
        write_csv(out / "library.csv", ("regime", "rank", "energy_captured"),
                  [(r, lib.sublibraries[r].rank, lib.sublibraries[r].energy_captured)
                   for r in lib.regime_ids], cfg)
        summary.stages.append(stage)

        stage = "deim"
        d0, d1 = deim_starts(problem)
        write_indices(out / "indices_deim.txt", d0.indices)
        write_indices(out / "indices_deim1.txt", d1.indices)
        summary.stages.append(stage)

        stage = "ga"
        ev = make_evaluator(problem, cfg)
        for name, start in (("deim", d0), ("deim1", d1)):
            res = run_ga(problem, cfg, start, ev)
            summary.ga[name] = res
            write_trace(out / f"ga_trace_{name}.csv", res, cfg)
        write_indices(out / "indices_ga.txt", summary.ga["deim1"].best.index_set.indices)
        summary.stages.append(stage)

        if cfg.brute:
            stage = "brute"
            summary.brute = run_brute(problem, cfg, ev)
            if summary.brute is not None:
                write_brute(out / "brute.csv", summary.brute, cfg)
                hist = position_histograms(summary.brute.ranked, problem.m, problem.window)
                write_csv(out / "brute_histograms.csv", ("slot", "position", "grid_index", "count"),
                          [(j + 1, q + 1, problem.window[q], int(hist[j, q]))
                           for j in range(hist.shape[0]) for q in range(hist.shape[1])], cfg)
            summary.stages.append(stage)

        if cfg.compare:
            stage = "compare"
            summary.scorecard = compare_strategies(problem, cfg, summary.ga["deim1"],
                                                   summary.brute, ev)
            write_scorecard(out / "scorecard.csv", summary.scorecard, cfg)
            summary.stages.append(stage)

        if cfg.figures:
            stage = "figures"
            from .plotting import render_run
            render_run(summary, out)
            summary.stages.append(stage)
    except (DeimgaError, OSError, ValueError, ArithmeticError) as exc:
        summary.status = f"failed: {stage}"
        summary.error = f"{type(exc).__name__}: {exc}"
        summary.exception = exc
        log.error("run failed at stage %s: %s", stage, exc)
        _write_status(out, summary.status, summary.stages, summary.error)
        return summary
    summary.status = "ok"
    _write_status(out, "ok", summary.stages)
    return summary


__all__ = [
    "ExperimentConfig", "Problem", "ScoreRow", "RunSummary", "STRATEGIES",
    "cached_simulate", "drop_transient", "ingest_snapshots", "synthetic_regimes",
    "build_problem", "deim_starts", "deim_nl_all", "compare_strategies", "run_ga",
    "run_brute", "end_to_end", "write_csv", "write_trace", "write_brute",
    "write_scorecard", "noise_settings", "rom_experiment", "RomRun", "ga_settings",
    "make_evaluator", "IndexSet",
]
