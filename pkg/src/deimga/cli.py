"""Command-line interface.

Every subcommand accepts ``--config <file>`` in the ``key = value`` format;
explicit flags override config values, which override built-in defaults.
Exit status is 0 on success, 1 on invalid input and 2 on numerical failure.
"""

import argparse
import logging
from pathlib import Path
import sys
import warnings

import numpy as np

from . import __version__
from .brute import exhaustive_search, position_histograms
from .config import load_config
from .cqgle import GLDomain, regime_params, simulate
from .deim import IndexSet, deim_indices, deim_plus_k
from .errors import DeimgaError, NumericalError, ValidationError
from .experiment import (build_problem, compare_strategies, end_to_end, rom_experiment,
                         write_brute, write_csv, write_scorecard, write_trace)
from .ga import FitnessEvaluator, GAConfig, NoiseSettings, evolve
from .gappy import gappy_fit, gappy_system, reconstruct, reconstruction_error
from .library import SampledLibrary, build_library, unit_noise
from .matrix_io import read_indices, read_matrix, write_indices, write_matrix
from .persist import read_library, read_states, write_library, write_states
from .pod import PODBasis, SnapshotSet, compute_pod

log = logging.getLogger("deimga")

# library-level defaults used when neither a flag nor the config sets a value
DEFAULTS = {
    "noise_sigma": 0.1, "noise_rounds": 400, "noise_seed": 7, "accuracy": 0.95,
    "population": 100, "elite": 10, "generations": 10, "mutation_prob": 0.5,
    "mutation_radius": 3, "seed": 7, "energy": 0.999, "error_reference": "state",
}


def parse_range(text, integer=True):
    """``lo:hi`` or ``lo:hi:step`` (inclusive) as a list, or a float pair for spans."""
    parts = text.split(":")
    if integer:
        if len(parts) not in (2, 3):
            raise ValidationError(f"expected lo:hi[:step], got {text!r}")
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        if hi < lo or step < 1:
            raise ValidationError(f"empty range {text!r}")
        return list(range(lo, hi + 1, step))
    if len(parts) != 2:
        raise ValidationError(f"expected a:b, got {text!r}")
    a, b = float(parts[0]), float(parts[1])
    if b <= a:
        raise ValidationError(f"empty span {text!r}")
    return a, b


class _Settings:
    """Flag > config file > default lookup for one invocation."""

    def __init__(self, args):
        self.args = args
        self.file = {}
        if getattr(args, "config", None):
            cfg = load_config(args.config)
            self.file = {k: getattr(cfg, k) for k in DEFAULTS}
            self.file_cfg = cfg
        else:
            self.file_cfg = None

    def get(self, flag, key):
        v = getattr(self.args, flag, None)
        if v is not None:
            return v
        if self.file_cfg is not None and key in self.file:
            return self.file[key]
        return DEFAULTS[key]

    def noise(self):
        return NoiseSettings(self.get("noise", "noise_sigma"), self.get("rounds", "noise_rounds"),
                             self.get("noise_seed", "noise_seed"), self.get("accuracy", "accuracy"))


def _index_set(path, n):
    return IndexSet(tuple(read_indices(path)), n)


# --------------------------------------------------------------------------- commands

def cmd_simulate(args, st):
    domain = GLDomain(n=args.n, t_final=args.tfinal, snapshot_count=args.snapshots,
                      discard_transient=args.discard_transient)
    S = simulate(regime_params(args.regime), domain)
    write_matrix(args.out, S.data)
    log.info("wrote %d x %d snapshots to %s", S.n, S.p, args.out)


def cmd_pod(args, st):
    sets = []
    labels = args.labels.split(",") if args.labels else [Path(p).stem for p in args.snapshots]
    if len(labels) != len(args.snapshots):
        raise ValidationError("need one label per snapshot file")
    for path, lab in zip(args.snapshots, labels):
        X = read_matrix(path)
        sets.append(SnapshotSet(X, np.arange(X.shape[1], dtype=float), regime=lab))
    energy = st.get("energy", "energy")
    if args.library_dir:
        train, held = {}, {}
        for S in sets:
            tr, te = S.split(args.holdout) if args.holdout else (S, None)
            train[S.regime] = tr
            if te is not None:
                held[S.regime] = te.data
        lib = build_library(list(train.values()), energy, max_rank=args.max_rank)
        write_library(args.library_dir, lib)
        if args.validation:
            if not held:
                raise ValidationError("--validation needs --holdout > 0")
            write_states(args.validation, held)
        log.info("library ranks %s", lib.ranks)
        return
    if len(sets) != 1 or not args.out:
        raise ValidationError("a single-basis run needs exactly one --snapshots file and --out")
    basis = compute_pod(sets[0], rank=args.rank) if args.rank else \
        compute_pod(sets[0], energy=energy)
    write_matrix(args.out, basis.modes)
    if args.singular_values:
        write_matrix(args.singular_values, basis.singular_values)
    log.info("rank %d, energy captured %.6f", basis.rank, basis.energy_captured)


def _basis_from_args(args):
    if args.library_dir:
        return read_library(args.library_dir).concat
    if args.basis:
        return read_matrix(args.basis)
    raise ValidationError("give --basis or --library-dir")


def cmd_deim(args, st):
    V = _basis_from_args(args)
    cand = parse_range(args.window) if args.window else None
    k = args.drop_first
    idx = deim_plus_k(V, args.m, k, cand) if k else deim_indices(V, args.m, cand)
    write_indices(args.out, idx.indices)


def cmd_gappy_fit(args, st):
    modes = read_matrix(args.library)
    sys_ = gappy_system(PODBasis.from_matrix(modes), _index_set(args.indices, modes.shape[0]))
    X = read_matrix(args.state)
    if X.shape[0] != modes.shape[0]:
        raise ValidationError(f"state has {X.shape[0]} rows, library {modes.shape[0]}")
    a = gappy_fit(sys_, X[sys_.index_set.rows])
    err = reconstruction_error(X, reconstruct(sys_, a))
    write_csv(args.report, ("snapshot_index", "rel_error"),
              [(j + 1, e) for j, e in enumerate(err)])


def cmd_classify(args, st):
    lib = read_library(args.library_dir)
    idx = _index_set(args.indices, lib.n)
    X = read_matrix(args.state)
    if X.shape[0] != lib.n:
        raise ValidationError(f"state has {X.shape[0]} rows, library {lib.n}")
    sampled = SampledLibrary(lib, idx)
    Y = X[idx.rows]
    pred, R = sampled.predict(Y)
    if np.any(pred < 0):
        raise NumericalError("a state has all-zero samples; its regime is undefined")
    sigma = st.get("noise", "noise_sigma")
    rounds = st.get("rounds", "noise_rounds")
    seed = st.get("noise_seed", "noise_seed")
    noise = unit_noise(seed, rounds, 1, idx.m, np.iscomplexobj(Y) or np.iscomplexobj(lib.concat))
    ids = lib.regime_ids
    rows = []
    for j in range(Y.shape[1]):
        y = Y[:, j]
        rms = np.sqrt(np.mean(np.abs(y) ** 2))
        noisy, _ = sampled.predict(y[:, None] + sigma * rms * noise[:, 0, :].T)
        order = np.sort(R[:, j])
        margin = order[1] - order[0] if order.size > 1 else np.inf
        rows.append((j + 1, ids[pred[j]], margin, *R[:, j], float(np.mean(noisy == pred[j]))))
    write_csv(args.report, ("snapshot_index", "predicted", "margin",
                            *(f"residual_{r}" for r in ids), "noisy_agreement"), rows)


def _noise_or_none(noise):
    return noise if noise.sigma_frac > 0 else None


def cmd_ga(args, st):
    lib = read_library(args.library_dir)
    val = read_states(args.validation)
    start = _index_set(args.start, lib.n)
    window = tuple(parse_range(args.window)) if args.window else None
    cfg = GAConfig(st.get("pop", "population"), st.get("elite", "elite"),
                   st.get("gens", "generations"), st.get("mutation_prob", "mutation_prob"),
                   st.get("radius", "mutation_radius"), window, st.get("seed", "seed"))
    ev = FitnessEvaluator(lib, val, _noise_or_none(st.noise()),
                          st.get("error_reference", "error_reference"))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = evolve(start, lib, val, cfg, evaluator=ev)
    for w in caught:
        log.warning("%s", w.message)
    if args.trace:
        write_trace(args.trace, res)
    write_indices(args.out, res.best.index_set.indices)
    log.info("best error %.6g at %s (feasible=%s)", res.best.error, res.best.index_set.indices,
             res.best.feasible)


def cmd_brute(args, st):
    lib = read_library(args.library_dir)
    val = read_states(args.validation)
    window = parse_range(args.window)
    noise = _noise_or_none(st.noise())
    res = exhaustive_search(lib, args.k, window, val, noise,
                            st.get("error_reference", "error_reference"))
    write_brute(args.out, res)
    if args.histograms:
        hist = position_histograms(res.ranked, args.k, res.window)
        write_csv(args.histograms, ("slot", "position", "grid_index", "count"),
                  [(j + 1, q + 1, res.window[q], int(hist[j, q]))
                   for j in range(hist.shape[0]) for q in range(hist.shape[1])])
        if args.figures:
            from .plotting import plot_position_histograms
            plot_position_histograms(hist, Path(args.histograms).with_suffix(".png"))
    log.info("evaluated %d, stage 1 %d, stage 2 %d", res.evaluated, res.stage1, res.stage2)


def cmd_rom(args, st):
    rank = None if args.rank == "auto" else int(args.rank)
    m = None if args.m == "auto" else int(args.m)
    indices = read_indices(args.indices) if args.indices else None
    domain = GLDomain(n=args.n, t_final=args.tfinal, snapshot_count=args.snapshots)
    run = rom_experiment(args.regime, rank, m, indices, parse_range(args.tspan, integer=False),
                         args.t0, domain=domain, cache_dir=args.cache_dir)
    write_csv(args.report, ("t", "rom_vs_full_rel_error"), list(zip(run.times, run.errors)))
    log.info("r=%d m=%d max error %.3e, %d rhs calls x %d samples", run.model.r, run.model.m,
             run.errors.max(), run.counter.calls, run.model.m)


def _experiment_config(args):
    overrides = {"seed": args.seed, "noise_sigma": args.noise, "cache_dir": args.cache_dir,
                 "figures": None if args.figures is None else bool(args.figures)}
    return load_config(args.config, overrides)


def cmd_compare(args, st):
    cfg = _experiment_config(args)
    problem = build_problem(cfg)
    rows = compare_strategies(problem, cfg)
    write_scorecard(args.out, rows, cfg)
    if cfg.figures:
        from .plotting import plot_scorecard
        plot_scorecard(rows, Path(args.out).with_suffix(".png"))


def cmd_run(args, st):
    cfg = _experiment_config(args)
    summary = end_to_end(cfg, args.out_dir)
    print(f"{summary.status} ({', '.join(summary.stages)})")
    if summary.exception is not None:
        raise summary.exception


# --------------------------------------------------------------------------- parser

def _add_noise(p):
    p.add_argument("--noise", type=float, help="noise sigma as a fraction of the sampled RMS")
    p.add_argument("--rounds", type=int, help="noisy classification rounds")
    p.add_argument("--noise-seed", type=int, dest="noise_seed")
    p.add_argument("--accuracy", type=float, help="per-regime accuracy threshold")
    p.add_argument("--error-reference", choices=("state", "projection"), dest="error_reference")


class _Parser(argparse.ArgumentParser):
    # usage errors are invalid input; exit status 2 is reserved for numerical failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    ap = _Parser(prog="deimga", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"deimga {__version__}")
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value configuration file")
        p.set_defaults(func=func)
        return p

    p = command("simulate", cmd_simulate, "solve the CQGLE and write snapshots")
    p.add_argument("--regime", required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--tfinal", type=float, default=40.0)
    p.add_argument("--snapshots", type=int, default=201)
    p.add_argument("--discard-transient", action="store_true", dest="discard_transient")
    p.add_argument("--out", required=True)

    p = command("pod", cmd_pod, "POD basis of one snapshot file, or a regime library")
    p.add_argument("--snapshots", nargs="+", required=True)
    p.add_argument("--labels", help="comma-separated regime labels (default: file stems)")
    p.add_argument("--energy", type=float)
    p.add_argument("--rank", type=int)
    p.add_argument("--max-rank", type=int, dest="max_rank")
    p.add_argument("--out")
    p.add_argument("--singular-values", dest="singular_values")
    p.add_argument("--library-dir", dest="library_dir")
    p.add_argument("--holdout", type=int, default=0)
    p.add_argument("--validation", help="directory for held-out states")

    p = command("deim", cmd_deim, "DEIM interpolation indices")
    p.add_argument("--basis")
    p.add_argument("--library-dir", dest="library_dir")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--drop-first", type=int, default=0, dest="drop_first")
    p.add_argument("--window", help="candidate indices lo:hi[:step]")
    p.add_argument("--out", required=True)

    p = command("gappy-fit", cmd_gappy_fit, "gappy reconstruction errors")
    p.add_argument("--library", required=True)
    p.add_argument("--indices", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--report", required=True)

    p = command("classify", cmd_classify, "regime classification from samples")
    p.add_argument("--library-dir", required=True, dest="library_dir")
    p.add_argument("--indices", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--seed", type=int, dest="noise_seed")
    p.add_argument("--noise", type=float)
    p.add_argument("--rounds", type=int)

    p = command("ga", cmd_ga, "genetic refinement of an index set")
    p.add_argument("--start", required=True)
    p.add_argument("--library-dir", required=True, dest="library_dir")
    p.add_argument("--validation", required=True)
    p.add_argument("--pop", type=int)
    p.add_argument("--elite", type=int)
    p.add_argument("--gens", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mutation-prob", type=float, dest="mutation_prob")
    p.add_argument("--radius", type=int)
    p.add_argument("--window", help="admissible indices lo:hi[:step]")
    _add_noise(p)
    p.add_argument("--trace")
    p.add_argument("--out", required=True)

    p = command("brute", cmd_brute, "exhaustive search over a window")
    p.add_argument("--library-dir", required=True, dest="library_dir")
    p.add_argument("--validation", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--window", required=True, help="lo:hi[:step]")
    _add_noise(p)
    p.add_argument("--out", required=True)
    p.add_argument("--histograms")
    p.add_argument("--figures", action="store_true")

    p = command("rom", cmd_rom, "reduced model against the full simulation")
    p.add_argument("--regime", default="b5")
    p.add_argument("--rank", default="auto")
    p.add_argument("--m", default="auto")
    p.add_argument("--indices")
    p.add_argument("--tspan", default="0:10")
    p.add_argument("--t0", type=float, default=10.0, help="time of the initial snapshot")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--tfinal", type=float, default=40.0)
    p.add_argument("--snapshots", type=int, default=201)
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--report", required=True)

    for name, func, help_ in (("compare", cmd_compare, "sampling-strategy scorecard"),
                              ("run", cmd_run, "end-to-end experiment")):
        p = command(name, func, help_)
        p.add_argument("--seed", type=int)
        p.add_argument("--noise", type=float)
        p.add_argument("--cache-dir", dest="cache_dir")
        p.add_argument("--figures", type=int, choices=(0, 1))
        if name == "compare":
            p.add_argument("--out", required=True)
        else:
            p.add_argument("--out-dir", required=True, dest="out_dir")
    return ap


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, _Settings(args))
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DeimgaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
