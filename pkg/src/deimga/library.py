"""Multi-regime mode libraries and residual-based regime classification."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .deim import IndexSet
from .errors import ClassificationError, DimensionError, ValidationError
from .pod import PODBasis, SnapshotSet, compute_pod


@dataclass(frozen=True, eq=False)
class RegimeLibrary:
    sublibraries: dict
    regime_ids: tuple
    concat: np.ndarray = field(init=False)
    blocks: dict = field(init=False)

    def __post_init__(self):
        ids = tuple(self.regime_ids)
        if set(ids) != set(self.sublibraries) or len(ids) != len(set(ids)):
            raise ValidationError("regime_ids must list each sublibrary exactly once")
        dims = {self.sublibraries[r].n for r in ids}
        if len(dims) != 1:
            raise DimensionError(f"sublibraries disagree on ambient dimension: {sorted(dims)}")
        blocks, start = {}, 0
        for r in ids:
            k = self.sublibraries[r].rank
            blocks[r] = slice(start, start + k)
            start += k
        object.__setattr__(self, "regime_ids", ids)
        object.__setattr__(self, "concat",
                           np.hstack([self.sublibraries[r].modes for r in ids]))
        object.__setattr__(self, "blocks", blocks)

    @property
    def n(self):
        return self.concat.shape[0]

    @property
    def ranks(self):
        return {r: self.sublibraries[r].rank for r in self.regime_ids}

    def as_basis(self):
        """The concatenated library as a (non-orthonormal) basis object."""
        return PODBasis.from_matrix(self.concat)


@dataclass(frozen=True)
class ClassificationResult:
    predicted: object
    residuals: dict
    margin: float


def build_library(snapshot_sets, energy=0.999, max_rank=None, regime_ids=None):
    """Per-regime POD at energy threshold ``energy``, concatenated in input order.

    ``max_rank`` caps each regime's retained modes; a residual classifier with
    ``m`` samples needs every regime rank below ``m`` to discriminate at all.
    """
    sets = list(snapshot_sets)
    if len(sets) < 2:
        raise ValidationError("a regime library needs at least two regimes")
    if regime_ids is None:
        regime_ids = [s.regime for s in sets]
    if any(r is None for r in regime_ids) or len(set(regime_ids)) != len(regime_ids):
        raise ValidationError("every snapshot set needs a distinct regime label")
    dims = {s.n for s in sets}
    if len(dims) != 1:
        raise DimensionError(f"snapshot sets disagree on n: {sorted(dims)}")
    subs = {}
    for rid, s in zip(regime_ids, sets):
        basis = compute_pod(s, energy=energy)
        if max_rank is not None and basis.rank > max_rank:
            basis = basis.truncate(max_rank)
        subs[rid] = basis
    return RegimeLibrary(subs, tuple(regime_ids))


def _orth(A, tol=1e-12):
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0]
    return U[:, s > tol * s[0]]


class SampledLibrary:
    """Every sublibrary restricted to the rows of one index set.

    Holds orthonormal bases of the sampled column spaces (for residuals) and
    pseudo-inverses (for coefficients), so repeated classification and
    reconstruction at the same index set costs only small dense products.
    """

    def __init__(self, lib, idx):
        if idx.n != lib.n:
            raise DimensionError(f"index set dimension {idx.n} vs library dimension {lib.n}")
        self.lib = lib
        self.idx = idx
        rows = idx.rows
        self.sampled = {r: lib.sublibraries[r].modes[rows] for r in lib.regime_ids}
        self.range_basis = {r: _orth(A) for r, A in self.sampled.items()}
        self.pinv = {r: np.linalg.pinv(A) for r, A in self.sampled.items()}

    def residuals(self, Y):
        """Relative residuals, shape (regimes, samples), for columns of ``Y`` (m x N)."""
        Y = np.asarray(Y)
        if Y.ndim == 1:
            Y = Y[:, None]
        norms = np.linalg.norm(Y, axis=0)
        out = np.empty((len(self.lib.regime_ids), Y.shape[1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, r in enumerate(self.lib.regime_ids):
                Q = self.range_basis[r]
                out[i] = np.linalg.norm(Y - Q @ (Q.conj().T @ Y), axis=0) / norms
        return out

    def predict(self, Y):
        R = self.residuals(Y)
        # all-NaN columns (zero samples) are reported as -1
        bad = ~np.any(np.isfinite(R), axis=0)
        pred = np.argmin(np.where(np.isfinite(R), R, np.inf), axis=0)
        pred[bad] = -1
        return pred, R

    def coefficients(self, regime, Y):
        return self.pinv[regime] @ Y


def classify(lib, idx, u_samples, sampled=None):
    """Assign the regime whose sampled sublibrary leaves the smallest relative residual."""
    u_samples = np.asarray(u_samples)
    if u_samples.shape != (idx.m,):
        raise DimensionError(f"expected {idx.m} samples, got shape {u_samples.shape}")
    sampled = sampled or SampledLibrary(lib, idx)
    R = sampled.residuals(u_samples)[:, 0]
    if not np.any(np.isfinite(R)):
        raise ClassificationError("no finite residual; samples are zero or non-finite")
    order = np.argsort(np.where(np.isfinite(R), R, np.inf), kind="stable")
    ids = lib.regime_ids
    margin = float(R[order[1]] - R[order[0]]) if len(ids) > 1 else np.inf
    return ClassificationResult(ids[order[0]], {r: float(v) for r, v in zip(ids, R)}, margin)


@lru_cache(maxsize=64)
def unit_noise(seed, rounds, n_regimes, m, is_complex):
    """Standard white noise, one independent stream per round keyed by (seed, round).

    Complex noise has unit total variance split evenly between real and
    imaginary parts. Shape (rounds, n_regimes, m); read-only.
    """
    out = np.empty((rounds, n_regimes, m), dtype=complex if is_complex else float)
    for k in range(rounds):
        rng = np.random.default_rng([seed, k])
        if is_complex:
            z = rng.standard_normal((n_regimes, m, 2))
            out[k] = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2)
        else:
            out[k] = rng.standard_normal((n_regimes, m))
    out.flags.writeable = False
    return out


def _sampled_states(test_states, regime_ids, idx):
    samples = []
    for r in regime_ids:
        X = test_states[r]
        X = X.data if isinstance(X, SnapshotSet) else np.asarray(X)
        if X.ndim == 1:
            X = X[:, None]
        samples.append(X[idx.rows])
    return samples


def noisy_trials(lib, idx, test_states, noise_sigma_frac=0.1, rounds=400, seed=7,
                 sampled=None):
    """Per-regime classification accuracy under additive white measurement noise.

    Round ``k`` classifies, for every regime, that regime's test state number
    ``k mod count`` sampled at ``idx`` plus noise whose standard deviation is
    ``noise_sigma_frac`` times the RMS of the sampled values.

    ``test_states`` maps regime id to an ``n x N`` array (or SnapshotSet).
    """
    ids = lib.regime_ids
    missing = set(ids) - set(test_states)
    if missing:
        raise ValidationError(f"no test states for regimes {sorted(missing)}")
    if rounds < 1:
        raise ValidationError("rounds must be positive")
    sampled = sampled or SampledLibrary(lib, idx)
    samples = _sampled_states(test_states, ids, idx)
    is_complex = any(np.iscomplexobj(s) for s in samples) or np.iscomplexobj(lib.concat)
    noise = unit_noise(seed, rounds, len(ids), idx.m, is_complex)
    acc = {}
    k = np.arange(rounds)
    for i, r in enumerate(ids):
        S = samples[i]
        clean = S[:, k % S.shape[1]]
        rms = np.sqrt(np.mean(np.abs(clean) ** 2, axis=0))
        Y = clean + noise_sigma_frac * rms * noise[:, i, :].T
        pred, _ = sampled.predict(Y)
        acc[r] = float(np.mean(pred == i))
    return acc
