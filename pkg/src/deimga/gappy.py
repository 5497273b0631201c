"""Gappy POD least-squares reconstruction and classical sensor selection rules."""

from dataclasses import dataclass
import itertools
import warnings

import numpy as np

from .deim import IndexSet
from .errors import DimensionError, ValidationError
from .pod import PODBasis, ReducedState


class RankDeficientWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class GappySystem:
    """Library modes restricted to the sampled rows, with the Gram matrix M."""

    library: PODBasis
    index_set: IndexSet
    gram: np.ndarray
    sampled: np.ndarray

    @property
    def rank_deficient(self):
        return np.linalg.matrix_rank(self.sampled) < self.library.rank

    @property
    def condition_number(self):
        return float(np.linalg.cond(self.gram))


def gappy_system(library, idx):
    if not isinstance(library, PODBasis):
        library = PODBasis.from_matrix(library)
    if idx.n != library.n:
        raise DimensionError(f"index set dimension {idx.n} vs library dimension {library.n}")
    A = library.modes[idx.rows]
    return GappySystem(library, idx, A.conj().T @ A, A)


def gappy_fit(sys, u_samples):
    """Coefficients minimising the sampled residual ``||u~ - P Psi a||``.

    Solves ``M a = f`` with ``M = (P Psi)^H (P Psi)`` and ``f = (P Psi)^H u~`` in
    the minimum-norm least-squares sense, so rank-deficient sampling (fewer
    samples than modes) still returns an answer, with a warning.
    """
    u_samples = np.asarray(u_samples)
    if u_samples.shape[0] != sys.index_set.m:
        raise DimensionError(f"expected {sys.index_set.m} samples, got {u_samples.shape[0]}")
    coeffs, _, rank, _ = np.linalg.lstsq(sys.sampled, u_samples, rcond=None)
    if rank < sys.library.rank:
        warnings.warn(
            f"gappy Gram matrix has rank {rank} < {sys.library.rank}; "
            "using the minimum-norm solution", RankDeficientWarning, stacklevel=2)
    return ReducedState(coeffs, sys.library.basis_id)


def reconstruct(sys, a):
    coeffs = a.coeffs if isinstance(a, ReducedState) else np.asarray(a)
    if coeffs.shape[0] != sys.library.rank:
        raise DimensionError(f"{coeffs.shape[0]} coefficients for rank {sys.library.rank}")
    return sys.library.modes @ coeffs


def reconstruction_error(u_true, u_rec):
    """Relative L2 error ``||u_true - u_rec|| / ||u_true||`` (column-wise for 2-D)."""
    u_true = np.asarray(u_true)
    u_rec = np.asarray(u_rec)
    if u_true.shape != u_rec.shape:
        raise DimensionError(f"shape mismatch {u_true.shape} vs {u_rec.shape}")
    return np.linalg.norm(u_true - u_rec, axis=0) / np.linalg.norm(u_true, axis=0)


def _window(n, window):
    if window is None:
        return np.arange(1, n + 1)
    cand = np.unique(np.asarray(window, dtype=int))
    if cand.size == 0 or cand[0] < 1 or cand[-1] > n:
        raise ValidationError(f"window must hold indices in [1, {n}]")
    return cand


def select_random(n, m, window=None, seed=0):
    """``m`` distinct indices drawn uniformly from ``window`` (default: all of 1..n)."""
    cand = _window(n, window)
    if not 1 <= m <= cand.size:
        raise ValidationError(f"cannot draw {m} distinct indices from {cand.size} candidates")
    rng = np.random.default_rng(seed)
    return IndexSet(tuple(int(i) for i in rng.choice(cand, size=m, replace=False)), n)


def _sampled_cond(A):
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[-1] <= s[0] * 1e-14:
        return np.inf
    # cond(M) = cond(A)^2 for M = A^H A
    return (s[0] / s[-1]) ** 2


def select_condition_number(library, m, window=None):
    """Greedy minimisation of the condition number of the sampled Gram matrix.

    Step ``t`` scores every remaining candidate by ``cond(M)`` built from the
    leading ``min(t, r)`` library modes; while fewer than ``r`` points are
    chosen the full ``M`` is singular, so the leading block keeps the
    criterion informative. Ties go to the candidate with the larger sampled
    energy, then to the smaller index.
    """
    if not isinstance(library, PODBasis):
        library = PODBasis.from_matrix(library)
    V = library.modes
    n, r = V.shape
    cand = _window(n, window)
    if not 1 <= m <= cand.size:
        raise ValidationError(f"cannot select {m} points from {cand.size} candidates")
    chosen = []
    for t in range(1, m + 1):
        k = min(t, r)
        best = None
        for c in cand:
            if c in chosen:
                continue
            rows = np.asarray(chosen + [c]) - 1
            A = V[rows, :k]
            key = (_sampled_cond(A), -float(np.sum(np.abs(A) ** 2)), c)
            if best is None or key < best:
                best = key
        chosen.append(int(best[2]))
    return IndexSet(tuple(chosen), n)


def _local_peaks(y):
    """Indices of strict-or-plateau local maxima of ``y``, largest first."""
    left = np.r_[-np.inf, y[:-1]]
    right = np.r_[y[1:], -np.inf]
    peaks = np.flatnonzero((y >= left) & (y > right))
    return peaks[np.argsort(-y[peaks], kind="stable")]


def select_extrema(library, m, window=None):
    """Maxima and minima of the modes, visited mode by mode.

    For each mode the location of its maximum is taken first, then its
    minimum; duplicates are skipped. Real modes use signed values. For complex
    modes the modulus has no meaningful minimum, so the second pick is the
    second-highest separate local peak of the modulus.
    """
    if not isinstance(library, PODBasis):
        library = PODBasis.from_matrix(library)
    V = library.modes
    n, r = V.shape
    cand = _window(n, window)
    if not 1 <= m <= cand.size:
        raise ValidationError(f"cannot select {m} points from {cand.size} candidates")
    chosen = []
    for j in range(r):
        col = V[cand - 1, j]
        if np.iscomplexobj(col):
            mod = np.abs(col)
            peaks = _local_peaks(mod)
            picks = [int(np.argmax(mod))] + [int(p) for p in peaks[1:2]]
        else:
            picks = [int(np.argmax(col)), int(np.argmin(col))]
        for p in picks:
            c = int(cand[p])
            if c not in chosen:
                chosen.append(c)
            if len(chosen) == m:
                return IndexSet(tuple(chosen), n)
    raise ValidationError(f"modes provide only {len(chosen)} distinct extrema, {m} requested")


def exhaustive_condition_minimum(library, m, window=None):
    """Brute-force minimum of cond(M) over all m-subsets (small problems only)."""
    V = library.modes if isinstance(library, PODBasis) else np.asarray(library)
    cand = _window(V.shape[0], window)
    best = None
    for combo in itertools.combinations(cand, m):
        val = _sampled_cond(V[np.asarray(combo) - 1])
        if best is None or val < best[0]:
            best = (val, combo)
    return best
