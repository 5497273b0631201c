"""Greedy DEIM index selection and the interpolatory nonlinearity projector."""

from dataclasses import dataclass
import logging

import numpy as np

from .errors import DimensionError, RankDeficiencyError, ValidationError
from .pod import PODBasis

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


@dataclass(frozen=True)
class IndexSet:
    """Ordered, distinct 1-based row indices into an ``n``-dimensional state."""

    indices: tuple
    n: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValidationError(f"duplicate interpolation indices in {idx}")
        if any(i < 1 or i > self.n for i in idx):
            raise ValidationError(f"indices {idx} outside [1, {self.n}]")
        object.__setattr__(self, "indices", idx)

    @property
    def rows(self):
        """Zero-based row numbers for array indexing."""
        return np.asarray(self.indices, dtype=int) - 1

    @property
    def m(self):
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def sorted(self):
        return IndexSet(tuple(sorted(self.indices)), self.n)

    def sample(self, u):
        """Apply the measurement operator (row extraction) to ``u``."""
        return np.asarray(u)[self.rows]


def _modes(Xi):
    return Xi.modes if isinstance(Xi, PODBasis) else np.asarray(Xi)


def deim_indices(Xi, m, candidates=None):
    """Greedy DEIM selection of ``m`` interpolation indices.

    Parameters
    ----------
    Xi : PODBasis or ndarray
        Basis whose first ``m`` columns drive the selection.
    m : int
        Number of indices.
    candidates : sequence of int, optional
        Admissible 1-based rows; the argmax runs over these only. Defaults
        to every row.

    Returns
    -------
    IndexSet in selection order.
    """
    V = _modes(Xi)
    n, cols = V.shape
    if not 1 <= m <= cols:
        raise ValidationError(f"basis has {cols} columns, cannot select m={m}")
    if candidates is None:
        cand = np.arange(n)
    else:
        cand = np.unique(np.asarray(candidates, dtype=int)) - 1
        if cand.size < m or cand[0] < 0 or cand[-1] >= n:
            raise ValidationError("candidate rows must be m or more valid indices")
    Vc = V[cand]
    picked = [int(np.argmax(np.abs(Vc[:, 0])))]
    if np.abs(Vc[picked[0], 0]) == 0:
        raise RankDeficiencyError("first basis vector vanishes on the candidates", step=1)
    for j in range(1, m):
        A = Vc[picked, :j]
        cond = np.linalg.cond(A)
        if not np.isfinite(cond) or cond >= COND_LIMIT:
            raise RankDeficiencyError(
                f"sampled basis singular at DEIM step j={j + 1} (cond={cond:.3e})", step=j + 1)
        c = np.linalg.solve(A, Vc[picked, j])
        resid = np.abs(Vc[:, j] - Vc[:, :j] @ c)
        nxt = int(np.argmax(resid))
        if resid[nxt] <= 1e-14 * max(1.0, np.abs(Vc[:, j]).max()):
            raise RankDeficiencyError(
                f"basis column {j + 1} is interpolated exactly; DEIM step j={j + 1} is degenerate",
                step=j + 1)
        picked.append(nxt)
    final_cond = np.linalg.cond(Vc[picked, :m])
    if not np.isfinite(final_cond) or final_cond >= COND_LIMIT:
        raise RankDeficiencyError(f"sampled basis singular at DEIM step j={m}", step=m)
    log.debug("DEIM condition number %.3e for m=%d", final_cond, m)
    return IndexSet(tuple(int(cand[p]) + 1 for p in picked), n)


def deim_plus_k(Xi, m, k, candidates=None):
    """Run DEIM for ``m + k`` points and drop the first ``k``."""
    if k < 0:
        raise ValidationError("k must be non-negative")
    full = deim_indices(Xi, m + k, candidates)
    return IndexSet(full.indices[k:], full.n)


@dataclass(frozen=True, eq=False)
class DeimProjector:
    basis: PODBasis
    index_set: IndexSet
    factor: np.ndarray
    condition_number: float

    def __call__(self, samples):
        return approx_nonlinearity(self, samples)


def build_projector(Xi, idx):
    """Precompute ``Xi (P^T Xi)^{-1}`` for the interpolation indices ``idx``."""
    if not isinstance(Xi, PODBasis):
        Xi = PODBasis.from_matrix(Xi)
    if idx.m != Xi.rank:
        raise DimensionError(f"{idx.m} indices for a rank-{Xi.rank} basis")
    if idx.n != Xi.n:
        raise DimensionError(f"index set dimension {idx.n} vs basis dimension {Xi.n}")
    PtXi = Xi.modes[idx.rows]
    cond = float(np.linalg.cond(PtXi))
    if not np.isfinite(cond) or cond >= COND_LIMIT:
        raise RankDeficiencyError(f"P^T Xi is singular (cond={cond:.3e})")
    # Xi (P^T Xi)^{-1} == solve((P^T Xi)^T, Xi^T)^T
    factor = np.linalg.solve(PtXi.T, Xi.modes.T).T
    log.debug("DEIM projector condition number %.3e", cond)
    return DeimProjector(Xi, idx, factor, cond)


def approx_nonlinearity(proj, samples):
    """Interpolate the full nonlinearity from its values at the projector's rows."""
    samples = np.asarray(samples)
    if samples.shape[0] != proj.index_set.m:
        raise DimensionError(f"expected {proj.index_set.m} samples, got {samples.shape[0]}")
    return proj.factor @ samples
