"""Snapshot matrices and truncated POD bases."""

from dataclasses import dataclass, field
import itertools

import numpy as np

from .errors import DegenerateInputError, DimensionError, ValidationError

_basis_ids = itertools.count(1)


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Columns of ``data`` are the states at ``times``."""

    data: np.ndarray
    times: np.ndarray
    regime: object = None
    grid: np.ndarray = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DimensionError(f"snapshot data must be 2-D, got shape {data.shape}")
        n, p = data.shape
        if n < 1 or p < 1:
            raise ValidationError("snapshot set needs n >= 1 and p >= 1")
        times = np.asarray(self.times, dtype=float)
        if times.shape != (p,):
            raise DimensionError(f"expected {p} time stamps, got {times.size}")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("snapshot times must be strictly increasing")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "times", times)
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            if grid.shape != (n,):
                raise DimensionError(f"grid must have length {n}")
            if np.any(np.diff(grid) <= 0):
                raise ValidationError("grid must be strictly increasing")
            object.__setattr__(self, "grid", grid)

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def p(self):
        return self.data.shape[1]

    @property
    def is_complex(self):
        return np.iscomplexobj(self.data)

    def with_regime(self, regime):
        return SnapshotSet(self.data, self.times, regime=regime, grid=self.grid)

    def split(self, holdout):
        """Split into (training, held-out) with ``holdout`` evenly spread columns held out."""
        if not 0 <= holdout < self.p:
            raise ValidationError(f"cannot hold out {holdout} of {self.p} snapshots")
        if holdout == 0:
            return self, None
        held = np.unique(np.linspace(0, self.p - 1, holdout + 2).round().astype(int)[1:-1])
        if held.size != holdout:
            held = np.arange(self.p)[1::max(1, self.p // holdout)][:holdout]
        mask = np.zeros(self.p, dtype=bool)
        mask[held] = True
        train = SnapshotSet(self.data[:, ~mask], self.times[~mask], self.regime, self.grid)
        test = SnapshotSet(self.data[:, mask], self.times[mask], self.regime, self.grid)
        return train, test


def build_snapshots(states, times, regime=None, grid=None):
    """Stack state vectors as columns of a snapshot matrix."""
    states = [np.asarray(s) for s in states]
    if len(states) == 0:
        raise ValidationError("need at least one snapshot")
    lengths = {s.shape for s in states}
    if len(lengths) != 1 or states[0].ndim != 1:
        raise DimensionError(f"states must be 1-D vectors of equal length, got {sorted(lengths)}")
    if len(times) != len(states):
        raise DimensionError(f"{len(states)} states but {len(times)} times")
    return SnapshotSet(np.column_stack(states), np.asarray(times, dtype=float), regime, grid)


@dataclass(frozen=True, eq=False)
class PODBasis:
    modes: np.ndarray
    singular_values: np.ndarray
    energy_captured: float = 1.0
    basis_id: int = field(default_factory=lambda: next(_basis_ids))

    def __post_init__(self):
        modes = np.asarray(self.modes)
        if modes.ndim != 2:
            raise DimensionError("modes must be a 2-D array")
        sv = np.asarray(self.singular_values, dtype=float)
        if sv.shape != (modes.shape[1],):
            raise DimensionError("one singular value per mode required")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "singular_values", sv)

    @property
    def n(self):
        return self.modes.shape[0]

    @property
    def rank(self):
        return self.modes.shape[1]

    @classmethod
    def from_matrix(cls, modes):
        """Wrap an arbitrary column matrix (e.g. a concatenated library)."""
        modes = np.asarray(modes)
        return cls(modes, np.linalg.norm(modes, axis=0), 1.0)

    def truncate(self, r):
        """Leading ``r`` modes, with the captured energy fraction recomputed."""
        kept = float(np.sum(self.singular_values ** 2))
        frac = self.energy_captured
        if kept > 0 and frac > 0:
            frac = frac * float(np.sum(self.singular_values[:r] ** 2)) / kept
        return PODBasis(self.modes[:, :r], self.singular_values[:r], frac)


@dataclass(frozen=True)
class ReducedState:
    coeffs: np.ndarray
    basis_id: int = None


def compute_pod(X, rank=None, energy=None):
    """Truncated POD of a snapshot set by thin SVD (no mean subtraction).

    Exactly one of ``rank`` and ``energy`` is given. With ``energy`` the rank
    is the smallest r whose leading squared singular values reach that
    fraction of the total.
    """
    data = X.data if isinstance(X, SnapshotSet) else np.asarray(X)
    if (rank is None) == (energy is None):
        raise ValidationError("give exactly one of rank or energy")
    if data.size == 0:
        raise ValidationError("empty snapshot matrix")
    if not np.any(data):
        raise DegenerateInputError("snapshot matrix is identically zero")
    U, s, _ = np.linalg.svd(data, full_matrices=False)
    s2 = s ** 2
    total = s2.sum()
    if not np.isfinite(total) or total == 0:
        raise DegenerateInputError(f"snapshot energy {total} is zero or not finite")
    cum = np.cumsum(s2) / total
    if rank is not None:
        r = int(rank)
        if not 1 <= r <= min(data.shape):
            raise ValidationError(f"rank must lie in [1, {min(data.shape)}], got {r}")
    else:
        if not 0 < energy <= 1:
            raise ValidationError(f"energy threshold must lie in (0, 1], got {energy}")
        # guard against cum[-1] landing a hair below 1 by rounding
        r = int(np.searchsorted(cum, energy - 1e-14, side="left")) + 1
        r = min(r, s.size)
    return PODBasis(U[:, :r], s[:r], float(min(cum[r - 1], 1.0)))


def project(u, basis):
    u = np.asarray(u)
    if u.shape != (basis.n,):
        raise DimensionError(f"state of length {u.shape} vs basis dimension {basis.n}")
    return ReducedState(basis.modes.conj().T @ u, basis.basis_id)


def reconstruct(a, basis):
    coeffs = a.coeffs if isinstance(a, ReducedState) else np.asarray(a)
    if coeffs.shape[0] != basis.rank:
        raise DimensionError(f"{coeffs.shape[0]} coefficients for a rank-{basis.rank} basis")
    return basis.modes @ coeffs


def orthonormality_error(basis):
    G = basis.modes.conj().T @ basis.modes
    return float(np.max(np.abs(G - np.eye(basis.rank))))
