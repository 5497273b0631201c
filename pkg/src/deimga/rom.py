"""POD-Galerkin reduced model with a DEIM-interpolated nonlinearity.

    da/dt = (Psi^H L Psi) a + Psi^H Xi (P^T Xi)^{-1} N(P^T Psi a)

Everything involving ``n`` is precomputed by ``galerkin_reduce``; the online
right-hand side touches only r x r, r x m and m x r matrices and evaluates
the pointwise nonlinearity at the ``m`` sampled coordinates.
"""

from dataclasses import dataclass

import numpy as np

from .deim import DeimProjector, IndexSet
from .errors import DimensionError, DivergenceError, ValidationError
from .integrate import StepStats, integrate
from .pod import PODBasis, ReducedState


@dataclass(frozen=True, eq=False)
class ReducedModel:
    linear_reduced: np.ndarray
    nonlinear_factor: np.ndarray
    sample_rows: IndexSet
    state_basis: PODBasis
    sampled_state_basis: np.ndarray

    @property
    def r(self):
        return self.linear_reduced.shape[0]

    @property
    def m(self):
        return self.sample_rows.m

    def lift(self, a):
        """Full-state reconstruction ``Psi a`` (offline/diagnostic use only)."""
        return self.state_basis.modes @ np.asarray(a).T


def spectral_operator(symbol):
    """Action of a Fourier multiplier on the columns of its argument."""
    symbol = np.asarray(symbol)

    def apply(V):
        V = np.asarray(V)
        s = symbol if V.ndim == 1 else symbol[:, None]
        return np.fft.ifft(s * np.fft.fft(V, axis=0), axis=0)

    return apply


def galerkin_reduce(L_full, basis, proj):
    """Precompute the offline products of the reduced model.

    ``L_full`` is an n x n matrix or a callable applying the linear operator
    to the columns of an n x r array (see ``spectral_operator``).
    """
    if not isinstance(proj, DeimProjector):
        raise ValidationError("proj must be a DeimProjector")
    Psi = basis.modes
    if proj.factor.shape[0] != basis.n:
        raise DimensionError(f"projector dimension {proj.factor.shape[0]} vs basis {basis.n}")
    if callable(L_full):
        LPsi = np.asarray(L_full(Psi))
    else:
        L_full = np.asarray(L_full)
        if L_full.shape != (basis.n, basis.n):
            raise DimensionError(f"L must be {basis.n}x{basis.n}, got {L_full.shape}")
        LPsi = L_full @ Psi
    if LPsi.shape != Psi.shape:
        raise DimensionError("linear operator changed the basis shape")
    PsiH = Psi.conj().T
    return ReducedModel(
        linear_reduced=PsiH @ LPsi,
        nonlinear_factor=PsiH @ proj.factor,
        sample_rows=proj.index_set,
        state_basis=basis,
        sampled_state_basis=Psi[proj.index_set.rows],
    )


class CountingNonlinearity:
    """Wraps a pointwise nonlinearity and counts coordinate evaluations."""

    def __init__(self, func):
        self.func = func
        self.calls = 0
        self.evaluations = 0
        self.per_call = []

    def __call__(self, values):
        values = np.asarray(values)
        self.calls += 1
        self.evaluations += values.size
        self.per_call.append(values.size)
        return self.func(values)


def rom_step_rhs(model, a, N_pointwise):
    coeffs = a.coeffs if isinstance(a, ReducedState) else np.asarray(a)
    if coeffs.shape != (model.r,):
        raise DimensionError(f"expected {model.r} coefficients, got {coeffs.shape}")
    nl = np.asarray(N_pointwise(model.sampled_state_basis @ coeffs))
    if not np.all(np.isfinite(nl)):
        raise DivergenceError("non-finite nonlinearity values in reduced model")
    return model.linear_reduced @ coeffs + model.nonlinear_factor @ nl


def rom_integrate(model, a0, t_eval, N_pointwise, rtol=1e-8, atol=1e-10, stats=None):
    """Reduced trajectory at ``t_eval``; returns an array of shape (len(t_eval), r)."""
    a0 = a0.coeffs if isinstance(a0, ReducedState) else np.asarray(a0)
    if a0.shape != (model.r,):
        raise DimensionError(f"expected {model.r} initial coefficients")
    y0 = a0.astype(np.result_type(a0, model.linear_reduced, model.nonlinear_factor))
    return integrate(lambda t, a: rom_step_rhs(model, a, N_pointwise), y0, t_eval,
                     rtol=rtol, atol=atol, stats=stats)


def full_rhs(u, L_full, N_pointwise):
    """Right-hand side of the full model, for consistency checks."""
    Lu = L_full(u) if callable(L_full) else np.asarray(L_full) @ u
    return Lu + N_pointwise(u)


__all__ = ["ReducedModel", "spectral_operator", "galerkin_reduce", "CountingNonlinearity",
           "rom_step_rhs", "rom_integrate", "full_rhs", "StepStats"]
