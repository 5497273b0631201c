"""Cubic-quintic Ginzburg-Landau equation with fourth-order diffusion.

    i U_t + (1/2 - i tau) U_xx - i kappa U_xxxx + (1 - i mu)|U|^2 U
          + (nu - i eps)|U|^4 U - i gamma U = 0

Solved for ``U_t`` the right-hand side splits into a part that is diagonal in
Fourier space,

    L(k) = -(i/2 + tau) k^2 + kappa k^4 + gamma,

and a pointwise nonlinearity

    N(U) = (mu + i)|U|^2 U + (eps + i nu)|U|^4 U.

The periodic domain is discretised with ``n`` points and spectra use the
``norm="forward"`` FFT convention, so spectral entries are Fourier amplitudes.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ValidationError
from .integrate import StepStats, integrate
from .pod import SnapshotSet


@dataclass(frozen=True)
class GLParams:
    tau: float
    kappa: float
    mu: float
    nu: float
    epsilon: float
    gamma: float

    def __post_init__(self):
        for name in ("tau", "kappa", "mu", "nu", "epsilon", "gamma"):
            if not np.isfinite(getattr(self, name)):
                raise ValidationError(f"GL parameter {name} must be finite")


# (tau, kappa, mu, nu, epsilon, gamma)
REGIMES = {
    "b1": GLParams(-0.3, -0.05, 1.45, 0.0, -0.1, -0.5),
    "b2": GLParams(-0.3, -0.05, 1.4, 0.0, -0.1, -0.5),
    "b3": GLParams(0.08, 0.0, 0.66, -0.1, -0.1, -0.1),
    "b4": GLParams(0.125, 0.0, 1.0, -0.6, -0.1, -0.1),
    "b5": GLParams(0.08, -0.05, 0.6, -0.1, -0.1, -0.1),
    "b6": GLParams(0.08, -0.05, 0.5, -0.1, -0.1, -0.1),
}

REGIME_DESCRIPTIONS = {
    "b1": "3-hump, localized",
    "b2": "localized, side lobes",
    "b3": "breather",
    "b4": "exploding soliton",
    "b5": "fat soliton",
    "b6": "dissipative soliton",
}


def regime_params(regime_id):
    """Parameter row for regime ``b1`` .. ``b6`` (``beta1`` etc. also accepted)."""
    key = str(regime_id).lower().replace("beta", "b").replace("β", "b")
    if key.isdigit():
        key = "b" + key
    try:
        return REGIMES[key]
    except KeyError:
        raise ValidationError(f"unknown regime {regime_id!r}; expected b1..b6") from None


@dataclass(frozen=True)
class GLDomain:
    x_min: float = -20.0
    x_max: float = 20.0
    n: int = 1024
    t_final: float = 40.0
    snapshot_count: int = 201
    initial_profile: str = "sech"
    amplitude: float = 1.0
    discard_transient: bool = False
    rtol: float = 1e-8
    atol: float = 1e-10

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValidationError("x_max must exceed x_min")
        if self.n < 64 or self.n & (self.n - 1):
            raise ValidationError("n must be a power of two >= 64")
        if self.snapshot_count < 2:
            raise ValidationError("snapshot_count must be >= 2")
        if not self.t_final > 0:
            raise ValidationError("t_final must be positive")
        if self.initial_profile not in PROFILES:
            raise ValidationError(f"unknown initial profile {self.initial_profile!r}")

    @property
    def grid(self):
        return self.x_min + (self.x_max - self.x_min) * np.arange(self.n) / self.n

    @property
    def wavenumbers(self):
        length = self.x_max - self.x_min
        return 2 * np.pi * np.fft.fftfreq(self.n, d=length / self.n)

    @property
    def center_index(self):
        """1-based index of the grid point closest to the domain midpoint."""
        x = self.grid
        return int(np.argmin(np.abs(x - 0.5 * (self.x_min + self.x_max)))) + 1


PROFILES = {
    "sech": lambda x: 1.0 / np.cosh(x),
    "gaussian": lambda x: np.exp(-x ** 2),
}


def linear_symbol(k, params):
    k2 = k * k
    return -(0.5j + params.tau) * k2 + params.kappa * k2 * k2 + params.gamma


def nonlinear_term(u, params):
    """Pointwise cubic + quintic terms; valid on any subset of grid values."""
    a2 = (u * np.conj(u)).real
    return ((params.mu + 1j) * a2 + (params.epsilon + 1j * params.nu) * a2 * a2) * u


def gl_rhs(u_hat, params, k, time=None):
    """Time derivative of the spectrum ``u_hat`` (``norm="forward"`` FFT)."""
    u_hat = np.asarray(u_hat)
    if not np.all(np.isfinite(u_hat)):
        raise DivergenceError("non-finite spectrum", time=time)
    u = np.fft.ifft(u_hat, norm="forward")
    out = linear_symbol(k, params) * u_hat + np.fft.fft(nonlinear_term(u, params), norm="forward")
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite right-hand side", time=time)
    return out


def _to_physical(v):
    return np.fft.ifft(v, norm="forward")


def simulate(params, domain=None, seed=0, linear=False, initial=None, stats=None):
    """Run the spectral solver and return equispaced snapshots over [0, t_final].

    ``seed`` is accepted for interface uniformity; the solver itself is
    deterministic and the default initial condition involves no randomness.
    With ``linear=True`` the nonlinear terms are dropped. ``initial`` overrides
    the profile-based initial condition with an explicit length-n field.
    """
    del seed
    domain = domain or GLDomain()
    x = domain.grid
    k = domain.wavenumbers
    if initial is None:
        u0 = domain.amplitude * PROFILES[domain.initial_profile](x).astype(complex)
    else:
        u0 = np.asarray(initial, dtype=complex)
        if u0.shape != (domain.n,):
            raise ValidationError(f"initial field must have length {domain.n}")

    if linear:
        def nl(t, v):
            return np.zeros_like(v)
    else:
        def nl(t, v):
            u = np.fft.ifft(v, norm="forward")
            return np.fft.fft(nonlinear_term(u, params), norm="forward")

    t_eval = np.linspace(0.0, domain.t_final, domain.snapshot_count)
    spectra = integrate(nl, np.fft.fft(u0, norm="forward"), t_eval,
                        rtol=domain.rtol, atol=domain.atol,
                        linear=linear_symbol(k, params), h0=1e-3, stats=stats,
                        error_space=_to_physical)
    states = np.fft.ifft(spectra, axis=1, norm="forward")
    if not np.all(np.isfinite(states)):
        raise DivergenceError("solution became non-finite", time=float(t_eval[-1]))
    times = t_eval
    if domain.discard_transient:
        keep = times >= domain.t_final / 4
        states, times = states[keep], times[keep]
    return SnapshotSet(states.T, times, regime=None, grid=x)


def nonlinear_snapshots(snapshots, params):
    """Snapshot matrix of N(u) for every column of ``snapshots``."""
    return SnapshotSet(nonlinear_term(snapshots.data, params), snapshots.times,
                       regime=snapshots.regime, grid=snapshots.grid)


__all__ = [
    "GLParams", "GLDomain", "REGIMES", "REGIME_DESCRIPTIONS", "regime_params",
    "linear_symbol", "nonlinear_term", "gl_rhs", "simulate", "nonlinear_snapshots",
    "StepStats",
]
