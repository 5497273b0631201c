"""Adaptive Dormand-Prince 5(4) stepping with an optional integrating factor.

When a diagonal linear part ``L`` is supplied the system ``y' = L*y + F(t, y)``
is advanced with the Lawson form of the pair: every stage is propagated with
``exp(c*h*L)`` factors whose arguments are non-negative multiples of ``h``, so
strongly damped modes (the fourth-order diffusion term at high wavenumber)
decay inside the exponentials instead of limiting the step size. With
``L = None`` the ordinary embedded pair is used on ``y' = F(t, y)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

# Dormand-Prince 5(4), FSAL
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_BHAT = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B - _BHAT

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 5.0


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rhs_calls: int = 0


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))


def integrate(rhs, y0, t_eval, rtol=1e-8, atol=1e-10, linear=None, h0=None,
              h_min=1e-12, max_steps=10_000_000, stats=None, error_space=None):
    """Integrate from ``t_eval[0]`` and return the states at every ``t_eval``.

    Parameters
    ----------
    rhs : callable
        ``rhs(t, y)``; the nonlinear part when ``linear`` is given, the full
        right-hand side otherwise.
    y0 : array_like
        Initial state (real or complex 1-D array).
    t_eval : array_like
        Strictly increasing output times; the first is the initial time.
    linear : array_like, optional
        Diagonal of the linear operator handled by the integrating factor.
    h_min : float
        Steps below this size raise ``DivergenceError``.
    error_space : callable, optional
        Linear map applied to states and error estimates before the tolerance
        test, e.g. an inverse FFT so tolerances refer to the physical field.

    Returns
    -------
    ndarray of shape ``(len(t_eval), len(y0))``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size == 0:
        raise ValueError("t_eval must be a non-empty 1-D array")
    if np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly increasing")
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) or (
        linear is not None and np.iscomplexobj(linear)) else float)
    if stats is None:
        stats = StepStats()
    lin = None if linear is None else np.asarray(linear)

    out = np.empty((t_eval.size, y.size), dtype=y.dtype)
    out[0] = y
    t = t_eval[0]
    k1 = rhs(t, y)
    stats.rhs_calls += 1
    span = t_eval[-1] - t_eval[0]
    h = h0 if h0 is not None else (span / 100 if span > 0 else 1.0)

    # exp(delta*h*L) for each distinct delta; cached per trial step size
    def factors(hh):
        if lin is None:
            return None
        deltas = {}
        for i in range(1, 7):
            for j in range(i):
                d = _C[i] - _C[j]
                deltas[d] = None
            deltas[_C[i]] = None
        deltas[1.0] = None
        return {d: np.exp(d * hh * lin) for d in deltas}

    steps = 0
    for k_out in range(1, t_eval.size):
        t_target = t_eval[k_out]
        while t < t_target:
            if steps >= max_steps:
                raise DivergenceError("step budget exhausted", time=t)
            h_try = min(h, t_target - t)
            last = h_try >= t_target - t
            ex = factors(h_try)
            ks = [k1]
            for i in range(1, 7):
                if ex is None:
                    acc = y.copy()
                    for j, a in enumerate(_A[i]):
                        if a:
                            acc = acc + h_try * a * ks[j]
                else:
                    acc = ex[_C[i]] * y
                    for j, a in enumerate(_A[i]):
                        if a:
                            acc = acc + h_try * a * ex[_C[i] - _C[j]] * ks[j]
                if i == 6:
                    y_new = acc
                ks.append(rhs(t + _C[i] * h_try, acc))
                stats.rhs_calls += 1
            if ex is None:
                err = h_try * sum(e * k for e, k in zip(_E, ks) if e)
            else:
                err = h_try * sum(e * ex[1.0 - c] * k
                                  for e, c, k in zip(_E, _C, ks) if e)
            if not np.all(np.isfinite(y_new)):
                en = np.inf
            else:
                if error_space is None:
                    en = _error_norm(err, y, y_new, rtol, atol)
                else:
                    en = _error_norm(error_space(err), error_space(y),
                                     error_space(y_new), rtol, atol)
            steps += 1
            if en <= 1.0:
                t = t_target if last else t + h_try
                y = y_new
                k1 = ks[6]
                stats.accepted += 1
                fac = FAC_MAX if en == 0 else min(FAC_MAX, max(FAC_MIN, SAFETY * en ** -0.2))
                # a step clipped to hit an output time keeps the unclipped size
                h = max(h, h_try * fac) if last else h_try * fac
            else:
                stats.rejected += 1
                fac = FAC_MIN if not np.isfinite(en) else max(FAC_MIN, SAFETY * en ** -0.2)
                h = h_try * fac
                if h < h_min:
                    raise DivergenceError(
                        f"step size {h:.3e} below minimum at t={t:.6g}", time=t)
        out[k_out] = y
    return out
