"""Dormand-Prince 5(4) stepper with dense output.

The tableau is borrowed from :class:`scipy.integrate.RK45`. Stepping is done
here so that the caller can modify the state between accepted steps, which
scipy's solver objects do not allow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import RK45

_A = RK45.A
_B = RK45.B
_C = RK45.C
_E = RK45.E
_P = RK45.P
N_STAGES = RK45.n_stages

SAFETY = 0.8
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


@dataclass
class StepResult:
    y: np.ndarray
    f: np.ndarray
    error: float
    K: np.ndarray
    y0: np.ndarray
    h: float

    def dense(self, theta):
        """State at ``t0 + theta*h`` from the 4th-order continuous extension."""
        theta = np.asarray(theta, dtype=float)
        powers = np.cumprod(np.repeat(theta[..., None], _P.shape[1], axis=-1), axis=-1)
        q = self.K.T @ _P
        return self.y0 + self.h * np.tensordot(powers, q, axes=([-1], [1]))


def rk_step(rhs, t: float, y: np.ndarray, f: np.ndarray, h: float, rtol: float, atol: float) -> StepResult:
    """One Dormand-Prince step of size ``h``; ``f`` is ``rhs(t, y)``."""
    K = np.empty((N_STAGES + 1, y.size))
    K[0] = f
    for s in range(1, N_STAGES):
        dy = _A[s, :s] @ K[:s] * h
        K[s] = rhs(t + _C[s] * h, y + dy)
    y_new = y + h * (_B @ K[:N_STAGES])
    f_new = rhs(t + h, y_new)
    K[-1] = f_new
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    err = h * (K.T @ _E) / scale
    error = float(np.sqrt(np.mean(err * err)))
    return StepResult(y_new, f_new, error, K, y.copy(), h)


def next_step_size(h: float, error: float) -> float:
    if error == 0.0:
        return h * MAX_FACTOR
    factor = SAFETY * error ** (-1.0 / 5.0)
    return h * min(MAX_FACTOR, max(MIN_FACTOR, factor))


def initial_step(rhs, t: float, y: np.ndarray, f: np.ndarray, rtol: float, atol: float) -> float:
    """Standard starting step heuristic (Hairer, Norsett & Wanner II.4)."""
    scale = atol + np.abs(y) * rtol
    d0 = float(np.sqrt(np.mean((y / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = rhs(t + h0, y + h0 * f)
    d2 = float(np.sqrt(np.mean(((f1 - f) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
    return min(100.0 * h0, h1)


def error_is_acceptable(error: float) -> bool:
    return error <= 1.0 and math.isfinite(error)
