"""Adaptive Dormand-Prince 5(4) integrator for linear kinetic systems.

Error control is per unit step: a step of size ``h`` is accepted when every
component satisfies ``|err_i| <= h * (atol + rtol * |y_i|)``.  Summed over
a run this keeps the global drift of linear invariants near ``atol * t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Butcher tableau (Dormand & Prince 1980).
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
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_E = _B5 - _B4


@dataclass
class IntegrationStats:
    accepted: int = 0
    rejected: int = 0
    rhs_evals: int = 0


_ROUNDING = 16 * np.finfo(np.float64).eps


def dopri45(rhs, y0, times, atol, rtol=0.0, h0=None, max_steps=10_000_000):
    """Integrate ``y' = rhs(y)`` and return the state at each of ``times``.

    ``times`` must be nondecreasing and start at or after 0 (the time of
    ``y0``).  The integrator lands exactly on every requested time.

    Returns
    -------
    states : ndarray, shape (len(times), len(y0))
    stats : IntegrationStats
    """
    if atol <= 0 and rtol <= 0:
        raise ValueError("need atol > 0 or rtol > 0")
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be nondecreasing and nonnegative")
    y = np.array(y0, dtype=np.float64, copy=True)
    out = np.empty((times.size, y.size))
    stats = IntegrationStats()
    t = 0.0
    k1 = rhs(y)
    stats.rhs_evals += 1
    h = h0
    for i, target in enumerate(times):
        while t < target:
            if h is None:
                h = _initial_step(y, k1, atol, rtol)
            step = min(h, target - t)
            last = step >= target - t
            ks = [k1]
            # a non-finite stage yields a nan norm, which is rejected below
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                for s in range(1, 7):
                    ys = y + step * sum(a * k for a, k in zip(_A[s], ks) if a != 0.0)
                    ks.append(rhs(ys))
                y_new = ys  # stage 7 evaluates at the 5th-order solution (FSAL)
                err = step * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
                # the estimate cannot resolve errors below its own rounding level
                noise = _ROUNDING * step * sum(abs(e) * np.abs(k) for e, k in zip(_E, ks) if e != 0.0)
                scale = step * (atol + rtol * np.maximum(np.abs(y), np.abs(y_new))) + noise + 1e-300
                ratio = np.where(err == 0.0, 0.0, np.abs(err) / scale)
                norm = float(np.max(ratio)) if ratio.size else 0.0
            stats.rhs_evals += 6
            if norm <= 1.0:
                t = target if last else t + step
                y = y_new
                k1 = ks[6]
                stats.accepted += 1
                proposed = step * (5.0 if norm == 0.0 else min(5.0, 0.9 * norm ** -0.2))
                # a step clipped to hit ``target`` says nothing against the old h
                h = max(h, proposed) if last else proposed
            else:
                stats.rejected += 1
                h = step * max(0.1, 0.9 * norm ** -0.25)
                if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                    raise RuntimeError(f"dopri45 step underflow at t={t!r}; tolerance unreachable")
            if stats.accepted + stats.rejected > max_steps:
                raise RuntimeError("dopri45 exceeded max_steps")
        out[i] = y
    return out, stats


def _initial_step(y, f0, atol, rtol):
    scale = atol + rtol * np.abs(y)
    d0 = np.max(np.abs(y) / np.where(scale > 0, scale, 1.0)) if y.size else 0.0
    d1 = np.max(np.abs(f0) / np.where(scale > 0, scale, 1.0)) if y.size else 0.0
    if d0 < 1e-5 or d1 < 1e-5:
        return 1e-6
    return float(min(0.01 * d0 / d1, 1.0))
