"""Factorial-moment dynamics of binary annihilation A + A -> 0.

The factorial moments ``M_m = E[n (n-1) ... (n-m+1)]`` of the chain obey the
triangular system

    dM_m/dt = -rate * (m (m-1) / 2 * M_m + m * M_{m+1}),

which closes exactly for compactly supported data (``M_m = 0`` for ``m`` past
the largest count).  The same linear system governs ``E[phi^m]`` for the
complex diffusion ``dphi = -phi^2 dt + i phi dW`` in rescaled time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as npoly

from .integrate import dopri45


@dataclass(frozen=True)
class FactorialMoments:
    """Moment vector ``M_0..M_max`` at a time stamp.

    ``closure`` and ``closure_warning`` are only set by :func:`solve_truncated`.
    """

    values: np.ndarray
    rate: float = 1.0
    time: float = 0.0
    closure: float = 0.0
    closure_warning: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("moment vector must be one-dimensional and nonempty")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def m_max(self):
        return self.values.size - 1

    @property
    def support(self):
        """Largest index with a nonzero moment (0 for the vacuum)."""
        nz = np.flatnonzero(self.values)
        return int(nz[-1]) if nz.size else 0

    def __getitem__(self, m):
        return float(self.values[m]) if m <= self.m_max else 0.0

    def to_rows(self):
        return [(m, float(v), self.time) for m, v in enumerate(self.values)]


def poisson_moments(mu, m_max, rate=1.0):
    """Factorial moments ``mu**m`` of a Poisson(mu) count."""
    return FactorialMoments(float(mu) ** np.arange(m_max + 1), rate=rate)


def moment_rhs(m: FactorialMoments) -> np.ndarray:
    """Right-hand side of the moment system; moments past the vector are 0."""
    v = m.values
    idx = np.arange(v.size, dtype=np.float64)
    upper = np.append(v[1:], 0.0)
    return -m.rate * (idx * (idx - 1) / 2 * v + idx * upper)


@dataclass(frozen=True)
class MomentExpSum:
    """Closed-form moments ``M_m(t) = sum_k coeffs[m, k] exp(-rate k(k-1)/2 t)``."""

    coeffs: np.ndarray
    rate: float
    t0: float = 0.0
    exponents: np.ndarray = field(init=False)

    def __post_init__(self):
        k = np.arange(self.coeffs.shape[1], dtype=np.float64)
        object.__setattr__(self, "exponents", k * (k - 1) / 2)

    def __call__(self, t):
        decay = np.exp(-self.rate * self.exponents * t)
        return FactorialMoments(self.coeffs @ decay, rate=self.rate, time=self.t0 + t)


def closed_solution(m0: FactorialMoments) -> MomentExpSum:
    """Backward substitution for compactly supported initial moments.

    Component ``m`` of the solution is a combination of the decay modes
    ``k = m..N``.  A mode ``k`` entering through ``M_{m+1}`` contributes the
    particular coefficient ``-2 m a_{m+1,k} / (m(m-1) - k(k-1))``; rate
    cancels, so coefficients depend only on the initial data.
    """
    n = m0.support
    a = np.zeros((n + 1, n + 1))
    a[n, n] = m0.values[n]
    for m in range(n - 1, -1, -1):
        if m > 0:
            for k in range(m + 1, n + 1):
                a[m, k] = -2.0 * m * a[m + 1, k] / (m * (m - 1) - k * (k - 1))
        a[m, m] = m0.values[m] - a[m, m + 1:].sum()
    return MomentExpSum(a, m0.rate, m0.time)


def solve_closed(m0: FactorialMoments, t: float) -> FactorialMoments:
    """Exact moments after elapsed time ``t`` for finite-support data."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return m0
    out = closed_solution(m0)(t)
    if out.values.size < m0.values.size:
        padded = np.zeros(m0.values.size)
        padded[: out.values.size] = out.values
        out = replace(out, values=padded)
    return out


def solve_truncated(m0: FactorialMoments, m_max: int, t: float, tol: float = 1e-10, rtol: float = 0.0):
    """Integrate the moment system with closure ``M_{m_max+1} = 0``.

    The last component ``|M_{m_max}(t)|`` is reported as ``closure``; when it
    exceeds ``tol`` the ``closure_warning`` flag is set.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    if t < 0:
        raise ValueError("t must be nonnegative")
    v0 = np.zeros(m_max + 1)
    take = min(m_max + 1, m0.values.size)
    v0[:take] = m0.values[:take]
    if t == 0:
        return FactorialMoments(v0, rate=m0.rate, time=m0.time, closure=abs(v0[-1]),
                                closure_warning=abs(v0[-1]) > tol)
    rate = m0.rate
    idx = np.arange(m_max + 1, dtype=np.float64)
    diag = -rate * idx * (idx - 1) / 2
    off = -rate * idx[:-1]

    def rhs(y):
        dy = diag * y
        dy[:-1] += off * y[1:]
        return dy

    states, _ = dopri45(rhs, v0, [t], atol=tol, rtol=rtol)
    vals = states[-1]
    closure = abs(vals[-1])
    return FactorialMoments(vals, rate=rate, time=m0.time + t, closure=closure,
                            closure_warning=closure > tol)


def mean_field(phi0: float, rate: float, t: float) -> float:
    """Solution of ``dphi/dt = -rate phi^2`` from ``phi0``."""
    if phi0 < 0:
        raise ValueError("phi0 must be nonnegative")
    return phi0 / (1.0 + rate * phi0 * t)


def ito_generator_coeffs(m: int):
    """Coefficients ``(c1, c2)`` with ``dE[phi^m]/dt = c1 E[phi^m] + c2 E[phi^{m+1}]``.

    Obtained by applying the generator ``-phi^2 (f' + f''/2)`` of the complex
    diffusion to the monomial ``f = phi^m`` as a coefficient array.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    f = np.zeros(m + 1)
    f[m] = 1.0
    df = npoly.polyder(f, 1) if m >= 1 else np.zeros(1)
    d2f = npoly.polyder(f, 2) if m >= 2 else np.zeros(1)
    gen = npoly.polymul([0.0, 0.0, -1.0], npoly.polyadd(df, 0.5 * d2f))
    gen = np.pad(gen, (0, max(0, m + 2 - gen.size)))
    return float(gen[m]), float(gen[m + 1])
