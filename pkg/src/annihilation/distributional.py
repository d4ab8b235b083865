"""Distribution-valued amplitudes for compactly supported chain data.

A finite delta comb ``Psi = sum_n c_n delta^(n)`` is paired with test
functions by ``<delta^(n), f> = (-1)^n f^(n)(0)``.  Its Cauchy representation
is the finite Laurent series ``-(1/2 pi i) sum_n M_n phi^-(n+1)`` whose jump
across the real axis recovers the pairing.  The Poisson transform maps a
nonnegative density on ``[0, inf)`` to a count distribution.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson
from scipy.special import gammaln, xlogy

from .chain import CountDistribution
from .complex_sde import ComplexEnsemble
from .errors import DivergenceError, InsufficientEnsembleError, ProximityError, RangeError, ResolutionError
from .genfunc import Polynomial
from .moments import FactorialMoments
from .stats import complex_mean_and_se

_TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class DeltaComb:
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.coeffs, dtype=np.float64))
        if c.ndim != 1:
            raise ValueError("comb coefficients must be a vector")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self):
        return self.coeffs.size - 1

    def moments(self):
        """``<Psi, s^m>`` for ``m = 0..order``."""
        n = np.arange(self.coeffs.size)
        signs = np.where(n % 2, -1.0, 1.0)
        return self.coeffs * signs * np.array([math.factorial(int(k)) for k in n], dtype=np.float64)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "c_n"])
            for n, c in enumerate(self.coeffs):
                w.writerow([n, repr(float(c))])


def comb_from_moments(m: FactorialMoments) -> DeltaComb:
    """``c_n = (-1)^n M_n / n!``."""
    n = np.arange(m.values.size)
    signs = np.where(n % 2, -1.0, 1.0)
    fact = np.array([math.factorial(int(k)) for k in n], dtype=np.float64)
    return DeltaComb(signs * m.values / fact, time=m.time)


def _gbinom(n, m):
    """Binomial coefficient with ``binom(-n, m) = (-1)^m binom(n + m - 1, m)`` for negative tops."""
    if m < 0:
        return 0
    if n >= 0:
        return math.comb(n, m)
    return (-1) ** m * math.comb(-n + m - 1, m)


def appendix_c_comb(k0: int, rate: float, t: float) -> DeltaComb:
    """Explicit comb for binary annihilation started from exactly ``2 k0`` particles.

    Mode ``k`` decays as ``exp(-k(2k - 1) rate t)`` and carries the
    difference of two finite sums of delta derivatives of orders up to
    ``2k`` and ``2k - 2``.
    """
    if k0 < 1:
        raise ValueError("k0 must be at least 1")
    c = np.zeros(2 * k0 + 1)
    c[0] = 1.0
    for k in range(1, k0 + 1):
        pref = (
            math.factorial(2 * k0) * math.factorial(k0 + k) * 4.0**k
            / (math.factorial(2 * k0 + 2 * k) * math.factorial(k0 - k))
        )
        weight = pref * math.exp(-k * (2 * k - 1) * rate * t)
        for j in range(2 * k + 1):
            c[j] += weight * 2.0**-j * math.comb(2 * k, j) * _gbinom(-2 * k - 1, j)
        for j in range(2 * k - 1):
            c[j] -= weight * 2.0**-j * math.comb(2 * k - 2, j) * _gbinom(-2 * k + 1, j)
    return DeltaComb(c, time=t)


def pair_exponential(comb: DeltaComb, x):
    """``<Psi, exp(s (x - 1))> = sum_n c_n (-1)^n (x - 1)^n``."""
    x = np.asarray(x, dtype=np.float64)
    u = 1.0 - x
    out = np.zeros(x.shape)
    for c in comb.coeffs[::-1]:
        out = out * u + c
    return out if out.ndim else float(out)


def pair_polynomial(comb: DeltaComb, p: Polynomial) -> float:
    """``<Psi, p> = sum_n c_n (-1)^n n! p_n``."""
    k = min(comb.coeffs.size, p.coeffs.size)
    return float(np.dot(comb.moments()[:k], p.coeffs[:k]))


@dataclass(frozen=True)
class LaurentRep:
    """Truncated Laurent series ``-(1/2 pi i) sum_{n<=N} M_n phi^-(n+1)``.

    ``radius`` is the growth radius assumed for the moments: the tail is
    bounded as if ``|M_n| <= C radius^n`` with ``C`` fitted to the stored
    terms.  A finite comb has radius 0 and no tail.
    """

    moments: np.ndarray
    radius: float = 0.0

    def __post_init__(self):
        m = np.atleast_1d(np.array(self.moments, dtype=np.complex128))
        m.setflags(write=False)
        object.__setattr__(self, "moments", m)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    @property
    def n_terms(self):
        return self.moments.size

    def _check(self, phi):
        phi = np.asarray(phi, dtype=np.complex128)
        if np.any(np.abs(phi) <= self.radius) or np.any(phi == 0):
            raise DivergenceError(f"|phi| must exceed the convergence radius {self.radius}")
        return phi

    def __call__(self, phi):
        phi = self._check(phi)
        inv = 1.0 / phi
        out = np.zeros(phi.shape, dtype=np.complex128)
        for m in self.moments[::-1]:
            out = (out + m) * inv
        out = -out / _TWO_PI_I
        return out if out.ndim else complex(out)

    def eval(self, phi):
        return self(phi)

    def remainder(self, phi):
        """Bound on the modulus of the discarded terms ``n > N``."""
        phi = self._check(phi)
        if self.radius == 0:
            return np.zeros(phi.shape) if phi.ndim else 0.0
        n = np.arange(self.n_terms)
        c = float(np.max(np.abs(self.moments) / self.radius**n))
        r = np.abs(phi) / self.radius
        out = c / np.abs(phi) * r ** -(self.n_terms) / (1.0 - 1.0 / r)
        return out if out.ndim else float(out)


def laurent_from_moments(m, radius=0.0, n_terms=None) -> LaurentRep:
    values = m.values if isinstance(m, FactorialMoments) else np.asarray(m)
    if n_terms is not None:
        values = values[:n_terms]
    return LaurentRep(values, radius)


def laurent_from_comb(comb: DeltaComb) -> LaurentRep:
    return LaurentRep(comb.moments(), 0.0)


def write_laurent_csv(path, rep: LaurentRep, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re_phi", "im_phi", "re_value", "im_value", "remainder_bound"])
        for phi in points:
            v = rep(phi)
            w.writerow([repr(float(np.real(phi))), repr(float(np.imag(phi))), repr(v.real), repr(v.imag),
                        repr(float(rep.remainder(phi)))])


@dataclass(frozen=True)
class JumpPairing:
    value: float
    epsilon: float
    range_estimate: float


def boundary_jump_pair(rep, f: Polynomial, eps: float, half_width: float = 1.0, tol: float = 0.1) -> JumpPairing:
    """``int_{-L}^{L} [rep(s + i eps) - rep(s - i eps)] f(s) ds``.

    ``rep`` is any callable Cauchy representation.  The interval is split
    geometrically around 0 where the kernels concentrate.  The range
    estimate ``L * (|g(-L)| + |g(L)|)`` gauges what the cut-off ignores
    and must not exceed ``tol``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")

    def integrand(s):
        return float(np.real((rep(s + 1j * eps) - rep(s - 1j * eps)) * f(s)))

    edges = [0.0]
    b = eps / 10.0
    while b < half_width:
        edges.append(b)
        b *= 10.0
    edges.append(half_width)
    edges = [-e for e in reversed(edges[1:])] + edges
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = quad(integrand, a, b, limit=200, epsabs=1e-13, epsrel=1e-11)
        total += val
    estimate = half_width * (abs(integrand(-half_width)) + abs(integrand(half_width)))
    if estimate > tol:
        raise RangeError(f"range cut-off estimate {estimate:.3e} exceeds tol {tol:.1e}")
    return JumpPairing(total, eps, estimate)


def jump_schedule(rep, f: Polynomial, schedule=(1e-2, 1e-3, 1e-4), half_width=1.0, tol=0.1,
                  richardson=False):
    """Pairings along a decreasing eps schedule.

    With ``richardson`` the last two values are combined assuming an error
    linear in eps; the extrapolated value is appended with ``epsilon=0``.
    """
    out = [boundary_jump_pair(rep, f, e, half_width, tol) for e in schedule]
    if richardson and len(out) >= 2:
        a, b = out[-2], out[-1]
        ratio = a.epsilon / b.epsilon
        value = (ratio * b.value - a.value) / (ratio - 1.0)
        out.append(JumpPairing(value, 0.0, b.range_estimate))
    return out


@dataclass(frozen=True)
class CauchyEstimate:
    value: complex
    stderr_re: float
    stderr_im: float
    n_points: int

    @property
    def stderr(self):
        return math.hypot(self.stderr_re, self.stderr_im)


def mc_cauchy(ens: ComplexEnsemble, phi: complex, margin: float = 0.1, min_points: int = 100) -> CauchyEstimate:
    """``(1/2 pi i) E[1/(z - phi)]`` over the unflagged ensemble points.

    ``phi`` must lie outside the disc of radius ``(1 + margin) max|z|``.
    """
    z = ens.live()
    if z.size < min_points:
        raise InsufficientEnsembleError(f"{z.size} unflagged points; at least {min_points} required")
    hull = float(np.max(np.abs(z)))
    if abs(phi) <= (1.0 + margin) * hull:
        raise ProximityError(f"|phi|={abs(phi):.4g} within {margin:.0%} of ensemble modulus {hull:.4g}")
    value, se_re, se_im = complex_mean_and_se(1.0 / (z - phi) / _TWO_PI_I)
    return CauchyEstimate(value, se_re, se_im, int(z.size))


@dataclass(frozen=True)
class GridDensity:
    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 3:
            raise ValueError("nodes and values must be matching vectors of length >= 3")
        if nodes[0] < 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase from a nonnegative start")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("density values must be finite and nonnegative")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, f, phi_max, n_nodes=4001):
        nodes = np.linspace(0.0, phi_max, n_nodes)
        return cls(nodes, f(nodes))

    def l1(self):
        return float(simpson(self.values, x=self.nodes))


def default_phi_max(n_max: int, tail=1e-14) -> float:
    """Smallest integer ``b`` with ``e^-b b^n_max / n_max! < tail``, searched upwards from ``n_max``."""
    b = float(max(n_max, 1))
    while n_max * math.log(b) - b - math.lgamma(n_max + 1) >= math.log(tail):
        b += 1.0
    return b


@dataclass(frozen=True)
class PoissonTransform:
    """Output of :func:`poisson_transform` with both norms for the isometry check."""

    probs: np.ndarray
    l1_out: float
    l1_in: float

    def distribution(self, tol=1e-8) -> CountDistribution:
        return CountDistribution(self.probs / self.l1_in, tol=tol)


def poisson_transform(density: GridDensity, n_max: int, max_spacing: float = 0.25) -> PoissonTransform:
    """``P_n = (1/n!) int phi^n e^-phi Psi(phi) dphi`` by composite Simpson.

    Grids with any spacing above ``max_spacing`` cannot resolve the Poisson
    weights and are rejected.
    """
    x = density.nodes
    h = float(np.max(np.diff(x)))
    if h > max_spacing:
        raise ResolutionError(f"grid spacing {h:.3g} exceeds {max_spacing} needed for n_max={n_max}")
    n = np.arange(n_max + 1)[:, None]
    expo = xlogy(n, x[None, :]) - x[None, :] - gammaln(n + 1)
    weights = np.exp(expo)
    probs = simpson(weights * density.values[None, :], x=x, axis=1)
    return PoissonTransform(probs, float(np.sum(probs)), density.l1())
