"""Generating functions ``G(x, t) = sum_n P_n(t) x^n``.

Closed-form solutions of the solvable one-species systems, a Crank-Nicolson
solver for the annihilation equation ``dG/dt = (rate/2)(1 - x^2) G''`` on
``[-1, 1]`` with pinned endpoints, and a residual check of the identity
``dG/dt = (rate/j!)(x^l - x^j) d^jG/dx^j`` for a single channel.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import solve_banded

from .chain import CountDistribution, ReactionChannel, ReactionSpec, build_generator
from .errors import DomainError, StepSizeError


class Polynomial:
    """Real polynomial with coefficient ``n`` multiplying ``x**n``."""

    def __init__(self, coeffs):
        c = np.atleast_1d(np.array(coeffs, dtype=np.float64))
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1] * 0.0
        c.setflags(write=False)
        self.coeffs = c

    @property
    def degree(self):
        return self.coeffs.size - 1

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"

    def __eq__(self, other):
        return isinstance(other, Polynomial) and np.array_equal(self.coeffs, other.coeffs)

    def __call__(self, x):
        # Horner from the top coefficient down
        x = np.asarray(x, dtype=np.float64)
        out = np.zeros(x.shape)
        for c in self.coeffs[::-1]:
            out = out * x + c
        return out if out.ndim else float(out)

    def deriv(self, order=1):
        if order > self.degree:
            return Polynomial([0.0])
        return Polynomial(npoly.polyder(self.coeffs, order))

    def total(self):
        """Sum of coefficients in the order Horner visits them at ``x = 1``."""
        out = 0.0
        for c in self.coeffs[::-1]:
            out = out * 1.0 + c
        return out


def gf_from_distribution(dist: CountDistribution) -> Polynomial:
    return Polynomial(dist.probs)


def eval_gf(p: Polynomial, x):
    return p(x)


def closed_pure_death(g0, rate, t, x):
    """``G0(1 + (x - 1) e^{-rate t})`` for ``A -> 0``."""
    if not rate > 0 or t < 0:
        raise ValueError("need rate > 0 and t >= 0")
    return g0(1.0 + (np.asarray(x, dtype=np.float64) - 1.0) * math.exp(-rate * t))


def closed_triplet_equal(g0, alpha, t, x):
    """Solution for ``A -> 0``, ``0 -> A``, ``A -> 2A`` with all rates ``alpha``."""
    if not alpha > 0 or t < 0:
        raise ValueError("need alpha > 0 and t >= 0")
    x = np.asarray(x, dtype=np.float64)
    s = alpha * t * (x - 1.0)
    denom = 1.0 - s
    if np.any(denom == 0.0):
        raise DomainError("pole at alpha t (x - 1) = 1")
    return g0((x - s) / denom) / denom


def closed_triplet_two_beta(g0, beta, t, x):
    """Solution for rates ``alpha = gamma = 2 beta``."""
    if not beta > 0 or t < 0:
        raise ValueError("need beta > 0 and t >= 0")
    x = np.asarray(x, dtype=np.float64)
    s = 2.0 * beta * t * (x - 1.0)
    denom = 1.0 - s
    if np.any(denom <= 0.0):
        raise DomainError("1 - 2 beta t (x - 1) must be positive for the real branch")
    return g0((x - s) / denom) / np.sqrt(denom)


CLOSED_FORMS = {
    "pure_death": closed_pure_death,
    "triplet_equal": closed_triplet_equal,
    "triplet_two_beta": closed_triplet_two_beta,
}


def closed_form_spec(name, rate):
    """The reaction spec whose generating function ``CLOSED_FORMS[name]`` solves."""
    if name == "pure_death":
        return ReactionSpec.from_tuples([(1, 0, rate)])
    if name == "triplet_equal":
        return ReactionSpec.from_tuples([(1, 0, rate), (0, 1, rate), (1, 2, rate)])
    if name == "triplet_two_beta":
        return ReactionSpec.from_tuples([(1, 0, 2 * rate), (0, 1, rate), (1, 2, 2 * rate)])
    raise KeyError(name)


@dataclass(frozen=True)
class GFGrid:
    nodes: np.ndarray
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 3 or nodes.shape != values.shape:
            raise ValueError("nodes and values must be matching vectors of length >= 3")
        if nodes[0] != -1.0 or nodes[-1] != 1.0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must increase strictly from -1 to 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        nodes.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, g, n_nodes=513, clustered=False, time=0.0):
        nodes = grid_nodes(n_nodes, clustered)
        return cls(nodes, g(nodes), time)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "G"])
            for x, g in zip(self.nodes, self.values):
                w.writerow([repr(float(x)), repr(float(g))])


def grid_nodes(n_nodes=513, clustered=False):
    """Uniform nodes on ``[-1, 1]`` or Chebyshev-Lobatto nodes clustered at the ends."""
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    if clustered:
        nodes = -np.cos(np.pi * np.arange(n_nodes) / (n_nodes - 1))
    else:
        nodes = np.linspace(-1.0, 1.0, n_nodes)
    nodes[0], nodes[-1] = -1.0, 1.0
    return nodes


def pde_solve_annihilation(g0: GFGrid, rate: float, t_end: float, dt: float = 1e-3) -> GFGrid:
    """Crank-Nicolson steps of ``dG/dt = (rate/2)(1 - x^2) G''``.

    Interior nodes use the three-point second difference for uneven spacing.
    The coefficient vanishes at ``x = +-1`` so the endpoint values are
    carried over untouched.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    x = g0.nodes
    if x.size - 2 < 64:
        raise ValueError("need at least 64 interior nodes")
    n_steps = int(math.ceil(t_end / dt - 1e-12))
    if n_steps == 0:
        return g0
    tau = t_end / n_steps
    h = np.diff(x)
    hl, hr = h[:-1], h[1:]
    coef = 0.5 * rate * (1.0 - x[1:-1] ** 2)
    lower = coef * 2.0 / (hl * (hl + hr))
    upper = coef * 2.0 / (hr * (hl + hr))
    diag = -(lower + upper)

    m = x.size - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = -0.5 * tau * upper[:-1]
    ab[1] = 1.0 - 0.5 * tau * diag
    ab[2, :-1] = -0.5 * tau * lower[1:]

    u = np.array(g0.values)
    left, right = u[0], u[-1]
    bound = 10.0 * np.max(np.abs(u))
    for _ in range(n_steps):
        inner = u[1:-1]
        au = diag * inner
        au[1:] += lower[1:] * inner[:-1]
        au[:-1] += upper[:-1] * inner[1:]
        rhs = inner + 0.5 * tau * au
        # both time levels share the fixed boundary values
        rhs[0] += tau * lower[0] * left
        rhs[-1] += tau * upper[-1] * right
        u[1:-1] = solve_banded((1, 1), ab, rhs)
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > bound:
            raise StepSizeError(f"solution grew past 10x its initial size; reduce dt={dt}")
    return GFGrid(x, u, g0.time + t_end)


def general_rhs_residual(channel: ReactionChannel, dist: CountDistribution, n_points=201) -> float:
    """Max gap between the two sides of the single-channel generating-function identity.

    The left side comes from the master-equation generator applied to
    ``dist``; the right side is ``(rate/j!)(x^l - x^j)`` times the exact
    ``j``-th derivative of the distribution polynomial.  Both are evaluated
    separately on interior points of ``(-1, 1)``.
    """
    j, l = channel.j, channel.l
    n_max = max(dist.n_max + max(0, l - j), j)
    gen = build_generator(ReactionSpec((channel,)), n_max)
    p = np.zeros(n_max + 2)
    p[: dist.n_max + 1] = dist.probs
    lhs = Polynomial(gen.apply(p)[:-1])

    g = Polynomial(dist.probs)
    factor = np.zeros(max(j, l) + 1)
    factor[l] += 1.0
    factor[j] -= 1.0
    rhs = Polynomial(npoly.polymul(factor, g.deriv(j).coeffs) * (channel.rate / math.factorial(j)))

    xs = np.linspace(-1.0, 1.0, n_points + 2)[1:-1]
    return float(np.max(np.abs(lhs(xs) - rhs(xs))))
