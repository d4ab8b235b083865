"""Single-species reaction chains ``jA -> lA``.

A channel fires from state ``n`` at rate ``rate * binom(n, j)`` and moves the
chain to ``n - j + l``.  This module builds the truncated rate generator,
integrates the forward Kolmogorov equation, and samples the chain exactly
with a vectorized Gillespie loop driven by counter-based random streams.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DistributionError,
    InvalidTruncationError,
    TailMassError,
    TruncationOverflowError,
)
from .integrate import dopri45
from .moments import FactorialMoments
from .rng import CounterRNG


@dataclass(frozen=True)
class ReactionChannel:
    j: int
    l: int
    rate: float

    def __post_init__(self):
        if int(self.j) != self.j or int(self.l) != self.l or self.j < 0 or self.l < 0:
            raise ValueError("j and l must be nonnegative integers")
        if self.j == self.l:
            raise ValueError("a channel with j == l does nothing")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "rate", float(self.rate))

    def propensity(self, n):
        """``rate * binom(n, j)`` for an integer array of counts."""
        n = np.asarray(n, dtype=np.float64)
        # falling product stays an exact integer in float64 at these sizes
        falling = np.ones(n.shape)
        for i in range(self.j):
            falling *= np.maximum(n - i, 0.0)
        return self.rate * (falling / math.factorial(self.j))


@dataclass(frozen=True)
class ReactionSpec:
    channels: tuple

    def __post_init__(self):
        channels = tuple(self.channels)
        if not channels:
            raise ValueError("a reaction spec needs at least one channel")
        keys = [(c.j, c.l) for c in channels]
        if len(set(keys)) != len(keys):
            raise ValueError("channels must be pairwise distinct in (j, l)")
        object.__setattr__(self, "channels", channels)

    @property
    def max_j(self):
        return max(c.j for c in self.channels)

    @property
    def only_consuming(self):
        """True when no channel can increase the count."""
        return all(c.l < c.j for c in self.channels)

    @classmethod
    def from_tuples(cls, triples):
        return cls(tuple(ReactionChannel(j, l, r) for j, l, r in triples))


def annihilation(rate=1.0):
    """A + A -> 0."""
    return ReactionSpec((ReactionChannel(2, 0, rate),))


def pure_death(rate=1.0):
    """A -> 0."""
    return ReactionSpec((ReactionChannel(1, 0, rate),))


def triplet(alpha, beta, gamma):
    """A -> 0 (alpha), 0 -> A (beta), A -> 2A (gamma)."""
    return ReactionSpec(
        (ReactionChannel(1, 0, alpha), ReactionChannel(0, 1, beta), ReactionChannel(1, 2, gamma))
    )


@dataclass(frozen=True)
class CountDistribution:
    """Truncated probability vector over counts ``0..n_max``.

    ``tail_mass`` records probability known to lie outside the vector
    (discarded on truncation or lost to overflow).  Negative round-off is
    kept as is; :meth:`clipped` clips it for export.
    """

    probs: np.ndarray
    time: float = 0.0
    tol: float = 1e-8
    tail_tol: float = 1e-12
    tail_mass: float = 0.0
    stderr: np.ndarray | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size == 0:
            raise DistributionError("probs must be a nonempty vector")
        if np.any(probs < -1e-12):
            raise DistributionError(f"negative probability {probs.min():.3e}")
        total = probs.sum()
        if abs(total - 1.0) > self.tol + self.tail_mass:
            raise DistributionError(f"probabilities sum to {total!r}")
        if self.tail_mass > self.tail_tol:
            raise DistributionError(
                f"tail mass {self.tail_mass:.3e} exceeds tolerance {self.tail_tol:.3e}"
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if self.stderr is not None:
            se = np.array(self.stderr, dtype=np.float64)
            se.setflags(write=False)
            object.__setattr__(self, "stderr", se)

    @property
    def n_max(self):
        return self.probs.size - 1

    def __getitem__(self, n):
        return float(self.probs[n]) if 0 <= n <= self.n_max else 0.0

    def clipped(self):
        return np.clip(self.probs, 0.0, None)

    def mean(self):
        return float(np.arange(self.probs.size) @ self.probs)

    def to_rows(self):
        probs = self.clipped()
        if self.stderr is None:
            return [(n, float(p)) for n, p in enumerate(probs)]
        return [(n, float(p), float(s)) for n, p, s in zip(range(probs.size), probs, self.stderr)]


@dataclass(frozen=True)
class EmpiricalDistribution(CountDistribution):
    """Histogram of an SSA ensemble.

    ``counts`` holds each path's final count in path order; ``events`` (when
    recorded) maps path index to its list of ``(time, count)`` jumps.
    """

    counts: np.ndarray | None = None
    events: dict | None = None

    @property
    def n_paths(self):
        return int(self.counts.size)


def point_mass(n0, n_max=None, time=0.0):
    n_max = n0 if n_max is None else n_max
    if not 0 <= n0 <= n_max:
        raise ValueError("need 0 <= n0 <= n_max")
    p = np.zeros(n_max + 1)
    p[n0] = 1.0
    return CountDistribution(p, time=time)


@dataclass(frozen=True)
class Deterministic:
    n0: int


@dataclass(frozen=True)
class TruncatedPoisson:
    mu: float


def sample_initial(kind, n_max, tail_tol=1e-12):
    """Initial distribution: a point mass or a renormalized truncated Poisson."""
    if isinstance(kind, Deterministic):
        return point_mass(kind.n0, n_max)
    if isinstance(kind, TruncatedPoisson):
        mu = float(kind.mu)
        if not mu > 0:
            raise ValueError("Poisson mean must be positive")
        p = np.empty(n_max + 1)
        p[0] = math.exp(-mu)
        for n in range(n_max):
            p[n + 1] = p[n] * mu / (n + 1)
        tail = poisson_tail(mu, n_max)
        if tail > tail_tol:
            need = n_max
            while poisson_tail(mu, need) > tail_tol:
                need += max(1, need // 4)
            raise TailMassError(
                f"Poisson({mu}) tail beyond n_max={n_max} is {tail:.3e}; "
                f"use n_max >= {need}",
                required_n_max=need,
            )
        return CountDistribution(p / p.sum(), tail_mass=tail, tail_tol=tail_tol)
    raise TypeError(f"unknown initial kind {kind!r}")


def poisson_tail(mu, n_max):
    """P(N > n_max) for N ~ Poisson(mu), summed term by term."""
    term = math.exp(-mu)
    for n in range(n_max + 1):
        term *= mu / (n + 1)
    tail = 0.0
    n = n_max + 1
    while term > 1e-300:
        tail += term
        n += 1
        term *= mu / n
        if n > n_max + 10 and term < tail * 1e-17:
            break
    return tail


class RateGenerator:
    """Sparse generator of the chain on ``0..n_max`` plus an overflow slot.

    Transitions that would land above ``n_max`` are sent to the absorbing
    overflow state at index ``n_max + 1`` so lost mass stays observable.
    """

    def __init__(self, spec: ReactionSpec, n_max: int):
        self.spec = spec
        self.n_max = int(n_max)
        states = np.arange(self.n_max + 1)
        self._rates = [c.propensity(states) for c in spec.channels]
        self._shifts = [c.l - c.j for c in spec.channels]
        self.outflow = np.sum(self._rates, axis=0)
        self.overflow_redirects = sum(
            int(np.count_nonzero((r > 0) & (states + s > self.n_max)))
            for r, s in zip(self._rates, self._shifts)
        )

    @property
    def overflow_index(self):
        return self.n_max + 1

    def transitions(self, n):
        """``[(target, rate), ...]`` out of state ``n``; exact integer binomials."""
        out = []
        for c in self.spec.channels:
            rate = c.rate * math.comb(n, c.j)
            if rate > 0:
                target = n - c.j + c.l
                out.append((target if target <= self.n_max else self.overflow_index, rate))
        return out

    def apply(self, p):
        """``dp/dt`` for an extended vector of length ``n_max + 2``."""
        p = np.asarray(p, dtype=np.float64)
        size = self.n_max + 1
        dp = np.zeros(size + 1)
        dp[:size] -= self.outflow * p[:size]
        for rate, shift in zip(self._rates, self._shifts):
            flux = rate * p[:size]
            if shift < 0:
                dp[: size + shift] += flux[-shift:]
            else:
                dp[shift:size] += flux[: size - shift]
                dp[size] += flux[size - shift:].sum()
        return dp


def build_generator(spec: ReactionSpec, n_max: int) -> RateGenerator:
    if n_max < spec.max_j:
        raise InvalidTruncationError(
            f"n_max={n_max} is below the largest reactant count {spec.max_j}"
        )
    return RateGenerator(spec, n_max)


def _extend(gen, p0):
    if p0.n_max > gen.n_max:
        raise InvalidTruncationError(
            f"initial support up to {p0.n_max} exceeds generator n_max={gen.n_max}"
        )
    y0 = np.zeros(gen.n_max + 2)
    y0[: p0.n_max + 1] = p0.probs
    return y0


def master_trajectory(gen: RateGenerator, p0: CountDistribution, times: Sequence[float],
                      tol: float = 1e-10, rtol: float = 0.0):
    """Distributions at each of ``times`` (elapsed from ``p0.time``).

    ``tol`` is the per-component absolute error allowed per unit time; the
    optional ``rtol`` adds relative control for very small probabilities.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    y0 = _extend(gen, p0)
    states, _ = dopri45(gen.apply, y0, times, atol=tol, rtol=rtol)
    out = []
    for t, y in zip(times, states):
        overflow = y[-1] + p0.tail_mass
        if overflow > p0.tail_tol:
            need = 2 * gen.n_max
            raise TruncationOverflowError(
                f"overflow mass {overflow:.3e} above n_max={gen.n_max} exceeds "
                f"tail tolerance {p0.tail_tol:.1e}; retry with n_max >= {need}",
                required_n_max=need,
            )
        drift_tol = max(p0.tol, 10 * tol * max(t, 1.0))
        out.append(
            CountDistribution(
                y[:-1], time=p0.time + float(t), tol=drift_tol, tail_tol=p0.tail_tol,
                tail_mass=max(overflow, 0.0),
            )
        )
    return out


def master_evolve(gen: RateGenerator, p0: CountDistribution, t_end: float, tol: float = 1e-10,
                  rtol: float = 0.0) -> CountDistribution:
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if t_end == 0:
        return p0
    return master_trajectory(gen, p0, [t_end], tol=tol, rtol=rtol)[0]


def ssa_ensemble(spec: ReactionSpec, init: CountDistribution, t_end: float, n_paths: int,
                 seed: int, *, record_events=False, workers=1, tag="ssa") -> EmpiricalDistribution:
    """Exact event-driven simulation of ``n_paths`` independent chains.

    Path ``p`` draws its initial count from block ``(p, 0)`` of the stream
    and its ``k``-th event from block ``(p, k + 1)``: one uniform for the
    exponential waiting time and one for the channel.  Results are therefore
    identical for any ``workers`` count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rng = CounterRNG(seed, tag)
    chunks = np.array_split(np.arange(n_paths, dtype=np.uint64), max(1, int(workers)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(lambda idx: _ssa_chunk(spec, init, t_end, idx, rng, record_events), chunks))
    else:
        parts = [_ssa_chunk(spec, init, t_end, idx, rng, record_events) for idx in chunks]
    counts = np.concatenate([c for c, _ in parts])
    events = None
    if record_events:
        events = {}
        for _, ev in parts:
            events.update(ev)
    n_max = max(int(counts.max()), init.n_max)
    hist = np.bincount(counts, minlength=n_max + 1).astype(np.float64)
    probs = hist / n_paths
    stderr = np.sqrt(probs * (1.0 - probs) / n_paths)
    return EmpiricalDistribution(
        probs, time=init.time + t_end, tol=1e-9, stderr=stderr, counts=counts, events=events
    )


def _ssa_chunk(spec, init, t_end, paths, rng, record_events):
    cdf = np.cumsum(init.clipped())
    cdf /= cdf[-1]
    u0, _ = rng.uniform_pair(paths, 0)
    n = np.minimum(np.searchsorted(cdf, u0, side="right"), init.n_max).astype(np.int64)
    t = np.zeros(paths.size)
    active = np.arange(paths.size)
    shifts = np.array([c.l - c.j for c in spec.channels], dtype=np.int64)
    events = {int(p): [(0.0, int(c))] for p, c in zip(paths, n)} if record_events else None
    k = 0
    while active.size:
        props = np.stack([c.propensity(n[active]) for c in spec.channels])
        total = props.sum(axis=0)
        u1, u2 = rng.uniform_pair(paths[active], k + 1)
        with np.errstate(divide="ignore"):
            t_new = t[active] - np.log1p(-u1) / total
        fires = (total > 0) & (t_new <= t_end)
        idx = active[fires]
        cum = np.cumsum(props[:, fires], axis=0)
        choice = (u2[fires] * total[fires] > cum).sum(axis=0)
        choice = np.minimum(choice, len(spec.channels) - 1)
        n[idx] += shifts[choice]
        t[idx] = t_new[fires]
        if record_events:
            for p, tt, nn in zip(paths[idx], t_new[fires], n[idx]):
                events[int(p)].append((float(tt), int(nn)))
        active = idx
        k += 1
    return n, events


def factorial_moments(dist: CountDistribution, m_max: int, rate: float = 1.0) -> FactorialMoments:
    """``M_m = sum_n n (n-1) ... (n-m+1) P_n`` for ``m = 0..m_max``."""
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    n = np.arange(dist.probs.size, dtype=np.float64)
    weights = np.ones_like(n)
    out = np.empty(m_max + 1)
    for m in range(m_max + 1):
        if m > 0:
            weights = weights * (n - (m - 1))
        out[m] = weights @ dist.probs
    return FactorialMoments(out, rate=rate, time=dist.time)


def parity(dist: CountDistribution) -> float:
    """Even-count mass minus odd-count mass."""
    p = dist.probs
    return float(p[0::2].sum() - p[1::2].sum())


def default_n_max(spec: ReactionSpec, init_support: int, t_end: float, tail=1e-12):
    """Truncation bound following the module's sizing rule.

    Consuming-only specs never exceed the initial support.  Otherwise the
    mean is bounded by integrating ``dm/dt <= sum rate * (l - j) * binom(m, j)``
    with positive contributions only, and the bound is pushed until a
    Poisson tail at that mean falls below ``tail``.
    """
    if spec.only_consuming:
        return max(init_support, spec.max_j)
    mean = float(init_support)
    steps = 1000
    dt = t_end / steps if t_end > 0 else 0.0
    for _ in range(steps):
        growth = sum(c.rate * (c.l - c.j) * math.comb(int(math.ceil(mean)), c.j)
                     for c in spec.channels if c.l > c.j)
        mean += dt * growth
    n = max(int(math.ceil(mean)), spec.max_j, init_support)
    while poisson_tail(max(mean, 1.0), n) > tail:
        n += max(1, n // 8)
    return n
