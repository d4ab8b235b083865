"""Monte-Carlo engines for ``dphi = -phi^2 dt + i phi dW`` and two real-noise SDEs.

Time here is the rescaled time ``tau = rate * t``; :meth:`SdeConfig.sde_time`
does the conversion.  Two independent schemes integrate the complex SDE:

* a tamed Euler-Maruyama step on ``(phi1, phi2) = (Re phi, Im phi)``;
* the exact solution of the linear equation ``dxi = (1 - xi) dt - i xi dW``
  satisfied by ``xi = 1/phi``, with trapezoidal quadrature of its integral.

Brownian increments come from counter-based streams, so each path's noise
depends only on ``(seed, tag, path, step)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyEnsembleError, InsufficientEnsembleError
from .rng import CounterRNG, NormalStream
from .stats import complex_mean_and_se, mean_and_se


@dataclass(frozen=True)
class SdeConfig:
    """Discretization and ensemble settings.

    ``common_noise`` makes every scheme read the same Brownian stream so
    that cross-scheme differences are not swamped by sampling noise.
    ``noise=False`` switches the Brownian term off (test hook).
    ``noise_substeps=s`` builds each increment from ``s`` increments of a
    finer path, so a run at ``dt`` with ``s=2`` shares its Brownian path
    with a run at ``dt/2``.
    """

    dt: float = 1e-3
    n_paths: int = 10_000
    seed: int = 0
    rate: float = 1.0
    blowup_threshold: float = 1e6
    common_noise: bool = False
    noise: bool = True
    allow_coarse: bool = False
    noise_substeps: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt > 0.01 and not self.allow_coarse:
            raise ValueError("dt above 0.01 needs allow_coarse=True")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if self.blowup_threshold < 1e3:
            raise ValueError("blowup_threshold must be at least 1e3")
        if self.noise_substeps < 1:
            raise ValueError("noise_substeps must be positive")

    def sde_time(self, t):
        """Rescaled time for a physical time ``t``."""
        return self.rate * t

    def stream(self, scheme):
        return CounterRNG(self.seed, "brownian" if self.common_noise else scheme)

    def increments(self, scheme, n_paths):
        """Callable returning the next Brownian increment of size ``dt`` per path."""
        normals = NormalStream(self.stream(scheme), np.arange(n_paths))
        sub = self.noise_substeps
        scale = math.sqrt(self.dt / sub)

        def draw():
            total = normals.next()
            for _ in range(sub - 1):
                total = total + normals.next()
            return scale * total

        return draw


@dataclass(frozen=True)
class ComplexEnsemble:
    """Points ``z = z1 + i z2`` of all paths at one time.

    Flagged paths (``alive == False``) are excluded from every estimator;
    their stored value is not meaningful.
    """

    z: np.ndarray
    time: float
    alive: np.ndarray
    seed: int = 0
    window_min: np.ndarray | None = None

    @property
    def n_paths(self):
        return int(self.z.size)

    @property
    def n_flagged(self):
        return int(self.n_paths - np.count_nonzero(self.alive))

    @property
    def flagged_fraction(self):
        return self.n_flagged / self.n_paths

    def live(self):
        return self.z[self.alive]


@dataclass(frozen=True)
class RealEnsemble:
    values: np.ndarray
    time: float
    seed: int = 0

    def mean(self):
        return mean_and_se(self.values)

    def variance(self):
        """Sample variance and a delta-method standard error."""
        x = np.asarray(self.values, dtype=np.float64)
        n = x.size
        if n < 4:
            raise InsufficientEnsembleError("need at least 4 samples for a variance error")
        centered = x - np.sum(x) / n
        sq = centered**2
        var = np.sum(sq) / (n - 1)
        _, se = mean_and_se(sq)
        return float(var), se

    def exp_moment(self, s):
        """``E[exp(s * phi)]`` with its standard error."""
        return mean_and_se(np.exp(s * np.asarray(self.values)))


@dataclass(frozen=True)
class MomentEstimate:
    m: int
    value: complex
    stderr_re: float
    stderr_im: float

    @property
    def stderr(self):
        return math.hypot(self.stderr_re, self.stderr_im)


def _initial_points(phi0, n_paths):
    if callable(phi0):
        z = np.asarray(phi0(np.arange(n_paths)), dtype=np.complex128)
    else:
        z = np.broadcast_to(np.asarray(phi0, dtype=np.complex128), (n_paths,))
    if z.shape != (n_paths,):
        raise ValueError("phi0 sampler must return one value per path")
    return np.array(z)


def _step_indices(times, dt):
    times = np.asarray(times, dtype=np.float64)
    if times.ndim != 1 or times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be a nondecreasing nonnegative sequence")
    steps = np.rint(times / dt).astype(np.int64)
    if np.any(np.abs(steps * dt - times) > 1e-9 * np.maximum(1.0, times)):
        raise ValueError(f"snapshot times must be multiples of dt={dt}")
    return steps


def tamed_em_snapshots(phi0, cfg: SdeConfig, times, tag="tamed_em"):
    """Tamed Euler-Maruyama ensembles at each of ``times``.

    Each step adds ``drift * dt / (1 + dt |phi|^2)`` plus the diffusion
    column ``(-phi2, phi1) dW``.  Paths that leave ``|phi| <= blowup_threshold``
    or become non-finite are flagged and frozen.
    """
    steps = _step_indices(times, cfg.dt)
    z = _initial_points(phi0, cfg.n_paths)
    x, y = z.real.copy(), z.imag.copy()
    alive = np.ones(cfg.n_paths, dtype=bool)
    increment = cfg.increments(tag, cfg.n_paths)
    out = []
    k = 0
    for target, t in zip(steps, times):
        while k < target:
            r2 = x * x + y * y
            tame = cfg.dt / (1.0 + cfg.dt * r2)
            dw = increment() if cfg.noise else 0.0
            nx = x - (x * x - y * y) * tame - y * dw
            ny = y - 2.0 * x * y * tame + x * dw
            x = np.where(alive, nx, x)
            y = np.where(alive, ny, y)
            bad = ~np.isfinite(x) | ~np.isfinite(y) | (x * x + y * y > cfg.blowup_threshold**2)
            alive &= ~bad
            k += 1
        out.append(_ensemble(x + 1j * y, float(t), alive, cfg))
    return out


def simulate_tamed_em(phi0, cfg: SdeConfig, t_end: float) -> ComplexEnsemble:
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    return tamed_em_snapshots(phi0, cfg, [t_end])[0]


def reciprocal_snapshots(phi0, cfg: SdeConfig, times, tag="reciprocal", min_window=None):
    """Ensembles of ``phi = 1/xi`` from the exact reciprocal solution.

    ``xi(t) = exp(-t/2 - i W_t) (xi0 + int_0^t exp(s/2 + i W_s) ds)`` on the
    simulated Brownian path; only the integral carries discretization error.
    ``min_window=(a, b)`` also records each path's minimum ``|phi|`` over
    grid times in ``[a, b]``.
    """
    steps = _step_indices(times, cfg.dt)
    phi = _initial_points(phi0, cfg.n_paths)
    if np.any(phi == 0):
        raise ValueError("phi0 must be nonzero for the reciprocal sampler")
    xi0 = 1.0 / phi
    w = np.zeros(cfg.n_paths)
    integral = np.zeros(cfg.n_paths, dtype=np.complex128)
    f_prev = np.ones(cfg.n_paths, dtype=np.complex128)
    alive = np.ones(cfg.n_paths, dtype=bool)
    increment = cfg.increments(tag, cfg.n_paths)
    floor = max(1e-12, 1.0 / cfg.blowup_threshold)
    lo, hi = (None, None) if min_window is None else min_window
    running = np.full(cfg.n_paths, np.inf) if min_window is not None else None
    xi = xi0.copy()

    def watch(k, xi):
        if running is not None and lo - 1e-12 <= k * cfg.dt <= hi + 1e-12:
            np.minimum(running, 1.0 / np.abs(xi), out=running)

    watch(0, xi)
    out = []
    k = 0
    for target, t in zip(steps, times):
        while k < target:
            k += 1
            s = k * cfg.dt
            if cfg.noise:
                w = w + increment()
            phase = np.exp(1j * w)
            f_new = math.exp(0.5 * s) * phase
            integral += 0.5 * cfg.dt * (f_prev + f_new)
            f_prev = f_new
            xi_new = math.exp(-0.5 * s) * np.conj(phase) * (xi0 + integral)
            xi = np.where(alive, xi_new, xi)
            alive &= np.abs(xi) >= floor
            watch(k, xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(alive, 1.0 / xi, np.nan)
        win = None if running is None else running.copy()
        out.append(_ensemble(z, float(t), alive, cfg, win))
    return out


def simulate_reciprocal_exact(phi0, cfg: SdeConfig, t_end: float, min_window=None) -> ComplexEnsemble:
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    return reciprocal_snapshots(phi0, cfg, [t_end], min_window=min_window)[0]


def _ensemble(z, t, alive, cfg, window_min=None):
    if not np.any(alive):
        raise EmptyEnsembleError(f"all {alive.size} paths flagged by t={t}")
    z = np.array(z)
    a = alive.copy()
    z.setflags(write=False)
    a.setflags(write=False)
    return ComplexEnsemble(z, t, a, cfg.seed, window_min)


def expected_reciprocal(xi0: complex, t: float) -> complex:
    """``E[1/phi(t)]`` from ``xi0 = 1/phi0``: ``1 + (xi0 - 1) e^{-t}``."""
    return 1.0 + (xi0 - 1.0) * math.exp(-t)


def modulus_bounds(mod_star: float, delta_t: float):
    """Pathwise bounds on ``|phi|`` a time ``delta_t`` after it equals ``mod_star``.

    The modulus solves ``d|phi|/dt = (1/2 - phi1)|phi|`` with
    ``|phi1| <= |phi|``, which pins it between two logistic solutions.

    Returns
    -------
    lower, upper, blowup_floor
        ``upper`` is ``inf`` past its pole at ``blowup_floor``.
    """
    if mod_star < 0:
        raise ValueError("mod_star must be nonnegative")
    m = mod_star
    g = math.expm1(0.5 * delta_t)
    lower = m * (g + 1.0) / (1.0 + 2.0 * m * g)
    denom = 1.0 - 2.0 * m * g
    upper = m * (g + 1.0) / denom if denom > 0 else math.inf
    floor = 2.0 * math.log1p(1.0 / (2.0 * m)) if m > 0 else math.inf
    return lower, upper, floor


@dataclass
class BoundReport:
    checked_paths: int
    flagged_paths: int
    lower_violations: int = 0
    upper_violations: int = 0
    persistence_violations: int = 0
    absorbed: int = 0
    worst_lower_gap: float = 0.0
    worst_upper_gap: float = 0.0
    violating_paths: list = field(default_factory=list)

    @property
    def total_violations(self):
        return self.lower_violations + self.upper_violations + self.persistence_violations

    @property
    def ok(self):
        return self.total_violations == 0 and self.absorbed == 0


def check_path_bounds(snapshots, tol: float, absorb_level: float = 1e-6) -> BoundReport:
    """Check the modulus sandwich between every ordered pair of snapshots.

    Also checks that a path whose modulus has reached ``1/2`` never drops
    below ``1/2 - tol`` afterwards and counts paths whose modulus ever falls
    to ``absorb_level``.  Paths flagged at any snapshot are skipped.
    """
    if len(snapshots) < 1:
        raise ValueError("need at least one snapshot")
    alive = np.logical_and.reduce([s.alive for s in snapshots])
    mods = np.stack([np.abs(s.z[alive]) for s in snapshots])
    times = np.array([s.time for s in snapshots])
    report = BoundReport(checked_paths=int(alive.sum()), flagged_paths=int((~alive).sum()))
    bad = np.zeros(mods.shape[1], dtype=bool)
    for a in range(len(snapshots)):
        m = mods[a]
        for b in range(a + 1, len(snapshots)):
            g = math.expm1(0.5 * (times[b] - times[a]))
            lower = m * (g + 1.0) / (1.0 + 2.0 * m * g)
            denom = 1.0 - 2.0 * m * g
            with np.errstate(divide="ignore"):
                upper = np.where(denom > 0, m * (g + 1.0) / np.where(denom > 0, denom, 1.0), np.inf)
            low_gap = lower - tol - mods[b]
            up_gap = mods[b] - upper - tol
            lv = low_gap > 0
            uv = up_gap > 0
            report.lower_violations += int(lv.sum())
            report.upper_violations += int(uv.sum())
            if lv.any():
                report.worst_lower_gap = max(report.worst_lower_gap, float(low_gap.max()))
            if uv.any():
                report.worst_upper_gap = max(report.worst_upper_gap, float(up_gap[np.isfinite(up_gap)].max()))
            bad |= lv | uv
    reached = np.maximum.accumulate(mods >= 0.5, axis=0)
    persist = reached & (mods < 0.5 - tol)
    report.persistence_violations = int(persist.sum())
    bad |= persist.any(axis=0)
    report.absorbed = int(np.count_nonzero((mods <= absorb_level).any(axis=0)))
    report.violating_paths = np.flatnonzero(alive)[bad].tolist()
    return report


def ensemble_complex_moments(ens: ComplexEnsemble, m_max: int, min_paths: int = 100):
    """Sample moments ``E[phi^m]``, ``m = 0..m_max``, over unflagged paths."""
    z = ens.live()
    if z.size < min_paths:
        raise InsufficientEnsembleError(
            f"{z.size} unflagged paths; at least {min_paths} required"
        )
    out = []
    power = np.ones_like(z)
    for m in range(m_max + 1):
        if m > 0:
            power = power * z
        value, se_re, se_im = complex_mean_and_se(power)
        out.append(MomentEstimate(m, value, se_re, se_im))
    return out


def simulate_sqbessel(alpha: float, phi0: float, cfg: SdeConfig, t_end: float, tag="sqbessel"):
    """Euler-Maruyama for ``dphi = alpha dt + sqrt(2 alpha phi) dW`` with full truncation.

    The square root sees ``max(phi, 0)`` while the raw iterate is kept and
    reported, which keeps ``E[phi]`` exactly on ``phi0 + alpha t``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if phi0 < 0 or t_end < 0:
        raise ValueError("phi0 and t_end must be nonnegative")
    steps = _step_indices([t_end], cfg.dt)[0]
    phi = np.full(cfg.n_paths, float(phi0))
    increment = cfg.increments(tag, cfg.n_paths)
    for _ in range(steps):
        dw = increment() if cfg.noise else 0.0
        phi = phi + alpha * cfg.dt + np.sqrt(2.0 * alpha * np.maximum(phi, 0.0)) * dw
    return RealEnsemble(phi, float(t_end), cfg.seed)


def simulate_appendix_d(beta: float, phi0: float, cfg: SdeConfig, t_end: float, tag="appendix_d"):
    """Exact samples of ``(sqrt(phi0) + sqrt(beta) W_t)^2``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if phi0 < 0 or t_end < 0:
        raise ValueError("phi0 and t_end must be nonnegative")
    w = math.sqrt(t_end) * cfg.stream(tag).normals(np.arange(cfg.n_paths), 0)
    return RealEnsemble((math.sqrt(phi0) + math.sqrt(beta) * w) ** 2, float(t_end), cfg.seed)


def write_snapshot_csv(path, snapshots):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["path", "t", "z1", "z2", "flagged"])
        for s in snapshots:
            for i, (z, ok) in enumerate(zip(s.z, s.alive)):
                w.writerow([i, repr(s.time), repr(float(z.real)), repr(float(z.imag)), int(not ok)])


def write_moment_csv(path, estimates):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["m", "re", "im", "stderr"])
        for e in estimates:
            w.writerow([e.m, repr(e.value.real), repr(e.value.imag), repr(e.stderr)])
