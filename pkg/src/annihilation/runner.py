"""Configuration-driven scenarios: run engines, write series, compare them.

Every engine turns a validated :class:`RunConfig` into a :class:`Series`,
a long table of ``(t, observable, value, stderr)`` rows.  Observables are
named ``P_n`` (count probability), ``M_m`` (factorial moment, real part),
``M_m.im`` (imaginary part for complex estimators) and ``G@x``
(generating function at ``x``).  Pairs of series are compared row by row
under an absolute, relative or ``k * SE`` rule.
"""

from __future__ import annotations

import copy
import csv
import datetime as _dt
import json
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import jsonschema
import numpy as np
import scipy

from . import __version__
from .chain import (
    Deterministic,
    ReactionSpec,
    TruncatedPoisson,
    poisson_tail,
    build_generator,
    default_n_max,
    factorial_moments,
    master_trajectory,
    sample_initial,
    ssa_ensemble,
)
from .complex_sde import (
    SdeConfig,
    ensemble_complex_moments,
    reciprocal_snapshots,
    simulate_appendix_d,
    simulate_sqbessel,
    tamed_em_snapshots,
)
from .distributional import appendix_c_comb, pair_exponential
from .errors import AlignmentError, ConfigError, EngineError
from .genfunc import CLOSED_FORMS, GFGrid, Polynomial, grid_nodes, pde_solve_annihilation
from .moments import FactorialMoments, solve_closed, solve_truncated
from .stats import mean_and_se

OUTPUT_ENV = "ANNIHILATION_OUTPUT_DIR"
_ULPS = 8 * np.finfo(np.float64).eps

ENGINES = (
    "master",
    "ssa",
    "moments_closed",
    "moments_truncated",
    "sde_em",
    "sde_reciprocal",
    "sqbessel",
    "appendix_d",
    "genfunc_closed",
    "genfunc_pde",
    "distributional",
)

_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "RunConfig",
    "type": "object",
    "required": ["scenario", "reactions", "initial", "engines", "times"],
    "additionalProperties": False,
    "properties": {
        "scenario": {"type": "string", "minLength": 1},
        "reactions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["j", "l", "rate"],
                "additionalProperties": False,
                "properties": {
                    "j": {"type": "integer", "minimum": 0},
                    "l": {"type": "integer", "minimum": 0},
                    "rate": _POS,
                },
            },
        },
        "initial": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind", "n0"],
                    "additionalProperties": False,
                    "properties": {"kind": {"const": "deterministic"}, "n0": {"type": "integer", "minimum": 0}},
                },
                {
                    "type": "object",
                    "required": ["kind", "mu"],
                    "additionalProperties": False,
                    "properties": {"kind": {"const": "poisson"}, "mu": _POS},
                },
            ]
        },
        "engines": {
            "type": "array",
            "minItems": 1,
            "uniqueItems": True,
            "items": {"enum": list(ENGINES)},
        },
        "times": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "seed": {"type": "integer", "minimum": 0},
        "n_max": {"type": "integer", "minimum": 1},
        "observables": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "P": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "M": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "G": {"type": "array", "items": {"type": "number", "minimum": -1, "maximum": 1}},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "master": _POS,
                "moments": _POS,
                "abs": _POS,
                "rel": _POS,
                "k": _POS,
            },
        },
        "ssa": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_paths": {"type": "integer", "minimum": 1}, "workers": {"type": "integer", "minimum": 1}},
        },
        "sde": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dt": _POS,
                "n_paths": {"type": "integer", "minimum": 1},
                "phi0": {"type": "number", "minimum": 0},
                "blowup_threshold": {"type": "number", "minimum": 1000},
                "common_noise": {"type": "boolean"},
            },
        },
        "moments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"m_max": {"type": "integer", "minimum": 2}},
        },
        "closed_form": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {"name": {"enum": sorted(CLOSED_FORMS)}, "rate": _POS},
        },
        "pde": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dt": _POS, "n_nodes": {"type": "integer", "minimum": 66}, "clustered": {"type": "boolean"}},
        },
        "compare": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["a", "b"],
                "additionalProperties": False,
                "properties": {
                    "a": {"enum": list(ENGINES)},
                    "b": {"enum": list(ENGINES)},
                    "rule": {"enum": ["abs", "rel", "kse", "auto"]},
                    "tol": _POS,
                    "k": _POS,
                    "observables": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "seed": 0,
    "observables": {"P": [0, 1, 2], "M": [1, 2, 3], "G": [-0.5, 0.0, 0.5]},
    "tolerances": {"master": 1e-10, "moments": 1e-10, "abs": 1e-6, "rel": 1e-6, "k": 3.0},
    "ssa": {"n_paths": 100_000, "workers": 1},
    "sde": {"dt": 1e-3, "n_paths": 10_000, "blowup_threshold": 1e6, "common_noise": False},
    "moments": {"m_max": 40},
    "pde": {"dt": 1e-3, "n_nodes": 513, "clustered": False},
    "output_dir": "runs",
}


def _pointer(path):
    return "/" + "/".join(str(p).replace("~", "~0").replace("/", "~1") for p in path) if path else ""


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            raise ConfigError(err.message, _pointer(list(err.absolute_path)))
        times = data["times"]
        if times[0] != 0:
            raise ConfigError("time grid must start at 0", "/times/0")
        for i in range(1, len(times)):
            if not times[i] > times[i - 1]:
                raise ConfigError("time grid must be strictly increasing", f"/times/{i}")
        merged = copy.deepcopy(DEFAULTS)
        for key, value in data.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key].update(value)
            else:
                merged[key] = copy.deepcopy(value)
        for i, pair in enumerate(merged.get("compare", [])):
            for side in ("a", "b"):
                if pair[side] not in merged["engines"]:
                    raise ConfigError(f"engine {pair[side]!r} is not in the engine list", f"/compare/{i}/{side}")
        try:
            ReactionSpec.from_tuples([(r["j"], r["l"], r["rate"]) for r in merged["reactions"]])
        except ValueError as exc:
            raise ConfigError(str(exc), "/reactions") from None
        return cls(merged)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def __getitem__(self, key):
        return self.raw[key]

    @property
    def spec(self):
        return ReactionSpec.from_tuples([(r["j"], r["l"], r["rate"]) for r in self.raw["reactions"]])

    @property
    def times(self):
        return [float(t) for t in self.raw["times"]]

    @property
    def initial(self):
        init = self.raw["initial"]
        if init["kind"] == "deterministic":
            return Deterministic(init["n0"])
        return TruncatedPoisson(init["mu"])

    def output_dir(self):
        return Path(os.environ.get(OUTPUT_ENV) or self.raw["output_dir"])


@dataclass
class Series:
    """Long-format results of one engine; ``rows`` holds ``(t, observable, value, stderr)``."""

    engine: str
    rows: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def add(self, t, observable, value, stderr=0.0):
        self.rows.append((float(t), observable, float(value), float(stderr)))

    def table(self):
        return {(obs, t): (v, se) for t, obs, v, se in self.rows}

    def observables(self):
        seen = []
        for _, obs, _, _ in self.rows:
            if obs not in seen:
                seen.append(obs)
        return seen

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "observable", "value", "stderr"])
            for t, obs, v, se in self.rows:
                w.writerow([repr(t), obs, repr(v), repr(se)])

    @classmethod
    def read_csv(cls, path, engine=None):
        out = cls(engine or Path(path).stem)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"t", "observable", "value"} - set(reader.fieldnames or [])
            if missing:
                raise AlignmentError(f"{path}: missing columns {sorted(missing)}")
            for row in reader:
                out.add(float(row["t"]), row["observable"], float(row["value"]), float(row.get("stderr") or 0.0))
        return out


@dataclass(frozen=True)
class CompareRule:
    kind: str = "abs"
    tol: float = 1e-6
    k: float = 3.0

    def __post_init__(self):
        if self.kind not in ("abs", "rel", "kse"):
            raise ValueError(f"unknown rule {self.kind!r}")

    def tolerance(self, a, b, se_a, se_b):
        """Rule tolerance plus a few ulps so two exact routes never fail on rounding alone."""
        rounding = _ULPS * max(abs(a), abs(b))
        if self.kind == "abs":
            return self.tol + rounding
        if self.kind == "rel":
            return self.tol * max(abs(a), abs(b)) + rounding
        return self.k * (se_a + se_b) + rounding


@dataclass
class CompareReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r["pass"] for r in self.rows)

    def extend(self, other):
        self.rows.extend(other.rows)

    def write(self, directory):
        directory = Path(directory)
        with open(directory / "report.json", "w") as fh:
            json.dump({"passed": self.passed, "rows": self.rows}, fh, indent=2)
            fh.write("\n")
        cols = ["observable", "t", "engine_a", "engine_b", "rule", "value_a", "value_b", "difference",
                "tolerance", "pass"]
        with open(directory / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in cols])


def compare(series_a: Series, series_b: Series, rule: CompareRule, observables=None) -> CompareReport:
    """Row-by-row comparison over the shared observables.

    Each compared observable must be reported at the same times by both
    series.  A difference equal to the tolerance passes.
    """
    ta, tb = series_a.table(), series_b.table()
    if observables is None:
        observables = [o for o in series_a.observables() if o in set(series_b.observables())]
    if not observables:
        raise AlignmentError(f"{series_a.engine} and {series_b.engine} share no observables")
    report = CompareReport()
    for obs in observables:
        times_a = sorted(t for o, t in ta if o == obs)
        times_b = sorted(t for o, t in tb if o == obs)
        if not times_a or times_a != times_b:
            raise AlignmentError(f"{obs}: time grids of {series_a.engine} and {series_b.engine} differ")
        for t in times_a:
            (va, sa), (vb, sb) = ta[(obs, t)], tb[(obs, t)]
            diff = va - vb
            tol = float(rule.tolerance(va, vb, sa, sb))
            report.rows.append({
                "observable": obs, "t": t, "engine_a": series_a.engine, "engine_b": series_b.engine,
                "rule": rule.kind, "value_a": va, "value_b": vb, "difference": diff,
                "tolerance": tol, "pass": bool(abs(diff) <= tol),
            })
    return report


# engines --------------------------------------------------------------------


def _support(init, tail=1e-12):
    if isinstance(init, Deterministic):
        return init.n0
    n = int(math.ceil(init.mu))
    while poisson_tail(init.mu, n) > tail:
        n += 1
    return n


def _n_max(cfg):
    if "n_max" in cfg.raw:
        return cfg["n_max"]
    return default_n_max(cfg.spec, _support(cfg.initial), cfg.times[-1])


def _annihilation_rate(cfg, engine):
    spec = cfg.spec
    if len(spec.channels) != 1 or (spec.channels[0].j, spec.channels[0].l) != (2, 0):
        raise ConfigError(f"engine {engine} needs the single channel 2A -> 0", "/reactions")
    return spec.channels[0].rate


def _dist_rows(series, t, dist, cfg, counts=None):
    obs = cfg["observables"]
    for n in obs["P"]:
        se = dist.stderr[n] if dist.stderr is not None and n <= dist.n_max else 0.0
        series.add(t, f"P_{n}", dist[n], se)
    if counts is None:
        fm = factorial_moments(dist, max(obs["M"], default=0))
        for m in obs["M"]:
            series.add(t, f"M_{m}", fm[m])
        g = Polynomial(dist.probs)
        for x in obs["G"]:
            series.add(t, f"G@{x!r}", g(x))
        return
    n = counts.astype(np.float64)
    for m in obs["M"]:
        falling = np.ones_like(n)
        for i in range(m):
            falling = falling * (n - i)
        series.add(t, f"M_{m}", *mean_and_se(falling))
    for x in obs["G"]:
        series.add(t, f"G@{x!r}", *mean_and_se(np.power(x, n)))


def run_master(cfg):
    n_max = _n_max(cfg)
    p0 = sample_initial(cfg.initial, n_max)
    gen = build_generator(cfg.spec, n_max)
    s = Series("master", info={"n_max": n_max, "tol": cfg["tolerances"]["master"]})
    dists = master_trajectory(gen, p0, cfg.times, tol=cfg["tolerances"]["master"])
    for t, d in zip(cfg.times, dists):
        _dist_rows(s, t, d, cfg)
    s.info["overflow_mass"] = float(dists[-1].tail_mass)
    return s


def run_ssa(cfg):
    n_max = _n_max(cfg)
    init = sample_initial(cfg.initial, n_max)
    opts = cfg["ssa"]
    s = Series("ssa", info={"seed": cfg["seed"], "tag": "ssa", "n_paths": opts["n_paths"]})
    for t in cfg.times:
        emp = ssa_ensemble(cfg.spec, init, t, opts["n_paths"], cfg["seed"], workers=opts["workers"])
        _dist_rows(s, t, emp, cfg, counts=emp.counts)
    return s


def _initial_moments(cfg, m_max, rate):
    init = cfg.initial
    if isinstance(init, Deterministic):
        return factorial_moments(sample_initial(init, max(init.n0, 1)), m_max, rate=rate)
    return FactorialMoments(init.mu ** np.arange(m_max + 1), rate=rate)


def run_moments_closed(cfg):
    rate = _annihilation_rate(cfg, "moments_closed")
    if not isinstance(cfg.initial, Deterministic):
        raise ConfigError("moments_closed needs deterministic initial data", "/initial")
    m0 = _initial_moments(cfg, max(cfg.initial.n0, max(cfg["observables"]["M"], default=0)), rate)
    s = Series("moments_closed")
    for t in cfg.times:
        fm = solve_closed(m0, t)
        for m in cfg["observables"]["M"]:
            s.add(t, f"M_{m}", fm[m])
    return s


def run_moments_truncated(cfg):
    rate = _annihilation_rate(cfg, "moments_truncated")
    m_max = cfg["moments"]["m_max"]
    m0 = _initial_moments(cfg, m_max, rate)
    s = Series("moments_truncated", info={"m_max": m_max, "closure": {}})
    for t in cfg.times:
        fm = solve_truncated(m0, m_max, t, tol=cfg["tolerances"]["moments"])
        s.info["closure"][repr(t)] = fm.closure
        for m in cfg["observables"]["M"]:
            # the closure diagnostic bounds the neglected coupling, so it plays the role of an error bar
            s.add(t, f"M_{m}", fm[m], fm.closure)
    return s


def _sde_cfg(cfg, rate):
    opts = cfg["sde"]
    return SdeConfig(dt=opts["dt"], n_paths=opts["n_paths"], seed=cfg["seed"], rate=rate,
                     blowup_threshold=opts["blowup_threshold"], common_noise=opts["common_noise"])


def _phi0(cfg):
    if "phi0" in cfg["sde"]:
        return float(cfg["sde"]["phi0"])
    init = cfg.initial
    if isinstance(init, TruncatedPoisson):
        return float(init.mu)
    raise ConfigError("SDE engines pair with Poisson initial data; set sde.phi0 otherwise", "/initial")


def _grid_times(times, dt):
    return [round(t / dt) * dt for t in times]


def _run_complex(cfg, engine, snapshots_fn):
    rate = _annihilation_rate(cfg, engine)
    scfg = _sde_cfg(cfg, rate)
    tau = _grid_times([scfg.sde_time(t) for t in cfg.times], scfg.dt)
    snaps = snapshots_fn(_phi0(cfg), scfg, tau)
    obs = cfg["observables"]
    s = Series(engine, info={"seed": cfg["seed"], "tag": "brownian" if scfg.common_noise else engine,
                             "dt": scfg.dt, "n_paths": scfg.n_paths, "flagged": {}})
    for t, ens in zip(cfg.times, snaps):
        s.info["flagged"][repr(t)] = ens.n_flagged
        est = ensemble_complex_moments(ens, max(obs["M"], default=0))
        for m in obs["M"]:
            s.add(t, f"M_{m}", est[m].value.real, est[m].stderr_re)
            s.add(t, f"M_{m}.im", est[m].value.imag, est[m].stderr_im)
        z = ens.live()
        for x in obs["G"]:
            s.add(t, f"G@{x!r}", *mean_and_se(np.exp(z * (x - 1.0)).real))
    return s


def run_sde_em(cfg):
    return _run_complex(cfg, "sde_em", tamed_em_snapshots)


def run_sde_reciprocal(cfg):
    return _run_complex(cfg, "sde_reciprocal", reciprocal_snapshots)


def _closed_form(cfg, engine):
    if "closed_form" not in cfg.raw:
        raise ConfigError(f"engine {engine} needs a closed_form block", "")
    cf = cfg["closed_form"]
    rate = cf.get("rate")
    if rate is None:
        rate = {"pure_death": lambda s: s.channels[0].rate,
                "triplet_equal": lambda s: s.channels[0].rate,
                "triplet_two_beta": lambda s: min(c.rate for c in s.channels)}[cf["name"]](cfg.spec)
    return cf["name"], float(rate)


def _real_rows(s, t, ens, cfg):
    mean, se = ens.mean()
    if 1 in cfg["observables"]["M"]:
        s.add(t, "M_1", mean, se)
    for x in cfg["observables"]["G"]:
        s.add(t, f"G@{x!r}", *ens.exp_moment(x - 1.0))


def _run_real(cfg, engine, expected, simulate):
    name, rate = _closed_form(cfg, engine)
    if name != expected:
        raise ConfigError(f"engine {engine} needs closed_form {expected}", "/closed_form/name")
    opts = cfg["sde"]
    scfg = SdeConfig(dt=opts["dt"], n_paths=opts["n_paths"], seed=cfg["seed"])
    s = Series(engine, info={"seed": cfg["seed"], "tag": engine, "n_paths": scfg.n_paths})
    for t, tg in zip(cfg.times, _grid_times(cfg.times, scfg.dt)):
        _real_rows(s, t, simulate(rate, _phi0(cfg), scfg, tg), cfg)
    return s


def run_sqbessel(cfg):
    return _run_real(cfg, "sqbessel", "triplet_equal", simulate_sqbessel)


def run_appendix_d(cfg):
    return _run_real(cfg, "appendix_d", "triplet_two_beta", simulate_appendix_d)


def _g0(init):
    if isinstance(init, Deterministic):
        return Polynomial([0.0] * init.n0 + [1.0])
    mu = init.mu
    return lambda x: np.exp(mu * (np.asarray(x, dtype=np.float64) - 1.0))


def run_genfunc_closed(cfg):
    name, rate = _closed_form(cfg, "genfunc_closed")
    f = CLOSED_FORMS[name]
    g0 = _g0(cfg.initial)
    s = Series("genfunc_closed", info={"closed_form": name, "rate": rate})
    for t in cfg.times:
        for x in cfg["observables"]["G"]:
            s.add(t, f"G@{x!r}", float(f(g0, rate, t, x)))
    return s


def run_genfunc_pde(cfg):
    rate = _annihilation_rate(cfg, "genfunc_pde")
    opts = cfg["pde"]
    nodes = grid_nodes(opts["n_nodes"], opts["clustered"])
    grid = GFGrid(nodes, _g0(cfg.initial)(nodes))
    s = Series("genfunc_pde", info={"dt": opts["dt"], "n_nodes": opts["n_nodes"]})
    prev_t = 0.0
    for t in cfg.times:
        grid = pde_solve_annihilation(grid, rate, t - prev_t, opts["dt"])
        prev_t = t
        for x in cfg["observables"]["G"]:
            s.add(t, f"G@{x!r}", float(np.interp(x, grid.nodes, grid.values)))
    return s


def run_distributional(cfg):
    rate = _annihilation_rate(cfg, "distributional")
    init = cfg.initial
    if not isinstance(init, Deterministic) or init.n0 % 2 or init.n0 == 0:
        raise ConfigError("distributional needs an even positive deterministic start", "/initial")
    k0 = init.n0 // 2
    obs = cfg["observables"]
    s = Series("distributional", info={"k0": k0})
    for t in cfg.times:
        comb = appendix_c_comb(k0, rate, t)
        # expand sum_n c_n (1 - x)^n in powers of x to read off P_n
        probs = np.zeros(comb.coeffs.size)
        for n, c in enumerate(comb.coeffs):
            for k in range(n + 1):
                probs[k] += c * math.comb(n, k) * (-1) ** k
        for n in obs["P"]:
            s.add(t, f"P_{n}", probs[n] if n < probs.size else 0.0)
        mom = comb.moments()
        for m in obs["M"]:
            s.add(t, f"M_{m}", mom[m] if m < mom.size else 0.0)
        for x in obs["G"]:
            s.add(t, f"G@{x!r}", pair_exponential(comb, x))
    return s


RUNNERS = {
    "master": run_master,
    "ssa": run_ssa,
    "moments_closed": run_moments_closed,
    "moments_truncated": run_moments_truncated,
    "sde_em": run_sde_em,
    "sde_reciprocal": run_sde_reciprocal,
    "sqbessel": run_sqbessel,
    "appendix_d": run_appendix_d,
    "genfunc_closed": run_genfunc_closed,
    "genfunc_pde": run_genfunc_pde,
    "distributional": run_distributional,
}


def run_engines(cfg: RunConfig, workers=None):
    """Run every configured engine, concurrently, and return series in config order."""
    engines = cfg["engines"]

    def one(name):
        try:
            return RUNNERS[name](cfg)
        except ConfigError:
            raise
        except Exception as exc:
            raise EngineError(name, exc) from exc

    with ThreadPoolExecutor(max_workers=workers or len(engines)) as pool:
        futures = {name: pool.submit(one, name) for name in engines}
        return {name: futures[name].result() for name in engines}


def _rule_for(pair, a, b, tolerances):
    kind = pair.get("rule", "auto")
    if kind == "auto":
        noisy = any(se > 0 for *_, se in a.rows) or any(se > 0 for *_, se in b.rows)
        kind = "kse" if noisy else "abs"
    tol = pair.get("tol", tolerances["rel"] if kind == "rel" else tolerances["abs"])
    return CompareRule(kind, tol=tol, k=pair.get("k", tolerances["k"]))


def build_report(cfg: RunConfig, series: dict) -> CompareReport:
    pairs = cfg.raw.get("compare")
    if pairs is None:
        pairs = [{"a": a, "b": b} for a, b in combinations(cfg["engines"], 2)]
    report = CompareReport()
    for pair in pairs:
        a, b = series[pair["a"]], series[pair["b"]]
        rule = _rule_for(pair, a, b, cfg["tolerances"])
        report.extend(compare(a, b, rule, pair.get("observables")))
    return report


def run(cfg: RunConfig, out_dir=None):
    """Execute a scenario and write its artifact directory.

    Returns ``(report, out_dir)``.
    """
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    series = run_engines(cfg)
    report = build_report(cfg, series)
    out = Path(out_dir) if out_dir is not None else cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    for name, s in series.items():
        s.write_csv(out / f"{name}.csv")
    report.write(out)
    manifest = {
        "scenario": cfg["scenario"],
        "config": cfg.raw,
        "started": started,
        "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "versions": {
            "annihilation": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "seed": cfg["seed"],
        "tolerances": cfg["tolerances"],
        "engines": {name: s.info for name, s in series.items()},
        "files": sorted([f"{n}.csv" for n in series] + ["report.json", "report.csv"]),
        "passed": report.passed,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, default=float)
        fh.write("\n")
    return report, out
