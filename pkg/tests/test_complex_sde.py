import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from annihilation.complex_sde import (
    ComplexEnsemble,
    SdeConfig,
    check_path_bounds,
    ensemble_complex_moments,
    expected_reciprocal,
    modulus_bounds,
    reciprocal_snapshots,
    simulate_appendix_d,
    simulate_reciprocal_exact,
    simulate_sqbessel,
    simulate_tamed_em,
    tamed_em_snapshots,
    write_moment_csv,
)
from annihilation.errors import EmptyEnsembleError, InsufficientEnsembleError
from annihilation.genfunc import Polynomial, closed_triplet_equal
from annihilation.moments import poisson_moments, solve_truncated


def within(estimate, exact, se, k=3.0):
    return abs(estimate - exact) <= k * se + 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        SdeConfig(dt=0.05)
    SdeConfig(dt=0.05, allow_coarse=True)
    with pytest.raises(ValueError):
        SdeConfig(n_paths=0)
    with pytest.raises(ValueError):
        SdeConfig(blowup_threshold=10)
    assert SdeConfig(rate=2.0).sde_time(0.5) == 1.0


def test_tamed_em_golden():
    ens = simulate_tamed_em(1.0, SdeConfig(dt=1e-3, n_paths=1000, seed=3), 0.1)
    assert complex(ens.z.mean()) == pytest.approx(0.9127408451812983 - 0.0023217851549444495j, abs=1e-15)


def test_reciprocal_golden():
    ens = simulate_reciprocal_exact(1.0, SdeConfig(dt=1e-3, n_paths=1000, seed=3), 0.1)
    assert complex(ens.z.mean()) == pytest.approx(0.9114833265414723 + 0.007900017917835086j, abs=1e-15)


def test_substeps_share_the_fine_path():
    coarse = simulate_reciprocal_exact(1.0, SdeConfig(dt=2e-3, n_paths=50, seed=4, noise_substeps=2), 0.2)
    fine = simulate_reciprocal_exact(1.0, SdeConfig(dt=1e-3, n_paths=50, seed=4), 0.2)
    other = simulate_reciprocal_exact(1.0, SdeConfig(dt=1e-3, n_paths=50, seed=5), 0.2)
    # identical W on the coarse grid, so only the quadrature of the integral differs
    assert np.max(np.abs(coarse.z - fine.z)) < 2e-3
    assert np.max(np.abs(other.z - fine.z)) > 0.1


def test_paths_depend_only_on_seed_and_index():
    big = simulate_tamed_em(1.0, SdeConfig(n_paths=300, seed=5), 0.05)
    small = simulate_tamed_em(1.0, SdeConfig(n_paths=100, seed=5), 0.05)
    np.testing.assert_array_equal(big.z[:100], small.z)
    other = simulate_tamed_em(1.0, SdeConfig(n_paths=100, seed=6), 0.05)
    assert not np.array_equal(other.z, small.z)


def test_em_zero_is_absorbing():
    ens = simulate_tamed_em(0.0, SdeConfig(n_paths=50), 0.3)
    assert np.all(ens.z == 0)


def test_em_zero_time_returns_start():
    ens = simulate_tamed_em(1.0 + 2.0j, SdeConfig(n_paths=10), 0.0)
    assert np.all(ens.z == 1.0 + 2.0j)


def test_snapshot_times_must_be_on_grid():
    with pytest.raises(ValueError):
        tamed_em_snapshots(1.0, SdeConfig(dt=1e-3, n_paths=5), [0.0015])


def test_em_flags_and_empty_ensemble():
    cfg = SdeConfig(dt=1e-2, n_paths=20, noise=False, blowup_threshold=1e3)
    # phi0 = -10 blows up along the negative real axis without noise
    with pytest.raises(EmptyEnsembleError):
        simulate_tamed_em(-10.0, cfg, 20.0)


def test_em_mean_matches_moment_ode():
    cfg = SdeConfig(dt=1e-4, n_paths=20_000, seed=1)
    ens = simulate_tamed_em(1.0, cfg, 0.1)
    m1 = solve_truncated(poisson_moments(1.0, 30), 30, 0.1)[1]
    est = ensemble_complex_moments(ens, 1)[1]
    assert within(est.value.real, m1, est.stderr_re)
    assert within(est.value.imag, 0.0, est.stderr_im)


@pytest.mark.slow
def test_em_step_halving():
    # both runs see the same Brownian path at resolution 5e-4
    a = simulate_tamed_em(1.0, SdeConfig(dt=1e-3, n_paths=100_000, seed=2, noise_substeps=2), 0.1)
    b = simulate_tamed_em(1.0, SdeConfig(dt=5e-4, n_paths=100_000, seed=2), 0.1)
    ea = ensemble_complex_moments(a, 1)[1]
    assert abs(ea.value - ensemble_complex_moments(b, 1)[1].value) < ea.stderr


def test_reciprocal_fixed_point_and_decay():
    cfg = SdeConfig(dt=1e-3, n_paths=5000, seed=4)
    for xi0 in (1.0, 3.0):
        snaps = reciprocal_snapshots(1.0 / xi0, cfg, [0.5, round(math.log(2), 3)])
        for s in snaps:
            xi = 1.0 / s.live()
            re = float(np.mean(xi.real))
            se = float(np.std(xi.real, ddof=1) / math.sqrt(xi.size))
            assert within(re, expected_reciprocal(xi0, s.time).real, se)


def test_reciprocal_rejects_zero():
    with pytest.raises(ValueError):
        simulate_reciprocal_exact(0.0, SdeConfig(n_paths=3), 0.1)


def test_schemes_agree_on_moments():
    cfg = SdeConfig(dt=1e-3, n_paths=20_000, seed=8)
    em = ensemble_complex_moments(simulate_tamed_em(1.0, cfg, 0.5), 3)
    rx = ensemble_complex_moments(simulate_reciprocal_exact(1.0, cfg, 0.5), 3)
    for a, b in zip(em[1:], rx[1:]):
        assert within(a.value.real, b.value.real, a.stderr_re + b.stderr_re)
        assert within(a.value.imag, b.value.imag, a.stderr_im + b.stderr_im)


def test_common_noise_schemes_are_close():
    cfg = SdeConfig(dt=1e-3, n_paths=500, seed=8, common_noise=True)
    em = simulate_tamed_em(1.0, cfg, 0.5)
    rx = simulate_reciprocal_exact(1.0, cfg, 0.5)
    assert np.median(np.abs(em.z - rx.z)) < 1e-2


def test_expected_reciprocal_examples():
    assert expected_reciprocal(1.0, 7.0) == 1.0
    assert expected_reciprocal(3.0, math.log(2)) == pytest.approx(2.0)
    assert expected_reciprocal(5.0 + 2.0j, 60.0) == pytest.approx(1.0)


def test_modulus_bounds_examples():
    for d in (0.0, 0.3, 2.0, 20.0):
        assert modulus_bounds(0.5, d)[0] == pytest.approx(0.5)
    _, up, floor = modulus_bounds(0.5, 1.0)
    assert floor == pytest.approx(2 * math.log(2))
    assert modulus_bounds(0.5, floor + 1e-9)[1] == math.inf
    assert modulus_bounds(0.5, floor - 1e-3)[1] > 100
    assert modulus_bounds(1e9, 200.0)[0] == pytest.approx(0.5)


@given(st.floats(1e-3, 50), st.floats(0, 5), st.floats(0, 5))
def test_modulus_bounds_are_a_flow(m, d1, d2):
    lo1, up1, _ = modulus_bounds(m, d1)
    lo12, up12, _ = modulus_bounds(m, d1 + d2)
    assert lo1 <= m * (1 + 1e-12) or lo1 <= 0.5 + 1e-12 or m < 0.5
    assert modulus_bounds(lo1, d2)[0] == pytest.approx(lo12, rel=1e-9)
    if math.isfinite(up1) and math.isfinite(up12):
        assert modulus_bounds(up1, d2)[1] == pytest.approx(up12, rel=1e-6)


def test_bounds_hold_on_reciprocal_paths():
    cfg = SdeConfig(dt=1e-3, n_paths=2000, seed=9)
    times = np.round(np.arange(0, 2.0001, 0.1), 10)
    report = check_path_bounds(reciprocal_snapshots(1.0, cfg, times), tol=2 * math.sqrt(cfg.dt))
    assert report.ok and report.checked_paths == 2000


def test_bounds_hold_on_em_paths():
    cfg = SdeConfig(dt=1e-4, n_paths=1000, seed=9)
    times = np.round(np.arange(0, 2.0001, 0.25), 10)
    assert check_path_bounds(tamed_em_snapshots(1.0, cfg, times), tol=0.02).ok


def test_checker_detects_noise_free_paths():
    cfg = SdeConfig(dt=1e-3, n_paths=4, noise=False)
    snaps = tamed_em_snapshots(1.0, cfg, [0.0, 1.0, 3.0])
    np.testing.assert_allclose(np.abs(snaps[-1].z), 1 / (1 + 3.0), rtol=1e-3)
    report = check_path_bounds(snaps, tol=0.02)
    assert not report.ok and report.lower_violations > 0
    assert report.violating_paths == [0, 1, 2, 3]


def test_checker_fixed_point_case():
    ok = ComplexEnsemble(np.full(3, 0.5 + 0j), 1.0, np.ones(3, bool))
    start = ComplexEnsemble(np.full(3, 0.5 + 0j), 0.0, np.ones(3, bool))
    low = ComplexEnsemble(np.array([0.5, 0.47, 0.5]) + 0j, 1.0, np.ones(3, bool))
    assert check_path_bounds([start, ok], tol=0.02).ok
    r = check_path_bounds([start, low], tol=0.02)
    assert r.violating_paths == [1] and r.persistence_violations == 1


def test_moments_degenerate_ensemble():
    ens = ComplexEnsemble(np.full(200, 2.0 + 0j), 0.0, np.ones(200, bool))
    est = ensemble_complex_moments(ens, 3)
    assert est[0].value == 1.0 and est[1].value == 2.0 and est[1].stderr == 0.0
    assert est[3].value == 8.0


def test_moments_need_enough_live_paths():
    alive = np.zeros(200, bool)
    alive[:50] = True
    ens = ComplexEnsemble(np.ones(200, complex), 0.0, alive)
    with pytest.raises(InsufficientEnsembleError):
        ensemble_complex_moments(ens, 2)
    assert len(ensemble_complex_moments(ens, 2, min_paths=50)) == 3


def test_moment_csv(tmp_path):
    ens = ComplexEnsemble(np.full(200, 2.0 + 0j), 0.0, np.ones(200, bool))
    write_moment_csv(tmp_path / "m.csv", ensemble_complex_moments(ens, 1))
    assert (tmp_path / "m.csv").read_text().splitlines() == ["m,re,im,stderr", "0,1.0,0.0,0.0", "1,2.0,0.0,0.0"]


def test_sqbessel_mean_and_start():
    cfg = SdeConfig(dt=1e-3, n_paths=20_000, seed=12)
    ens = simulate_sqbessel(1.5, 0.0, cfg, 0.4)
    mean, se = ens.mean()
    assert within(mean, 1.5 * 0.4, se)
    assert np.all(simulate_sqbessel(2.0, 0.7, cfg, 0.0).values == 0.7)


def test_sqbessel_generating_function():
    cfg = SdeConfig(dt=1e-3, n_paths=20_000, seed=13)
    ens = simulate_sqbessel(1.0, 0.0, cfg, 0.3)
    g, se = ens.exp_moment(0.5 - 1.0)
    assert within(g, closed_triplet_equal(Polynomial([1.0]), 1.0, 0.3, 0.5), se)


def test_appendix_d_moments():
    cfg = SdeConfig(n_paths=50_000, seed=14)
    ens = simulate_appendix_d(1.0, 0.0, cfg, 0.7)
    mean, se = ens.mean()
    assert within(mean, 0.7, se)
    var, vse = ens.variance()
    assert within(var, 2 * 0.7**2, vse, k=5.0)
    assert np.all(simulate_appendix_d(1.0, 0.3, cfg, 0.0).values == pytest.approx(0.3))
