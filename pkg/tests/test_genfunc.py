import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from annihilation.chain import (
    CountDistribution,
    ReactionChannel,
    annihilation,
    build_generator,
    master_evolve,
    point_mass,
)
from annihilation.errors import DomainError
from annihilation.genfunc import (
    CLOSED_FORMS,
    GFGrid,
    Polynomial,
    closed_form_spec,
    closed_pure_death,
    closed_triplet_equal,
    closed_triplet_two_beta,
    eval_gf,
    general_rhs_residual,
    gf_from_distribution,
    grid_nodes,
    pde_solve_annihilation,
)

X = Polynomial([0, 1])
ONE = Polynomial([1])


def test_polynomial_from_distributions():
    assert gf_from_distribution(point_mass(2)) == Polynomial([0, 0, 1])
    assert gf_from_distribution(CountDistribution([0.5, 0, 0.5])) == Polynomial([0.5, 0, 0.5])
    assert Polynomial([1, 2, 0, 0]).degree == 1


def test_polynomial_of_master_solution():
    gen = build_generator(annihilation(1.0), 2)
    t = 0.8
    g = gf_from_distribution(master_evolve(gen, point_mass(2), t))
    np.testing.assert_allclose(g.coeffs, [1 - math.exp(-t), 0, math.exp(-t)], atol=1e-8)


def test_eval_examples():
    assert eval_gf(Polynomial([0, 0, 1]), 1.0) == 1.0
    assert eval_gf(Polynomial([0.5, 0, 0.5]), -1.0) == 1.0


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30).filter(lambda v: sum(v) > 0))
def test_eval_at_one_is_total_mass(weights):
    p = np.array(weights) / np.sum(weights)
    g = gf_from_distribution(CountDistribution(p))
    assert eval_gf(g, 1.0) == g.total()
    assert abs(eval_gf(g, 1.0) - 1.0) <= 1e-8


def test_pure_death_closed_form():
    lam, t = 1.3, 0.6
    assert closed_pure_death(X, lam, t, 0.0) == pytest.approx(1 - math.exp(-lam * t))
    assert closed_pure_death(Polynomial([0.2, 0.3, 0.5]), lam, t, 1.0) == 1.0
    assert closed_pure_death(X, 1.0, 50.0, -0.7) == pytest.approx(1.0)


def test_triplet_equal_examples():
    assert closed_triplet_equal(X, 1.0, 1.0, 0.0) == pytest.approx(0.25)
    assert closed_triplet_equal(Polynomial([0.1, 0.9]), 0.7, 2.0, 1.0) == 1.0
    assert closed_triplet_equal(ONE, 1.0, 1.0, 0.0) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        closed_triplet_equal(X, 1.0, 0.5, 3.0)


def test_triplet_two_beta_examples():
    assert closed_triplet_two_beta(ONE, 0.4, 1.0, 0.2) == pytest.approx((1 - 0.8 * (0.2 - 1)) ** -0.5)
    assert closed_triplet_two_beta(X, 0.4, 1.0, 1.0) == 1.0
    assert closed_triplet_two_beta(ONE, 0.5, 1.0, 0.0) == pytest.approx(2**-0.5)
    with pytest.raises(DomainError):
        closed_triplet_two_beta(ONE, 1.0, 1.0, 2.0)


def test_triplet_equal_satisfies_its_pde():
    alpha, h = 0.9, 1e-4
    g0 = Polynomial([0.1, 0.3, 0.6])
    xs = np.linspace(-0.9, 0.9, 19)
    for t in (0.2, 0.6):
        dt = (closed_triplet_equal(g0, alpha, t + h, xs) - closed_triplet_equal(g0, alpha, t - h, xs)) / (2 * h)
        flux = lambda x: (x - 1) * closed_triplet_equal(g0, alpha, t, x)
        dx = (flux(xs + h) - flux(xs - h)) / (2 * h)
        assert np.max(np.abs(dt - alpha * (xs - 1) * dx)) <= 1e-6


@pytest.mark.parametrize("name, rate, init", [
    ("pure_death", 0.7, point_mass(5)),
    ("triplet_equal", 1.0, point_mass(3, 3)),
    ("triplet_two_beta", 0.5, point_mass(2, 2)),
])
def test_closed_forms_match_master(name, rate, init):
    spec = closed_form_spec(name, rate)
    gen = build_generator(spec, 80)
    p0 = CountDistribution(np.pad(init.probs, (0, 80 - init.n_max)))
    t = 0.4
    g = gf_from_distribution(master_evolve(gen, p0, t))
    g0 = gf_from_distribution(init)
    xs = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(g(xs), CLOSED_FORMS[name](g0, rate, t, xs), atol=1e-8)


def test_grid_contract():
    with pytest.raises(ValueError):
        GFGrid([-1, 0.5, 0.9], [1, 1, 1])
    nodes = grid_nodes(101, clustered=True)
    assert nodes[0] == -1.0 and nodes[-1] == 1.0
    assert np.diff(nodes)[0] < np.diff(nodes)[50]


def test_pde_even_start_keeps_endpoints():
    g0 = GFGrid.from_function(Polynomial([0, 0, 0, 0, 1]))
    out = pde_solve_annihilation(g0, 1.0, 0.7, 1e-3)
    assert out.values[0] == 1.0 and out.values[-1] == 1.0


def test_pde_constant_is_stationary():
    g0 = GFGrid.from_function(lambda x: np.ones_like(x))
    out = pde_solve_annihilation(g0, 2.0, 1.0, 1e-2)
    np.testing.assert_allclose(out.values, 1.0, atol=1e-13)


@pytest.mark.parametrize("clustered", [False, True])
def test_pde_two_particles_against_master(clustered):
    g0 = GFGrid.from_function(Polynomial([0, 0, 1]), clustered=clustered)
    out = pde_solve_annihilation(g0, 1.0, 0.5, 1e-3)
    gen = build_generator(annihilation(1.0), 2)
    ref = gf_from_distribution(master_evolve(gen, point_mass(2), 0.5))(out.nodes)
    assert np.max(np.abs(out.values - ref)) <= 1e-4


def test_pde_needs_resolution():
    with pytest.raises(ValueError):
        pde_solve_annihilation(GFGrid.from_function(X, n_nodes=40), 1.0, 0.1, 1e-3)


def test_pde_large_step_stays_bounded():
    nodes = grid_nodes(201)
    vals = np.where(np.arange(201) % 2, 1e-3, -1e-3)
    vals[0] = vals[-1] = 0.0
    out = pde_solve_annihilation(GFGrid(nodes, vals), 1.0, 100.0, 50.0)
    # stiff modes are damped toward -1 amplification, not amplified
    assert np.max(np.abs(out.values)) <= 1.01e-3


def test_residual_examples():
    assert general_rhs_residual(ReactionChannel(1, 0, 1.3), point_mass(1)) == 0.0
    assert general_rhs_residual(ReactionChannel(3, 1, 0.4), point_mass(4)) <= 1e-12


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10).filter(lambda v: sum(v) > 0))
def test_residual_annihilation_any_distribution(weights):
    p = np.array(weights) / np.sum(weights)
    assert general_rhs_residual(ReactionChannel(2, 0, 1.7), CountDistribution(p)) <= 1e-12


@given(st.integers(0, 4), st.integers(0, 5), st.integers(0, 12), st.floats(0.1, 3.0))
def test_residual_with_product_channels(j, l, n, rate):
    if j == l:
        return
    assert general_rhs_residual(ReactionChannel(j, l, rate), point_mass(n)) <= 1e-12


def test_grid_csv(tmp_path):
    g = GFGrid.from_function(X, n_nodes=5)
    g.write_csv(tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,G" and lines[1] == "-1.0,-1.0"
