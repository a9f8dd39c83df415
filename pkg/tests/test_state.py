import numpy as np
import pytest

from viscophase.grid import Grid
from viscophase.state import (INITIAL_KINDS, Perturbation, State, load_state, make_initial,
                              perturb, perturbation_fields, save_state, taylor_green)


@pytest.mark.parametrize("kind", INITIAL_KINDS)
def test_initial_kinds(grid, kind):
    s = make_initial(grid, kind, seed=3)
    assert s.time == 0.0 and s.c is not None and s.is_finite()
    assert s.max_divergence() < 1e-12
    assert s.phi.mean() == pytest.approx(0.5, abs=1e-12)
    r = make_initial(grid, kind, seed=3, reduced=True)
    assert r.reduced and r.c is None


def test_spinodal_noise_and_seed(grid):
    a = make_initial(grid, "spinodal", seed=1, noise=0.05)
    b = make_initial(grid, "spinodal", seed=1, noise=0.05)
    c = make_initial(grid, "spinodal", seed=2, noise=0.05)
    np.testing.assert_array_equal(a.phi, b.phi)
    assert not np.array_equal(a.phi, c.phi)
    assert np.max(np.abs(a.phi - 0.5)) == pytest.approx(0.05)
    np.testing.assert_array_equal(a.c[1], 0.0)
    np.testing.assert_array_equal(a.c[0], 1.0)


def test_unknown_kind(grid):
    with pytest.raises(ValueError):
        make_initial(grid, "vortex")


def test_taylor_green_is_solenoidal():
    g = Grid(32, 16, 1.0, 2.0)
    u = taylor_green(g, 0.3)
    assert np.max(np.abs(g.divergence(u))) < 1e-13
    assert np.max(np.abs(u[0])) == pytest.approx(0.3, rel=1e-3)


def test_shape_checks(grid):
    with pytest.raises(ValueError):
        State(grid, np.zeros(grid.shape), np.zeros(grid.shape), np.zeros(grid.shape))
    with pytest.raises(ValueError):
        State(grid, np.zeros(grid.shape), np.zeros(grid.shape), np.zeros((2,) + grid.shape),
              np.zeros((2,) + grid.shape))


def test_perturbation_is_mean_free_and_linear(grid):
    base = make_initial(grid, "taylor_green_mix", seed=0)
    noise = perturbation_fields(grid, 5)
    for f in noise.values():
        np.testing.assert_allclose(f.mean(axis=(-2, -1)), 0.0, atol=1e-15)
    assert np.max(np.abs(grid.divergence(noise["u"]))) < 1e-12
    z1 = perturb(base, Perturbation(1e-3, 5))
    z2 = perturb(base, Perturbation(2e-3, 5))
    np.testing.assert_allclose(z2.phi - base.phi, 2 * (z1.phi - base.phi), atol=1e-15)
    assert grid.integrate(z1.phi) == pytest.approx(grid.integrate(base.phi), abs=1e-14)
    assert z1.max_divergence() < 1e-12


def test_zero_perturbation_is_an_exact_copy(grid):
    base = make_initial(grid, "spinodal", seed=0)
    z = perturb(base, Perturbation(0.0))
    for name, f in base.fields().items():
        np.testing.assert_array_equal(z.fields()[name], f)
        assert z.fields()[name] is not f


def test_perturbation_fields_selection(grid):
    base = make_initial(grid, "spinodal", seed=0)
    z = perturb(base, Perturbation(1e-2, 1, ("q",)))
    np.testing.assert_array_equal(z.phi, base.phi)
    assert not np.array_equal(z.q, base.q)
    with pytest.raises(ValueError):
        Perturbation(-1.0)
    with pytest.raises(ValueError):
        Perturbation(1.0, fields=("p",))


@pytest.mark.parametrize("reduced", [False, True])
def test_save_load_round_trip(tmp_path, reduced):
    g = Grid(16, 8, 1.0, 0.5)
    s = make_initial(g, "manufactured", reduced=reduced).with_fields(time=0.25)
    save_state(s, tmp_path / "snap")
    t = load_state(tmp_path / "snap")
    assert t.grid == g and t.time == 0.25 and t.reduced == reduced
    for name, f in s.fields().items():
        np.testing.assert_array_equal(t.fields()[name], f)
