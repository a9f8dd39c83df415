import numpy as np
import pytest
from hypothesis import given, strategies as st

from viscophase.coeffs import CoefficientSet, ScalarFunction
from viscophase.dynamics import (ModelParams, chemical_potential, hana_identity_residual, rhs,
                                 rhs_full, rhs_reduced, tendency_hat, upper_convected_terms,
                                 velocity_gradient)
from viscophase.energetics import dissipation, lyapunov_energy
from viscophase.grid import Grid, identity_tensor, sym_to_full
from viscophase.state import make_initial


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(c0=0.0)
    with pytest.raises(ValueError):
        ModelParams(eps1=-1.0)


def test_chemical_potential_of_a_mode(grid, model):
    phi = 0.5 + 0.1 * np.cos(2 * np.pi * grid.x)
    mu = chemical_potential(grid, phi, model.c0, model.potential)
    exact = model.c0 * (2 * np.pi) ** 2 * (phi - 0.5) + model.potential(phi, 1)
    np.testing.assert_allclose(mu, exact, atol=1e-12)


def test_upper_convected_matches_matrix_product(rng):
    g = Grid(8, 8)
    gr = rng.standard_normal((2, 2) + g.shape)
    c = rng.standard_normal((3,) + g.shape)
    cf = sym_to_full(c)
    i, j = 3, 5
    G, C = gr[:, :, i, j], cf[:, :, i, j]
    M = G @ C + C @ G.T
    out = upper_convected_terms(gr, c)[:, i, j]
    np.testing.assert_allclose(out, [M[0, 0], M[0, 1], M[1, 1]], atol=1e-14)


def test_velocity_gradient_layout():
    g = Grid(16, 16)
    u = np.stack([np.sin(2 * np.pi * g.y), np.zeros(g.shape)])
    G = velocity_gradient(g, u)
    np.testing.assert_allclose(G[0, 1], 2 * np.pi * np.cos(2 * np.pi * g.y), atol=1e-12)
    np.testing.assert_allclose(G[1, 0], 0.0, atol=1e-14)


def test_uniform_rest_state_only_relaxes(grid, model):
    s = make_initial(grid, "uniform_rest").with_fields(q=np.full(grid.shape, 0.4))
    s = s.with_fields(c=identity_tensor(grid, 2.0))
    r = rhs(s, model)
    np.testing.assert_allclose(r.d_phi, 0.0, atol=1e-13)
    np.testing.assert_allclose(r.d_u, 0.0, atol=1e-13)
    np.testing.assert_allclose(r.d_q, -0.4, atol=1e-13)
    # -h tr(C)(tr(C) C - I) at C = 2I: -4 (8 - 1) = -28 on the diagonal
    np.testing.assert_allclose(r.d_c[0], -28.0, atol=1e-12)
    np.testing.assert_allclose(r.d_c[1], 0.0, atol=1e-12)


def test_tendency_properties(grid, model):
    s = make_initial(grid, "manufactured")
    r = rhs_full(s, model)
    assert abs(grid.integrate(r.d_phi)) < 1e-13
    assert np.max(np.abs(grid.divergence(r.d_u))) < 1e-11
    th = tendency_hat(s, model)
    np.testing.assert_allclose(grid.ifft(th.d_phi), r.d_phi, atol=1e-13)
    for f in (r.d_phi, r.d_q, r.d_u, r.d_c):
        np.testing.assert_allclose(grid.dealias(f), f, atol=1e-10)
    with pytest.raises(ValueError):
        rhs_full(s.without_tensor(), model)


def test_relaxation_toggle(grid, model):
    s = make_initial(grid, "manufactured")
    with_r = rhs(s, model)
    without = rhs(s, model, include_relaxation=False)
    np.testing.assert_allclose(with_r.d_phi, without.d_phi)
    diff = grid.dealias(-s.q / model.coeffs.tau_b(s.phi))
    np.testing.assert_allclose(with_r.d_q - without.d_q, diff, atol=1e-12)


@pytest.mark.parametrize("kind", ["manufactured", "taylor_green_mix"])
def test_semidiscrete_energy_identity(kind):
    """dE/dt along the tendency equals -(D - R) up to the finite-difference error."""
    g = Grid(48, 48)
    n = ScalarFunction((1.0, 0.2))
    m = ModelParams(CoefficientSet(n=n, A=ScalarFunction((1.0, 0.3)),
                                   eta=ScalarFunction((1.2, -0.2))))
    s = make_initial(g, kind, seed=4)
    r = rhs(s, m)
    h = 1e-6

    def energy(eps):
        t = s.with_fields(phi=s.phi + eps * r.d_phi, q=s.q + eps * r.d_q,
                          u=s.u + eps * r.d_u, c=s.c + eps * r.d_c)
        return lyapunov_energy(t, m.c0, m.potential).e_total_lyapunov

    rate = (energy(h) - energy(-h)) / (2 * h)
    d = dissipation(s, m)
    assert rate == pytest.approx(-(d.total - d.r_remainder), rel=1e-7)


def test_reduced_rhs_drops_tensor(grid, model):
    s = make_initial(grid, "manufactured")
    r = rhs_reduced(s, model)
    assert r.d_c is None
    full_r = rhs(s.with_fields(c=np.zeros_like(s.c)), model)
    np.testing.assert_allclose(r.d_phi, full_r.d_phi, atol=1e-14)


@given(st.integers(0, 2**31))
def test_hana_identity_for_random_data(seed):
    g = Grid(32, 32)
    rng = np.random.default_rng(seed)
    u = g.curl_field(g.random_field(rng))
    u /= np.max(g.magnitude(u))
    c = g.random_field(rng, leading=(3,))
    assert hana_identity_residual(g, c, u) < 1e-12


def test_hana_rejects_compressible_velocity(grid):
    u = np.stack([np.sin(2 * np.pi * grid.x), np.zeros(grid.shape)])
    with pytest.raises(ValueError):
        hana_identity_residual(grid, identity_tensor(grid), u)
