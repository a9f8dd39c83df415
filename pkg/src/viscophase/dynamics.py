"""Right-hand sides of the full and reduced viscoelastic phase separation models."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coeffs import CoefficientSet, PotentialSpec
from .grid import Grid, sym_to_full, trace
from .state import State


@dataclass(frozen=True)
class ModelParams:
    coeffs: CoefficientSet = field(default_factory=CoefficientSet)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    c0: float = 1e-3
    eps1: float = 1e-3
    eps2: float = 1e-3

    def __post_init__(self):
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("eps1 and eps2 must be non-negative")


@dataclass(frozen=True, eq=False)
class Tendency:
    d_phi: np.ndarray
    d_q: np.ndarray
    d_u: np.ndarray
    d_c: np.ndarray | None = None


def chemical_potential(grid: Grid, phi: np.ndarray, c0: float, potential: PotentialSpec) -> np.ndarray:
    return grid.dealias(-c0 * grid.laplacian(phi) + potential(phi, 1))


def peterlin_stress(c: np.ndarray) -> np.ndarray:
    return trace(c) * c


def velocity_gradient(grid: Grid, u: np.ndarray) -> np.ndarray:
    """``G[i, j] = d u_i / d x_j``."""
    return np.swapaxes(grid.gradient(u), 0, 1)


def symmetric_gradient(grid: Grid, u: np.ndarray) -> np.ndarray:
    g = velocity_gradient(grid, u)
    return 0.5 * (g + np.swapaxes(g, 0, 1))


def upper_convected_terms(g: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``G C + C G^T`` as symmetric components."""
    cf = sym_to_full(c)
    m = np.einsum("ij...,jk...->ik...", g, cf)
    return np.stack([2 * m[0, 0], m[0, 1] + m[1, 0], 2 * m[1, 1]])


def double_dot_sym(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``A : B`` for two symmetric tensors in component form."""
    return a[0] * b[0] + 2 * a[1] * b[1] + a[2] * b[2]


def cross_flux(grid: Grid, phi, q, mu, coeffs: CoefficientSet) -> np.ndarray:
    """``n(phi) grad mu - grad(A(phi) q)``."""
    return coeffs.n(phi) * grid.gradient(mu) - grid.gradient(coeffs.A(phi) * q)


def relaxation_terms(state: State, model: ModelParams):
    """Local relaxation sources of the q and C equations."""
    coeffs = model.coeffs
    rq = -state.q / coeffs.tau_b(state.phi)
    rc = None
    if state.c is not None:
        tr = trace(state.c)
        rc = -coeffs.h(state.phi) * tr * (tr * state.c - np.stack([np.ones_like(tr), 0 * tr, np.ones_like(tr)]))
    return rq, rc


@dataclass(frozen=True, eq=False)
class SpectralTendency:
    """Fourier coefficients of a tendency plus those of the state it was taken at."""

    d_phi: np.ndarray
    d_q: np.ndarray
    d_u: np.ndarray
    d_c: np.ndarray | None
    state_hats: dict


def _sym_div_hat(grid: Grid, sh: np.ndarray) -> np.ndarray:
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    return np.stack([ikx * sh[0] + iky * sh[1], ikx * sh[1] + iky * sh[2]])


def tendency_hat(state: State, model: ModelParams, include_relaxation: bool = True,
                 hats: dict | None = None) -> SpectralTendency:
    """Spectral form of :func:`rhs`; every nonlinear product is formed on the grid
    and the 2/3 filter is applied to each tendency.

    ``hats`` may carry precomputed transforms of the state fields.
    """
    grid = state.grid
    co = model.coeffs
    fft, ifft = grid.fft, grid.ifft
    ikx, iky = 1j * grid.kx, 1j * grid.ky
    mask = grid.dealias_mask if grid.dealias_enabled else 1.0
    phi, q, u, c = state.phi, state.q, state.u, state.c
    hats = dict(hats or {})
    ph = hats.setdefault("phi", fft(phi))
    qh = hats.setdefault("q", fft(q))
    uh = hats.setdefault("u", fft(u))

    def grad(fh):
        return ifft(np.stack([ikx * fh, iky * fh]))

    def div_hat(vh):
        return ikx * vh[0] + iky * vh[1]

    grad_phi = grad(ph)
    mu_h = mask * (model.c0 * grid.k2 * ph + fft(model.potential(phi, 1)))
    mu = ifft(mu_h)
    grad_mu = grad(mu_h)
    a, n = co.A(phi), co.n(phi)
    grad_aq = grad(fft(a * q))

    # phi: conservative transport (u is solenoidal) plus both diffusive fluxes
    d_phi = mask * div_hat(fft(co.m(phi) * grad_mu - n * grad_aq - u * phi))

    # q: A Lap(A q) - A div(n grad mu) = -A div(n grad mu - grad(A q))
    grad_q = grad(qh)
    div_cross = ifft(div_hat(fft(n * grad_mu - grad_aq)))
    q_point = -(u[0] * grad_q[0] + u[1] * grad_q[1]) - a * div_cross

    g = np.swapaxes(grad(uh), 0, 1)
    eta = co.eta(phi)
    stress = eta * np.stack([g[0, 0], 0.5 * (g[0, 1] + g[1, 0]), g[1, 1]])
    u_point = -np.einsum("ij...,j...->i...", g, u) + mu * grad_phi

    d_c = None
    rq, rc = relaxation_terms(state, model) if include_relaxation else (None, None)
    if c is not None:
        ch = hats.setdefault("c", fft(c))
        stress = stress + peterlin_stress(c)
        grad_c = grad(ch)
        c_point = -(u[0] * grad_c[0] + u[1] * grad_c[1]) + upper_convected_terms(g, c)
        if rc is not None:
            c_point = c_point + rc
        d_c = mask * (fft(c_point) - model.eps2 * grid.k2 * ch)
    if rq is not None:
        q_point = q_point + rq
    d_q = mask * (fft(q_point) - model.eps1 * grid.k2 * qh)

    force = mask * (fft(u_point) + _sym_div_hat(grid, fft(stress)))
    d_u = grid.project_hat(force)
    return SpectralTendency(d_phi, d_q, d_u, d_c, hats)


def rhs(state: State, model: ModelParams, include_relaxation: bool = True) -> Tendency:
    """Time derivatives of ``(phi, q, u, C)``; the reduced model when ``state.c is None``.

    Pressure never appears: the momentum tendency is Leray-projected.
    """
    th = tendency_hat(state, model, include_relaxation)
    ifft = state.grid.ifft
    return Tendency(ifft(th.d_phi), ifft(th.d_q), ifft(th.d_u),
                    None if th.d_c is None else ifft(th.d_c))


def rhs_full(state: State, model: ModelParams, include_relaxation: bool = True) -> Tendency:
    if state.c is None:
        raise ValueError("the full model needs a conformation tensor")
    return rhs(state, model, include_relaxation)


def rhs_reduced(state: State, model: ModelParams, include_relaxation: bool = True) -> Tendency:
    return rhs(state.without_tensor(), model, include_relaxation)


def hana_identity_residual(grid: Grid, c: np.ndarray, u: np.ndarray, div_tol: float = 1e-10) -> float:
    """Sup-norm of ``tr(C) C : grad u - 1/2 [(grad u) C + C (grad u)^T] : C``.

    The identity needs a solenoidal ``u``; other inputs are rejected.
    """
    g = velocity_gradient(grid, u)
    scale = 1.0 + float(np.max(np.abs(g)))
    div = np.max(np.abs(g[0, 0] + g[1, 1]))
    if div > div_tol * scale:
        raise ValueError(f"velocity is not solenoidal (max |div u| = {div:.3e})")
    gsym = np.stack([g[0, 0], 0.5 * (g[0, 1] + g[1, 0]), g[1, 1]])
    lhs = trace(c) * double_dot_sym(c, gsym)
    rhs_ = 0.5 * double_dot_sym(upper_convected_terms(g, c), c)
    return float(np.max(np.abs(lhs - rhs_)))
