"""Self-contained oracle suite run by ``viscophase check``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientSet, ScalarFunction
from .dynamics import ModelParams, hana_identity_residual
from .grid import Grid, identity_tensor
from .state import State
from .timestep import SchemeConfig, run


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "value": self.value,
                "tolerance": self.tolerance}


def _result(name: str, value: float, tol: float) -> CheckResult:
    return CheckResult(name, bool(value <= tol), float(value), tol)


def random_solenoidal(grid: Grid, rng: np.random.Generator, fraction: float = 0.25) -> np.ndarray:
    """Band-limited divergence-free velocity with unit sup-norm magnitude."""
    u = grid.curl_field(grid.random_field(rng, fraction))
    return u / np.max(grid.magnitude(u))


def random_symmetric(grid: Grid, rng: np.random.Generator, fraction: float = 0.25) -> np.ndarray:
    return grid.random_field(rng, fraction, leading=(3,))


def check_hana_identity(cases: int = 20, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    grid = Grid(64, 64)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        u = random_solenoidal(grid, rng)
        c = random_symmetric(grid, rng)
        worst = max(worst, hana_identity_residual(grid, c, u))
    return _result("stress power identity", worst, tol)


def check_spectral_modes(tol: float = 1e-12) -> list[CheckResult]:
    """Single Fourier modes against their exact derivatives."""
    grid = Grid(32, 48, 1.0, 2.0)
    worst_lap = worst_grad = worst_div = 0.0
    for mx, my in [(1, 0), (0, 1), (3, 2), (5, -7), (10, 15)]:
        kx, ky = 2 * np.pi * mx / grid.lx, 2 * np.pi * my / grid.ly
        arg = kx * grid.x + ky * grid.y
        f = np.sin(arg)
        k2 = kx * kx + ky * ky
        scale = max(k2, 1.0)
        worst_lap = max(worst_lap, np.max(np.abs(grid.laplacian(f) + k2 * f)) / scale)
        g = grid.gradient(f)
        exact = np.stack([kx * np.cos(arg), ky * np.cos(arg)])
        worst_grad = max(worst_grad, np.max(np.abs(g - exact)) / max(math.sqrt(k2), 1.0))
        v = np.stack([np.cos(arg), 2 * np.sin(arg)])
        exact_div = -kx * np.sin(arg) + 2 * ky * np.cos(arg)
        worst_div = max(worst_div, np.max(np.abs(grid.divergence(v) - exact_div)) / max(math.sqrt(k2), 1.0))
    rng = np.random.default_rng(3)
    v = grid.random_field(rng, 0.9, leading=(2,))
    p1 = grid.leray_project(v)
    p2 = grid.leray_project(p1)
    return [_result("laplacian of modes", worst_lap, tol),
            _result("gradient of modes", worst_grad, tol),
            _result("divergence of modes", worst_div, tol),
            _result("projection idempotent", float(np.max(np.abs(p2 - p1))), 1e-13),
            _result("projection solenoidal", float(np.max(np.abs(grid.divergence(p1)))), tol)]


def uniform_state(grid: Grid, phi: float, q: float, c: float | None) -> State:
    shape = grid.shape
    cc = None if c is None else identity_tensor(grid, c)
    return State(grid, np.full(shape, phi), np.full(shape, q), np.zeros((2,) + shape), cc)


def relaxation_model(tau_b: float = 1.0, h: float = 1.0) -> ModelParams:
    """``n = 0`` with ``m = 1``: the test-mode model that decouples q from phi."""
    co = CoefficientSet(n=ScalarFunction.constant(0.0), m_explicit=ScalarFunction.constant(1.0),
                        tau_b=ScalarFunction.constant(tau_b), h=ScalarFunction.constant(h),
                        test_mode=True)
    return ModelParams(coeffs=co)


def check_q_relaxation(dt: float = 1e-3, t_end: float = 1.0, tol: float = 1e-6) -> CheckResult:
    grid = Grid(16, 16)
    q0 = 0.7
    traj = run(uniform_state(grid, 0.5, q0, 1.0), SchemeConfig(dt=dt, cadence=10**9),
               relaxation_model(tau_b=0.5), t_end, keep_states=False)
    exact = q0 * math.exp(-t_end / 0.5)
    err = float(np.max(np.abs(traj.final.q - exact))) / exact
    return _result("q relaxation vs exp(-t/tau_b)", err, tol)


def peterlin_rk4(c0: float, h: float, t_end: float, steps: int) -> float:
    """Classical RK4 for the isotropic Peterlin relaxation ``c' = -2 h c (2 c^2 - 1)``."""
    f = lambda c: -2.0 * h * c * (2.0 * c * c - 1.0)
    dt = t_end / steps
    c = c0
    for _ in range(steps):
        k1 = f(c)
        k2 = f(c + 0.5 * dt * k1)
        k3 = f(c + 0.5 * dt * k2)
        k4 = f(c + dt * k3)
        c += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return c


def check_peterlin_relaxation(dt: float = 1e-3, tol: float = 1e-6) -> list[CheckResult]:
    grid = Grid(16, 16)
    model = relaxation_model(h=1.0)
    c0 = 2.0
    t_mid = 0.5
    traj = run(uniform_state(grid, 0.5, 0.0, c0), SchemeConfig(dt=dt, cadence=10**9),
               model, t_mid, keep_states=False)
    ref = peterlin_rk4(c0, 1.0, t_mid, 20000)
    err = float(np.max(np.abs(traj.final.c[0] - ref)))
    long = run(traj.final, SchemeConfig(dt=1e-2, cadence=10**9), model, 10.0, keep_states=False)
    cf = long.final.c
    target = 1.0 / math.sqrt(2.0)
    gap = float(max(np.max(np.abs(cf[0] - target)), np.max(np.abs(cf[2] - target)),
                    np.max(np.abs(cf[1]))))
    return [_result("Peterlin relaxation vs RK4", err, tol),
            _result("Peterlin equilibrium 1/sqrt(2)", gap, tol)]


def run_checks() -> list[CheckResult]:
    out = [check_hana_identity()]
    out += check_spectral_modes()
    out.append(check_q_relaxation())
    out += check_peterlin_relaxation()
    return out
