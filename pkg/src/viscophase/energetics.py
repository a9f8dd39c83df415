"""Energy functionals, dissipation rates and the energy-inequality residual."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .coeffs import PotentialSpec
from .dynamics import ModelParams, chemical_potential, cross_flux, symmetric_gradient
from .grid import trace
from .state import State

SPD_THRESHOLD = 1e-12

ENERGY_COLUMNS = ("t,e_mix,e_bulk,e_kin,e_el,e_lyap,e_tot,d_cross,d_relax,d_qdiff,"
                  "d_visc,d_cdiff,d_peterlin,r_remainder,residual").split(",")


@dataclass
class EnergyReport:
    time: float
    e_mix: float
    e_bulk: float
    e_kin: float
    e_el: float
    e_total: float | None = None

    @property
    def e_total_lyapunov(self) -> float:
        return self.e_mix + self.e_bulk + self.e_kin + self.e_el


@dataclass
class DissipationReport:
    time: float
    d_cross: float
    d_relax: float
    d_q_diff: float
    d_visc: float
    d_c_diff: float
    d_peterlin: float
    r_remainder: float

    @property
    def total(self) -> float:
        return (self.d_cross + self.d_relax + self.d_q_diff + self.d_visc
                + self.d_c_diff + self.d_peterlin)


def sym_eigenvalues(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise eigenvalues (low, high) of a 2x2 symmetric tensor field."""
    mean = 0.5 * (c[0] + c[2])
    rad = np.hypot(0.5 * (c[0] - c[2]), c[1])
    return mean - rad, mean + rad


def log_energy_density(c: np.ndarray) -> np.ndarray | None:
    """``1/4 tr(tr(C) C - 2 ln C - I)``, or None if C is not SPD everywhere."""
    lo, hi = sym_eigenvalues(c)
    if np.min(lo) <= SPD_THRESHOLD:
        return None
    tr = trace(c)
    return 0.25 * (tr * tr - 2.0 * (np.log(lo) + np.log(hi)) - 2.0)


def lyapunov_energy(state: State, c0: float, potential: PotentialSpec) -> EnergyReport:
    grid = state.grid
    gp = grid.gradient(state.phi)
    e_mix = grid.integrate(0.5 * c0 * (gp[0] ** 2 + gp[1] ** 2) + potential(state.phi))
    e_bulk = grid.integrate(0.5 * state.q ** 2)
    e_kin = grid.integrate(0.5 * (state.u[0] ** 2 + state.u[1] ** 2))
    e_el = 0.0
    e_total = None
    if state.c is not None:
        e_el = grid.integrate(0.25 * grid.magnitude(state.c) ** 2)
        dens = log_energy_density(state.c)
        if dens is not None:
            e_total = e_mix + e_bulk + e_kin + grid.integrate(dens)
    else:
        e_total = e_mix + e_bulk + e_kin
    return EnergyReport(state.time, e_mix, e_bulk, e_kin, e_el, e_total)


def dissipation(state: State, model: ModelParams) -> DissipationReport:
    """Instantaneous dissipation rates and the non-dissipative remainder rate."""
    grid = state.grid
    co = model.coeffs
    phi = state.phi
    mu = chemical_potential(grid, phi, model.c0, model.potential)
    d_cross = grid.lp_norm(cross_flux(grid, phi, state.q, mu, co), 2) ** 2
    d_relax = grid.integrate(state.q ** 2 / co.tau_b(phi))
    gq = grid.gradient(state.q)
    d_q_diff = model.eps1 * grid.integrate(gq[0] ** 2 + gq[1] ** 2)
    du = symmetric_gradient(grid, state.u)
    d_visc = grid.integrate(co.eta(phi) * np.sum(du ** 2, axis=(0, 1)))
    d_c_diff = d_peterlin = r_rem = 0.0
    if state.c is not None:
        c = state.c
        gc = grid.gradient(c)
        d_c_diff = 0.5 * model.eps2 * grid.integrate(
            np.sum(gc[:, 0] ** 2 + 2 * gc[:, 1] ** 2 + gc[:, 2] ** 2, axis=0))
        tr = trace(c)
        h = co.h(phi)
        d_peterlin = 0.5 * grid.integrate(h * (tr * grid.magnitude(c)) ** 2)
        r_rem = 0.5 * grid.integrate(h * tr * tr)
    return DissipationReport(state.time, d_cross, d_relax, d_q_diff, d_visc,
                             d_c_diff, d_peterlin, r_rem)


def energy_residual(energies: Sequence[EnergyReport],
                    dissipations: Sequence[DissipationReport]) -> np.ndarray:
    """``Lyap(t) + int_0^t D - int_0^t R - Lyap(0)`` at every sample (trapezoidal in time).

    Exact solutions keep this at or below zero.
    """
    if len(energies) < 2 or len(energies) != len(dissipations):
        raise ValueError("need at least two matching energy/dissipation samples")
    t = np.array([e.time for e in energies])
    lyap = np.array([e.e_total_lyapunov for e in energies])
    net = np.array([d.total - d.r_remainder for d in dissipations])
    acc = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (net[1:] + net[:-1]))])
    return lyap + acc - lyap[0]


class EnergyMonitor:
    """Monitor callable for :func:`viscophase.timestep.run`."""

    def __init__(self, model: ModelParams):
        self.model = model

    def __call__(self, state: State) -> tuple[EnergyReport, DissipationReport]:
        return (lyapunov_energy(state, self.model.c0, self.model.potential),
                dissipation(state, self.model))


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def write_energy_csv(path: str | Path, energies: Sequence[EnergyReport],
                     dissipations: Sequence[DissipationReport]) -> np.ndarray:
    res = energy_residual(energies, dissipations) if len(energies) > 1 else np.zeros(len(energies))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENERGY_COLUMNS)
        for e, d, r in zip(energies, dissipations, res):
            w.writerow([_fmt(v) for v in (
                e.time, e.e_mix, e.e_bulk, e.e_kin, e.e_el, e.e_total_lyapunov, e.e_total,
                d.d_cross, d.d_relax, d.d_q_diff, d.d_visc, d.d_c_diff, d.d_peterlin,
                d.r_remainder, r)])
    return res
