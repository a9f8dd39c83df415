"""Relative energy between two solutions, its dissipation, the Gronwall factor,
and twin-run / perturbation-sweep experiments.

Naming: ``z = (phi, q, u, C)`` is the perturbed ("weak") member and
``zbar = (psi, Q, U, H)`` the smooth reference. ``pi`` is the reference
chemical potential, always recomputed from ``psi``.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .coeffs import PotentialSpec, compute_c4
from .dynamics import ModelParams, chemical_potential, cross_flux, symmetric_gradient
from .grid import Grid, trace
from .state import Perturbation, State, perturb
from .timestep import SchemeConfig, Stepper

log = logging.getLogger(__name__)

RELENERGY_COLUMNS = "t,e_mix_rel,e_bulk_rel,e_kin_rel,e_el_rel,e_rel_total,d_rel_total,g_raw,B".split(",")
SWEEP_COLUMNS = "eps,E0,Esup,ratio,chat,slope".split(",")


def _check_pair(z: State, zbar: State) -> Grid:
    if z.grid != zbar.grid:
        raise ValueError(f"grid mismatch: {z.grid} vs {zbar.grid}")
    return z.grid


@dataclass
class RelEnergyReport:
    time: float
    e_mix_rel: float
    e_bulk_rel: float
    e_kin_rel: float
    e_el_rel: float
    a: float

    @property
    def total(self) -> float:
        return self.e_mix_rel + self.e_bulk_rel + self.e_kin_rel + self.e_el_rel


@dataclass
class RelDissipationReport:
    time: float
    d_cross_rel: float
    d_relax_rel: float
    d_qdiff_rel: float
    d_visc_rel: float
    d_peterlin_rel: float = 0.0
    d_cdiff_rel: float = 0.0

    @property
    def total(self) -> float:
        return (self.d_cross_rel + self.d_relax_rel + self.d_qdiff_rel + self.d_visc_rel
                + self.d_peterlin_rel + self.d_cdiff_rel)


@dataclass
class GronwallReport:
    """Norm products of the Gronwall factor; ``g_raw`` sums them with unit constant."""

    one: float = 1.0
    du3_sq: float = 0.0
    u6_4: float = 0.0
    hinf_trc4: float = 0.0
    h4_4: float = 0.0
    trh4_sq: float = 0.0
    trsum_h4: float = 0.0
    grad_psi3_sq: float = 0.0
    uinf_sq: float = 0.0
    grad_pi3_sq: float = 0.0
    gradphi3_qinf: float = 0.0
    grad_q6_4: float = 0.0
    qinf_sq: float = 0.0
    qinf_gradpsi3: float = 0.0
    gradphi3_uinf: float = 0.0
    crossflux4: float = 0.0
    divcross_sq: float = 0.0
    divtransport_h3: float = 0.0

    def components(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def g_raw(self) -> float:
        return float(sum(self.components().values()))


# -- functionals -------------------------------------------------------------------

def relative_energy(z: State, zbar: State, a: float, c0: float,
                    potential: PotentialSpec) -> RelEnergyReport:
    if a < 0:
        raise ValueError("penalty a must be non-negative")
    grid = _check_pair(z, zbar)
    d = z.phi - zbar.phi
    gd = grid.gradient(d)
    e_mix = grid.integrate(0.5 * c0 * (gd[0] ** 2 + gd[1] ** 2)
                           + potential.bregman(z.phi, zbar.phi) + a * d * d)
    e_bulk = grid.integrate(0.5 * (z.q - zbar.q) ** 2)
    du = z.u - zbar.u
    e_kin = grid.integrate(0.5 * (du[0] ** 2 + du[1] ** 2))
    e_el = 0.0
    if z.c is not None and zbar.c is not None:
        e_el = grid.integrate(0.25 * grid.magnitude(z.c - zbar.c) ** 2)
    return RelEnergyReport(z.time, e_mix, e_bulk, e_kin, e_el, a)


def mix_lower_bound(z: State, zbar: State, a: float, c0: float, c4: float) -> float:
    """``int c0/2 |grad(phi - psi)|^2 + (a - c4/2)(phi - psi)^2``; bounds ``e_mix_rel`` from below."""
    grid = _check_pair(z, zbar)
    d = z.phi - zbar.phi
    gd = grid.gradient(d)
    return grid.integrate(0.5 * c0 * (gd[0] ** 2 + gd[1] ** 2) + (a - 0.5 * c4) * d * d)


def relative_dissipation(z: State, zbar: State, model: ModelParams,
                         reduced: bool = False) -> RelDissipationReport:
    grid = _check_pair(z, zbar)
    co = model.coeffs
    phi = z.phi
    mu = chemical_potential(grid, phi, model.c0, model.potential)
    pi = chemical_potential(grid, zbar.phi, model.c0, model.potential)
    dq = z.q - zbar.q
    flux = co.n(phi) * grid.gradient(mu - pi) - grid.gradient(co.A(phi) * dq)
    d_cross = grid.lp_norm(flux, 2) ** 2
    d_relax = grid.integrate(dq * dq / co.tau_b(phi))
    gdq = grid.gradient(dq)
    d_qdiff = model.eps1 * grid.integrate(gdq[0] ** 2 + gdq[1] ** 2)
    ddu = symmetric_gradient(grid, z.u - zbar.u)
    d_visc = grid.integrate(co.eta(phi) * np.sum(ddu ** 2, axis=(0, 1)))
    rep = RelDissipationReport(z.time, d_cross, d_relax, d_qdiff, d_visc)
    if not reduced and z.c is not None and zbar.c is not None:
        tr = trace(z.c)
        dc = z.c - zbar.c
        rep.d_peterlin_rel = 0.5 * grid.integrate(co.h(phi) * tr * tr * grid.magnitude(dc) ** 2)
        gdc = grid.gradient(dc)
        rep.d_cdiff_rel = 0.5 * model.eps2 * grid.integrate(
            np.sum(gdc[:, 0] ** 2 + 2 * gdc[:, 1] ** 2 + gdc[:, 2] ** 2, axis=0))
    return rep


def gronwall_components(z: State, zbar: State, model: ModelParams) -> GronwallReport:
    grid = _check_pair(z, zbar)
    co = model.coeffs
    nrm = grid.lp_norm
    psi, Q, U = zbar.phi, zbar.q, zbar.u
    pi = chemical_potential(grid, psi, model.c0, model.potential)

    grad_phi = grid.gradient(z.phi)
    grad_psi = grid.gradient(psi)
    q_inf2 = nrm(Q, np.inf) ** 2
    u_inf2 = nrm(U, np.inf) ** 2
    gphi3 = nrm(grad_phi, 3) ** 2
    gpsi3 = nrm(grad_psi, 3) ** 2
    flux = cross_flux(grid, psi, Q, pi, co)
    transport = U * psi - co.m(psi) * grid.gradient(pi) + co.n(psi) * grid.gradient(co.A(psi) * Q)

    rep = GronwallReport(
        du3_sq=nrm(symmetric_gradient(grid, U), 3) ** 2,
        u6_4=nrm(U, 6) ** 4,
        grad_psi3_sq=gpsi3,
        uinf_sq=u_inf2,
        grad_pi3_sq=nrm(grid.gradient(pi), 3) ** 2,
        gradphi3_qinf=gphi3 * q_inf2,
        grad_q6_4=nrm(grid.gradient(Q), 6) ** 4,
        qinf_sq=q_inf2,
        qinf_gradpsi3=q_inf2 * gpsi3,
        gradphi3_uinf=gphi3 * u_inf2,
        crossflux4=nrm(flux, 4) ** 2 * (1 + nrm(grad_phi, 4) ** 2),
        divcross_sq=nrm(grid.divergence(flux), 2) ** 2,
        divtransport_h3=nrm(grid.divergence(transport), 2) * (nrm(z.phi, 3) + nrm(psi, 3)),
    )
    if z.c is not None and zbar.c is not None:
        H = zbar.c
        tr_c, tr_h = trace(z.c), trace(H)
        h4 = nrm(H, 4)
        rep.hinf_trc4 = nrm(H, np.inf) ** 2 * nrm(tr_c, 4) ** 2
        rep.h4_4 = h4 ** 4
        rep.trh4_sq = nrm(tr_h, 4) ** 2
        rep.trsum_h4 = nrm(tr_c + tr_h, 4) ** 2 * h4 ** 2
    return rep


def coupling_bound(z: State, zbar: State, model: ModelParams) -> tuple[float, float]:
    """Both sides of the control of ``||grad((A(phi) - A(psi)) Q)||_2^2`` (unit constant).

    Returns ``(lhs, rhs)`` with
    ``rhs = ||phi-psi||_6^2 ||grad Q||_3^2 + ||grad(phi-psi)||_2^2 ||Q||_inf^2
    + (||grad phi||_3^2 + ||grad psi||_3^2) ||phi-psi||_6^2 ||Q||_inf^2``.
    """
    grid = _check_pair(z, zbar)
    nrm = grid.lp_norm
    A = model.coeffs.A
    Q = zbar.q
    lhs = nrm(grid.gradient((A(z.phi) - A(zbar.phi)) * Q), 2) ** 2
    d = z.phi - zbar.phi
    d6 = nrm(d, 6) ** 2
    qinf = nrm(Q, np.inf) ** 2
    rhs = (d6 * nrm(grid.gradient(Q), 3) ** 2 + nrm(grid.gradient(d), 2) ** 2 * qinf
           + (nrm(grid.gradient(z.phi), 3) ** 2 + nrm(grid.gradient(zbar.phi), 3) ** 2) * d6 * qinf)
    return lhs, rhs


# -- twin runs -----------------------------------------------------------------------

@dataclass
class TwinTrajectory:
    times: list[float] = field(default_factory=list)
    energy: list[RelEnergyReport] = field(default_factory=list)
    dissipation: list[RelDissipationReport] = field(default_factory=list)
    gronwall: list[GronwallReport] = field(default_factory=list)
    coupling: list[tuple[float, float]] = field(default_factory=list)
    final: tuple[State, State] | None = None

    @property
    def e_rel(self) -> np.ndarray:
        return np.array([r.total for r in self.energy])

    @property
    def g_raw(self) -> np.ndarray:
        return np.array([g.g_raw for g in self.gronwall])

    def g_integral(self) -> np.ndarray:
        t = np.asarray(self.times)
        g = self.g_raw
        return np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (g[1:] + g[:-1]))])

    def gronwall_check(self) -> np.ndarray:
        """``B(t) = log E(t) - log E(0) - int_0^t g_raw``; NaN where E vanishes."""
        e = self.e_rel
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.where(e > 0, np.log(np.where(e > 0, e, 1.0)), np.nan)
        return logs - logs[0] - self.g_integral()

    def fitted_constant(self) -> float:
        """Smallest ``c >= 0`` with ``E(t) <= E(0) exp(c int_0^t g_raw)`` on the samples."""
        e = self.e_rel
        G = self.g_integral()
        if e[0] <= 0:
            return math.nan
        ratios = [math.log(ei / e[0]) / Gi for ei, Gi in zip(e[1:], G[1:]) if ei > 0 and Gi > 0]
        return max([0.0] + ratios)


def twin_run(reference: State, perturbation: Perturbation, model: ModelParams,
             scheme: SchemeConfig, t_end: float, penalty: float | None = None,
             reduced: bool = False, monitor_coupling: bool = False) -> TwinTrajectory:
    """Advance reference and perturbed copies in lockstep and record diagnostics.

    Both members use the same step sizes; a blow-up in either aborts the pair.
    """
    return multi_twin_run(reference, [perturbation], model, scheme, t_end, penalty,
                          reduced, monitor_coupling)[0]


def multi_twin_run(reference: State, perturbations: Sequence[Perturbation], model: ModelParams,
                   scheme: SchemeConfig, t_end: float, penalty: float | None = None,
                   reduced: bool = False, monitor_coupling: bool = False) -> list[TwinTrajectory]:
    """Several perturbed copies sharing one reference trajectory and one step sequence."""
    if reduced:
        reference = reference.without_tensor()
    a = penalty if penalty is not None else 0.5 * compute_c4(model.potential) + 0.5
    zbar = reference
    members = [perturb(reference, p) for p in perturbations]
    outs = [TwinTrajectory() for _ in members]
    stepper = Stepper(scheme, model)
    grid = reference.grid

    def record():
        for z, out in zip(members, outs):
            out.times.append(zbar.time)
            out.energy.append(relative_energy(z, zbar, a, model.c0, model.potential))
            out.dissipation.append(relative_dissipation(z, zbar, model, reduced))
            out.gronwall.append(gronwall_components(z, zbar, model))
            if monitor_coupling:
                out.coupling.append(coupling_bound(z, zbar, model))

    record()
    n = 0
    tol = 1e-12 * max(t_end, 1.0)
    while zbar.time < t_end - tol:
        umax = max(float(np.max(grid.magnitude(s.u))) for s in [zbar] + members)
        dt = min(scheme.dt, t_end - zbar.time,
                 scheme.cfl * min(grid.hx, grid.hy) / max(umax, 1e-12))
        zbar, _ = stepper(zbar, dt)
        members = [stepper(z, dt)[0] for z in members]
        n += 1
        if n % scheme.cadence == 0 or zbar.time >= t_end - tol:
            record()
    for z, out in zip(members, outs):
        out.final = (z, zbar)
    return outs


def write_relenergy_csv(path: str | Path, twin: TwinTrajectory) -> None:
    B = twin.gronwall_check()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RELENERGY_COLUMNS)
        for e, d, g, b in zip(twin.energy, twin.dissipation, twin.gronwall, B):
            w.writerow([_fmt(v) for v in (e.time, e.e_mix_rel, e.e_bulk_rel, e.e_kin_rel,
                                          e.e_el_rel, e.total, d.total, g.g_raw, b)])


def _fmt(x) -> str:
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


# -- perturbation sweeps --------------------------------------------------------------

@dataclass
class SweepRow:
    eps: float
    E0: float
    Esup: float
    ratio: float
    chat: float
    e_rel: np.ndarray
    g_integral: np.ndarray


@dataclass
class ScalingReport:
    rows: list[SweepRow]
    slope: float
    quadratic: bool
    ratio_spread: float
    ratio_uniform: bool
    chat: float
    gronwall_holds: bool

    @property
    def passed(self) -> bool:
        return self.quadratic and self.ratio_uniform and self.gronwall_holds


def _sweep_row(eps: float, twin: TwinTrajectory) -> SweepRow:
    e = twin.e_rel
    return SweepRow(eps, float(e[0]), float(e.max()), float(e.max() / e[0]),
                    twin.fitted_constant(), e, twin.g_integral())


def _sweep_member(args):
    reference, eps, seed, fields_, model, scheme, t_end, reduced, penalty = args
    twin = twin_run(reference, Perturbation(eps, seed, fields_), model, scheme, t_end,
                    penalty=penalty, reduced=reduced)
    return _sweep_row(eps, twin)


def perturbation_sweep(reference: State, amplitudes: Sequence[float], model: ModelParams,
                       scheme: SchemeConfig, t_end: float, *, seed: int = 1,
                       fields_: tuple[str, ...] = ("phi", "q", "u", "c"), reduced: bool = False,
                       ratio_factor: float = 2.0, slope_range: tuple[float, float] = (1.9, 2.1),
                       penalty: float | None = None, jobs: int = 1) -> ScalingReport:
    """Twin runs over descending amplitudes and the scaling checks on their relative energy.

    ``chat`` is fitted once on the smallest amplitude, where the quadratic
    regime is cleanest, and then required to bound every member:
    ``E(t) <= E(0) exp(chat int_0^t g_raw)``. With ``jobs == 1`` all members
    share one reference trajectory; otherwise each member runs its own twin
    in a worker process.
    """
    amplitudes = [float(a) for a in amplitudes]
    if not amplitudes:
        raise ValueError("empty amplitude list")
    if any(a <= 0 for a in amplitudes):
        raise ValueError("amplitudes must be positive")
    if any(b >= a for a, b in zip(amplitudes, amplitudes[1:])):
        raise ValueError("amplitudes must be strictly descending")

    tasks = [(reference, eps, seed, tuple(fields_), model, scheme, t_end, reduced, penalty)
             for eps in amplitudes]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_member, tasks))
    else:
        perts = [Perturbation(eps, seed, tuple(fields_)) for eps in amplitudes]
        twins = multi_twin_run(reference, perts, model, scheme, t_end, penalty, reduced)
        rows = [_sweep_row(eps, tw) for eps, tw in zip(amplitudes, twins)]

    if len(rows) > 1:
        slope = float(np.polyfit(np.log([r.eps for r in rows]), np.log([r.E0 for r in rows]), 1)[0])
        quadratic = slope_range[0] <= slope <= slope_range[1]
    else:
        slope, quadratic = math.nan, True
    ratios = [r.ratio for r in rows]
    spread = max(ratios) / min(ratios)
    chat = rows[-1].chat
    holds = all(np.all(r.e_rel <= r.E0 * np.exp(chat * r.g_integral) * (1 + 1e-12)) for r in rows)
    return ScalingReport(rows, slope, quadratic, spread, spread < ratio_factor, chat, holds)


def write_sweep_csv(path: str | Path, report: ScalingReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(v) for v in (r.eps, r.E0, r.Esup, r.ratio, r.chat, report.slope)])
