"""First-order IMEX time stepping in Fourier space.

One step is a Lie splitting:

1. the local relaxation sources (``-q / tau_b`` and the Peterlin relaxation
   of ``C``) are integrated exactly at every grid point with the
   coefficients frozen at the old ``phi``;
2. everything else is advanced by a semi-implicit Euler step whose implicit
   part is the constant-coefficient diffusion (the biharmonic and the
   phi-q cross-diffusion block, ``eta0/2 Lap u``, ``eps2 Lap C``). The
   variable-coefficient remainder is explicit.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dynamics import ModelParams, tendency_hat
from .grid import Grid, trace
from .state import State

log = logging.getLogger(__name__)

PHI_LIMIT = 10.0


class BlowUpError(RuntimeError):
    """A step produced non-finite values or left the admissible range."""

    def __init__(self, message: str, report: dict):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class SchemeConfig:
    dt: float = 1e-4
    s_phi: float = 0.0
    s_q: float = 0.0
    m0: float | None = None
    A0: float | None = None
    eta0: float | None = None
    cadence: int = 10
    max_steps: int | None = None
    cfl: float = 0.25

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.s_phi < 0 or self.s_q < 0:
            raise ValueError("stabilization constants must be non-negative")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")


@dataclass
class StepReport:
    time: float
    dt: float
    max_div_u: float
    phi_min: float
    phi_max: float
    q_min: float
    q_max: float
    u_max: float
    trc_min: float
    trc_max: float
    cfl: float
    dt_reduced: bool = False

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def frozen_coefficients(cfg: SchemeConfig, model: ModelParams) -> tuple[float, float, float, float]:
    """``(m0, n0, A0, eta0)`` for the implicit part.

    Defaults are the coefficient maxima. User values below those maxima are
    rejected, since the implicit part must dominate the variable one.
    """
    co = model.coeffs
    maxima = {"m0": co.sup("m"), "A0": co.sup("A"), "eta0": co.sup("eta")}
    vals = {}
    for key, top in maxima.items():
        given = getattr(cfg, key)
        if given is None:
            vals[key] = top
        elif given < top - 1e-12:
            raise ValueError(f"{key}={given} is below the coefficient maximum {top}")
        else:
            vals[key] = float(given)
    n0 = min(co.sup("n"), np.sqrt(vals["m0"]))
    return vals["m0"], n0, vals["A0"], vals["eta0"]


class _Implicit:
    """Per-wavenumber factors of ``(I - dt L)^{-1}`` for one ``dt``."""

    def __init__(self, grid: Grid, dt: float, cfg: SchemeConfig, model: ModelParams):
        m0, n0, a0, eta0 = frozen_coefficients(cfg, model)
        k2 = grid.k2
        k4 = k2 * k2
        c0 = model.c0
        lpp = -m0 * c0 * k4 - cfg.s_phi * k2
        lpq = n0 * a0 * k2
        lqp = n0 * a0 * c0 * k4
        lqq = -(a0 * a0 + model.eps1) * k2 - cfg.s_q * k2
        self.m00 = 1 - dt * lpp
        self.m01 = -dt * lpq
        self.m10 = -dt * lqp
        self.m11 = 1 - dt * lqq
        self.det = self.m00 * self.m11 - self.m01 * self.m10
        self.u_factor = 1.0 / (1.0 + dt * 0.5 * eta0 * k2)
        self.c_factor = 1.0 / (1.0 + dt * model.eps2 * k2)
        self.dt = dt

    def solve_phi_q(self, r_phi, r_q):
        x = (self.m11 * r_phi - self.m01 * r_q) / self.det
        y = (self.m00 * r_q - self.m10 * r_phi) / self.det
        return x, y


def relax_exact(state: State, dt: float, model: ModelParams) -> State:
    """Exact solution over ``dt`` of ``q' = -q/tau_b`` and ``C' = -h tr(C)(tr(C) C - I)``.

    With ``s = tr C`` the trace obeys ``s' = -h s (s^2 - 2)``, a Bernoulli
    equation, and the trace-free part ``D`` obeys ``D' = -h s^2 D``; both
    have closed forms.
    """
    co = model.coeffs
    q = state.q * np.exp(-dt / co.tau_b(state.phi))
    c = state.c
    if c is not None:
        h = co.h(state.phi)
        decay = np.exp(-4.0 * h * dt)
        s0 = trace(c)
        root = np.sqrt(decay + 0.5 * s0 * s0 * (1.0 - decay))
        s1 = s0 / root
        shrink = np.exp(-2.0 * h * dt) / root
        dev_xx = 0.5 * (c[0] - c[2])
        c = np.stack([0.5 * s1 + shrink * dev_xx, shrink * c[1], 0.5 * s1 - shrink * dev_xx])
    return state.with_fields(q=q, c=c)


def stable_dt(state: State, cfg: SchemeConfig, coeffs=None) -> float:
    grid = state.grid
    umax = max(float(np.max(grid.magnitude(state.u))), 1e-12)
    return min(cfg.dt, cfg.cfl * min(grid.hx, grid.hy) / umax)


def _report(state: State, dt: float, reduced_dt: bool) -> StepReport:
    grid = state.grid
    umag = grid.magnitude(state.u)
    tr = trace(state.c) if state.c is not None else np.zeros(1)
    umax = float(np.max(umag))
    return StepReport(
        time=state.time, dt=dt, max_div_u=state.max_divergence(),
        phi_min=float(state.phi.min()), phi_max=float(state.phi.max()),
        q_min=float(state.q.min()), q_max=float(state.q.max()), u_max=umax,
        trc_min=float(tr.min()), trc_max=float(tr.max()),
        cfl=umax * dt / min(grid.hx, grid.hy), dt_reduced=reduced_dt)


class Stepper:
    """Reusable stepper caching the implicit factors for the last ``dt`` used."""

    def __init__(self, cfg: SchemeConfig, model: ModelParams):
        self.cfg = cfg
        self.model = model
        self._cache: _Implicit | None = None
        self._cache_key = None

    def _implicit(self, grid: Grid, dt: float) -> _Implicit:
        key = (grid, dt)
        if self._cache_key != key:
            self._cache = _Implicit(grid, dt, self.cfg, self.model)
            self._cache_key = key
        return self._cache

    def __call__(self, state: State, dt: float | None = None) -> tuple[State, StepReport]:
        grid = state.grid
        limit = stable_dt(state, self.cfg)
        target = self.cfg.dt if dt is None else dt
        dt_used = min(target, limit)
        reduced_dt = dt_used < target
        imp = self._implicit(grid, dt_used)

        mid = relax_exact(state, dt_used, self.model)
        fft, ifft = grid.fft, grid.ifft
        mask = grid.dealias_mask if grid.dealias_enabled else 1.0
        hats = {"phi": fft(mid.phi), "u": fft(mid.u), "q": mask * fft(mid.q)}
        mid_fields = {"q": ifft(hats["q"])}
        if mid.c is not None:
            hats["c"] = mask * fft(mid.c)
            mid_fields["c"] = ifft(hats["c"])
        mid = mid.with_fields(**mid_fields)
        tend = tendency_hat(mid, self.model, include_relaxation=False, hats=hats)

        x, y = imp.solve_phi_q(tend.d_phi, tend.d_q)
        phi = ifft(hats["phi"] + dt_used * x)
        q = ifft(hats["q"] + dt_used * y)
        u = ifft(grid.project_hat(hats["u"] + dt_used * imp.u_factor * tend.d_u))
        c = None
        if mid.c is not None:
            c = ifft(hats["c"] + dt_used * imp.c_factor * tend.d_c)

        new = State(grid, phi, q, u, c, state.time + dt_used)
        if not new.is_finite() or np.max(np.abs(phi)) > PHI_LIMIT:
            report = _report(state, dt_used, reduced_dt).as_dict()
            report["reason"] = "non-finite values" if not new.is_finite() else f"|phi| > {PHI_LIMIT}"
            report["failed_time"] = state.time + dt_used
            raise BlowUpError(f"step from t={state.time:.6g} aborted: {report['reason']}", report)
        return new, _report(new, dt_used, reduced_dt)


def step(state: State, cfg: SchemeConfig, model: ModelParams) -> tuple[State, StepReport]:
    return Stepper(cfg, model)(state)


Monitor = Callable[[State], object]


@dataclass
class Trajectory:
    times: list[float] = field(default_factory=list)
    states: list[State] = field(default_factory=list)
    steps: list[StepReport] = field(default_factory=list)
    records: dict[str, list] = field(default_factory=dict)
    truncated: bool = False

    @property
    def final(self) -> State:
        return self.states[-1]

    @property
    def max_div_u(self) -> float:
        return max((r.max_div_u for r in self.steps), default=0.0)


def run(initial: State, cfg: SchemeConfig, model: ModelParams, t_end: float,
        monitors: Mapping[str, Monitor] | None = None, keep_states: bool = True) -> Trajectory:
    """Advance to ``t_end``, sampling states and monitors every ``cfg.cadence`` steps.

    The last step is shortened to land on ``t_end`` exactly; the final state
    is always sampled.
    """
    monitors = dict(monitors or {})
    traj = Trajectory(records={k: [] for k in monitors})
    stepper = Stepper(cfg, model)

    def sample(s: State):
        traj.times.append(s.time)
        if keep_states or not traj.states:
            traj.states.append(s)
        else:
            traj.states[-1:] = [s] if len(traj.states) > 1 else traj.states + [s]
        for name, fn in monitors.items():
            traj.records[name].append(fn(s))

    state = initial
    sample(state)
    n = 0
    tol = 1e-12 * max(abs(t_end), 1.0)
    while state.time < t_end - tol:
        if cfg.max_steps is not None and n >= cfg.max_steps:
            traj.truncated = True
            log.warning("max_steps=%d reached at t=%.6g", cfg.max_steps, state.time)
            break
        state, rep = stepper(state, min(cfg.dt, t_end - state.time))
        traj.steps.append(rep)
        n += 1
        if n % cfg.cadence == 0 or state.time >= t_end - tol:
            sample(state)
    if traj.times[-1] != state.time:
        sample(state)
    return traj
