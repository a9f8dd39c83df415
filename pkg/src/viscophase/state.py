"""Solution snapshots, initial data and perturbations."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid import Grid, identity_tensor, read_snapshot, write_snapshot

INITIAL_KINDS = ("spinodal", "taylor_green_mix", "uniform_rest", "manufactured")
NOISE_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class State:
    """Fields ``(phi, q, u, C)`` at one time level.

    ``c`` is ``None`` for the reduced model. Arrays are never mutated after
    construction; every operation builds a new State.
    """

    grid: Grid
    phi: np.ndarray
    q: np.ndarray
    u: np.ndarray
    c: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self):
        shape = self.grid.shape
        checks = [("phi", self.phi, shape), ("q", self.q, shape), ("u", self.u, (2,) + shape)]
        if self.c is not None:
            checks.append(("c", self.c, (3,) + shape))
        for name, arr, want in checks:
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")

    @property
    def reduced(self) -> bool:
        return self.c is None

    def fields(self) -> dict[str, np.ndarray]:
        out = {"phi": self.phi, "q": self.q, "u": self.u}
        if self.c is not None:
            out["c"] = self.c
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.fields().values())

    def max_divergence(self) -> float:
        return float(np.max(np.abs(self.grid.divergence(self.u))))

    def with_fields(self, **kw) -> "State":
        return replace(self, **kw)

    def without_tensor(self) -> "State":
        return replace(self, c=None)

    def copy(self) -> "State":
        return replace(self, phi=self.phi.copy(), q=self.q.copy(), u=self.u.copy(),
                       c=None if self.c is None else self.c.copy())

    def components(self) -> dict[str, np.ndarray]:
        """Scalar components keyed by snapshot file stem."""
        out = {"phi": self.phi, "q": self.q, "u_x": self.u[0], "u_y": self.u[1]}
        if self.c is not None:
            out.update(c_xx=self.c[0], c_xy=self.c[1], c_yy=self.c[2])
        return out


def taylor_green(grid: Grid, amplitude: float) -> np.ndarray:
    a, b = 2 * np.pi / grid.lx, 2 * np.pi / grid.ly
    return amplitude * np.stack([np.sin(a * grid.x) * np.cos(b * grid.y),
                                 -(a / b) * np.cos(a * grid.x) * np.sin(b * grid.y)])


def make_initial(grid: Grid, kind: str = "spinodal", seed: int = 0, *,
                 phi_mean: float = 0.5, noise: float = 0.05, velocity: float = 0.1,
                 reduced: bool = False) -> State:
    """Initial data.

    ``spinodal``: ``phi = phi_mean + noise``, ``q = 0``, ``u = 0``, ``C = I``,
    the noise band-limited to the lowest quarter of modes with sup-norm
    ``noise``. ``taylor_green_mix`` adds a Taylor-Green velocity of the given
    amplitude. ``uniform_rest`` is ``(phi_mean, 0, 0, I)``. ``manufactured``
    is a smooth deterministic state with every field non-trivial.
    """
    if kind not in INITIAL_KINDS:
        raise ValueError(f"unknown initial kind {kind!r}; choose from {INITIAL_KINDS}")
    shape = grid.shape
    zeros = np.zeros(shape)
    c = None if reduced else identity_tensor(grid)

    if kind == "uniform_rest":
        return State(grid, np.full(shape, float(phi_mean)), zeros, np.zeros((2,) + shape), c)

    if kind == "manufactured":
        a, b = 2 * np.pi / grid.lx, 2 * np.pi / grid.ly
        x, y = grid.x, grid.y
        phi = phi_mean + 0.1 * np.cos(a * x) * np.cos(b * y) + 0.05 * np.sin(2 * a * x)
        q = 0.1 * np.sin(a * x) * np.cos(2 * b * y)
        u = taylor_green(grid, velocity)
        if c is not None:
            c = c + 0.1 * np.stack([np.cos(a * x), np.sin(a * x) * np.sin(b * y), np.cos(b * y)])
        return State(grid, phi, q, u, c)

    rng = np.random.default_rng(seed)
    phi = phi_mean + noise * grid.random_field(rng, NOISE_FRACTION)
    u = np.zeros((2,) + shape)
    if kind == "taylor_green_mix":
        u = taylor_green(grid, velocity)
    return State(grid, phi, zeros, u, c)


@dataclass(frozen=True)
class Perturbation:
    """Seeded band-limited perturbation of size ``amplitude`` on selected fields."""

    amplitude: float = 0.0
    seed: int = 1
    fields: tuple[str, ...] = ("phi", "q", "u", "c")

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("perturbation amplitude must be >= 0")
        bad = set(self.fields) - {"phi", "q", "u", "c"}
        if bad:
            raise ValueError(f"unknown perturbation fields {sorted(bad)}")


def perturbation_fields(grid: Grid, seed: int) -> dict[str, np.ndarray]:
    """Unit-size noise patterns, shared by all amplitudes with the same seed.

    Every pattern is mean-free so that both members of a twin carry the same
    mass and momentum.
    """
    rng = np.random.default_rng(seed)
    phi = grid.random_field(rng, NOISE_FRACTION)
    q = grid.random_field(rng, NOISE_FRACTION)
    u = grid.leray_project(grid.random_field(rng, NOISE_FRACTION, (2,)))
    u = u / np.max(grid.magnitude(u))
    c = grid.random_field(rng, NOISE_FRACTION, (3,))
    return {"phi": phi, "q": q, "u": u, "c": c}


def perturb(base: State, p: Perturbation) -> State:
    if p.amplitude == 0.0:
        return base.copy()
    noise = perturbation_fields(base.grid, p.seed)
    eps = p.amplitude
    kw = {}
    if "phi" in p.fields:
        kw["phi"] = base.phi + eps * noise["phi"]
    if "q" in p.fields:
        kw["q"] = base.q + eps * noise["q"]
    if "u" in p.fields:
        kw["u"] = base.grid.leray_project(base.u + eps * noise["u"])
    if "c" in p.fields and base.c is not None:
        kw["c"] = base.c + eps * noise["c"]
    return base.with_fields(**kw)


# -- persistence --------------------------------------------------------------

def save_state(state: State, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, values in state.components().items():
        fname = f"{name}.vpsf"
        write_snapshot(directory / fname, state.grid, values)
        files[name] = fname
    manifest = {"time": state.time, "reduced": state.reduced, "components": files}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_state(directory: str | Path) -> State:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    comps = {}
    grid = None
    for name, fname in manifest["components"].items():
        g, values = read_snapshot(directory / fname)
        if grid is not None and g != grid:
            raise ValueError(f"component {name} is on a different grid")
        grid = g
        comps[name] = values
    u = np.stack([comps["u_x"], comps["u_y"]])
    c = None
    if not manifest["reduced"]:
        c = np.stack([comps["c_xx"], comps["c_xy"], comps["c_yy"]])
    return State(grid, comps["phi"], comps["q"], u, c, float(manifest["time"]))
