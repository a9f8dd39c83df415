"""Uniform periodic 2D grid with Fourier differentiation and quadrature.

Field layout conventions used throughout the package:

* scalar field: array of shape ``(nx, ny)``, index ``[i, j]`` -> ``(x_i, y_j)``
* vector field: shape ``(2, nx, ny)``, components ``(x, y)``
* symmetric tensor field: shape ``(3, nx, ny)``, components ``(xx, xy, yy)``
* full 2x2 tensor (e.g. a velocity gradient): shape ``(2, 2, nx, ny)``
  with ``G[i, j] = d u_i / d x_j``.

Spectral work uses the real-to-complex FFT over the last two axes, so any
leading axes are handled component-wise for free.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"VPSF"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIIIdd")


def _require_finite(f: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(f)):
        raise ValueError(f"non-finite values in {what}")


class Grid:
    """Uniform ``nx x ny`` grid on the torus ``[0, lx) x [0, ly)``.

    The first-derivative wavenumbers have the Nyquist entry set to zero so
    that derivatives of real fields stay real. The Laplacian is built from
    the same table, which makes ``divergence(gradient(f)) == laplacian(f)``
    hold exactly for every grid function.
    """

    def __init__(self, nx: int, ny: int, lx: float = 1.0, ly: float = 1.0,
                 dealias: bool = True):
        for name, n in (("nx", nx), ("ny", ny)):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n!r}")
        if not (lx > 0 and ly > 0):
            raise ValueError("domain lengths must be positive")
        self.nx, self.ny = int(nx), int(ny)
        self.lx, self.ly = float(lx), float(ly)
        self.hx, self.hy = self.lx / self.nx, self.ly / self.ny
        self.dealias_enabled = bool(dealias)

        x = np.arange(self.nx) * self.hx
        y = np.arange(self.ny) * self.hy
        self.x, self.y = np.meshgrid(x, y, indexing="ij")

        # integer mode numbers; rfft keeps the non-negative half along y
        self.mx = np.fft.fftfreq(self.nx, 1.0 / self.nx)
        self.my = np.fft.rfftfreq(self.ny, 1.0 / self.ny)
        kx = 2 * np.pi / self.lx * self.mx
        ky = 2 * np.pi / self.ly * self.my
        kx[self.nx // 2] = 0.0
        ky[self.ny // 2] = 0.0
        self.kx = kx[:, None] * np.ones_like(ky)[None, :]
        self.ky = np.ones_like(kx)[:, None] * ky[None, :]
        self.k2 = self.kx ** 2 + self.ky ** 2
        self._k2_safe = np.where(self.k2 == 0.0, 1.0, self.k2)

        keep_x = np.abs(self.mx) < self.nx / 3.0
        keep_y = np.abs(self.my) < self.ny / 3.0
        self.dealias_mask = keep_x[:, None] & keep_y[None, :]

    # -- bookkeeping -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.nx, self.ny, self.lx, self.ly) == (other.nx, other.ny, other.lx, other.ly)

    def __hash__(self) -> int:
        return hash((self.nx, self.ny, self.lx, self.ly))

    def __repr__(self) -> str:
        return f"Grid(nx={self.nx}, ny={self.ny}, lx={self.lx}, ly={self.ly})"

    # -- transforms ------------------------------------------------------
    def fft(self, f: np.ndarray) -> np.ndarray:
        return np.fft.rfft2(f, axes=(-2, -1))

    def ifft(self, fh: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(fh, s=self.shape, axes=(-2, -1))

    def dealias(self, f: np.ndarray) -> np.ndarray:
        """Zero the upper third of the spectrum (2/3 rule); no-op when disabled."""
        if not self.dealias_enabled:
            return f
        return self.ifft(self.fft(f) * self.dealias_mask)

    def band_limit(self, f: np.ndarray, fraction: float) -> np.ndarray:
        """Keep only modes with ``|m| <= fraction * N / 2`` in both directions."""
        keep_x = np.abs(self.mx) <= fraction * self.nx / 2
        keep_y = np.abs(self.my) <= fraction * self.ny / 2
        return self.ifft(self.fft(f) * (keep_x[:, None] & keep_y[None, :]))

    # -- differential operators -----------------------------------------
    def gradient(self, f: np.ndarray) -> np.ndarray:
        """Spectral gradient; a new leading axis of length 2 holds d/dx, d/dy."""
        _require_finite(f)
        fh = self.fft(f)
        return np.stack([self.ifft(1j * self.kx * fh), self.ifft(1j * self.ky * fh)])

    def divergence(self, v: np.ndarray) -> np.ndarray:
        """Divergence over the leading axis: ``sum_j d v[j] / d x_j``.

        For a stacked tensor ``T[j, i]`` this gives ``sum_j d T_ji / d x_j``,
        which for symmetric tensors is the usual row-wise divergence.
        """
        _require_finite(v)
        vh = self.fft(v)
        return self.ifft(1j * self.kx * vh[0] + 1j * self.ky * vh[1])

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        _require_finite(f)
        return self.ifft(-self.k2 * self.fft(f))

    def leray_project(self, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection onto divergence-free fields (mean kept)."""
        _require_finite(v)
        return self.ifft(self.project_hat(self.fft(v)))

    def project_hat(self, vh: np.ndarray) -> np.ndarray:
        """Leray projection acting on Fourier coefficients."""
        kdotv = (self.kx * vh[0] + self.ky * vh[1]) / self._k2_safe
        return np.stack([vh[0] - self.kx * kdotv, vh[1] - self.ky * kdotv])

    def curl_field(self, stream: np.ndarray) -> np.ndarray:
        """Solenoidal field ``(d psi/dy, -d psi/dx)`` from a stream function."""
        g = self.gradient(stream)
        return np.stack([g[1], -g[0]])

    # -- quadrature ------------------------------------------------------
    def integrate(self, f: np.ndarray):
        """Rectangle-rule integral over the torus (per component for stacked fields)."""
        total = np.sum(f, axis=(-2, -1)) * self.cell_area
        return float(total) if np.ndim(total) == 0 else total

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def magnitude(self, f: np.ndarray) -> np.ndarray:
        """Pointwise |f|: absolute value, Euclidean norm, or Frobenius norm.

        Rank is inferred from the leading axes: ``(nx, ny)`` scalar,
        ``(2, nx, ny)`` vector, ``(3, nx, ny)`` symmetric tensor with the
        off-diagonal counted twice, ``(2, 2, nx, ny)`` full tensor.
        """
        lead = f.shape[:-2]
        if lead == ():
            return np.abs(f)
        if lead == (2,):
            return np.sqrt(f[0] ** 2 + f[1] ** 2)
        if lead == (3,):
            return np.sqrt(f[0] ** 2 + 2 * f[1] ** 2 + f[2] ** 2)
        if lead == (2, 2):
            return np.sqrt(np.sum(f ** 2, axis=(0, 1)))
        raise ValueError(f"unsupported field shape {f.shape}")

    def lp_norm(self, f: np.ndarray, p: float = 2.0) -> float:
        """``(int |f|^p dx)^(1/p)`` by the rectangle rule; ``p=inf`` is the sample max."""
        if not p >= 1:
            raise ValueError(f"p must be >= 1, got {p}")
        _require_finite(f)
        mag = self.magnitude(f)
        if np.isinf(p):
            return float(np.max(mag))
        if p == 2:
            return float(np.sqrt(np.sum(mag * mag) * self.cell_area))
        return float((np.sum(mag ** p) * self.cell_area) ** (1.0 / p))

    def spectral_l2_squared(self, f: np.ndarray) -> float:
        """``||f||_2^2`` evaluated from Fourier coefficients (Parseval)."""
        fh = self.fft(f)
        w = np.full(fh.shape[-1], 2.0)
        w[0] = 1.0
        if self.ny % 2 == 0:
            w[-1] = 1.0
        n = self.nx * self.ny
        return float(np.sum(w * np.abs(fh) ** 2) * self.area / n ** 2)

    def random_field(self, rng: np.random.Generator, fraction: float = 0.25,
                     leading: tuple[int, ...] = ()) -> np.ndarray:
        """Band-limited, mean-free random field scaled to unit sup-norm."""
        raw = rng.standard_normal(leading + self.shape)
        f = self.band_limit(raw, fraction)
        f = f - f.mean(axis=(-2, -1), keepdims=True)
        peak = np.max(np.abs(f))
        return f / peak if peak > 0 else f


# -- symmetric tensor helpers ------------------------------------------------

def sym_to_full(c: np.ndarray) -> np.ndarray:
    return np.stack([np.stack([c[0], c[1]]), np.stack([c[1], c[2]])])


def full_to_sym(t: np.ndarray) -> np.ndarray:
    return np.stack([t[0, 0], 0.5 * (t[0, 1] + t[1, 0]), t[1, 1]])


def trace(c: np.ndarray) -> np.ndarray:
    return c[0] + c[2]


def identity_tensor(grid: Grid, value: float = 1.0) -> np.ndarray:
    out = np.zeros((3,) + grid.shape)
    out[0] = value
    out[2] = value
    return out


# -- binary snapshots --------------------------------------------------------

def write_snapshot(path: str | Path, grid: Grid, values: np.ndarray) -> None:
    """One scalar component: 32-byte header then little-endian float64 samples."""
    values = np.asarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError(f"snapshot expects shape {grid.shape}, got {values.shape}")
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.nx, grid.ny, grid.lx, grid.ly)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(values).tobytes(order="C"))


def read_snapshot(path: str | Path) -> tuple[Grid, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, nx, ny, lx, ly = _HEADER.unpack_from(data)
    if magic != SNAPSHOT_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise ValueError(f"{path}: expected {nx * ny} samples, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(np.float64)
    return Grid(nx, ny, lx, ly), values
