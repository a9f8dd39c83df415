"""Parametric coefficient functions, the mixing potential, and their checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

DEFAULT_INTERVAL = (-0.5, 1.5)
DEFAULT_SMOOTHING = 0.05


def _smooth_clamp(s, lo: float, hi: float, width: float):
    """C^1 clamp of ``s`` to ``[lo, hi]``; returns (value, d/ds, d2/ds2).

    Within ``width/2`` of either end a quadratic blend joins the identity to
    the constant plateau, so the first derivative is continuous.
    """
    s = np.asarray(s, dtype=float)
    w = 0.5 * width
    val = s.copy()
    d1 = np.ones_like(s)
    d2 = np.zeros_like(s)
    if w <= 0:
        val = np.clip(s, lo, hi)
        outside = (s < lo) | (s > hi)
        d1[outside] = 0.0
        return val, d1, d2

    up = (s > hi - w) & (s < hi + w)
    t = s[up] - (hi - w)
    val[up] = s[up] - t * t / (4 * w)
    d1[up] = 1 - t / (2 * w)
    d2[up] = -1 / (2 * w)
    above = s >= hi + w
    val[above], d1[above] = hi, 0.0

    dn = (s > lo - w) & (s < lo + w)
    t = (lo + w) - s[dn]
    val[dn] = s[dn] + t * t / (4 * w)
    d1[dn] = 1 - t / (2 * w)
    d2[dn] = 1 / (2 * w)
    below = s <= lo - w
    val[below], d1[below] = lo, 0.0
    return val, d1, d2


@dataclass(frozen=True)
class ScalarFunction:
    """A constant or cubic polynomial of a clamped argument.

    ``coefficients`` are in ascending order (``c0 + c1 s + c2 s^2 + c3 s^3``).
    """

    coefficients: tuple[float, ...] = (1.0,)
    interval: tuple[float, float] = DEFAULT_INTERVAL
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self):
        coeffs = tuple(float(c) for c in np.atleast_1d(self.coefficients))
        if not 1 <= len(coeffs) <= 4:
            raise ValueError("coefficient functions are constants or at most cubic")
        lo, hi = self.interval
        if not lo < hi:
            raise ValueError(f"bad clamp interval {self.interval}")
        if self.smoothing < 0 or self.smoothing > hi - lo:
            raise ValueError("smoothing width must lie in [0, interval length]")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "interval", (float(lo), float(hi)))

    @classmethod
    def constant(cls, value: float) -> "ScalarFunction":
        return cls((float(value),))

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[1:])

    def __call__(self, s, derivative: int = 0):
        if self.is_constant:
            val = self.coefficients[0] if derivative == 0 else 0.0
            return np.full(np.shape(s), val) if np.ndim(s) else val
        z, z1, z2 = _smooth_clamp(s, *self.interval, self.smoothing)
        c = np.array(self.coefficients)
        if derivative == 0:
            out = P.polyval(z, c)
        elif derivative == 1:
            out = P.polyval(z, P.polyder(c)) * z1
        elif derivative == 2:
            out = P.polyval(z, P.polyder(c, 2)) * z1 ** 2 + P.polyval(z, P.polyder(c)) * z2
        else:
            raise ValueError("derivative order must be 0, 1 or 2")
        return float(out) if np.ndim(s) == 0 else out

    def to_config(self):
        return self.coefficients[0] if len(self.coefficients) == 1 else list(self.coefficients)


@dataclass(frozen=True)
class CoefficientSet:
    """The mobility-type functions of the model.

    ``m`` defaults to ``n**2``. Supplying it explicitly is allowed so that
    validation can report a mismatch, and so that ``test_mode`` runs can use
    ``n = 0`` with a positive ``m``.
    """

    n: ScalarFunction = field(default_factory=lambda: ScalarFunction.constant(1.0))
    A: ScalarFunction = field(default_factory=lambda: ScalarFunction.constant(1.0))
    h: ScalarFunction = field(default_factory=lambda: ScalarFunction.constant(1.0))
    eta: ScalarFunction = field(default_factory=lambda: ScalarFunction.constant(1.0))
    tau_b: ScalarFunction = field(default_factory=lambda: ScalarFunction.constant(1.0))
    m_explicit: ScalarFunction | None = None
    bounds: tuple[float, float] = (0.5, 2.0)
    derivative_bound: float = 10.0
    test_mode: bool = False

    def __post_init__(self):
        m1, m2 = self.bounds
        if not 0 < m1 <= m2:
            raise ValueError(f"bounds must satisfy 0 < m1 <= m2, got {self.bounds}")

    def m(self, s, derivative: int = 0):
        if self.m_explicit is not None:
            return self.m_explicit(s, derivative)
        n0 = self.n(s)
        if derivative == 0:
            return n0 * n0
        if derivative == 1:
            return 2 * n0 * self.n(s, 1)
        return 2 * (self.n(s, 1) ** 2 + n0 * self.n(s, 2))

    def functions(self) -> dict:
        return {"m": self.m, "n": self.n, "A": self.A, "h": self.h,
                "eta": self.eta, "tau_b": self.tau_b}

    def sup(self, name: str, derivative: int = 0) -> float:
        """Sup of ``|f^(derivative)|`` over the real line (dense samples + critical points)."""
        f = self.functions()[name]
        s = _probe_points(self, name)
        return float(np.max(np.abs(f(s, derivative))))

    def inf(self, name: str) -> float:
        f = self.functions()[name]
        return float(np.min(f(_probe_points(self, name))))


def _probe_points(coeffs: CoefficientSet, name: str) -> np.ndarray:
    fn = coeffs.m_explicit if name == "m" and coeffs.m_explicit is not None else \
        coeffs.n if name == "m" else getattr(coeffs, name)
    lo, hi = fn.interval
    pts = [np.linspace(lo - 1.0, hi + 1.0, 4001), [lo, hi]]
    c = np.array(fn.coefficients)
    for order in (1, 2):
        d = P.polyder(c, order)
        if len(d) > 1 and np.any(d[1:] != 0):
            r = P.polyroots(d)
            r = r[np.abs(r.imag) < 1e-12].real
            pts.append(r[(r > lo) & (r < hi)])
    return np.concatenate([np.atleast_1d(p) for p in pts])


# -- potential ----------------------------------------------------------------

GINZBURG_LANDAU = (0.0, 0.0, 1.0, -2.0, 1.0)


@dataclass(frozen=True)
class PotentialSpec:
    """Polynomial mixing potential ``F``.

    ``family='ginzburg_landau'`` is ``phi^2 (1 - phi)^2``; ``'polynomial'``
    takes ascending ``coefficients``.
    """

    family: str = "ginzburg_landau"
    coefficients: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family == "ginzburg_landau":
            coeffs = GINZBURG_LANDAU
        elif self.family == "polynomial":
            coeffs = tuple(float(c) for c in self.coefficients)
            if not coeffs:
                raise ValueError("polynomial potential needs coefficients")
        else:
            raise ValueError(f"unknown potential family {self.family!r}")
        # strip trailing zeros so the degree is meaningful
        coeffs = list(coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0.0:
            coeffs.pop()
        object.__setattr__(self, "coefficients", tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def derivative_coefficients(self, order: int) -> np.ndarray:
        return P.polyder(np.array(self.coefficients), order) if order else np.array(self.coefficients)

    def __call__(self, x, order: int = 0):
        if order < 0:
            raise ValueError("order must be non-negative")
        return P.polyval(x, self.derivative_coefficients(order))

    def bregman(self, phi, psi):
        """``F(phi) - F(psi) - F'(psi)(phi - psi)`` via the finite Taylor series at ``psi``.

        Exact for polynomials and free of the cancellation the direct
        difference suffers when ``phi`` is close to ``psi``.
        """
        d = np.asarray(phi) - np.asarray(psi)
        out = np.zeros(np.broadcast(d, psi).shape)
        dk = d * d
        for k in range(2, self.degree + 1):
            out = out + self(psi, k) / math.factorial(k) * dk
            dk = dk * d
        return out


def eval_potential(spec: PotentialSpec, x, order: int = 0):
    if order not in (0, 1, 2, 3):
        raise ValueError(f"unsupported derivative order {order}")
    return spec(x, order)


def _polynomial_infimum(c: np.ndarray) -> tuple[float, float]:
    """(infimum, argmin) of a real polynomial; raises if unbounded below."""
    c = np.trim_zeros(np.asarray(c, dtype=float), "b")
    if c.size == 0:
        return 0.0, 0.0
    deg = c.size - 1
    if deg == 0:
        return float(c[0]), 0.0
    if deg % 2 == 1 or c[-1] < 0:
        raise ValueError("polynomial is unbounded below")
    if deg == 2:
        x = -c[1] / (2 * c[2])
        return float(P.polyval(x, c)), float(x)
    r = P.polyroots(P.polyder(c))
    r = r[np.abs(r.imag) < 1e-9].real
    vals = P.polyval(r, c)
    i = int(np.argmin(vals))
    return float(vals[i]), float(r[i])


def compute_c4(spec: PotentialSpec) -> float:
    """Smallest ``c4 >= 0`` with ``F'' >= -c4`` on the whole real line."""
    if not isinstance(spec, PotentialSpec):
        raise TypeError("compute_c4 needs a polynomial PotentialSpec")
    low, _ = _polynomial_infimum(spec.derivative_coefficients(2))
    return max(0.0, -low)


def compute_c3(spec: PotentialSpec) -> float:
    low, _ = _polynomial_infimum(spec.derivative_coefficients(0))
    return max(0.0, -low)


def min_penalty(c4: float, margin: float = 0.5) -> float:
    if c4 < 0:
        raise ValueError("c4 must be non-negative")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return 0.5 * c4 + margin


def growth_constants(spec: PotentialSpec, order: int) -> tuple[float, float]:
    """Constants with ``|F^(order)(x)| <= c1 |x|^(p - order) + c2``, ``p`` the degree.

    Uses ``|x|^j <= |x|^(p-order) + 1`` for ``j <= p - order``.
    """
    s = float(np.sum(np.abs(spec.derivative_coefficients(order))))
    return s, s


# -- validation -------------------------------------------------------------

@dataclass
class Clause:
    name: str
    passed: bool
    witness: float
    detail: str = ""


@dataclass
class ValidationReport:
    clauses: list[Clause]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> list[Clause]:
        return [c for c in self.clauses if not c.passed]

    def __getitem__(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name:<28} witness={c.witness:.6g}  {c.detail}"
                for c in self.clauses]

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "clauses": [dict(name=c.name, passed=c.passed, witness=c.witness, detail=c.detail)
                            for c in self.clauses]}


def validate_assumptions(coeffs: CoefficientSet, spec: PotentialSpec, tol: float = 1e-12) -> ValidationReport:
    """Check every structural requirement on the coefficients and the potential.

    Failures are recorded in the report, never raised.
    """
    m1, m2 = coeffs.bounds
    out: list[Clause] = []
    for name, f in coeffs.functions().items():
        pts = _probe_points(coeffs, name)
        vals = f(pts)
        lo, hi = float(np.min(vals)), float(np.max(vals))
        ok = lo >= m1 - tol and hi <= m2 + tol
        witness = lo if lo < m1 - tol else hi
        out.append(Clause(f"bounds[{name}]", ok, witness, f"range [{lo:.6g}, {hi:.6g}] vs [{m1}, {m2}]"))

    pts = np.concatenate([_probe_points(coeffs, "n"), _probe_points(coeffs, "m")])
    gap = float(np.max(np.abs(coeffs.n(pts) ** 2 - coeffs.m(pts))))
    out.append(Clause("n_squared_equals_m", gap <= 1e-12, gap))

    a1 = coeffs.sup("A", 1)
    a1_min = float(np.min(coeffs.A(_probe_points(coeffs, "A"), 1)))
    out.append(Clause("A_prime_bounded", a1 <= coeffs.derivative_bound, a1,
                      f"bound {coeffs.derivative_bound}"))
    out.append(Clause("A_prime_nonnegative", a1_min >= -tol, a1_min))
    for name in ("m", "n", "h", "tau_b"):
        d = coeffs.sup(name, 1)
        out.append(Clause(f"derivative_bounded[{name}]", d <= coeffs.derivative_bound, d))
    a2 = coeffs.sup("A", 2)
    out.append(Clause("A_second_bounded", math.isfinite(a2), a2))

    p = spec.degree
    out.append(Clause("growth_exponent_at_least_2", p >= 2, p))
    out.append(Clause("growth_exponent_at_most_4", p <= 4, p))
    try:
        c3 = compute_c3(spec)
        out.append(Clause("F_bounded_below", True, c3, "c3"))
    except ValueError:
        out.append(Clause("F_bounded_below", False, math.inf))
    try:
        c4 = compute_c4(spec)
        out.append(Clause("F_second_bounded_below", True, c4, "c4"))
    except ValueError:
        out.append(Clause("F_second_bounded_below", False, math.inf))
    # |F'''(x)| <= c13 |x| + c23 holds iff F''' is at most affine
    d3 = spec.derivative_coefficients(3)
    linear = d3.size <= 2 or not np.any(d3[2:] != 0)
    out.append(Clause("F_third_linear_growth", bool(linear), float(max(d3.size - 1, 0)),
                      "degree of F'''"))
    return ValidationReport(out)
