"""Grids, sampled signals, signal classes and elementary time-frequency operators."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

# e^{-pi R^2} < 1e-16 for R >= TAIL_RADIUS
TAIL_RADIUS = math.sqrt(16 * math.log(10) / math.pi)
DEFAULT_STEP = 1.0 / 64
DEFAULT_MARGIN = 4.0


def gaussian(t):
    """The window e^{-pi t^2}."""
    return np.exp(-np.pi * np.square(t))


@dataclass(frozen=True)
class Grid:
    """Uniform 1-D grid ``start + i*step`` for ``0 <= i < count``."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"grid count must be a positive integer, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "step", float(self.step))

    @classmethod
    def centered(cls, radius: float, step: float = DEFAULT_STEP) -> "Grid":
        """Symmetric grid containing 0 and covering ``[-radius, radius]``."""
        half = int(math.ceil(radius / step - 1e-9))
        return cls(-half * step, step, 2 * half + 1)

    def point(self, i):
        return self.start + np.asarray(i) * self.step

    @property
    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + (self.count - 1) * self.step

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of grid point ``t``; raises if ``t`` is off-grid."""
        r = (t - self.start) / self.step
        i = int(round(r))
        if abs(r - i) > tol or not 0 <= i < self.count:
            raise ValueError(f"{t} is not a point of {self}")
        return i

    def same_as(self, other: "Grid", rtol: float = 1e-12) -> bool:
        return (
            self.count == other.count
            and abs(self.step - other.step) <= rtol * self.step
            and abs(self.start - other.start) <= rtol * max(1.0, abs(self.start)) + 1e-12 * self.step
        )

    def to_dict(self) -> dict:
        return {"start": self.start, "step": self.step, "count": self.count}


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    """Complex samples on a uniform grid; discrete stand-in for an L^2 function."""

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 1 or v.shape[0] != self.grid.count:
            raise ValueError(f"expected {self.grid.count} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def norm(self) -> float:
        return math.sqrt(self.grid.step * float(np.sum(np.abs(self.values) ** 2)))

    def inner(self, other: "ComplexSignal") -> complex:
        """Discrete inner product ``step * sum(f * conj(h))``."""
        _check_same_grid(self, other)
        return complex(self.grid.step * np.vdot(other.values, self.values))

    def with_values(self, values) -> "ComplexSignal":
        return ComplexSignal(self.grid, values, dict(self.meta))

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "ComplexSignal"):
        _check_same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "ComplexSignal"):
        _check_same_grid(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __call__(self, t):
        """Linear interpolation of the samples (zero outside the grid)."""
        t = np.asarray(t, dtype=float)
        re = np.interp(t, self.t, self.values.real, left=0.0, right=0.0)
        im = np.interp(t, self.t, self.values.imag, left=0.0, right=0.0)
        return re + 1j * im

    # serialization --------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re", "im"])
        for ti, v in zip(self.t, self.values):
            w.writerow([repr(float(ti)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ComplexSignal":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty signal CSV")
        t = np.array([float(r["t"]) for r in rows])
        v = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        step = float(t[1] - t[0]) if len(t) > 1 else 1.0
        if len(t) > 2 and np.max(np.abs(np.diff(t) - step)) > 1e-9 * step:
            raise ValueError("signal CSV is not on a uniform grid")
        return cls(Grid(t[0], step, len(t)), v)

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "grid": self.grid.to_dict(),
            "re": [float(x) for x in self.values.real],
            "im": [float(x) for x in self.values.imag],
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ComplexSignal":
        doc = json.loads(text)
        g = Grid(**doc["grid"])
        v = np.asarray(doc["re"]) + 1j * np.asarray(doc["im"])
        return cls(g, v, doc.get("meta", {}))


def _check_same_grid(f: ComplexSignal, h: ComplexSignal):
    if not f.grid.same_as(h.grid):
        raise ValueError(f"grid mismatch: {f.grid} vs {h.grid}")


@dataclass(frozen=True)
class CompactClassSpec:
    """Signals vanishing outside ``[-c/2, c/2]`` (the L^4 class on that interval)."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"support width must be positive, got {self.c}")

    @property
    def support(self) -> tuple[float, float]:
        return (-self.c / 2, self.c / 2)

    def default_grid(self, step: float = DEFAULT_STEP) -> Grid:
        return Grid.centered(self.c / 2 + DEFAULT_MARGIN, step)


@dataclass(frozen=True, eq=False)
class SisSpec:
    """Member ``sum_k c_k phi(. - beta k)`` of the Gaussian shift-invariant space."""

    beta: float
    k_min: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        c = np.array(self.coeffs, dtype=complex).ravel()
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "k_min", int(self.k_min))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def indices(self) -> np.ndarray:
        return self.k_min + np.arange(len(self.coeffs))

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.coeffs) - 1

    def centers(self) -> np.ndarray:
        return self.beta * self.indices

    def with_coeffs(self, coeffs) -> "SisSpec":
        return SisSpec(self.beta, self.k_min, coeffs)

    def default_grid(self, step: float = DEFAULT_STEP) -> Grid:
        lo = self.beta * self.k_min - DEFAULT_MARGIN
        hi = self.beta * self.k_max + DEFAULT_MARGIN
        i0 = math.floor(lo / step)
        i1 = math.ceil(hi / step)
        return Grid(i0 * step, step, i1 - i0 + 1)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "k_min": self.k_min,
            "re": [float(x) for x in self.coeffs.real],
            "im": [float(x) for x in self.coeffs.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SisSpec":
        return cls(d["beta"], d["k_min"], np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


@dataclass(frozen=True)
class GaussianParams:
    """The Gaussian ``a * exp(-b^2 (t - d)^2)``."""

    a: float
    b: float
    d: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("Gaussian amplitude and width must be positive")

    def __call__(self, t):
        return self.a * np.exp(-self.b**2 * np.square(np.asarray(t) - self.d))

    @classmethod
    def lag_window(cls, lag: float) -> "GaussianParams":
        """``(T_lag phi) * phi = e^{-pi lag^2/2} e^{-2 pi (t - lag/2)^2}``."""
        return cls(math.exp(-math.pi * lag * lag / 2), math.sqrt(2 * math.pi), lag / 2)


# operators ---------------------------------------------------------------

def translate(f: ComplexSignal, tau: float, mode: str = "grid") -> ComplexSignal:
    """``(T_tau f)(t) = f(t - tau)`` on the same grid.

    ``mode="grid"`` needs ``tau`` to be a multiple of the grid step and
    zero-fills the vacated edge. ``mode="bandlimited"`` applies the shift as a
    phase ramp in the DFT domain (periodic wrap; the signal must be decayed at
    both grid ends).
    """
    if mode == "grid":
        r = tau / f.grid.step
        s = int(round(r))
        if abs(r - s) > 1e-9 * max(1.0, abs(r)):
            raise ValueError("shift not grid-aligned")
        out = np.zeros_like(f.values)
        n = f.grid.count
        if s >= 0:
            if s < n:
                out[s:] = f.values[: n - s]
        else:
            if -s < n:
                out[:s] = f.values[-s:]
        return f.with_values(out)
    if mode == "bandlimited":
        n = f.grid.count
        nu = np.fft.fftfreq(n, d=f.grid.step)
        spec = np.fft.fft(f.values)
        if n % 2 == 0:
            # Nyquist bin has no unique sign; drop it to keep real signals real
            spec[n // 2] = 0.0
        return f.with_values(np.fft.ifft(spec * np.exp(-2j * np.pi * nu * tau)))
    raise ValueError(f"unknown translate mode {mode!r}")


def modulate(f: ComplexSignal, nu: float) -> ComplexSignal:
    """``(M_nu f)(t) = e^{2 pi i nu t} f(t)``."""
    return f.with_values(f.values * np.exp(2j * np.pi * nu * f.t))


def sis_extent_ok(spec: SisSpec, grid: Grid) -> tuple[bool, tuple[float, float]]:
    active = spec.centers()[np.abs(spec.coeffs) > 0]
    if active.size == 0:
        return True, (grid.start, grid.stop)
    need = (float(active.min()) - TAIL_RADIUS, float(active.max()) + TAIL_RADIUS)
    return grid.start <= need[0] and grid.stop >= need[1], need


def synthesize_sis(spec: SisSpec, grid: Grid | None = None) -> ComplexSignal:
    """Sample ``sum_k c_k e^{-pi (t - beta k)^2}`` on ``grid``."""
    if grid is None:
        grid = spec.default_grid()
    ok, need = sis_extent_ok(spec, grid)
    if not ok:
        raise ValueError(
            f"grid [{grid.start:g}, {grid.stop:g}] too narrow; need at least [{need[0]:g}, {need[1]:g}]"
        )
    t = grid.points
    vals = np.zeros(grid.count, dtype=complex)
    for ck, center in zip(spec.coeffs, spec.centers()):
        if ck != 0:
            vals += ck * gaussian(t - center)
    return ComplexSignal(grid, vals, {"class": "sis", "beta": spec.beta})


def plateau_window(s):
    """C-infinity window on ``|s| < 1``, flat near 0: ``exp(1 - 1/(1 - s^4))``."""
    s = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(s)
    m = s < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 4))
    return out


def _unit_poly(rng, degree, s):
    p = np.polyval(rng.standard_normal(degree + 1), s)
    return p / max(np.max(np.abs(p)), 1e-300)


def random_in_class(cls, seed: int, profile: str = "smooth", grid: Grid | None = None):
    """Deterministic random member of a signal class.

    For a :class:`CompactClassSpec` returns a :class:`ComplexSignal` vanishing
    outside ``[-c/2, c/2]``; for a :class:`SisSpec` returns a new spec with the
    same step and index range and random coefficients (``|c_k| <= 1``).

    Profiles: ``smooth`` (random complex polynomial times the plateau window),
    ``rough`` (piecewise-constant random values with hard edges) and
    ``nonvanishing`` (positive-real-part polynomial with a small imaginary part
    times the plateau window; ``|f| >= 0.05 max|f|`` on the inner 80% of the
    support).
    """
    if profile not in ("smooth", "rough", "nonvanishing"):
        raise ValueError(f"unknown profile {profile!r}")
    rng = np.random.default_rng(seed)
    if isinstance(cls, SisSpec):
        m = len(cls.coeffs)
        if profile == "nonvanishing":
            mod = rng.uniform(0.3, 1.0, m)
            c = mod * np.exp(2j * np.pi * rng.uniform(size=m))
        else:
            c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            if profile == "smooth":
                c *= np.exp(-0.5 * ((np.arange(m) - (m - 1) / 2) / max(m / 3, 1)) ** 2)
        c = c / np.max(np.abs(c))
        return cls.with_coeffs(c)
    if not isinstance(cls, CompactClassSpec):
        raise TypeError(f"unsupported class {type(cls).__name__}")
    grid = grid or cls.default_grid()
    t = grid.points
    half = cls.c / 2
    s = t / half
    inside = np.abs(s) < 1
    if profile == "nonvanishing":
        re = 1.5 + 0.5 * _unit_poly(rng, 3, s)
        im = 0.3 * _unit_poly(rng, 2, s)
        vals = (re + 1j * im) * plateau_window(s)
    elif profile == "smooth":
        deg = int(rng.integers(2, 6))
        vals = (_unit_poly(rng, deg, s) + 1j * _unit_poly(rng, deg, s)) * plateau_window(s)
    else:
        nblocks = int(rng.integers(4, 12))
        edges = np.sort(rng.uniform(-1, 1, nblocks - 1))
        levels = rng.standard_normal(nblocks) + 1j * rng.standard_normal(nblocks)
        vals = levels[np.searchsorted(edges, s)]
    vals = np.where(inside, vals, 0.0)
    return ComplexSignal(grid, vals, {"class": "compact", "c": cls.c, "profile": profile, "seed": seed})


class PhaseDistance(NamedTuple):
    distance: float
    tau: complex | None


def phase_distance(f: ComplexSignal, h: ComplexSignal) -> PhaseDistance:
    """``min_{|tau|=1} ||f - tau h||`` and the minimizing ``tau``."""
    _check_same_grid(f, h)
    ip = f.inner(h)
    nf2 = f.norm() ** 2
    nh2 = h.norm() ** 2
    d2 = nf2 + nh2 - 2 * abs(ip)
    tau = ip / abs(ip) if abs(ip) > 0 else None
    if tau is not None:
        # direct evaluation avoids the cancellation in the closed form near 0
        d_direct = math.sqrt(f.grid.step) * float(np.linalg.norm(f.values - tau * h.values))
        return PhaseDistance(d_direct, tau)
    return PhaseDistance(math.sqrt(max(d2, 0.0)), None)


def relative_phase_distance(truth: ComplexSignal, estimate: ComplexSignal) -> float:
    n = truth.norm()
    d = phase_distance(truth, estimate).distance
    return d / n if n > 0 else d


def canonical_phase(values: np.ndarray, bits: int | None = 36) -> np.ndarray:
    """Rotate to a canonical global phase and snap to a dyadic grid.

    The largest-modulus entry is made real positive, then real and imaginary
    parts are rounded to multiples of ``2^(e - bits)`` with ``2^e >= max|v|``.
    Two inputs differing by a global phase map to the same array unless a value
    sits within rounding noise of a snapping boundary.
    """
    v = np.asarray(values, dtype=complex)
    if v.size == 0:
        return v.copy()
    i = int(np.argmax(np.abs(v)))
    m = abs(v[i])
    if m == 0:
        return np.zeros_like(v)
    out = v * (np.conj(v[i]) / m)
    if bits is None:
        return out
    q = math.ldexp(1.0, math.frexp(m)[1] - bits)
    return np.round(out.real / q) * q + 1j * (np.round(out.imag / q) * q)
