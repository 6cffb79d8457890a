"""Fourier, Gabor, ambiguity, Hermite and fractional Fourier transforms.

Conventions: ``F f(w) = int f(t) e^{-2 pi i t w} dt`` and the Gaussian window
``phi(t) = e^{-pi t^2}``. All integrals are rectangle-rule sums on the signal
grid, which is spectrally accurate for smooth signals decayed at the grid ends.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .signals import ComplexSignal, Grid, SisSpec, gaussian, translate

N_MAX = 64
SQRT_HALF = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class RotationAngle:
    theta: float = 0.0

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self.theta)

    @property
    def reduced(self) -> float:
        """Angle mapped into ``(-pi, pi]``."""
        r = math.remainder(self.theta, 2 * math.pi)
        return math.pi if r == -math.pi else r

    @property
    def chirp_safe(self) -> bool:
        return abs(math.sin(self.theta)) >= 0.1


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotate_points(points, theta: float) -> np.ndarray:
    """Apply ``R_theta`` to an ``(n, 2)`` array of ``(x, w)`` pairs."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if theta == 0:
        return pts.copy()
    return pts @ rotation_matrix(theta).T


@dataclass(frozen=True, eq=False)
class TFMatrix:
    """Values on a product grid; rows follow ``x_grid``, columns ``w_grid``."""

    x_grid: Grid
    w_grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.x_grid.count, self.w_grid.count):
            raise ValueError(f"shape {v.shape} does not match grids")
        object.__setattr__(self, "values", v)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "omega", "re", "im"])
        for i, x in enumerate(self.x_grid.points):
            for j, om in enumerate(self.w_grid.points):
                v = self.values[i, j]
                w.writerow([repr(float(x)), repr(float(om)), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "x_grid": self.x_grid.to_dict(),
                "w_grid": self.w_grid.to_dict(),
                "re": self.values.real.tolist(),
                "im": self.values.imag.tolist(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "TFMatrix":
        d = json.loads(text)
        return cls(Grid(**d["x_grid"]), Grid(**d["w_grid"]), np.asarray(d["re"]) + 1j * np.asarray(d["im"]))


def _check_decay(f: ComplexSignal, tol: float = 1e-8):
    v = np.abs(f.values)
    peak = v.max() if v.size else 0.0
    if peak > 0 and max(v[0], v[-1]) > tol * peak:
        warnings.warn("signal not decayed at the grid boundary; Fourier quadrature may alias",
                      RuntimeWarning, stacklevel=3)


def frequency_grid(grid: Grid) -> Grid:
    """Frequency grid matched to ``grid``: step ``1/(count*step)``, centred on 0."""
    df = 1.0 / (grid.count * grid.step)
    return Grid(-(grid.count // 2) * df, df, grid.count)


def fourier_grid(f: ComplexSignal) -> ComplexSignal:
    """Unitary Fourier transform of ``f`` sampled on :func:`frequency_grid`."""
    _check_decay(f)
    fg = frequency_grid(f.grid)
    nu = fg.points
    spec = np.fft.fftshift(np.fft.fft(f.values))
    vals = f.grid.step * np.exp(-2j * np.pi * f.grid.start * nu) * spec
    return ComplexSignal(fg, vals)


def fourier_at(f: ComplexSignal, nus, sign: int = -1) -> np.ndarray:
    """Direct quadrature of ``int f(t) e^{sign 2 pi i t nu} dt`` at arbitrary ``nus``."""
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    t = f.t
    out = np.empty(nus.size, dtype=complex)
    chunk = max(1, 2_000_000 // max(t.size, 1))
    for a in range(0, nus.size, chunk):
        e = np.exp(sign * 2j * np.pi * np.outer(nus[a:a + chunk], t))
        out[a:a + chunk] = f.grid.step * (e @ f.values)
    return out


def fourier_on_grid(f: ComplexSignal, inverse: bool = False) -> ComplexSignal:
    """Fourier (or inverse Fourier) transform evaluated on ``f``'s own grid."""
    return f.with_values(fourier_at(f, f.t, sign=1 if inverse else -1))


def gabor(f: ComplexSignal, x_grid: Grid, w_grid: Grid) -> TFMatrix:
    """Quadrature of ``Gf(x, w) = int f(t) phi(t - x) e^{-2 pi i t w} dt`` on a product grid.

    Each row is the Fourier transform of ``f * T_x phi`` at the frequencies of
    ``w_grid``.
    """
    t = f.t
    xs = x_grid.points
    ws = w_grid.points
    e = np.exp(-2j * np.pi * np.outer(t, ws)) * f.grid.step
    out = np.empty((xs.size, ws.size), dtype=complex)
    rows = max(1, 4_000_000 // max(t.size, 1))
    for a in range(0, xs.size, rows):
        win = gaussian(t[None, :] - xs[a:a + rows, None])
        out[a:a + rows] = (win * f.values[None, :]) @ e
    return TFMatrix(x_grid, w_grid, out)


def gabor_points(f: ComplexSignal, xs, ws) -> np.ndarray:
    """Quadrature of ``Gf`` at scattered points ``(xs[i], ws[i])``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ws = np.atleast_1d(np.asarray(ws, dtype=float))
    xs, ws = np.broadcast_arrays(xs, ws)
    g = f.grid
    return kernels.gabor_points(g.start, g.step, f.values, xs.ravel(), ws.ravel()).reshape(xs.shape)


def gabor_gaussian_closed(x, w):
    """``G phi(x, w) = 2^{-1/2} e^{-pi i x w} e^{-pi (x^2 + w^2)/2}``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    out = SQRT_HALF * np.exp(-1j * np.pi * x * w - 0.5 * np.pi * (x * x + w * w))
    return out if out.ndim else complex(out)


def gabor_sis_series(spec: SisSpec, x, w):
    """Exact ``Gf`` for ``f`` in the shift-invariant space, summed term by term."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.zeros(np.broadcast(x, w).shape, dtype=complex)
    for ck, center in zip(spec.coeffs, spec.centers()):
        if ck != 0:
            out = out + ck * np.exp(-2j * np.pi * center * w) * gabor_gaussian_closed(x - center, w)
    return out if out.ndim else complex(out)


def ambiguity(f: ComplexSignal, g: ComplexSignal, x: float, w: float) -> complex:
    """Cross-ambiguity ``A(f,g)(x,w) = int f(t + x/2) conj(g(t - x/2)) e^{-2 pi i t w} dt``.

    Evaluated as ``e^{pi i x w} int f(s) conj(g(s - x)) e^{-2 pi i s w} ds``; a
    non-grid-aligned ``x`` uses a band-limited shift of ``g``.
    """
    if not f.grid.same_as(g.grid):
        raise ValueError(f"grid mismatch: {f.grid} vs {g.grid}")
    r = x / f.grid.step
    mode = "grid" if abs(r - round(r)) <= 1e-9 * max(1.0, abs(r)) else "bandlimited"
    gs = translate(g, x, mode=mode)
    s = f.t
    integral = f.grid.step * np.sum(f.values * np.conj(gs.values) * np.exp(-2j * np.pi * s * w))
    return complex(np.exp(1j * np.pi * x * w) * integral)


def hermite_functions(n_max: int, t) -> np.ndarray:
    """Rows ``h_0 .. h_{n_max}`` evaluated at ``t`` (L^2-normalized, h_0 = 2^{1/4} phi).

    Three-term recurrence in ``u = sqrt(2 pi) t``; no factorials.
    """
    t = np.asarray(t, dtype=float)
    u = math.sqrt(2 * math.pi) * t
    out = np.empty((n_max + 1,) + t.shape)
    out[0] = 2.0**0.25 * np.exp(-np.pi * t * t)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * u * out[0]
    for k in range(1, n_max):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * u * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_eval(n: int, grid: Grid, n_max: int = N_MAX) -> ComplexSignal:
    if n < 0 or int(n) != n:
        raise ValueError(f"Hermite index must be a nonnegative integer, got {n}")
    if n > n_max:
        raise ValueError(f"Hermite index {n} exceeds the stability budget n_max={n_max}")
    return ComplexSignal(grid, hermite_functions(int(n), grid.points)[-1])


def hermite_coefficients(f: ComplexSignal, n_max: int = N_MAX) -> tuple[np.ndarray, float]:
    """Coefficients ``<f, h_n>`` for ``n <= n_max`` and the relative truncation residual."""
    h = hermite_functions(n_max, f.t)
    a = f.grid.step * (h @ f.values)
    nf = f.norm()
    resid = f.values - a @ h
    r = math.sqrt(f.grid.step) * float(np.linalg.norm(resid)) / nf if nf > 0 else 0.0
    return a, r


def _frft_chirp(f: ComplexSignal, theta: float) -> ComplexSignal:
    s, c = math.sin(theta), math.cos(theta)
    cot = c / s
    t = f.t
    chirp = np.exp(1j * np.pi * cot * t * t)
    inner = f.with_values(chirp * f.values)
    amp = np.sqrt(1 - 1j * cot)
    vals = amp * chirp * fourier_at(inner, t / s)
    return f.with_values(vals)


def frft(f: ComplexSignal, theta, method: str = "hermite", n_max: int = N_MAX,
         reduce: bool = True) -> ComplexSignal:
    """Fractional Fourier transform of order ``theta`` on ``f``'s own grid.

    ``hermite`` expands in the first ``n_max + 1`` Hermite functions (residual
    recorded in ``meta['hermite_residual']``). ``chirp`` uses the chirp-Fourier
    factorization, composed with an ordinary Fourier step when ``sin(theta)``
    is small; with ``reduce=False`` such angles raise instead.
    """
    theta = theta.theta if isinstance(theta, RotationAngle) else float(theta)
    if method == "hermite":
        a, resid = hermite_coefficients(f, n_max)
        n = np.arange(n_max + 1)
        vals = (np.exp(-1j * theta * n) * a) @ hermite_functions(n_max, f.t)
        out = f.with_values(vals)
        out.meta["hermite_residual"] = resid
        return out
    if method != "chirp":
        raise ValueError(f"unknown frft method {method!r}")
    ang = RotationAngle(theta)
    th = ang.reduced
    if not reduce:
        if not ang.chirp_safe:
            raise ValueError(f"chirp factorization unstable at theta={theta:g} (|sin theta| < 0.1)")
        return _frft_chirp(f, th)
    if th == 0.0:
        return f.with_values(f.values)
    if abs(math.sin(th)) >= 0.5:
        return _frft_chirp(f, th)
    # near 0 or pi: F_theta = F_{theta - pi/2} F_{pi/2}
    return _frft_chirp(fourier_on_grid(f), th - math.pi / 2)
