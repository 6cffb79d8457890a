"""Exact spectrogram expansions for the Gaussian shift-invariant space.

For ``f = sum_k c_k phi(. - beta k)``::

    |Gf(x,w)|^2 = sum_{j,k} c_k conj(c_j) a(j,k,beta) M_{beta(j-k)/2} phi(w) T_{beta(j+k)/2} phi(x)

with ``a(j,k,beta) = exp(-pi beta^2 (k-j)^2 / 4) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .signals import CompactClassSpec, ComplexSignal, SisSpec, gaussian
from .transforms import fourier_grid


class ConsistencyError(RuntimeError):
    """Internal identity violated beyond tolerance."""


def a_coeff(j, k, beta: float):
    d = np.asarray(k) - np.asarray(j)
    out = 0.5 * np.exp(-np.pi * beta * beta * d * d / 4.0)
    return out if np.ndim(out) else float(out)


def spectrogram_sis_closed(spec: SisSpec, x, w, imag_tol: float = 1e-12):
    """``|Gf(x, w)|^2`` from the closed-form double sum (vectorized over x, w)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    x, w = np.broadcast_arrays(x, w)
    vals, resid = kernels.sis_spectrogram(spec.coeffs, spec.k_min, spec.beta, x.ravel(), w.ravel())
    scale = max(1.0, float(np.sum(np.abs(spec.coeffs))) ** 2)
    if resid > imag_tol * scale:
        raise ConsistencyError(f"imaginary residue {resid:.3e} in closed-form spectrogram")
    vals = vals.reshape(x.shape)
    return vals if vals.ndim else float(vals)


@dataclass(frozen=True)
class SliceCoeffs:
    """Slice expansions at a fixed frequency (``A``) or a fixed time (``B``).

    ``A[i]`` and ``B[i]`` belong to index ``n = n_min + i``.
    """

    beta: float
    n_min: int
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    omega: float | None = None
    x: float | None = None

    @property
    def n(self) -> np.ndarray:
        size = len(self.A) if self.A is not None else len(self.B)
        return self.n_min + np.arange(size)

    def time_slice(self, x):
        """``sum_n A_n phi(x - beta n / 2)`` (needs ``A``)."""
        x = np.asarray(x, dtype=float)
        return np.tensordot(gaussian(x[..., None] - self.beta * self.n / 2.0), self.A, axes=(-1, 0)).real

    def freq_slice(self, w):
        """``sum_n B_n e^{pi i beta n w} phi(w)`` (needs ``B``)."""
        w = np.asarray(w, dtype=float)
        ph = np.exp(1j * np.pi * self.beta * w[..., None] * self.n)
        return (np.tensordot(ph, self.B, axes=(-1, 0)) * gaussian(w)).real

    def ratio(self, w):
        """``sum_n B_n e^{pi i beta n w}``: the spectrogram divided by ``phi(w)``."""
        w = np.asarray(w, dtype=float)
        ph = np.exp(1j * np.pi * self.beta * w[..., None] * self.n)
        return np.tensordot(ph, self.B, axes=(-1, 0)).real


def slice_coeffs(spec: SisSpec, omega: float | None = None, x: float | None = None) -> SliceCoeffs:
    """Coefficients ``A_n`` (fixed ``omega``) or ``B_n`` (fixed ``x``)."""
    if (omega is None) == (x is None):
        raise ValueError("fix exactly one of omega, x")
    c = spec.coeffs
    m = len(c)
    beta = spec.beta
    idx = spec.indices
    j = idx[:, None]
    k = idx[None, :]
    prod = c[None, :] * np.conj(c[:, None]) * a_coeff(j, k, beta)   # [j, k]
    A = B = None
    if omega is not None:
        mod = np.exp(1j * np.pi * beta * (j - k) * omega) * math.exp(-math.pi * omega * omega)
        A = np.zeros(2 * m - 1, dtype=complex)
        np.add.at(A, (j + k - 2 * spec.k_min).ravel(), (prod * mod).ravel())
        A = A.real  # conjugate pairs (j,k),(k,j) cancel the imaginary parts
    if x is not None:
        tr = gaussian(x - beta * (j + k) / 2.0)
        B = np.zeros(2 * m - 1, dtype=complex)
        np.add.at(B, (j - k + (m - 1)).ravel(), (prod * tr).ravel())
    n_min = 2 * spec.k_min if omega is not None else -(m - 1)
    return SliceCoeffs(beta, n_min, A=A, B=B, omega=omega, x=x)


def periodized_ratio(spec: SisSpec, x, w):
    """``|Gf(x,w)|^2 / phi(w)``, a ``2/beta``-periodic function of ``w``.

    Evaluated from the fixed-``x`` expansion, so no division by the underflowing
    ``phi(w)`` happens for large ``|w|``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    x, w = np.broadcast_arrays(x, w)
    out = np.empty(x.shape)
    for i in np.ndindex(x.shape):
        out[i] = slice_coeffs(spec, x=float(x[i])).ratio(float(w[i]))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BandReport:
    x: float
    band: float
    out_of_band: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.out_of_band < self.tol


def freq_band_check(f: ComplexSignal, cls: CompactClassSpec, x: float, tol: float = 1e-9) -> BandReport:
    """Fourier mass of ``w -> |Gf(x,w)|^2`` outside ``[-c, c]``, relative to the total.

    The slice is sampled on the DFT frequency grid of a zero-padded copy of
    ``f * T_x phi`` and transformed back over ``w``; the padding keeps the lag
    range free of wrap-around.
    """
    grid = f.grid
    n = grid.count
    q = f.values * gaussian(grid.points - x)
    if not np.any(q):
        return BandReport(x, cls.c, 0.0, tol)
    padded = ComplexSignal(type(grid)(grid.start, grid.step, 2 * n), np.concatenate([q, np.zeros(n)]))
    with np.errstate(all="ignore"):
        spec = fourier_grid(padded)
    slice_vals = np.abs(spec.values) ** 2
    # back to the lag variable: the DFT of the sampled slice
    lag_vals = np.fft.fftshift(np.fft.ifft(np.fft.ifftshift(slice_vals))) * spec.grid.step * spec.grid.count
    lags = (np.arange(2 * n) - n) * grid.step
    mass = np.abs(lag_vals) ** 2
    total = float(mass.sum())
    out = float(mass[np.abs(lags) > cls.c + 1e-9 * grid.step].sum()) / total
    return BandReport(x, cls.c, out, tol)
