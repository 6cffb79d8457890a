"""Recovery of signals up to a global phase from lattice spectrogram samples.

Two pipelines:

* compact support: cardinal-series interpolation of each frequency slice,
  Fourier transform of the slices (giving correlations of
  ``f_tau = T_tau f * conj(f)`` against Gaussian translates), regularized
  inversion per lag, phase propagation from an anchor, then a least-squares
  polish of the estimate against the raw samples;
* Gaussian shift-invariant space: a linear fit of the lifted Gram matrix
  ``G[j, k] = c_k conj(c_j)``, rank-one completion, PSD projection and leading
  eigenpair, then the same polish on the coefficients.

Samples always hold squared moduli ``|Gf|^2``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import least_squares

from ._backend import kernels
from .sampling import SamplingSet, SequenceDescriptor
from .signals import CompactClassSpec, ComplexSignal, Grid, SisSpec, canonical_phase, gaussian
from .spectrogram import a_coeff, spectrogram_sis_closed
from .transforms import frft, rotate_points

SQRT_HALF = 1.0 / math.sqrt(2.0)


class ReconstructionError(RuntimeError):
    pass


class NoPhaseAnchorError(ReconstructionError):
    pass


class RankDeficientDesign(ReconstructionError):
    pass


class InconsistentMeasurements(ReconstructionError):
    pass


# samples -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectrogramSamples:
    """Squared Gabor moduli ``|Gf|^2`` on the points of a sampling set."""

    set: SamplingSet
    values: np.ndarray
    noise_sigma: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.shape[0] != len(self.set):
            raise ValueError(f"{v.shape[0]} values for {len(self.set)} points")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("spectrogram samples must be finite and nonnegative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_modulus(cls, X: SamplingSet, modulus, noise_sigma=None) -> "SpectrogramSamples":
        """Ingest ``|Gf|`` (squared on the way in)."""
        m = np.asarray(modulus, dtype=float)
        return cls(X, m * m, noise_sigma)

    def grid_values(self) -> np.ndarray:
        """Values as an array indexed ``[x-node, w-node]``."""
        out = np.empty((self.set.x_values.size, self.set.w_values.size))
        out[self.set.ix, self.set.iw] = self.values
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "omega", "value"])
        for (x, om), v in zip(self.set.points, self.values):
            w.writerow([repr(float(x)), repr(float(om)), repr(float(v))])
        return buf.getvalue()

    def metadata(self, **extra) -> dict:
        d = {"schema_version": 1, "set": self.set.to_dict(), "noise_sigma": self.noise_sigma}
        d.update(extra)
        return d

    @classmethod
    def from_csv(cls, text: str, X: SamplingSet, squared: bool = True) -> "SpectrogramSamples":
        """Read ``x,omega,value`` rows; rows must match ``X.points`` in order."""
        rows = list(csv.DictReader(io.StringIO(text)))
        pts = np.array([[float(r["x"]), float(r["omega"])] for r in rows]).reshape(-1, 2)
        if pts.shape != X.points.shape or not np.allclose(pts, X.points, rtol=0, atol=1e-9):
            raise ValueError("sample points do not match the sampling set")
        vals = np.array([float(r["value"]) for r in rows])
        return cls(X, vals) if squared else cls.from_modulus(X, vals)


def sample_spectrogram(f: ComplexSignal, X: SamplingSet, canonical_bits: int | None = 36,
                       noise_sigma: float | None = None, seed: int | None = None) -> SpectrogramSamples:
    """Quadrature samples ``|Gf|^2`` on ``X``.

    The signal is first brought to a canonical global phase and snapped to a
    ``2^-canonical_bits`` relative grid, so ``f`` and ``e^{i a} f`` give the
    same bits. Optional additive Gaussian noise on the squared values, clipped
    at 0.
    """
    vals = canonical_phase(f.values, canonical_bits)
    g = f.grid
    pts = X.points
    gf = kernels.gabor_points(g.start, g.step, vals, pts[:, 0], pts[:, 1])
    s = gf.real ** 2 + gf.imag ** 2
    return SpectrogramSamples(X, _add_noise(s, noise_sigma, seed), noise_sigma)


def sample_sis(spec: SisSpec, X: SamplingSet, canonical_bits: int | None = 36,
               noise_sigma: float | None = None, seed: int | None = None) -> SpectrogramSamples:
    """Closed-form samples ``|Gf|^2`` on ``X`` for ``f`` in the shift-invariant space."""
    c = canonical_phase(spec.coeffs, canonical_bits)
    pts = X.points
    s = spectrogram_sis_closed(spec.with_coeffs(c), pts[:, 0], pts[:, 1])
    s = np.maximum(np.atleast_1d(s), 0.0)
    return SpectrogramSamples(X, _add_noise(s, noise_sigma, seed), noise_sigma)


def _add_noise(s, sigma, seed):
    if not sigma:
        return s
    rng = np.random.default_rng(seed)
    return np.maximum(s + sigma * rng.standard_normal(s.shape), 0.0)


# cardinal series -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CardinalSeries:
    """``g(w) = sum_k g_k sinc((w - w_k)/h)`` through samples on ``w_k = start + k h``."""

    start: float
    step: float
    values: np.ndarray
    x: float = math.nan

    @classmethod
    def from_nodes(cls, nodes, values, x: float = math.nan) -> "CardinalSeries":
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(nodes)
        nodes, values = nodes[order], values[order]
        if nodes.size > 1:
            h = (nodes[-1] - nodes[0]) / (nodes.size - 1)
            if np.max(np.abs(np.diff(nodes) - h)) > 1e-9 * h:
                raise ValueError("cardinal series needs equispaced nodes")
        else:
            h = 1.0
        return cls(float(nodes[0]), float(h), values, x)

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.values.size)

    @property
    def band(self) -> float:
        """Half-width ``1/(2h)`` of the lag band the series represents."""
        return 0.5 / self.step

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        out = np.tensordot(np.sinc((w[..., None] - self.nodes) / self.step), self.values, axes=(-1, 0))
        return out if out.ndim else float(out)

    def edge_ratio(self) -> float:
        peak = np.max(np.abs(self.values)) if self.values.size else 0.0
        if peak == 0:
            return 0.0
        return float(max(abs(self.values[0]), abs(self.values[-1])) / peak)

    def fourier(self, tau):
        """Exact Fourier transform of the series (zero outside the band)."""
        tau = np.asarray(tau, dtype=float)
        ph = np.exp(-2j * np.pi * tau[..., None] * self.nodes)
        out = self.step * np.tensordot(ph, self.values, axes=(-1, 0))
        out = np.where(np.abs(tau) < self.band, out, 0.0)
        return out if out.ndim else complex(out)


class InterpValue(NamedTuple):
    value: float
    edge_bound: float
    edge_warning: bool


def shannon_interpolate(values, nodes, omega: float, c: float, decay_tol: float = 1e-8) -> InterpValue:
    """Cardinal-series value at ``omega`` from samples on ``(2c)^{-1} Z`` (truncated).

    ``edge_bound`` is the largest edge sample relative to the peak; above
    ``decay_tol`` the truncation is flagged.
    """
    series = CardinalSeries.from_nodes(nodes, values)
    if series.step > 1.0 / (2 * c) * (1 + 1e-12):
        raise ValueError(f"node step {series.step:g} exceeds the Nyquist step {1 / (2 * c):g}")
    edge = series.edge_ratio()
    return InterpValue(float(series(omega)), edge, edge > decay_tol)


def freq_correlation(series: CardinalSeries, omega):
    """Fourier transform of the interpolated slice ``w -> |Gf(x, w)|^2`` at lag ``omega``.

    Equals ``<f_omega, T_x phi_omega>`` with ``f_omega = T_omega f * conj(f)`` and
    ``phi_omega = T_omega phi * phi``.
    """
    return series.fourier(omega)


# translate inversion ---------------------------------------------------------

@dataclass(frozen=True)
class RegConfig:
    """Tikhonov weight ``lam = lam_rel * s_max^2`` plus a truncated-SVD cutoff."""

    lam_rel: float = 1e-10
    tsvd_rel: float = 1e-12
    cond_refuse: float = 1e15


class TranslateInversion(NamedTuple):
    u: ComplexSignal
    cond: float
    residual: float


def lag_window(lag: float, t):
    """``phi_lag(t) = phi(t - lag) phi(t) = e^{-pi lag^2/2} e^{-2 pi (t - lag/2)^2}``."""
    return math.exp(-math.pi * lag * lag / 2) * np.exp(-2 * np.pi * np.square(np.asarray(t) - lag / 2))


def _support_grid(lo: float, hi: float, step: float) -> np.ndarray:
    i0 = math.ceil(lo / step - 1e-9)
    i1 = math.floor(hi / step + 1e-9)
    return step * np.arange(i0, i1 + 1)


def invert_gaussian_translates(nodes, correlations, omega: float, support: tuple[float, float],
                               reg: RegConfig = RegConfig(), step: float = 1.0 / 64) -> TranslateInversion:
    """Regularized solution of ``<u, T_{x_n} phi_omega> = corr_n`` for ``u`` on ``support``.

    Minimizes ``sum_n |<u, T_{x_n} phi_omega> - corr_n|^2 + lam ||u||^2`` over
    grid functions on ``support`` (inner products are step-weighted sums).
    """
    nodes = np.asarray(nodes, dtype=float)
    b = np.asarray(correlations, dtype=complex)
    t = _support_grid(support[0], support[1], step)
    if t.size == 0:
        raise ValueError(f"support {support} contains no grid point")
    A = lag_window(omega, t[None, :] - nodes[:, None]) * step
    return _tikhonov(A, b, t, step, reg)


def _tikhonov(A, b, t, step, reg: RegConfig) -> TranslateInversion:
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    grid = Grid(float(t[0]), step, t.size)
    if s.size == 0 or s[0] == 0:
        return TranslateInversion(ComplexSignal(grid, np.zeros(t.size)), math.inf, 0.0)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    lam = reg.lam_rel * s[0] ** 2
    if lam == 0 and cond > reg.cond_refuse:
        raise ReconstructionError(f"translate system condition {cond:.2e} too large for lam=0; use lam > 0")
    keep = s > reg.tsvd_rel * s[0]
    # the L^2 penalty lam*||u||^2 = lam*step*sum|u_i|^2
    filt = np.where(keep, s / (s * s + lam * step), 0.0)
    u = Vh.conj().T @ (filt * (U.conj().T @ b))
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(A @ u - b) / nb) if nb > 0 else 0.0
    return TranslateInversion(ComplexSignal(grid, u), cond, res)


# diagnostics ---------------------------------------------------------------

@dataclass
class ReconDiagnostics:
    residual: float = 0.0
    pipeline_residual: float | None = None
    condition_estimates: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phase_anchor: float | None = None
    rank1_gap: float | None = None
    edge_warning: bool = False
    nfev: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        ce = np.asarray(self.condition_estimates, dtype=float)
        return {
            "residual": self.residual,
            "pipeline_residual": self.pipeline_residual,
            "condition_max": float(ce.max()) if ce.size else None,
            "condition_median": float(np.median(ce)) if ce.size else None,
            "phase_anchor": self.phase_anchor,
            "rank1_gap": self.rank1_gap,
            "edge_warning": self.edge_warning,
            "nfev": self.nfev,
            "notes": list(self.notes),
        }


# modulus-squared least squares ---------------------------------------------

def _rel_misfit(W, a, S) -> float:
    g = W @ a
    ns = np.linalg.norm(S)
    r = g.real ** 2 + g.imag ** 2 - S
    return float(np.linalg.norm(r) / ns) if ns > 0 else float(np.linalg.norm(r))


def _polish(W, S, a0, ridge: float = 0.0, weights=None, max_nfev: int = 300):
    """Gauss-Newton (trust region) fit of ``|W a|^2 = S`` from ``a0``."""
    K = W.shape[1]
    scale = np.linalg.norm(S) or 1.0
    wts = np.zeros(K) if weights is None else math.sqrt(ridge) * np.asarray(weights, dtype=float)
    use_ridge = ridge > 0 and weights is not None

    def res(v):
        a = v[:K] + 1j * v[K:]
        g = W @ a
        r = (g.real ** 2 + g.imag ** 2 - S) / scale
        if use_ridge:
            return np.concatenate([r, wts * a.real, wts * a.imag])
        return r

    def jac(v):
        a = v[:K] + 1j * v[K:]
        cg = np.conj(W @ a)[:, None]
        J = np.hstack([2 * (cg * W).real, -2 * (cg * W).imag]) / scale
        if use_ridge:
            z = np.zeros((K, K))
            J = np.vstack([J, np.hstack([np.diag(wts), z]), np.hstack([z, np.diag(wts)])])
        return J

    sol = least_squares(res, np.concatenate([a0.real, a0.imag]), jac=jac, method="trf",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev)
    return sol.x[:K] + 1j * sol.x[K:], int(sol.nfev)


# compact support -------------------------------------------------------------

@dataclass(frozen=True)
class CompactConfig:
    reg: RegConfig = RegConfig()
    step: float = 1.0 / 64
    output_grid: Grid | None = None
    propagation: str = "anchor"          # anchor | tree | average
    n_anchors: int = 4
    modulus_from_f0: bool = True
    tree_hop: float | None = None        # default c / 4
    tree_floor: float = 1e-4
    refine: bool = True
    degrees: tuple = (4, 8, 12, 16, 20)
    ridge: float = 1e-12
    max_nfev: int = 300
    energy_band: float = 2.0
    decay_tol: float = 1e-8
    unrotate_method: str = "chirp"


def _affine_nodes(seq: SequenceDescriptor) -> bool:
    return seq.kind in ("affine", "half_line")


def reconstruct_compact(samples: SpectrogramSamples, cls: CompactClassSpec, theta=None,
                        cfg: CompactConfig = CompactConfig()):
    """Recover ``f`` (support in ``[-c/2, c/2]``) up to a global phase.

    With ``theta`` (or a rotated sampling set) the samples are read as samples
    of ``F_theta f`` on the unrotated lattice and the result is rotated back.
    Returns ``(signal, diagnostics)``.
    """
    X = samples.set
    if theta is None:
        theta = X.theta
    theta = float(getattr(theta, "theta", theta))
    if not _affine_nodes(X.w_seq):
        raise ValueError("compact pipeline needs equispaced frequency nodes")
    diag = ReconDiagnostics()
    half = cls.c / 2
    step = cfg.step
    out_grid = cfg.output_grid or cls.default_grid(step)
    ts = _support_grid(-half, half, step)
    xv = X.x_values
    wv = X.w_values
    S = samples.grid_values()
    if not np.any(S > 0):
        diag.notes.append("all samples vanish")
        return ComplexSignal(out_grid, np.zeros(out_grid.count)), diag

    series = [CardinalSeries.from_nodes(wv, S[n], x=float(xv[n])) for n in range(xv.size)]
    h = series[0].step
    if h > 1 / (2 * cls.c) * (1 + 1e-12):
        diag.notes.append(f"frequency step {h:g} exceeds the Nyquist step {1 / (2 * cls.c):g}")
    diag.edge_warning = any(s.edge_ratio() > cfg.decay_tol for s in series)

    # correlations for every needed lag, one matrix product
    nodes = series[0].nodes
    Sg = np.array([s.values for s in series])

    def correlations(lag):
        # freq_correlation for every x-node at once
        if abs(lag) >= 0.5 / h:
            return np.zeros(len(series), dtype=complex)
        return h * (Sg @ np.exp(-2j * np.pi * lag * nodes))

    conds = []

    def f_lag(lag):
        lo, hi = max(-half, lag - half), min(half, lag + half)
        inv = invert_gaussian_translates(xv, correlations(lag), lag, (lo, hi), cfg.reg, step)
        conds.append(inv.cond)
        return inv.u

    u0 = f_lag(0.0)
    f0 = np.zeros(ts.size)
    f0[_positions(ts, u0.t)] = np.maximum(u0.values.real, 0.0)
    p_idx = int(np.argmax(f0))
    if f0[p_idx] <= 0:
        raise NoPhaseAnchorError("no valid phase anchor: reconstructed |f|^2 vanishes")
    p = float(ts[p_idx])
    diag.phase_anchor = p
    fp = math.sqrt(f0[p_idx])

    def from_anchor(q):
        fq = math.sqrt(f0[q])
        return np.array([np.conj(_value_at(f_lag(float(t - ts[q])), t)) / fq for t in ts])

    if cfg.propagation == "anchor":
        est = from_anchor(p_idx)
    elif cfg.propagation == "average":
        # several anchors, each aligned to the first before averaging
        anchors = np.argsort(-f0, kind="stable")[:max(1, cfg.n_anchors)]
        est = from_anchor(int(anchors[0]))
        acc = est.copy()
        for q in anchors[1:]:
            e = from_anchor(int(q))
            ph = np.vdot(e, est)
            acc += e * (ph / abs(ph) if ph != 0 else 1.0)
        est = acc / len(anchors)
    elif cfg.propagation == "tree":
        est = _tree_propagate(ts, f0, p_idx, fp, f_lag, cfg.tree_hop or cls.c / 4, cfg.tree_floor)
    else:
        raise ValueError(f"unknown propagation {cfg.propagation!r}")
    diag.condition_estimates = np.array(conds)
    if cfg.modulus_from_f0:
        # |f|^2 = f_0 comes from the best-conditioned lag; keep only phases from the rest
        est = np.sqrt(f0) * np.exp(1j * np.angle(est))

    z = rotate_points(X.points, -theta) if theta else X.points
    W = kernels.gabor_design(float(ts[0]), step, ts.size, z[:, 0], z[:, 1])
    Sv = samples.values
    diag.pipeline_residual = _rel_misfit(W, est, Sv)
    cur = est
    if cfg.refine:
        s = ts / half
        # energy from f_0 = |f|^2; stages that drift from it are fitting invisible content
        energy = math.sqrt(step * float(f0.sum()))
        for D in cfg.degrees:
            B = legendre.legvander(s, D)
            a0 = np.linalg.lstsq(B, cur, rcond=None)[0]
            wts = (np.arange(D + 1) / (D + 1)) ** 2
            a, nfev = _polish(W @ B, Sv, a0, cfg.ridge, wts, cfg.max_nfev)
            diag.nfev += nfev
            nxt = B @ a
            ratio = math.sqrt(step) * float(np.linalg.norm(nxt)) / energy
            if not 1 / cfg.energy_band <= ratio <= cfg.energy_band:
                diag.notes.append(f"refinement stopped at degree {D}: norm ratio {ratio:.3g}")
                break
            cur = nxt
    diag.residual = _rel_misfit(W, cur, Sv)

    vals = np.zeros(out_grid.count, dtype=complex)
    vals[[out_grid.index_of(t) for t in ts]] = cur
    g = ComplexSignal(out_grid, vals, {"class": "compact", "c": cls.c})
    if theta:
        g = frft(g, -theta, method=cfg.unrotate_method)
    return g, diag


def _positions(ts, sub):
    return np.rint((np.asarray(sub) - ts[0]) / (ts[1] - ts[0] if ts.size > 1 else 1.0)).astype(int)


def _value_at(u: ComplexSignal, t: float) -> complex:
    i = int(round((t - u.grid.start) / u.grid.step))
    if not 0 <= i < u.grid.count:
        return 0.0
    return complex(u.values[i])


def _tree_propagate(ts, f0, p_idx, fp, f_lag, hop, floor):
    """Propagate phases outward from the anchor along strong edges.

    An edge ``(t, s)`` is strong when ``f0(t) f0(s) >= floor * max(f0)^2``; each
    point takes its phase from the strongest assigned neighbour within ``hop``
    and falls back to the anchor when there is none.
    """
    est = np.zeros(ts.size, dtype=complex)
    est[p_idx] = fp
    top = f0.max() ** 2
    assigned = np.zeros(ts.size, dtype=bool)
    assigned[p_idx] = True
    order = np.argsort(np.abs(ts - ts[p_idx]), kind="stable")
    for i in order:
        if assigned[i]:
            continue
        cand = np.where(assigned & (np.abs(ts - ts[i]) <= hop + 1e-12) & (f0 * f0[i] >= floor * top))[0]
        parent = int(cand[np.argmax(f0[cand])]) if cand.size else p_idx
        u = f_lag(float(ts[i] - ts[parent]))
        est[i] = np.conj(_value_at(u, ts[i]) / est[parent]) if est[parent] != 0 else 0.0
        assigned[i] = True
    return est


# shift-invariant space -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LiftedGram:
    """Fitted ``G[j, k] ~ c_k conj(c_j)``; entries outside the fitted band are NaN."""

    G: np.ndarray
    k_min: int
    band: int
    residual: float
    condition: float

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.G)

    @property
    def size(self) -> int:
        return self.G.shape[0]


def visible_band(beta: float, m: int, visibility: float = 1e-4) -> int:
    """Largest ``|j - k|`` whose weight ``exp(-pi beta^2 d^2 / 4)`` stays above ``visibility``."""
    d = int(math.floor(math.sqrt(-4 * math.log(visibility) / (math.pi * beta * beta))))
    return max(0, min(m - 1, d))


def _lift_design(pts, beta, k_min, m, band):
    x = pts[:, 0][:, None]
    w = pts[:, 1][:, None]
    cols = []
    pairs = []
    for d in range(band + 1):
        for k in range(m - d):
            j = k + d
            jj, kk = j + k_min, k + k_min
            e = (a_coeff(jj, kk, beta) * np.exp(1j * np.pi * beta * d * w[:, 0] - np.pi * w[:, 0] ** 2)
                 * gaussian(x[:, 0] - beta * (jj + kk) / 2.0))
            if d == 0:
                cols.append(e.real)
                pairs.append((j, k, "re"))
            else:
                cols.append(2 * e.real)
                pairs.append((j, k, "re"))
                cols.append(-2 * e.imag)
                pairs.append((j, k, "im"))
    return np.column_stack(cols), pairs


def _lift(pts, vals, beta, index_range, band=None, visibility=1e-4, cond_max=1e12) -> LiftedGram:
    k_min, k_max = int(index_range[0]), int(index_range[1])
    m = k_max - k_min + 1
    if m < 1:
        raise ValueError("empty index range")
    if band is None:
        band = visible_band(beta, m, visibility)
    A, pairs = _lift_design(pts, beta, k_min, m, band)
    if A.shape[0] < A.shape[1]:
        raise RankDeficientDesign(f"{A.shape[0]} samples for {A.shape[1]} real unknowns; use a denser sampling set")
    G = np.full((m, m), np.nan, dtype=complex)
    for d in range(band + 1):
        for k in range(m - d):
            G[k + d, k] = 0.0
            G[k, k + d] = 0.0
    if not np.any(vals):
        return LiftedGram(G, k_min, band, 0.0, 1.0)
    norms = np.linalg.norm(A, axis=0)
    As = A / np.where(norms > 0, norms, 1.0)
    U, s, Vh = np.linalg.svd(As, full_matrices=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    if cond > cond_max:
        raise RankDeficientDesign(f"lifted design condition {cond:.2e} > {cond_max:.0e}; use a denser sampling set")
    sol = (Vh.T @ ((U.T @ vals) / s)) / np.where(norms > 0, norms, 1.0)
    for (j, k, part), v in zip(pairs, sol):
        if part == "re":
            G[j, k] = v + 1j * G[j, k].imag
        else:
            G[j, k] = G[j, k].real + 1j * v
    for d in range(1, band + 1):
        for k in range(m - d):
            G[k, k + d] = np.conj(G[k + d, k])
    nv = np.linalg.norm(vals)
    res = float(np.linalg.norm(A @ sol - vals) / nv)
    return LiftedGram(G, k_min, band, res, cond)


def lift_sis_fit(samples: SpectrogramSamples, beta: float, index_range, band: int | None = None,
                 visibility: float = 1e-4, cond_max: float = 1e12) -> LiftedGram:
    """Least-squares Hermitian ``G`` from samples, linear in the products ``c_k conj(c_j)``.

    Entries with ``|j - k| > band`` carry weights below ``visibility`` and are not
    fitted (NaN); the default band keeps every visible diagonal.
    """
    pts = _unrotated(samples.set)
    return _lift(pts, samples.values, float(beta), index_range, band, visibility, cond_max)


def _unrotated(X: SamplingSet) -> np.ndarray:
    return X.unrotated() if X.theta else X.points


def complete_rank1(lifted: LiftedGram) -> np.ndarray:
    """Fill unfitted entries by ``G[j,l] = G[j,k] G[k,l] / G[k,k]`` with the best pivot ``k``."""
    G = lifted.G.copy()
    m = G.shape[0]
    diag = np.real(np.diag(G))
    for d in range(lifted.band + 1, m):
        for l in range(m - d):
            j = l + d
            ks = np.arange(l + 1, j)
            ks = ks[~np.isnan(G[j, ks]) & ~np.isnan(G[ks, l])]
            if ks.size == 0 or np.max(diag[ks]) <= 0:
                G[j, l] = 0.0
            else:
                k = int(ks[np.argmax(diag[ks])])
                G[j, l] = G[j, k] * G[k, l] / diag[k]
            G[l, j] = np.conj(G[j, l])
    return G


@dataclass(frozen=True)
class SisConfig:
    band: int | None = None
    visibility: float = 1e-4
    cond_max: float = 1e12
    refine: bool = True
    max_nfev: int = 200
    gap_max: float = 0.5
    oob_passes: int = 1


def sis_design(pts, beta: float, index_range) -> np.ndarray:
    """``W[i, k] = e^{-2 pi i beta k w} G phi(x - beta k, w)`` so that ``Gf = W c``."""
    ks = np.arange(int(index_range[0]), int(index_range[1]) + 1)
    x = pts[:, 0][:, None] - beta * ks[None, :]
    w = pts[:, 1][:, None]
    return SQRT_HALF * np.exp(-2j * np.pi * beta * ks[None, :] * w - 1j * np.pi * x * w
                              - 0.5 * np.pi * (x * x + w * w))


def _normalize_phase(c: np.ndarray) -> np.ndarray:
    if not np.any(c):
        return c
    i = int(np.argmax(np.abs(c)))
    out = c * (np.conj(c[i]) / abs(c[i]))
    out[i] = abs(c[i])  # rounding can leave a stray imaginary ulp
    return out


def _band_samples(pts, beta, k_min, c, band):
    """Samples of the ``|j - k| <= band`` part of ``|Gf|^2`` for coefficients ``c``."""
    A, pairs = _lift_design(pts, beta, k_min, len(c), band)
    G = np.outer(np.conj(c), c)
    v = np.array([G[j, k].real if part == "re" else G[j, k].imag for j, k, part in pairs])
    return A @ v


def _leading_pair(lifted: LiftedGram):
    G = complete_rank1(lifted)
    G = (G + G.conj().T) / 2
    lam, V = np.linalg.eigh(G)
    return np.clip(lam, 0.0, None)[::-1], V[:, ::-1]


def _reconstruct_sis_points(pts, vals, beta, index_range, cfg: SisConfig):
    k_min = int(index_range[0])
    m = int(index_range[1]) - k_min + 1
    diag = ReconDiagnostics()
    lifted = _lift(pts, vals, beta, index_range, cfg.band, cfg.visibility, cfg.cond_max)
    diag.condition_estimates = np.array([lifted.condition])
    diag.pipeline_residual = lifted.residual
    if not np.any(vals):
        diag.rank1_gap = 0.0
        return SisSpec(beta, k_min, np.zeros(m)), diag
    W = sis_design(pts, beta, index_range)
    for p in range(cfg.oob_passes + 1):
        lam, V = _leading_pair(lifted)
        if lam[0] <= 0:
            diag.rank1_gap = 0.0
            diag.notes.append("leading eigenvalue is not positive")
            return SisSpec(beta, k_min, np.zeros(m)), diag
        gap = float(lam[1] / lam[0]) if m > 1 else 0.0
        diag.rank1_gap = gap
        if gap > cfg.gap_max:
            raise InconsistentMeasurements(f"measurements inconsistent with rank-1 model (gap {gap:.3g})")
        # G = conj(c) c^T, so the leading eigenvector is conj(c)
        c = math.sqrt(lam[0]) * np.conj(V[:, 0])
        if cfg.refine:
            c, nfev = _polish(W, vals, c, max_nfev=cfg.max_nfev)
            diag.nfev += nfev
        if p == cfg.oob_passes or lifted.band >= m - 1 or not cfg.refine:
            break
        # the faint diagonals left out of the linear fit, predicted from c
        g = W @ c
        oob = g.real ** 2 + g.imag ** 2 - _band_samples(pts, beta, k_min, c, lifted.band)
        lifted = _lift(pts, vals - oob, beta, index_range, lifted.band, cfg.visibility, cfg.cond_max)
    c = _normalize_phase(c)
    diag.residual = _rel_misfit(W, c, vals)
    return SisSpec(beta, k_min, c), diag


def reconstruct_sis(samples: SpectrogramSamples, beta: float, index_range, cfg: SisConfig = SisConfig()):
    """Recover the coefficients of ``f`` in the Gaussian shift-invariant space.

    Returns ``(spec, diagnostics)``; the largest-modulus coefficient is real
    positive and ``diagnostics.rank1_gap = lambda_2 / lambda_1`` of the
    completed Gram matrix.
    """
    return _reconstruct_sis_points(_unrotated(samples.set), samples.values, float(beta), index_range, cfg)


def reconstruct_periodic_gaussian(samples: SpectrogramSamples, period: float, index_range,
                                  grid: Grid | None = None, cfg: SisConfig = SisConfig()):
    """Recover ``f = phi * u`` with ``u(t) = sum_k c_k e^{2 pi i k t / period}``.

    The Fourier transform of ``f`` lies in the shift-invariant space with step
    ``1/period`` and ``|Gf(x, w)| = |G f^(w, -x)|``, so the samples are
    re-read at swapped points and handed to the shift-invariant pipeline.
    Returns ``(signal, fourier_spec, diagnostics)``.
    """
    pts = _unrotated(samples.set)
    swapped = np.column_stack([pts[:, 1], -pts[:, 0]])
    spec_hat, diag = _reconstruct_sis_points(swapped, samples.values, 1.0 / period, index_range, cfg)
    if grid is None:
        grid = Grid.centered(6.0)
    t = grid.points
    u = np.exp(2j * np.pi * np.outer(t, spec_hat.indices) / period) @ spec_hat.coeffs
    return ComplexSignal(grid, gaussian(t) * u), spec_hat, diag


def periodic_gaussian_signal(coeffs, period: float, k_min: int = 0, grid: Grid | None = None) -> ComplexSignal:
    """``phi(t) * sum_k c_k e^{2 pi i k t / period}`` sampled on ``grid``."""
    grid = grid or Grid.centered(6.0)
    t = grid.points
    ks = k_min + np.arange(len(coeffs))
    u = np.exp(2j * np.pi * np.outer(t, ks) / period) @ np.asarray(coeffs, dtype=complex)
    return ComplexSignal(grid, gaussian(t) * u)


def sis_samples_json(samples: SpectrogramSamples, **meta) -> str:
    return json.dumps(samples.metadata(**meta), sort_keys=True)
