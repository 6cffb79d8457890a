"""Pure-numpy kernels; same signatures as the compiled ``_ckernels``."""
import numpy as np

NAME = "python"
_CHUNK = 4096


def gabor_design(t0, dt, n, xs, ws, radius=6.0):
    """Matrix ``W[i, m] = phi(t_m - x_i) exp(-2 pi i t_m w_i) dt``."""
    xs = np.ascontiguousarray(xs, dtype=float)
    ws = np.ascontiguousarray(ws, dtype=float)
    t = t0 + dt * np.arange(n)
    out = np.zeros((xs.size, n), dtype=complex)
    for a in range(0, xs.size, _CHUNK):
        b = a + _CHUNK
        d = t[None, :] - xs[a:b, None]
        g = np.exp(-np.pi * d * d)
        g[np.abs(d) > radius] = 0.0
        out[a:b] = g * np.exp(-2j * np.pi * t[None, :] * ws[a:b, None]) * dt
    return out


def gabor_points(t0, dt, values, xs, ws, radius=6.0):
    """Quadrature of the Gabor transform at scattered points ``(xs[i], ws[i])``."""
    values = np.ascontiguousarray(values, dtype=complex)
    xs = np.ascontiguousarray(xs, dtype=float)
    ws = np.ascontiguousarray(ws, dtype=float)
    out = np.empty(xs.size, dtype=complex)
    for a in range(0, xs.size, _CHUNK):
        b = a + _CHUNK
        out[a:b] = gabor_design(t0, dt, values.size, xs[a:b], ws[a:b], radius) @ values
    return out


def sis_spectrogram(coeffs, k_min, beta, xs, ws):
    """Closed-form double sum for ``|Gf|^2``; returns (values, max |imag| residue)."""
    c = np.ascontiguousarray(coeffs, dtype=complex)
    xs = np.ascontiguousarray(xs, dtype=float)
    ws = np.ascontiguousarray(ws, dtype=float)
    m = c.size
    idx = k_min + np.arange(m)
    j = idx[:, None]
    k = idx[None, :]
    gram = c[None, :] * np.conj(c[:, None])          # [j, k] -> c_k conj(c_j)
    amp = 0.5 * np.exp(-np.pi * beta * beta * (k - j) ** 2 / 4.0) * gram
    diff = (j - k).ravel().astype(float)
    mid = (beta * (j + k) / 2.0).ravel()
    amp = amp.ravel()
    keep = amp != 0
    diff, mid, amp = diff[keep], mid[keep], amp[keep]
    vals = np.empty(xs.size)
    resid = 0.0
    for a in range(0, xs.size, _CHUNK):
        b = a + _CHUNK
        x = xs[a:b, None]
        w = ws[a:b, None]
        terms = amp[None, :] * np.exp(1j * np.pi * beta * diff[None, :] * w
                                      - np.pi * w * w - np.pi * (x - mid[None, :]) ** 2)
        s = terms.sum(axis=1)
        vals[a:b] = s.real
        if s.size:
            resid = max(resid, float(np.max(np.abs(s.imag))))
    return vals, resid
