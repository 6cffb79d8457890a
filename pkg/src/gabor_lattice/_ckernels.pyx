# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the quadrature and closed-form spectrogram loops."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, fabs, M_PI, floor, ceil

cnp.import_array()

NAME = "cython"


def gabor_design(double t0, double dt, Py_ssize_t n, xs, ws, double radius=6.0):
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(ws, dtype=np.float64)
    cdef Py_ssize_t p = x.shape[0]
    out = np.zeros((p, n), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t i, m, lo, hi
    cdef double t, d, g, ph
    with nogil:
        for i in range(p):
            lo = <Py_ssize_t>floor((x[i] - radius - t0) / dt)
            hi = <Py_ssize_t>ceil((x[i] + radius - t0) / dt)
            if lo < 0:
                lo = 0
            if hi > n - 1:
                hi = n - 1
            for m in range(lo, hi + 1):
                t = t0 + dt * m
                d = t - x[i]
                if fabs(d) > radius:
                    continue
                g = exp(-M_PI * d * d) * dt
                ph = -2.0 * M_PI * t * w[i]
                o[i, m] = g * cos(ph) + 1j * (g * sin(ph))
    return out


def gabor_points(double t0, double dt, values, xs, ws, double radius=6.0):
    cdef const double complex[::1] f = np.ascontiguousarray(values, dtype=np.complex128)
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(ws, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t p = x.shape[0]
    out = np.empty(p, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef Py_ssize_t i, m, lo, hi
    cdef double t, d, g, ph, re, im, cr, ci, sr, si, tmp
    with nogil:
        for i in range(p):
            lo = <Py_ssize_t>ceil((x[i] - radius - t0) / dt)
            hi = <Py_ssize_t>floor((x[i] + radius - t0) / dt)
            if lo < 0:
                lo = 0
            if hi > n - 1:
                hi = n - 1
            re = 0.0
            im = 0.0
            # e^{-2 pi i t w} advanced by a fixed rotation, resynced every 32 steps
            sr = cos(-2.0 * M_PI * dt * w[i])
            si = sin(-2.0 * M_PI * dt * w[i])
            cr = 1.0
            ci = 0.0
            for m in range(lo, hi + 1):
                t = t0 + dt * m
                if (m - lo) % 32 == 0:
                    ph = -2.0 * M_PI * t * w[i]
                    cr = cos(ph)
                    ci = sin(ph)
                d = t - x[i]
                g = exp(-M_PI * d * d) * dt
                re += g * (f[m].real * cr - f[m].imag * ci)
                im += g * (f[m].real * ci + f[m].imag * cr)
                tmp = cr * sr - ci * si
                ci = cr * si + ci * sr
                cr = tmp
            o[i] = re + 1j * im
    return out


def sis_spectrogram(coeffs, long k_min, double beta, xs, ws):
    cdef const double complex[::1] c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] w = np.ascontiguousarray(ws, dtype=np.float64)
    cdef Py_ssize_t m = c.shape[0]
    cdef Py_ssize_t p = x.shape[0]
    vals = np.empty(p, dtype=np.float64)
    cdef double[::1] v = vals
    # pair tables: amplitude c_k conj(c_j) a(j,k,beta), frequency shift, center
    cdef Py_ssize_t npair = 0
    pa = np.empty(m * m, dtype=np.complex128)
    pd = np.empty(m * m, dtype=np.float64)
    pc = np.empty(m * m, dtype=np.float64)
    cdef double complex[::1] amp = pa
    cdef double[::1] dif = pd
    cdef double[::1] mid = pc
    psum = np.empty(m * m, dtype=np.intp)
    cdef Py_ssize_t[::1] sumjk = psum
    cdef Py_ssize_t j, k, i, q
    cdef double complex prod
    for j in range(m):
        for k in range(m):
            prod = c[k] * (c[j].real - 1j * c[j].imag)
            if prod.real == 0.0 and prod.imag == 0.0:
                continue
            amp[npair] = 0.5 * exp(-M_PI * beta * beta * (k - j) * (k - j) / 4.0) * prod
            dif[npair] = <double>(j - k)
            mid[npair] = beta * (2 * k_min + j + k) / 2.0
            sumjk[npair] = j + k
            npair += 1
    # per point: phases e^{i pi beta d w} for d = -(m-1)..(m-1) and Gaussians at the 2m-1 centers
    cdef Py_ssize_t nd = 2 * m - 1
    cdef Py_ssize_t di, ci_
    tab_c = np.empty(nd, dtype=np.float64)
    tab_s = np.empty(nd, dtype=np.float64)
    tab_g = np.empty(nd, dtype=np.float64)
    cdef double[::1] pcos = tab_c
    cdef double[::1] psin = tab_s
    cdef double[::1] gx = tab_g
    pdi = np.empty(max(npair, 1), dtype=np.intp)
    pci = np.empty(max(npair, 1), dtype=np.intp)
    cdef Py_ssize_t[::1] qd = pdi
    cdef Py_ssize_t[::1] qc = pci
    for q in range(npair):
        qd[q] = <Py_ssize_t>dif[q] + m - 1
        qc[q] = <Py_ssize_t>sumjk[q]
    cdef double re, im, ph, env, xi, wi, dd, resid = 0.0
    with nogil:
        for i in range(p):
            xi = x[i]
            wi = w[i]
            env = exp(-M_PI * wi * wi)
            for di in range(nd):
                ph = M_PI * beta * (di - (m - 1)) * wi
                pcos[di] = cos(ph)
                psin[di] = sin(ph)
                dd = xi - beta * (2 * k_min + di) / 2.0
                gx[di] = env * exp(-M_PI * dd * dd)
            re = 0.0
            im = 0.0
            for q in range(npair):
                di = qd[q]
                ci_ = qc[q]
                re += gx[ci_] * (amp[q].real * pcos[di] - amp[q].imag * psin[di])
                im += gx[ci_] * (amp[q].real * psin[di] + amp[q].imag * pcos[di])
            v[i] = re
            if fabs(im) > resid:
                resid = fabs(im)
    return vals, resid
