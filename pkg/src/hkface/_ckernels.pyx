# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: masked smoothing, windowed biquadratic fits, z-buffer.

Mirrors ``_pykernels`` one for one.
"""
import numpy as np

from libc.math cimport ceil, floor, fabs, sqrt

cdef enum:
    NC = 6


def smooth_masked(const double[:, ::1] depth, const unsigned char[:, ::1] valid,
                  const double[::1] kernel):
    cdef Py_ssize_t h = depth.shape[0], w = depth.shape[1]
    cdef Py_ssize_t rad = kernel.shape[0] // 2
    cdef Py_ssize_t i, j, k, ii, jj
    cdef double s, sm, g
    tmp_num = np.zeros((h, w))
    tmp_den = np.zeros((h, w))
    out_arr = np.zeros((h, w))
    cdef double[:, ::1] tn = tmp_num
    cdef double[:, ::1] td = tmp_den
    cdef double[:, ::1] out = out_arr

    # vertical pass
    for i in range(h):
        for j in range(w):
            s = 0.0
            sm = 0.0
            for k in range(-rad, rad + 1):
                ii = i + k
                if ii < 0 or ii >= h:
                    continue
                if valid[ii, j]:
                    g = kernel[k + rad]
                    s += g * depth[ii, j]
                    sm += g
            tn[i, j] = s
            td[i, j] = sm
    # horizontal pass
    for i in range(h):
        for j in range(w):
            if not valid[i, j]:
                continue
            s = 0.0
            sm = 0.0
            for k in range(-rad, rad + 1):
                jj = j + k
                if jj < 0 or jj >= w:
                    continue
                g = kernel[k + rad]
                s += g * tn[i, jj]
                sm += g * td[i, jj]
            out[i, j] = s / sm
    return out_arr


cdef void _jacobi_eig(double a[NC][NC], double v[NC][NC], double lam[NC]) noexcept nogil:
    """Cyclic Jacobi eigen-decomposition of a symmetric 6x6 matrix (destroys ``a``)."""
    cdef int p, q, k, sweep
    cdef double off, theta, t, c, s, tau, apq, app, aqq, akp, akq, vkp, vkq, scale
    for p in range(NC):
        for q in range(NC):
            v[p][q] = 1.0 if p == q else 0.0
    scale = 0.0
    for p in range(NC):
        for q in range(NC):
            scale += a[p][q] * a[p][q]
    for sweep in range(100):
        off = 0.0
        for p in range(NC):
            for q in range(p + 1, NC):
                off += a[p][q] * a[p][q]
        if off <= 1e-30 * scale or off == 0.0:
            break
        for p in range(NC):
            for q in range(p + 1, NC):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                app = a[p][p]
                aqq = a[q][q]
                theta = (aqq - app) / (2.0 * apq)
                t = 1.0 / (fabs(theta) + sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] = app - t * apq
                a[q][q] = aqq + t * apq
                a[p][q] = 0.0
                a[q][p] = 0.0
                for k in range(NC):
                    if k != p and k != q:
                        akp = a[k][p]
                        akq = a[k][q]
                        a[k][p] = akp - s * (akq + tau * akp)
                        a[p][k] = a[k][p]
                        a[k][q] = akq + s * (akp - tau * akq)
                        a[q][k] = a[k][q]
                for k in range(NC):
                    vkp = v[k][p]
                    vkq = v[k][q]
                    v[k][p] = vkp - s * (vkq + tau * vkp)
                    v[k][q] = vkq + s * (vkp - tau * vkq)
    for p in range(NC):
        lam[p] = a[p][p]


def fit_field(const double[:, ::1] depth, const unsigned char[:, ::1] valid,
              int half_width, double pitch, double rcond):
    cdef Py_ssize_t h = depth.shape[0], w = depth.shape[1]
    cdef Py_ssize_t i, j, ii, jj
    cdef int dy, dx, p, q, k, n, full
    cdef double u, v, z, top
    cdef double phi[NC]
    cdef double N[NC][NC]
    cdef double V[NC][NC]
    cdef double lam[NC]
    cdef double rhs[NC]
    cdef double proj[NC]
    coef_arr = np.zeros((h, w, NC))
    support_arr = np.zeros((h, w), dtype=np.int32)
    full_arr = np.zeros((h, w), dtype=np.uint8)
    cdef double[:, :, ::1] coef = coef_arr
    cdef int[:, ::1] support = support_arr
    cdef unsigned char[:, ::1] fullv = full_arr

    with nogil:
        for i in range(h):
            for j in range(w):
                if not valid[i, j]:
                    continue
                for p in range(NC):
                    rhs[p] = 0.0
                    for q in range(NC):
                        N[p][q] = 0.0
                n = 0
                for dy in range(-half_width, half_width + 1):
                    ii = i + dy
                    if ii < 0 or ii >= h:
                        continue
                    for dx in range(-half_width, half_width + 1):
                        jj = j + dx
                        if jj < 0 or jj >= w or not valid[ii, jj]:
                            continue
                        u = dx * pitch
                        v = dy * pitch
                        phi[0] = 1.0
                        phi[1] = u
                        phi[2] = v
                        phi[3] = u * v
                        phi[4] = u * u
                        phi[5] = v * v
                        z = depth[ii, jj]
                        for p in range(NC):
                            rhs[p] += phi[p] * z
                            for q in range(NC):
                                N[p][q] += phi[p] * phi[q]
                        n += 1
                support[i, j] = n
                if n < NC:
                    continue
                _jacobi_eig(N, V, lam)
                top = lam[0]
                for p in range(1, NC):
                    if lam[p] > top:
                        top = lam[p]
                full = 1
                for p in range(NC):
                    proj[p] = 0.0
                    for k in range(NC):
                        proj[p] += V[k][p] * rhs[k]
                    if lam[p] > rcond * top:
                        proj[p] = proj[p] / lam[p]
                    else:
                        proj[p] = 0.0
                        full = 0
                for k in range(NC):
                    z = 0.0
                    for p in range(NC):
                        z += V[k][p] * proj[p]
                    coef[i, j, k] = z
                fullv[i, j] = full
    return coef_arr, support_arr, full_arr.view(bool)


def rasterize(const double[::1] x, const double[::1] y, const double[::1] z,
              const long long[:, ::1] tris, int height, int width):
    cdef Py_ssize_t t, nt = tris.shape[0]
    cdef long long i0, i1, i2
    cdef double x0, x1, x2, y0, y1, y2, z0, z1, z2, area, px, py, w0, w1, w2, zz, lo, hi
    cdef int cmin, cmax, rmin, rmax, r, c
    zbuf_arr = np.full((height, width), -np.inf)
    cdef double[:, ::1] zbuf = zbuf_arr
    with nogil:
        for t in range(nt):
            i0 = tris[t, 0]
            i1 = tris[t, 1]
            i2 = tris[t, 2]
            x0 = x[i0]; x1 = x[i1]; x2 = x[i2]
            y0 = y[i0]; y1 = y[i1]; y2 = y[i2]
            z0 = z[i0]; z1 = z[i1]; z2 = z[i2]
            area = (x2 - x1) * (y0 - y1) - (y2 - y1) * (x0 - x1)
            if area == 0.0:
                continue
            lo = min(x0, min(x1, x2))
            hi = max(x0, max(x1, x2))
            cmin = <int>max(ceil(lo), 0.0)
            cmax = <int>min(floor(hi), width - 1.0)
            lo = min(y0, min(y1, y2))
            hi = max(y0, max(y1, y2))
            rmin = <int>max(ceil(lo), 0.0)
            rmax = <int>min(floor(hi), height - 1.0)
            for r in range(rmin, rmax + 1):
                py = r
                for c in range(cmin, cmax + 1):
                    px = c
                    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                    if area > 0.0:
                        if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                            continue
                    else:
                        if w0 > 0.0 or w1 > 0.0 or w2 > 0.0:
                            continue
                    zz = (w0 * z0 + w1 * z1 + w2 * z2) / area
                    if zz > zbuf[r, c]:
                        zbuf[r, c] = zz
    return zbuf_arr
