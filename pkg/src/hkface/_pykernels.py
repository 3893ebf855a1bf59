"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_ckernels`` module; used when
the extension is not built or ``HKFACE_PURE_PYTHON=1`` is set.
"""
import numpy as np
from scipy.ndimage import correlate1d

N_COEF = 6


def smooth_masked(depth, valid, kernel):
    """Normalised-convolution smoothing restricted to valid pixels.

    ``out = (G * (z m)) / (G * m)`` at valid pixels, 0 elsewhere. The 2-D
    kernel is ``kernel x kernel``; zero padding outside the grid.
    """
    m = valid.astype(np.float64)
    zm = np.where(valid, depth, 0.0)
    num = correlate1d(correlate1d(zm, kernel, axis=0, mode="constant"), kernel, axis=1, mode="constant")
    den = correlate1d(correlate1d(m, kernel, axis=0, mode="constant"), kernel, axis=1, mode="constant")
    out = np.zeros_like(zm)
    np.divide(num, den, out=out, where=valid)
    return out


def _basis(u, v):
    return np.array([1.0, u, v, u * v, u * u, v * v])


def solve_normal(N, r, rcond):
    """Minimal-norm solutions of stacked 6x6 symmetric systems ``N x = r``.

    Returns ``(x, full_rank)``. Eigenvalues below ``rcond * max_eigenvalue``
    are treated as zero.
    """
    lam, V = np.linalg.eigh(N)
    top = lam[..., -1:]
    keep = lam > rcond * top
    inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
    proj = np.einsum("...ji,...j->...i", V, r)
    x = np.einsum("...ij,...j->...i", V, inv * proj)
    return x, keep.all(axis=-1)


def fit_field(depth, valid, half_width, pitch, rcond):
    """Least-squares biquadratic fit around every valid pixel.

    Coefficients are ordered ``(a, b, c, d, e, f)`` for
    ``a + b u + c v + d u v + e u^2 + f v^2`` with ``u`` along columns and
    ``v`` along rows, both in units of ``pitch``.
    """
    h, w = depth.shape
    hw = half_width
    zp = np.pad(np.where(valid, depth, 0.0), hw)
    mp = np.pad(valid, hw)
    N = np.zeros((h, w, N_COEF, N_COEF))
    r = np.zeros((h, w, N_COEF))
    support = np.zeros((h, w), dtype=np.int32)
    for dy in range(-hw, hw + 1):
        for dx in range(-hw, hw + 1):
            phi = _basis(dx * pitch, dy * pitch)
            m = mp[hw + dy:hw + dy + h, hw + dx:hw + dx + w]
            z = zp[hw + dy:hw + dy + h, hw + dx:hw + dx + w]
            mf = m.astype(np.float64)
            N += mf[..., None, None] * np.outer(phi, phi)
            r += (mf * z)[..., None] * phi
            support += m
    coef = np.zeros((h, w, N_COEF))
    full = np.zeros((h, w), dtype=bool)
    sel = valid & (support >= N_COEF)
    if sel.any():
        x, ok = solve_normal(N[sel], r[sel], rcond)
        coef[sel] = x
        full[sel] = ok
    support[~valid] = 0
    return coef, support, full


def rasterize(x, y, z, tris, height, width):
    """Z-buffer triangles onto pixel centres; keeps the largest depth.

    Pixel ``(row, col)`` has its centre at ``(x=col, y=row)``. Unhit pixels
    get ``-inf``.
    """
    zbuf = np.full(height * width, -np.inf)
    if len(tris) == 0:
        return zbuf.reshape(height, width)
    i0, i1, i2 = tris[:, 0], tris[:, 1], tris[:, 2]
    x0, x1, x2 = x[i0], x[i1], x[i2]
    y0, y1, y2 = y[i0], y[i1], y[i2]
    z0, z1, z2 = z[i0], z[i1], z[i2]
    area = (x2 - x1) * (y0 - y1) - (y2 - y1) * (x0 - x1)
    cmin = np.maximum(np.ceil(np.minimum(np.minimum(x0, x1), x2)), 0).astype(np.int64)
    cmax = np.minimum(np.floor(np.maximum(np.maximum(x0, x1), x2)), width - 1).astype(np.int64)
    rmin = np.maximum(np.ceil(np.minimum(np.minimum(y0, y1), y2)), 0).astype(np.int64)
    rmax = np.minimum(np.floor(np.maximum(np.maximum(y0, y1), y2)), height - 1).astype(np.int64)
    bw = cmax - cmin + 1
    bh = rmax - rmin + 1
    live = (area != 0) & (bw > 0) & (bh > 0)
    if not live.any():
        return zbuf.reshape(height, width)
    idx_parts, z_parts = [], []
    for dy in range(int(bh[live].max())):
        for dx in range(int(bw[live].max())):
            s = live & (dx < bw) & (dy < bh)
            if not s.any():
                continue
            px = (cmin[s] + dx).astype(np.float64)
            py = (rmin[s] + dy).astype(np.float64)
            a = area[s]
            w0 = (x2[s] - x1[s]) * (py - y1[s]) - (y2[s] - y1[s]) * (px - x1[s])
            w1 = (x0[s] - x2[s]) * (py - y2[s]) - (y0[s] - y2[s]) * (px - x2[s])
            w2 = (x1[s] - x0[s]) * (py - y0[s]) - (y1[s] - y0[s]) * (px - x0[s])
            pos = a > 0
            inside = np.where(pos, (w0 >= 0) & (w1 >= 0) & (w2 >= 0), (w0 <= 0) & (w1 <= 0) & (w2 <= 0))
            if not inside.any():
                continue
            zz = (w0 * z0[s] + w1 * z1[s] + w2 * z2[s]) / a
            flat = (rmin[s] + dy) * width + (cmin[s] + dx)
            idx_parts.append(flat[inside])
            z_parts.append(zz[inside])
    if idx_parts:
        np.maximum.at(zbuf, np.concatenate(idx_parts), np.concatenate(z_parts))
    return zbuf.reshape(height, width)
