"""Hot per-pixel kernels with two interchangeable backends.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version written with the *same arithmetic expression order*, so the two
backends produce bit-identical float64 outputs (verified by tests).  The
backend is chosen once at import time from the ``HAZEVO_NUMBA`` env var
(``0`` disables numba).  ``hazevo bench`` times both.

All kernels are pure functions over plain float64/bool ndarrays; reductions
(means, norms) are deliberately left to the callers so that summation order
never depends on the backend.
"""

import os

import numpy as np

USE_NUMBA = os.environ.get("HAZEVO_NUMBA", "1") != "0"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, guard anyway
    HAVE_NUMBA = False
    USE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# warp field: backproject target pixels through depth, rigid-transform,
# project into the source camera.
# ---------------------------------------------------------------------------

def warp_field_numpy(depth, depth_valid, R, t, k_tgt, k_src, src_w, src_h, eps_z):
    """Vectorized reference path.

    k_tgt / k_src are (fx, fy, cx, cy) float64 arrays. Returns
    (xs, ys, zs, valid) where (xs, ys) are continuous source-pixel
    coordinates and zs the transformed depth.
    """
    fx_t, fy_t, cx_t, cy_t = k_tgt
    fx_s, fy_s, cx_s, cy_s = k_src
    h, w = depth.shape
    jj = np.arange(w, dtype=np.float64)[None, :]
    ii = np.arange(h, dtype=np.float64)[:, None]
    x = (jj - cx_t) / fx_t * depth
    y = (ii - cy_t) / fy_t * depth
    z = depth
    xp = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
    yp = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
    zp = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
    in_front = zp > eps_z
    safe_z = np.where(in_front, zp, 1.0)
    xs = fx_s * (xp / safe_z) + cx_s
    ys = fy_s * (yp / safe_z) + cy_s
    # 1e-9 slack absorbs last-ulp rounding of the identity warp; coordinates
    # are clamped back into the exact sampling domain afterwards.
    in_bounds = (
        (xs >= -1e-9) & (xs <= src_w - 1 + 1e-9)
        & (ys >= -1e-9) & (ys <= src_h - 1 + 1e-9)
    )
    valid = in_front & in_bounds & depth_valid
    xs = np.minimum(np.maximum(xs, 0.0), float(src_w - 1))
    ys = np.minimum(np.maximum(ys, 0.0), float(src_h - 1))
    xs[~valid] = 0.0
    ys[~valid] = 0.0
    return xs, ys, zp, valid


@njit(cache=True)
def _warp_field_nb(depth, depth_valid, R, t, k_tgt, k_src, src_w, src_h, eps_z):
    fx_t, fy_t, cx_t, cy_t = k_tgt[0], k_tgt[1], k_tgt[2], k_tgt[3]
    fx_s, fy_s, cx_s, cy_s = k_src[0], k_src[1], k_src[2], k_src[3]
    h, w = depth.shape
    xs = np.zeros((h, w), dtype=np.float64)
    ys = np.zeros((h, w), dtype=np.float64)
    zs = np.empty((h, w), dtype=np.float64)
    valid = np.zeros((h, w), dtype=np.bool_)
    xmax = float(src_w - 1)
    ymax = float(src_h - 1)
    for i in range(h):
        for j in range(w):
            d = depth[i, j]
            x = (j - cx_t) / fx_t * d
            y = (i - cy_t) / fy_t * d
            z = d
            xp = R[0, 0] * x + R[0, 1] * y + R[0, 2] * z + t[0]
            yp = R[1, 0] * x + R[1, 1] * y + R[1, 2] * z + t[1]
            zp = R[2, 0] * x + R[2, 1] * y + R[2, 2] * z + t[2]
            zs[i, j] = zp
            if zp <= eps_z or not depth_valid[i, j]:
                continue
            u = fx_s * (xp / zp) + cx_s
            v = fy_s * (yp / zp) + cy_s
            if u < -1e-9 or u > xmax + 1e-9 or v < -1e-9 or v > ymax + 1e-9:
                continue
            if u < 0.0:
                u = 0.0
            elif u > xmax:
                u = xmax
            if v < 0.0:
                v = 0.0
            elif v > ymax:
                v = ymax
            xs[i, j] = u
            ys[i, j] = v
            valid[i, j] = True
    return xs, ys, zs, valid


def warp_field_numba(depth, depth_valid, R, t, k_tgt, k_src, src_w, src_h, eps_z):
    return _warp_field_nb(depth, depth_valid, R, t, k_tgt, k_src, src_w, src_h, eps_z)


# ---------------------------------------------------------------------------
# bilinear sampling
# ---------------------------------------------------------------------------

def bilinear_sample_numpy(src, xs, ys, valid):
    """src is (H_s, W_s, C); xs/ys/valid are (H, W). Invalid pixels -> 0."""
    h_s, w_s, c = src.shape
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, w_s - 1)
    y1 = np.minimum(y0 + 1, h_s - 1)
    fx = xs - x0
    fy = ys - y0
    out = np.zeros(xs.shape + (c,), dtype=np.float64)
    for ch in range(c):
        plane = src[:, :, ch]
        top = plane[y0, x0] * (1.0 - fx) + plane[y0, x1] * fx
        bot = plane[y1, x0] * (1.0 - fx) + plane[y1, x1] * fx
        out[:, :, ch] = top * (1.0 - fy) + bot * fy
    out[~valid] = 0.0
    return out


@njit(cache=True)
def _bilinear_sample_nb(src, xs, ys, valid):
    h_s, w_s, c = src.shape
    h, w = xs.shape
    out = np.zeros((h, w, c), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            if not valid[i, j]:
                continue
            x = xs[i, j]
            y = ys[i, j]
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            x1 = min(x0 + 1, w_s - 1)
            y1 = min(y0 + 1, h_s - 1)
            fx = x - x0
            fy = y - y0
            for ch in range(c):
                top = src[y0, x0, ch] * (1.0 - fx) + src[y0, x1, ch] * fx
                bot = src[y1, x0, ch] * (1.0 - fx) + src[y1, x1, ch] * fx
                out[i, j, ch] = top * (1.0 - fy) + bot * fy
    return out


def bilinear_sample_numba(src, xs, ys, valid):
    return _bilinear_sample_nb(src, xs, ys, valid)


# ---------------------------------------------------------------------------
# separable box sum / min over a (2r+1)^2 window, replicate-padded border.
# The caller passes the already edge-padded plane so both backends see the
# exact same floats.
# ---------------------------------------------------------------------------

def box_sum_padded_numpy(padded, radius, out_h, out_w):
    k = 2 * radius + 1
    hsum = padded[:, 0:out_w].copy()
    for off in range(1, k):
        hsum += padded[:, off:off + out_w]
    out = hsum[0:out_h, :].copy()
    for off in range(1, k):
        out += hsum[off:off + out_h, :]
    return out


@njit(cache=True)
def _box_sum_padded_nb(padded, radius, out_h, out_w):
    k = 2 * radius + 1
    ph = padded.shape[0]
    hsum = np.empty((ph, out_w), dtype=np.float64)
    for i in range(ph):
        for j in range(out_w):
            s = padded[i, j]
            for off in range(1, k):
                s += padded[i, j + off]
            hsum[i, j] = s
    out = np.empty((out_h, out_w), dtype=np.float64)
    for j in range(out_w):
        for i in range(out_h):
            s = hsum[i, j]
            for off in range(1, k):
                s += hsum[i + off, j]
            out[i, j] = s
    return out


def box_sum_padded_numba(padded, radius, out_h, out_w):
    return _box_sum_padded_nb(padded, radius, out_h, out_w)


def min_filter_padded_numpy(padded, radius, out_h, out_w):
    k = 2 * radius + 1
    hmin = padded[:, 0:out_w].copy()
    for off in range(1, k):
        np.minimum(hmin, padded[:, off:off + out_w], out=hmin)
    out = hmin[0:out_h, :].copy()
    for off in range(1, k):
        np.minimum(out, hmin[off:off + out_h, :], out=out)
    return out


@njit(cache=True)
def _min_filter_padded_nb(padded, radius, out_h, out_w):
    k = 2 * radius + 1
    ph = padded.shape[0]
    hmin = np.empty((ph, out_w), dtype=np.float64)
    for i in range(ph):
        for j in range(out_w):
            m = padded[i, j]
            for off in range(1, k):
                v = padded[i, j + off]
                if v < m:
                    m = v
            hmin[i, j] = m
    out = np.empty((out_h, out_w), dtype=np.float64)
    for j in range(out_w):
        for i in range(out_h):
            m = hmin[i, j]
            for off in range(1, k):
                v = hmin[i + off, j]
                if v < m:
                    m = v
            out[i, j] = m
    return out


def min_filter_padded_numba(padded, radius, out_h, out_w):
    return _min_filter_padded_nb(padded, radius, out_h, out_w)


# selected backend -----------------------------------------------------------

if USE_NUMBA and HAVE_NUMBA:
    warp_field_k = warp_field_numba
    bilinear_sample_k = bilinear_sample_numba
    box_sum_padded_k = box_sum_padded_numba
    min_filter_padded_k = min_filter_padded_numba
    BACKEND = "numba"
else:
    warp_field_k = warp_field_numpy
    bilinear_sample_k = bilinear_sample_numpy
    box_sum_padded_k = box_sum_padded_numpy
    min_filter_padded_k = min_filter_padded_numpy
    BACKEND = "numpy"


def box_mean(plane, radius, backend=None):
    """Replicate-padded (2r+1)x(2r+1) box mean of a 2-D float64 plane."""
    if radius == 0:
        return plane.astype(np.float64, copy=True)
    padded = np.pad(np.ascontiguousarray(plane, dtype=np.float64),
                    radius, mode="edge")
    fn = box_sum_padded_k if backend is None else backend
    h, w = plane.shape
    k = 2 * radius + 1
    return fn(padded, radius, h, w) / float(k * k)


def min_filter(plane, radius, backend=None):
    """Replicate-padded square minimum filter of a 2-D float64 plane."""
    if radius == 0:
        return plane.astype(np.float64, copy=True)
    padded = np.pad(np.ascontiguousarray(plane, dtype=np.float64),
                    radius, mode="edge")
    fn = min_filter_padded_k if backend is None else backend
    h, w = plane.shape
    return fn(padded, radius, h, w)
