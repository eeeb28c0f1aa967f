"""Pure numpy fallback for the hot kernels.

The compiled twin in ``_speedups.pyx`` evaluates the same floating-point
expressions term for term, so event synthesis output is bit-identical
across backends; tube fits agree except for summation-order rounding in
the least-squares accumulators (covered by the backend-equivalence test).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# slack (relative to the threshold) applied to level-crossing comparisons so
# analytically exact crossings survive float rounding
CROSSING_SLACK = 1e-9


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` draws of a SplitMix64 stream seeded with ``seed``."""
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    return _mix64(base + idx * _GAMMA)


# ---------------------------------------------------------------------------
# event synthesis
# ---------------------------------------------------------------------------


def synthesize_events_kernel(
    log_frames: np.ndarray,
    timestamps: np.ndarray,
    threshold: float,
    refractory_us: int,
    row_start: int,
    row_end: int,
):
    """Threshold-crossing events for rows [row_start, row_end).

    ``log_frames`` is (n_frames, height, width) float64 log intensity;
    the log signal is interpolated linearly between frames and an event is
    emitted whenever it crosses the per-pixel reference level +- threshold.
    Returns unsorted (t, x, y, p) column arrays.
    """
    n_frames, height, width = log_frames.shape
    c = float(threshold)
    slack = CROSSING_SLACK
    band = log_frames[:, row_start:row_end, :].reshape(n_frames, -1)
    n_pix = band.shape[1]
    ref = band[0].copy()
    out_t, out_pix, out_p = [], [], []
    for k in range(n_frames - 1):
        la, lb = band[k], band[k + 1]
        ta = float(timestamps[k])
        tb = float(timestamps[k + 1])
        rising = lb > la
        falling = lb < la
        n_up = np.floor((lb - ref) / c + slack).astype(np.int64)
        n_up[~rising] = 0
        np.maximum(n_up, 0, out=n_up)
        n_dn = np.floor((ref - lb) / c + slack).astype(np.int64)
        n_dn[~falling] = 0
        np.maximum(n_dn, 0, out=n_dn)
        for counts, sign in ((n_up, 1.0), (n_dn, -1.0)):
            pix = np.nonzero(counts)[0]
            if len(pix) == 0:
                continue
            reps = counts[pix]
            pix_rep = np.repeat(pix, reps)
            ends = np.cumsum(reps)
            # per-pixel crossing ordinal j = 1..n
            j = (np.arange(ends[-1], dtype=np.int64) - np.repeat(ends - reps, reps) + 1).astype(np.float64)
            level = ref[pix_rep] + sign * c * j
            theta = (level - la[pix_rep]) / (lb[pix_rep] - la[pix_rep])
            np.minimum(theta, 1.0, out=theta)
            tc = ta + theta * (tb - ta)
            out_t.append(np.floor(tc + 0.5).astype(np.int64))
            out_pix.append(pix_rep)
            out_p.append(np.full(len(pix_rep), int(sign), dtype=np.int64))
        up = n_up > 0
        dn = n_dn > 0
        ref = np.where(up, ref + c * n_up.astype(np.float64), ref)
        ref = np.where(dn, ref - c * n_dn.astype(np.float64), ref)
    if not out_t:
        empty = np.empty(0, np.int64)
        return empty, empty.copy(), empty.copy(), empty.copy()
    t = np.concatenate(out_t)
    pix = np.concatenate(out_pix)
    p = np.concatenate(out_p)
    if refractory_us > 0:
        t, pix, p = _apply_refractory(t, pix, p, int(refractory_us))
    x = pix % width
    y = pix // width + row_start
    return t, x, y, p


def _apply_refractory(t, pix, p, refractory_us):
    """Drop per-pixel events closer than the refractory gap to the last kept one.

    Candidate order within a pixel is chronological by construction (chunks
    are interval-major, crossings ordinal-minor)."""
    order = np.argsort(pix, kind="stable")
    t, pix, p = t[order], pix[order], p[order]
    keep = np.ones(len(t), dtype=bool)
    start = 0
    while start < len(t):
        end = start
        while end < len(t) and pix[end] == pix[start]:
            end += 1
        last = None
        for i in range(start, end):
            if last is not None and t[i] - last < refractory_us:
                keep[i] = False
            else:
                last = t[i]
        start = end
    return t[keep], pix[keep], p[keep]


# ---------------------------------------------------------------------------
# tube fitting
# ---------------------------------------------------------------------------


def fit_tubes_kernel(
    ex: np.ndarray,
    ey: np.ndarray,
    et: np.ndarray,
    offsets: np.ndarray,
    width: int,
    height: int,
    t0: float,
    radius: int,
    min_support: int,
    tau: float,
    iters: int,
    seed: int,
    row_start: int,
    row_end: int,
):
    """Per-pixel RANSAC line fits for rows [row_start, row_end).

    Events are pre-sorted by (y, x, t) with ``offsets`` the CSR pixel index.
    Labels: 0 EMPTY (< min_support events gathered), 1 TURBULENCE, 2 TUBE.
    """
    rows = row_end - row_start
    base = np.zeros((rows, width, 2))
    vel = np.zeros((rows, width, 2))
    resid = np.zeros((rows, width))
    support = np.zeros((rows, width), dtype=np.int64)
    label = np.zeros((rows, width), dtype=np.int8)
    tau2 = tau * tau
    for y0 in range(row_start, row_end):
        ylo = max(0, y0 - radius)
        yhi = min(height - 1, y0 + radius)
        for x0 in range(width):
            base[y0 - row_start, x0] = (x0, y0)
            xlo = max(0, x0 - radius)
            xhi = min(width - 1, x0 + radius)
            segs = [
                (int(offsets[yy * width + xlo]), int(offsets[yy * width + xhi + 1]))
                for yy in range(ylo, yhi + 1)
            ]
            m = sum(e - s for s, e in segs)
            if m < min_support:
                continue
            nx = np.concatenate([ex[s:e] for s, e in segs])
            ny = np.concatenate([ey[s:e] for s, e in segs])
            nt = np.concatenate([et[s:e] for s, e in segs])
            fit = _ransac_pixel(nx, ny, nt, t0, tau, tau2, iters,
                                seed ^ (y0 * width + x0), min_support)
            if fit is None:
                continue
            bx, by, vx, vy, rms, m_in, is_tube = fit
            iy = y0 - row_start
            base[iy, x0] = (bx, by)
            vel[iy, x0] = (vx, vy)
            resid[iy, x0] = rms
            support[iy, x0] = m_in
            label[iy, x0] = 2 if is_tube else 1
    return base, vel, resid, support, label


def _ransac_pixel(nx, ny, nt, t0, tau, tau2, iters, pixel_seed, min_support):
    m = len(nx)
    draws = splitmix64(pixel_seed, 2 * iters)
    a = (draws[0::2] % np.uint64(m)).astype(np.int64)
    b = (draws[1::2] % np.uint64(m - 1)).astype(np.int64)
    b += b >= a
    dt_ab = nt[b] - nt[a]
    valid = np.nonzero(dt_ab != 0.0)[0]
    if len(valid):
        av, bv = a[valid], b[valid]
        vx = (nx[bv] - nx[av]) / dt_ab[valid]
        vy = (ny[bv] - ny[av]) / dt_ab[valid]
        bx = nx[av] + (t0 - nt[av]) * vx
        by = ny[av] + (t0 - nt[av]) * vy
        dx = nx[None, :] - (bx[:, None] + (nt[None, :] - t0) * vx[:, None])
        dy = ny[None, :] - (by[:, None] + (nt[None, :] - t0) * vy[:, None])
        d2 = dx * dx + dy * dy
        inl = d2 <= tau2
        counts = inl.sum(axis=1)
        rms = np.sqrt(np.where(inl, d2, 0.0).sum(axis=1) / counts)
        pick = np.lexsort((valid, rms, -counts))[0]
        inliers = inl[pick]
    else:
        # every sampled pair was simultaneous: least-squares over all events
        vx, vy, bx, by = _least_squares(nx, ny, nt, t0)
        dx = nx - (bx + (nt - t0) * vx)
        dy = ny - (by + (nt - t0) * vy)
        inliers = dx * dx + dy * dy <= tau2
        if not inliers.any():
            return None
    ix, iy, it = nx[inliers], ny[inliers], nt[inliers]
    vx, vy, bx, by = _least_squares(ix, iy, it, t0)
    dx = ix - (bx + (it - t0) * vx)
    dy = iy - (by + (it - t0) * vy)
    m_in = int(inliers.sum())
    rms = float(np.sqrt((dx * dx + dy * dy).sum() / m_in))
    is_tube = m_in >= min_support and rms <= tau
    return bx, by, vx, vy, rms, m_in, is_tube


def _least_squares(px, py, pt, t0):
    tm = pt.mean()
    xm = px.mean()
    ym = py.mean()
    ct = pt - tm
    stt = (ct * ct).sum()
    if stt > 0.0:
        vx = (ct * (px - xm)).sum() / stt
        vy = (ct * (py - ym)).sum() / stt
    else:
        vx = vy = 0.0
    return vx, vy, xm + (t0 - tm) * vx, ym + (t0 - tm) * vy
