# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: threshold-crossing event synthesis and per-pixel
RANSAC tube fitting.

Mirrors _kernels/pure.py term for term; keep the floating-point expression
order in both files in sync (event output must match the fallback
bit-exactly, tube fits up to summation-order rounding).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"

cdef double CROSSING_SLACK = 1e-9
cdef unsigned long long GAMMA = 0x9E3779B97F4A7C15ULL


cdef inline unsigned long long mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def splitmix64(seed, count):
    """First ``count`` draws of a SplitMix64 stream (test hook)."""
    cdef unsigned long long s = seed & 0xFFFFFFFFFFFFFFFF
    out = np.empty(count, dtype=np.uint64)
    cdef unsigned long long[:] view = out
    cdef Py_ssize_t i
    for i in range(count):
        view[i] = mix64(s + (<unsigned long long>(i + 1)) * GAMMA)
    return out


# ---------------------------------------------------------------------------
# event synthesis
# ---------------------------------------------------------------------------


def synthesize_events_kernel(
    double[:, :, ::1] log_frames,
    cnp.int64_t[:] timestamps,
    double threshold,
    long long refractory_us,
    int row_start,
    int row_end,
):
    """Threshold-crossing events for rows [row_start, row_end); see the
    pure twin for the contract."""
    cdef int n_frames = log_frames.shape[0]
    cdef int width = log_frames.shape[2]
    cdef double c = threshold
    cdef double slack = CROSSING_SLACK
    cdef int y, x, k
    cdef long long n, j, total
    cdef double ref, la, lb, q, level, theta, tc, ta, tb

    # pass 1: crossing count upper bound (refractory only removes events)
    total = 0
    with nogil:
        for y in range(row_start, row_end):
            for x in range(width):
                ref = log_frames[0, y, x]
                for k in range(n_frames - 1):
                    la = log_frames[k, y, x]
                    lb = log_frames[k + 1, y, x]
                    if lb > la:
                        n = <long long>floor((lb - ref) / c + slack)
                        if n > 0:
                            total += n
                            ref = ref + c * (<double>n)
                    elif lb < la:
                        n = <long long>floor((ref - lb) / c + slack)
                        if n > 0:
                            total += n
                            ref = ref - c * (<double>n)

    out_t = np.empty(total, dtype=np.int64)
    out_x = np.empty(total, dtype=np.int64)
    out_y = np.empty(total, dtype=np.int64)
    out_p = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[:] vt = out_t
    cdef cnp.int64_t[:] vx = out_x
    cdef cnp.int64_t[:] vy = out_y
    cdef cnp.int64_t[:] vp = out_p

    cdef long long count = 0
    cdef long long ti, last
    cdef bint have_last
    with nogil:
        for y in range(row_start, row_end):
            for x in range(width):
                ref = log_frames[0, y, x]
                have_last = False
                last = 0
                for k in range(n_frames - 1):
                    la = log_frames[k, y, x]
                    lb = log_frames[k + 1, y, x]
                    ta = <double>timestamps[k]
                    tb = <double>timestamps[k + 1]
                    if lb > la:
                        n = <long long>floor((lb - ref) / c + slack)
                        if n > 0:
                            for j in range(1, n + 1):
                                level = ref + c * (<double>j)
                                theta = (level - la) / (lb - la)
                                if theta > 1.0:
                                    theta = 1.0
                                tc = ta + theta * (tb - ta)
                                ti = <long long>floor(tc + 0.5)
                                if refractory_us <= 0 or not have_last or ti - last >= refractory_us:
                                    vt[count] = ti
                                    vx[count] = x
                                    vy[count] = y
                                    vp[count] = 1
                                    count += 1
                                    last = ti
                                    have_last = True
                            ref = ref + c * (<double>n)
                    elif lb < la:
                        n = <long long>floor((ref - lb) / c + slack)
                        if n > 0:
                            for j in range(1, n + 1):
                                level = ref - c * (<double>j)
                                theta = (level - la) / (lb - la)
                                if theta > 1.0:
                                    theta = 1.0
                                tc = ta + theta * (tb - ta)
                                ti = <long long>floor(tc + 0.5)
                                if refractory_us <= 0 or not have_last or ti - last >= refractory_us:
                                    vt[count] = ti
                                    vx[count] = x
                                    vy[count] = y
                                    vp[count] = -1
                                    count += 1
                                    last = ti
                                    have_last = True
                            ref = ref - c * (<double>n)
    return out_t[:count], out_x[:count], out_y[:count], out_p[:count]


# ---------------------------------------------------------------------------
# tube fitting
# ---------------------------------------------------------------------------


def fit_tubes_kernel(
    double[::1] ex,
    double[::1] ey,
    double[::1] et,
    cnp.int64_t[:] offsets,
    int width,
    int height,
    double t0,
    int radius,
    int min_support,
    double tau,
    int iters,
    unsigned long long seed,
    int row_start,
    int row_end,
):
    """Per-pixel RANSAC line fits for rows [row_start, row_end); see the
    pure twin for the contract."""
    cdef int rows = row_end - row_start
    cdef long long n_events = ex.shape[0]
    base_np = np.zeros((rows, width, 2))
    vel_np = np.zeros((rows, width, 2))
    resid_np = np.zeros((rows, width))
    support_np = np.zeros((rows, width), dtype=np.int64)
    label_np = np.zeros((rows, width), dtype=np.int8)
    # scratch sized for the worst-case neighborhood
    nxb_np = np.empty(max(n_events, 1))
    nyb_np = np.empty(max(n_events, 1))
    ntb_np = np.empty(max(n_events, 1))
    inl_np = np.empty(max(n_events, 1), dtype=np.uint8)

    cdef double[:, :, ::1] base = base_np
    cdef double[:, :, ::1] vel = vel_np
    cdef double[:, ::1] resid = resid_np
    cdef cnp.int64_t[:, ::1] support = support_np
    cdef cnp.int8_t[:, ::1] label = label_np
    cdef double[::1] nxb = nxb_np
    cdef double[::1] nyb = nyb_np
    cdef double[::1] ntb = ntb_np
    cdef unsigned char[::1] inl = inl_np

    cdef double tau2 = tau * tau
    cdef int y0, x0, yy, ylo, yhi, xlo, xhi, it
    cdef long long m, i, s, e, a, b, j, cnt, best_cnt, m_in
    cdef unsigned long long s0, u1, u2
    cdef double dtab, hvx, hvy, hbx, hby, dx, dy, d2, ssd, rms
    cdef double best_rms, best_vx, best_vy, best_bx, best_by
    cdef double sum_t, sum_x, sum_y, tm, xm, ym, ct, stt, sxt, syt
    cdef double fvx, fvy, fbx, fby

    with nogil:
        for y0 in range(row_start, row_end):
            ylo = y0 - radius
            if ylo < 0:
                ylo = 0
            yhi = y0 + radius
            if yhi > height - 1:
                yhi = height - 1
            for x0 in range(width):
                base[y0 - row_start, x0, 0] = x0
                base[y0 - row_start, x0, 1] = y0
                xlo = x0 - radius
                if xlo < 0:
                    xlo = 0
                xhi = x0 + radius
                if xhi > width - 1:
                    xhi = width - 1
                m = 0
                for yy in range(ylo, yhi + 1):
                    s = offsets[yy * width + xlo]
                    e = offsets[yy * width + xhi + 1]
                    for i in range(s, e):
                        nxb[m] = ex[i]
                        nyb[m] = ey[i]
                        ntb[m] = et[i]
                        m += 1
                if m < min_support:
                    continue

                s0 = seed ^ (<unsigned long long>(y0 * width + x0))
                best_cnt = -1
                best_rms = 0.0
                best_vx = best_vy = best_bx = best_by = 0.0
                for it in range(iters):
                    u1 = mix64(s0 + (<unsigned long long>(2 * it + 1)) * GAMMA)
                    u2 = mix64(s0 + (<unsigned long long>(2 * it + 2)) * GAMMA)
                    a = <long long>(u1 % (<unsigned long long>m))
                    b = <long long>(u2 % (<unsigned long long>(m - 1)))
                    if b >= a:
                        b += 1
                    dtab = ntb[b] - ntb[a]
                    if dtab == 0.0:
                        continue
                    hvx = (nxb[b] - nxb[a]) / dtab
                    hvy = (nyb[b] - nyb[a]) / dtab
                    hbx = nxb[a] + (t0 - ntb[a]) * hvx
                    hby = nyb[a] + (t0 - ntb[a]) * hvy
                    cnt = 0
                    ssd = 0.0
                    for j in range(m):
                        dx = nxb[j] - (hbx + (ntb[j] - t0) * hvx)
                        dy = nyb[j] - (hby + (ntb[j] - t0) * hvy)
                        d2 = dx * dx + dy * dy
                        if d2 <= tau2:
                            cnt += 1
                            ssd += d2
                    rms = sqrt(ssd / cnt)
                    if cnt > best_cnt or (cnt == best_cnt and rms < best_rms):
                        best_cnt = cnt
                        best_rms = rms
                        best_vx = hvx
                        best_vy = hvy
                        best_bx = hbx
                        best_by = hby
                if best_cnt < 0:
                    # every sampled pair was simultaneous: LS over all events
                    sum_t = sum_x = sum_y = 0.0
                    for j in range(m):
                        sum_t += ntb[j]
                        sum_x += nxb[j]
                        sum_y += nyb[j]
                    tm = sum_t / m
                    xm = sum_x / m
                    ym = sum_y / m
                    stt = sxt = syt = 0.0
                    for j in range(m):
                        ct = ntb[j] - tm
                        stt += ct * ct
                        sxt += ct * (nxb[j] - xm)
                        syt += ct * (nyb[j] - ym)
                    if stt > 0.0:
                        best_vx = sxt / stt
                        best_vy = syt / stt
                    else:
                        best_vx = best_vy = 0.0
                    best_bx = xm + (t0 - tm) * best_vx
                    best_by = ym + (t0 - tm) * best_vy

                m_in = 0
                for j in range(m):
                    dx = nxb[j] - (best_bx + (ntb[j] - t0) * best_vx)
                    dy = nyb[j] - (best_by + (ntb[j] - t0) * best_vy)
                    d2 = dx * dx + dy * dy
                    if d2 <= tau2:
                        inl[j] = 1
                        m_in += 1
                    else:
                        inl[j] = 0
                if m_in == 0:
                    continue

                sum_t = sum_x = sum_y = 0.0
                for j in range(m):
                    if inl[j]:
                        sum_t += ntb[j]
                        sum_x += nxb[j]
                        sum_y += nyb[j]
                tm = sum_t / m_in
                xm = sum_x / m_in
                ym = sum_y / m_in
                stt = sxt = syt = 0.0
                for j in range(m):
                    if inl[j]:
                        ct = ntb[j] - tm
                        stt += ct * ct
                        sxt += ct * (nxb[j] - xm)
                        syt += ct * (nyb[j] - ym)
                if stt > 0.0:
                    fvx = sxt / stt
                    fvy = syt / stt
                else:
                    fvx = fvy = 0.0
                fbx = xm + (t0 - tm) * fvx
                fby = ym + (t0 - tm) * fvy
                ssd = 0.0
                for j in range(m):
                    if inl[j]:
                        dx = nxb[j] - (fbx + (ntb[j] - t0) * fvx)
                        dy = nyb[j] - (fby + (ntb[j] - t0) * fvy)
                        ssd += dx * dx + dy * dy
                rms = sqrt(ssd / m_in)

                base[y0 - row_start, x0, 0] = fbx
                base[y0 - row_start, x0, 1] = fby
                vel[y0 - row_start, x0, 0] = fvx
                vel[y0 - row_start, x0, 1] = fvy
                resid[y0 - row_start, x0] = rms
                support[y0 - row_start, x0] = m_in
                if m_in >= min_support and rms <= tau:
                    label[y0 - row_start, x0] = 2
                else:
                    label[y0 - row_start, x0] = 1
    return base_np, vel_np, resid_np, support_np, label_np
