# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Semantics mirror ``_pykernels`` exactly."""

from libc.math cimport floor, ceil, cos, sin, sqrt, round, fabs, INFINITY, M_PI
from libc.stdint cimport uint8_t, int32_t

import numpy as np

cdef enum:
    FREE = 0
    OCCUPIED = 1

cdef int[8][4] _OCT = [
    [1, 0, 0, 1],
    [-1, 0, 0, 1],
    [1, 0, 0, -1],
    [-1, 0, 0, -1],
    [0, 1, 1, 0],
    [0, -1, 1, 0],
    [0, 1, -1, 0],
    [0, -1, -1, 0],
]


cdef struct Lines:
    # per-column [lo, hi] in y and per-row [lo, hi] in x of a mask whose
    # lines are all contiguous; lo > hi marks an empty line
    int* col_lo
    int* col_hi
    int* row_lo
    int* row_hi


cdef Py_ssize_t _scan(const uint8_t[:, :] cells, uint8_t[:, :] vis,
                      const uint8_t[:, :] mask, bint use_mask, Lines* lines,
                      int sx, int sy, int depth, double start, double end,
                      int xc, int yc, int xd, int yd, int max_depth,
                      int w, int h) noexcept nogil:
    cdef Py_ssize_t reads = 0
    cdef int d, c, c_lo, c_hi, c_end, gx, gy, ox, oy, a, b
    cdef double left, right, new_start
    cdef bint blocked, opaque
    if start > end:
        return 0
    for d in range(depth, max_depth + 1):
        blocked = False
        new_start = start
        ox = sx + d * xd
        oy = sy + d * yd
        c_lo = <int>floor(start * (d - 0.5) - 0.5)
        if c_lo < 0:
            c_lo = 0
        c_hi = d
        c_end = d
        if lines != NULL:
            # cells outside [a, b] are masked: those before it cannot unblock
            # (the line starts unblocked), those after it are handled below
            if xd != 0:
                a = lines.col_lo[ox]
                b = lines.col_hi[ox]
                if yc > 0:
                    a, b = a - sy, b - sy
                else:
                    a, b = sy - b, sy - a
            else:
                a = lines.row_lo[oy]
                b = lines.row_hi[oy]
                if xc > 0:
                    a, b = a - sx, b - sx
                else:
                    a, b = sx - b, sx - a
            if a > c_lo:
                c_lo = a
            if b < c_end:
                c_end = b
        for c in range(c_lo, c_end + 1):
            gx = ox + c * xc
            gy = oy + c * yc
            if gx < 0 or gx >= w or gy < 0 or gy >= h:
                break
            left = (c - 0.5) / (d + 0.5)
            right = (c + 0.5) / (d - 0.5)
            if right < start:
                continue
            if left > end:
                break
            if use_mask and mask[gx, gy] == 0:
                if blocked:
                    blocked = False
                    start = new_start
                continue
            reads += 1
            vis[gx, gy] = 1
            opaque = cells[gx, gy] == OCCUPIED
            if blocked:
                if opaque:
                    new_start = right
                else:
                    blocked = False
                    start = new_start
            elif opaque and d < max_depth:
                blocked = True
                reads += _scan(cells, vis, mask, use_mask, lines, sx, sy, d + 1, start, left,
                               xc, yc, xd, yd, max_depth, w, h)
                new_start = right
        if blocked and lines != NULL and c_end < c_hi:
            # first masked cell past the interval that falls inside the slope range
            c = c_end + 1 if c_end + 1 > c_lo else c_lo
            while c <= c_hi:
                gx = ox + c * xc
                gy = oy + c * yc
                if gx < 0 or gx >= w or gy < 0 or gy >= h:
                    break
                left = (c - 0.5) / (d + 0.5)
                right = (c + 0.5) / (d - 0.5)
                if right >= start:
                    if left <= end:
                        blocked = False
                        start = new_start
                    break
                c += 1
        if blocked:
            break
    return reads


cdef Py_ssize_t _rsc(const uint8_t[:, :] cells, int sx, int sy, uint8_t[:, :] vis,
                    const uint8_t[:, :] mview, bint use_mask, Lines* lines) noexcept nogil:
    cdef int w = cells.shape[0]
    cdef int h = cells.shape[1]
    cdef Py_ssize_t reads = 0
    cdef int o, md, xd, yd
    vis[sx, sy] = 1
    for o in range(8):
        xd = _OCT[o][2]
        yd = _OCT[o][3]
        if xd == 1:
            md = w - 1 - sx
        elif xd == -1:
            md = sx
        elif yd == 1:
            md = h - 1 - sy
        else:
            md = sy
        reads += _scan(cells, vis, mview, use_mask, lines, sx, sy, 1, 0.0, 1.0,
                       _OCT[o][0], _OCT[o][1], xd, yd, md, w, h)
    return reads


cdef bint _mask_lines(const uint8_t[:, :] mask, int[:] col_lo, int[:] col_hi,
                      int[:] row_lo, int[:] row_hi) noexcept nogil:
    """Fill line extents; False if some row or column of the mask has a gap."""
    cdef int w = mask.shape[0]
    cdef int h = mask.shape[1]
    cdef int i, j
    for i in range(w):
        col_lo[i] = h
        col_hi[i] = -1
    for j in range(h):
        row_lo[j] = w
        row_hi[j] = -1
    for i in range(w):
        for j in range(h):
            if mask[i, j] != 0:
                if col_hi[i] >= 0 and col_hi[i] != j - 1:
                    return False
                if j < col_lo[i]:
                    col_lo[i] = j
                col_hi[i] = j
                if row_hi[j] >= 0 and row_hi[j] != i - 1:
                    return False
                if i < row_lo[j]:
                    row_lo[j] = i
                row_hi[j] = i
    return True


def rsc_fill(const uint8_t[:, :] cells, int sx, int sy, uint8_t[:, :] vis, mask=None):
    cdef const uint8_t[:, :] mview
    cdef bint use_mask = mask is not None
    cdef Py_ssize_t reads
    if use_mask:
        mview = mask
    else:
        mview = cells
    with nogil:
        reads = _rsc(cells, sx, sy, vis, mview, use_mask, NULL)
    return reads


cdef Py_ssize_t _raycast(const uint8_t[:, :] cells, int sx, int sy, int n_rays, double max_range,
                        uint8_t[:, :] vis, const double* cs=NULL, const double* sn=NULL) noexcept nogil:
    cdef int w = cells.shape[0]
    cdef int h = cells.shape[1]
    cdef Py_ssize_t reads = 0
    cdef int i, ix, iy, step_x, step_y
    cdef double px = sx + 0.5, py = sy + 0.5
    cdef double theta, dx, dy, t, t_max_x, t_max_y, t_dx, t_dy
    vis[sx, sy] = 1
    for i in range(n_rays):
        if cs != NULL:
            dx = cs[i]
            dy = sn[i]
        else:
            theta = 2.0 * M_PI * i / n_rays
            dx = cos(theta)
            dy = sin(theta)
        ix = sx
        iy = sy
        if dx > 0:
            step_x = 1
            t_max_x = (ix + 1 - px) / dx
            t_dx = 1.0 / dx
        elif dx < 0:
            step_x = -1
            t_max_x = (px - ix) / -dx
            t_dx = -1.0 / dx
        else:
            step_x = 0
            t_max_x = INFINITY
            t_dx = INFINITY
        if dy > 0:
            step_y = 1
            t_max_y = (iy + 1 - py) / dy
            t_dy = 1.0 / dy
        elif dy < 0:
            step_y = -1
            t_max_y = (py - iy) / -dy
            t_dy = -1.0 / dy
        else:
            step_y = 0
            t_max_y = INFINITY
            t_dy = INFINITY
        while True:
            if t_max_x <= t_max_y:
                t = t_max_x
                ix += step_x
                t_max_x += t_dx
            else:
                t = t_max_y
                iy += step_y
                t_max_y += t_dy
            if t > max_range or ix < 0 or ix >= w or iy < 0 or iy >= h:
                break
            reads += 1
            vis[ix, iy] = 1
            if cells[ix, iy] == OCCUPIED:
                break
    return reads


def raycast_fill(const uint8_t[:, :] cells, int sx, int sy, int n_rays, double max_range,
                 uint8_t[:, :] vis):
    cdef Py_ssize_t reads
    with nogil:
        reads = _raycast(cells, sx, sy, n_rays, max_range, vis)
    return reads


cdef inline long _floordiv(long a, long b) noexcept nogil:
    cdef long q = a / b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef bint _crossed_blocked(const uint8_t[:, :] cells, int sx, int sy, int dx, int dy) noexcept nogil:
    cdef long adx = dx if dx >= 0 else -dx
    cdef long ady = dy if dy >= 0 else -dy
    cdef long n, i, a, b, lo, hi, jc, j, rlo, rhi
    cdef int step
    cdef bint hit
    if adx >= ady:
        n = adx
        step = 1 if dx > 0 else -1
        for i in range(1, n):
            a = (2 * i - 1) * dy
            b = (2 * i + 1) * dy
            lo = a if a < b else b
            hi = b if a < b else a
            jc = _floordiv(i * dy, n)
            for j in range(jc - 1, jc + 3):
                rlo = (2 * j - 1) * n
                rhi = (2 * j + 1) * n
                if lo == hi:
                    hit = rlo < lo and lo < rhi
                else:
                    hit = lo < rhi and rlo < hi
                if hit and cells[sx + step * i, sy + j] == OCCUPIED:
                    return True
    else:
        n = ady
        step = 1 if dy > 0 else -1
        for i in range(1, n):
            a = (2 * i - 1) * dx
            b = (2 * i + 1) * dx
            lo = a if a < b else b
            hi = b if a < b else a
            jc = _floordiv(i * dx, n)
            for j in range(jc - 1, jc + 3):
                rlo = (2 * j - 1) * n
                rhi = (2 * j + 1) * n
                if lo == hi:
                    hit = rlo < lo and lo < rhi
                else:
                    hit = lo < rhi and rlo < hi
                if hit and cells[sx + j, sy + step * i] == OCCUPIED:
                    return True
    return False


def los_fill(const uint8_t[:, :] cells, int sx, int sy, uint8_t[:, :] vis):
    cdef int w = cells.shape[0]
    cdef int h = cells.shape[1]
    cdef int tx, ty
    with nogil:
        for tx in range(w):
            for ty in range(h):
                if not _crossed_blocked(cells, sx, sy, tx - sx, ty - sy):
                    vis[tx, ty] = 1


def integrate_rays(uint8_t[:, :, :] cells, origin, const double[:, :] ends,
                   const uint8_t[:] is_hit):
    cdef int nx = cells.shape[0]
    cdef int ny = cells.shape[1]
    cdef int nz = cells.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef Py_ssize_t n = ends.shape[0]
    cdef Py_ssize_t k
    cdef double ex, ey, ez, ddx, ddy, ddz, length, ux, uy, uz, t
    cdef double tmx, tmy, tmz, tdx, tdy, tdz
    cdef int ix, iy, iz, sgx, sgy, sgz, eix, eiy, eiz
    cdef bint hit
    cdef int ox_i = <int>floor(ox), oy_i = <int>floor(oy), oz_i = <int>floor(oz)
    with nogil:
        for k in range(n):
            ex = ends[k, 0]
            ey = ends[k, 1]
            ez = ends[k, 2]
            hit = is_hit[k] != 0
            ddx = ex - ox
            ddy = ey - oy
            ddz = ez - oz
            length = sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
            if length <= 0.0:
                continue
            eix = <int>floor(ex)
            eiy = <int>floor(ey)
            eiz = <int>floor(ez)
            ux = ddx / length
            uy = ddy / length
            uz = ddz / length
            ix = ox_i
            iy = oy_i
            iz = oz_i
            if ux > 0:
                sgx = 1; tmx = (ix + 1 - ox) / ux; tdx = 1.0 / ux
            elif ux < 0:
                sgx = -1; tmx = (ox - ix) / -ux; tdx = -1.0 / ux
            else:
                sgx = 0; tmx = INFINITY; tdx = INFINITY
            if uy > 0:
                sgy = 1; tmy = (iy + 1 - oy) / uy; tdy = 1.0 / uy
            elif uy < 0:
                sgy = -1; tmy = (oy - iy) / -uy; tdy = -1.0 / uy
            else:
                sgy = 0; tmy = INFINITY; tdy = INFINITY
            if uz > 0:
                sgz = 1; tmz = (iz + 1 - oz) / uz; tdz = 1.0 / uz
            elif uz < 0:
                sgz = -1; tmz = (oz - iz) / -uz; tdz = -1.0 / uz
            else:
                sgz = 0; tmz = INFINITY; tdz = INFINITY
            while True:
                if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
                    break
                if hit and ix == eix and iy == eiy and iz == eiz:
                    break
                cells[ix, iy, iz] = FREE
                if tmx <= tmy and tmx <= tmz:
                    t = tmx
                    ix += sgx
                    tmx += tdx
                elif tmy <= tmz:
                    t = tmy
                    iy += sgy
                    tmy += tdy
                else:
                    t = tmz
                    iz += sgz
                    tmz += tdz
                if t >= length:
                    break
        for k in range(n):
            if is_hit[k] == 0:
                continue
            eix = <int>floor(ends[k, 0])
            eiy = <int>floor(ends[k, 1])
            eiz = <int>floor(ends[k, 2])
            if 0 <= eix < nx and 0 <= eiy < ny and 0 <= eiz < nz:
                cells[eix, eiy, eiz] = OCCUPIED


cdef enum:
    UNKNOWN = 2


cdef void _footprint(uint8_t[:, :] mask, double ox, double oy, double r, int x0, int y0,
                     double cx, double cy, double ux, double uy,
                     double half_len, double half_w) noexcept nogil:
    cdef int w = mask.shape[0]
    cdef int h = mask.shape[1]
    cdef int i, j
    cdef double x, y, dx, dy, along, across
    cdef double lim_l = half_len + 1e-9, lim_w = half_w + 1e-9
    for i in range(w):
        x = ox + (<double>(x0 + i) + 0.5) * r
        dx = x - cx
        for j in range(h):
            y = oy + (<double>(y0 + j) + 0.5) * r
            dy = y - cy
            along = fabs(dx * ux + dy * uy)
            across = fabs(-dx * uy + dy * ux)
            mask[i, j] = 1 if (along <= lim_l and across <= lim_w) else 0


def cuboid_footprint(uint8_t[:, :] mask, double ox, double oy, double r, int x0, int y0,
                     double cx, double cy, double ux, double uy, double half_len, double half_w):
    with nogil:
        _footprint(mask, ox, oy, r, x0, y0, cx, cy, ux, uy, half_len, half_w)


cdef void _cuboid(const uint8_t[:, :, :] cells3d, int x0, int y0, int z0, int z1,
                  const uint8_t[:, :] mask, const int[:, :] srcs, uint8_t[:, :] vis,
                  int[:] e, Py_ssize_t* count, Py_ssize_t* reads) noexcept nogil:
    # e holds 2 * (w + h) ints of scratch for the mask line extents
    cdef int w = mask.shape[0]
    cdef int h = mask.shape[1]
    cdef int k, i, j, s, sx, sy
    cdef bint any_unknown, contiguous
    cdef const uint8_t[:, :] layer
    cdef int[:] col_lo = e[:w]
    cdef int[:] col_hi = e[w:2 * w]
    cdef int[:] row_lo = e[2 * w:2 * w + h]
    cdef int[:] row_hi = e[2 * w + h:2 * (w + h)]
    cdef Lines lines
    cdef Lines* lp = NULL
    contiguous = _mask_lines(mask, col_lo, col_hi, row_lo, row_hi)
    if contiguous:
        lines.col_lo = &col_lo[0]
        lines.col_hi = &col_hi[0]
        lines.row_lo = &row_lo[0]
        lines.row_hi = &row_hi[0]
        lp = &lines
    else:
        for i in range(w):
            col_lo[i] = 0
            col_hi[i] = h - 1
    for k in range(z0, z1 + 1):
        layer = cells3d[x0:x0 + w, y0:y0 + h, k]
        any_unknown = False
        for i in range(w):
            for j in range(col_lo[i], col_hi[i] + 1):
                if mask[i, j] != 0 and layer[i, j] == UNKNOWN:
                    any_unknown = True
                    break
            if any_unknown:
                break
        if not any_unknown:
            continue
        # vis is only ever set inside the mask
        for i in range(w):
            for j in range(col_lo[i], col_hi[i] + 1):
                vis[i, j] = 0
        for s in range(srcs.shape[0]):
            sx = srcs[s, 0]
            sy = srcs[s, 1]
            if layer[sx, sy] == OCCUPIED:
                continue
            reads[0] += _rsc(layer, sx, sy, vis, mask, True, lp)
        for i in range(w):
            for j in range(col_lo[i], col_hi[i] + 1):
                if vis[i, j] != 0 and mask[i, j] != 0 and layer[i, j] == UNKNOWN:
                    count[0] += 1


def cuboid_gain(const uint8_t[:, :, :] cells3d, int x0, int y0, int z0, int z1,
                const uint8_t[:, :] mask, const int[:, :] srcs, uint8_t[:, :] vis):
    cdef Py_ssize_t count = 0, reads = 0
    cdef int[:] e = np.empty(2 * (mask.shape[0] + mask.shape[1]), dtype=np.intc)
    with nogil:
        _cuboid(cells3d, x0, y0, z0, z1, mask, srcs, vis, e, &count, &reads)
    return count, reads


cdef inline long _cell_of(double p, double o, double r) noexcept nogil:
    return <long>floor(_snap9((p - o) / r))


cdef inline void _window(double lo, double hi, double o, double r, long n,
                         long* a, long* b) noexcept nogil:
    a[0] = <long>ceil(_snap9((lo - o) / r - 0.5))
    b[0] = <long>floor(_snap9((hi - o) / r - 0.5))
    if a[0] < 0:
        a[0] = 0
    if b[0] > n - 1:
        b[0] = n - 1


def edge_gain_cells(const uint8_t[:, :, :] cells3d, double o0, double o1, double o2, double r,
                    double ax, double ay, double az, double bx, double by, double bz,
                    double length, double ux, double uy, double I_range, double l_max):
    cdef long nx = cells3d.shape[0], ny = cells3d.shape[1], nz = cells3d.shape[2]
    cdef long i, k, x0, x1, y0, y1, z0, z1, sx, sy, sz
    cdef double cx = (ax + bx) / 2.0, cy = (ay + by) / 2.0, cz = (az + bz) / 2.0
    cdef double dx = bx - ax, dy = by - ay, dz = bz - az
    cdef double half_len = length / 2.0, half_w = I_range
    cdef double hx, hy, t
    cdef Py_ssize_t count = 0, reads = 0
    for i in range(2):
        if (_cell_of(ax if i == 0 else bx, o0, r) < 0 or _cell_of(ax if i == 0 else bx, o0, r) >= nx
                or _cell_of(ay if i == 0 else by, o1, r) < 0 or _cell_of(ay if i == 0 else by, o1, r) >= ny
                or _cell_of(az if i == 0 else bz, o2, r) < 0 or _cell_of(az if i == 0 else bz, o2, r) >= nz):
            return 0, -1, 0
    k = 1 if length <= l_max else <long>ceil(_snap9(length / l_max))
    src_arr = np.empty((k, 2), dtype=np.intc)
    cdef int[:, :] srcs = src_arr
    hx = fabs(ux) * half_len + fabs(uy) * half_w
    hy = fabs(uy) * half_len + fabs(ux) * half_w
    _window(cx - hx, cx + hx, o0, r, nx, &x0, &x1)
    _window(cy - hy, cy + hy, o1, r, ny, &y0, &y1)
    _window(cz - half_w, cz + half_w, o2, r, nz, &z0, &z1)
    for i in range(k):
        if k == 1:
            sx = _cell_of(cx, o0, r)
            sy = _cell_of(cy, o1, r)
        else:
            t = (i + 0.5) / k
            sx = _cell_of(ax + dx * t, o0, r)
            sy = _cell_of(ay + dy * t, o1, r)
        srcs[i, 0] = sx
        srcs[i, 1] = sy
        if sx < x0:
            x0 = sx
        if sx > x1:
            x1 = sx
        if sy < y0:
            y0 = sy
        if sy > y1:
            y1 = sy
    cdef int w = x1 - x0 + 1, h = y1 - y0 + 1
    cdef uint8_t[:, :] mask = np.empty((w, h), dtype=np.uint8)
    cdef uint8_t[:, :] vis = np.zeros((w, h), dtype=np.uint8)
    cdef int[:] e = np.empty(2 * (w + h), dtype=np.intc)
    with nogil:
        _footprint(mask, o0, o1, r, x0, y0, cx, cy, ux, uy, half_len, half_w)
        for i in range(k):
            srcs[i, 0] -= x0
            srcs[i, 1] -= y0
            mask[srcs[i, 0], srcs[i, 1]] = 1
        _cuboid(cells3d, x0, y0, z0, z1, mask, srcs, vis, e, &count, &reads)
    return count, k, reads


cdef void _raycast_layers(const uint8_t[:, :, :] cells3d, int x0, int y0, int z0, int z1,
                          int sx, int sy, double pz, double rr, int n_rays, uint8_t[:, :] vis,
                          const double* pc, const double* ps,
                          Py_ssize_t* count, Py_ssize_t* reads) noexcept nogil:
    cdef int w = vis.shape[0]
    cdef int h = vis.shape[1]
    cdef int k, i, j, rays
    cdef double dz, rad, q
    cdef bint any_unknown
    cdef const uint8_t[:, :] layer
    for k in range(z0, z1 + 1):
        dz = k + 0.5 - pz
        q = rr * rr - dz * dz
        rad = sqrt(q) if q > 0.0 else 0.0
        layer = cells3d[x0:x0 + w, y0:y0 + h, k]
        if layer[sx, sy] == OCCUPIED:
            continue
        any_unknown = False
        for i in range(w):
            for j in range(h):
                if layer[i, j] == UNKNOWN:
                    any_unknown = True
                    break
            if any_unknown:
                break
        if not any_unknown:
            continue
        if n_rays > 0:
            rays = n_rays
        else:
            rays = <int>ceil(2.0 * M_PI * rad)
            if rays < 8:
                rays = 8
        vis[:, :] = 0
        reads[0] += _raycast(layer, sx, sy, rays, rad, vis, pc, ps)
        for i in range(w):
            for j in range(h):
                if vis[i, j] != 0 and layer[i, j] == UNKNOWN:
                    count[0] += 1


cdef _ray_table(int n_rays):
    # fixed ray set: directions are shared by every layer
    cs = np.empty(n_rays)
    sn = np.empty(n_rays)
    cdef double[::1] c = cs, s = sn
    cdef int i
    for i in range(n_rays):
        c[i] = cos(2.0 * M_PI * i / n_rays)
        s[i] = sin(2.0 * M_PI * i / n_rays)
    return cs, sn


def raycast_gain(const uint8_t[:, :, :] cells3d, int x0, int y0, int z0, int z1,
                 int sx, int sy, double pz, double rr, int n_rays, uint8_t[:, :] vis):
    cdef Py_ssize_t count = 0, reads = 0
    cdef double[::1] cs, sn
    cdef const double* pc = NULL
    cdef const double* ps = NULL
    if n_rays > 0:
        cs, sn = _ray_table(n_rays)
        pc = &cs[0]
        ps = &sn[0]
    with nogil:
        _raycast_layers(cells3d, x0, y0, z0, z1, sx, sy, pz, rr, n_rays, vis, pc, ps, &count, &reads)
    return count, reads


def raycast_gain_cells(const uint8_t[:, :, :] cells3d, double o0, double o1, double o2, double r,
                       double px, double py, double pz, double d_max, int n_rays):
    cdef long nx = cells3d.shape[0], ny = cells3d.shape[1], nz = cells3d.shape[2]
    cdef long ix = _cell_of(px, o0, r), iy = _cell_of(py, o1, r), iz = _cell_of(pz, o2, r)
    cdef long x0, x1, y0, y1, z0, z1
    cdef Py_ssize_t count = 0, reads = 0
    cdef double[::1] cs, sn
    cdef const double* pc = NULL
    cdef const double* ps = NULL
    if ix < 0 or ix >= nx or iy < 0 or iy >= ny or iz < 0 or iz >= nz:
        return -1, 0
    _window(pz - d_max, pz + d_max, o2, r, nz, &z0, &z1)
    _window(px - d_max, px + d_max, o0, r, nx, &x0, &x1)
    _window(py - d_max, py + d_max, o1, r, ny, &y0, &y1)
    if ix < x0:
        x0 = ix
    if ix > x1:
        x1 = ix
    if iy < y0:
        y0 = iy
    if iy > y1:
        y1 = iy
    cdef uint8_t[:, :] vis = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=np.uint8)
    if n_rays > 0:
        cs, sn = _ray_table(n_rays)
        pc = &cs[0]
        ps = &sn[0]
    with nogil:
        _raycast_layers(cells3d, x0, y0, z0, z1, ix - x0, iy - y0, (pz - o2) / r, d_max / r,
                        n_rays, vis, pc, ps, &count, &reads)
    return count, reads


cdef inline double _snap9(double v) noexcept nogil:
    cdef double r = round(v)
    if fabs(v - r) < 1e-9:
        return r
    return v


cdef bint _box_free(const uint8_t[:, :, :] cells, long x0, long y0, long z0,
                    long x1, long y1, long z1) noexcept nogil:
    cdef long i, j, k
    for i in range(x0, x1):
        for j in range(y0, y1):
            for k in range(z0, z1):
                if cells[i, j, k] != FREE:
                    return False
    return True


cdef bint _sweep_clear(const uint8_t[:, :, :] cells, double ax, double ay, double az,
                       double bx, double by, double bz, double hx, double hy, double hz,
                       int n) noexcept nogil:
    cdef long nx = cells.shape[0], ny = cells.shape[1], nz = cells.shape[2]
    cdef int i
    cdef double t, px, py, pz
    cdef long x0, y0, z0, x1, y1, z1
    # the endpoint rejects most candidates, so test it first
    for i in range(n, -1, -1):
        t = <double>i / n
        px = ax + t * (bx - ax)
        py = ay + t * (by - ay)
        pz = az + t * (bz - az)
        x0 = <long>floor(_snap9(px - hx))
        y0 = <long>floor(_snap9(py - hy))
        z0 = <long>floor(_snap9(pz - hz))
        x1 = <long>ceil(_snap9(px + hx))
        y1 = <long>ceil(_snap9(py + hy))
        z1 = <long>ceil(_snap9(pz + hz))
        if x0 < 0 or y0 < 0 or z0 < 0 or x1 > nx or y1 > ny or z1 > nz:
            return False
        if not _box_free(cells, x0, y0, z0, x1, y1, z1):
            return False
    return True


def segment_clear(const uint8_t[:, :, :] cells, a, b, half, int n):
    cdef double ax = a[0], ay = a[1], az = a[2]
    cdef double bx = b[0], by = b[1], bz = b[2]
    cdef double hx = half[0], hy = half[1], hz = half[2]
    cdef bint ok
    with nogil:
        ok = _sweep_clear(cells, ax, ay, az, bx, by, bz, hx, hy, hz, n)
    return ok


cdef inline int _sweep_steps(double ax, double ay, double az, double bx, double by, double bz) noexcept nogil:
    # sample spacing of half a voxel
    cdef double dx = bx - ax, dy = by - ay, dz = bz - az
    cdef int n = <int>ceil(sqrt((dx * dx + dy * dy) + dz * dz) / 0.5)
    return n if n > 1 else 1


def sweep_steps(double ax, double ay, double az, double bx, double by, double bz):
    return _sweep_steps(ax, ay, az, bx, by, bz)


def extend(const uint8_t[:, :, :] cells, const double[:, :] pos, int n, const double[:] u,
           const double[:] lo, const double[:] sc, double max_len,
           const double[:] o, double r, const double[:] half):
    cdef double q0 = lo[0] + sc[0] * u[0], q1 = lo[1] + sc[1] * u[1], q2 = lo[2] + sc[2] * u[2]
    cdef int i, near = 0
    cdef double dx, dy, dz, d, dn = INFINITY, s, b0, b1, b2
    cdef double ra0, ra1, ra2, rb0, rb1, rb2
    cdef bint ok = False
    with nogil:
        for i in range(n):
            dx = pos[i, 0] - q0
            dy = pos[i, 1] - q1
            dz = pos[i, 2] - q2
            d = sqrt((dx * dx + dy * dy) + dz * dz)
            if d < dn:
                dn = d
                near = i
        b0 = pos[near, 0]
        b1 = pos[near, 1]
        b2 = pos[near, 2]
        if dn > max_len:
            s = max_len / dn
            q0 = b0 + (q0 - b0) * s
            q1 = b1 + (q1 - b1) * s
            q2 = b2 + (q2 - b2) * s
        if dn != 0:
            ra0 = (b0 - o[0]) / r
            ra1 = (b1 - o[1]) / r
            ra2 = (b2 - o[2]) / r
            rb0 = (q0 - o[0]) / r
            rb1 = (q1 - o[1]) / r
            rb2 = (q2 - o[2]) / r
            ok = _sweep_clear(cells, ra0, ra1, ra2, rb0, rb1, rb2, half[0], half[1], half[2],
                              _sweep_steps(ra0, ra1, ra2, rb0, rb1, rb2))
    return near, dn, q0, q1, q2, ok


def ray_boxes_nearest(origin, const double[:, :] dirs, const double[:, :] lo, const double[:, :] hi):
    import numpy as np
    cdef Py_ssize_t n = dirs.shape[0], m = lo.shape[0]
    out_arr = np.full(n, np.inf)
    cdef double[:] out = out_arr
    cdef double o[3]
    cdef Py_ssize_t i, j
    cdef int a
    cdef double d, t1, t2, near, far, tn, tf, best
    o[0] = origin[0]
    o[1] = origin[1]
    o[2] = origin[2]
    with nogil:
        for i in range(n):
            best = INFINITY
            for j in range(m):
                tn = -INFINITY
                tf = INFINITY
                for a in range(3):
                    d = dirs[i, a]
                    if d == 0:
                        if o[a] > lo[j, a] and o[a] < hi[j, a]:
                            near = -INFINITY
                            far = INFINITY
                        else:
                            near = INFINITY
                            far = -INFINITY
                    else:
                        t1 = (lo[j, a] - o[a]) / d
                        t2 = (hi[j, a] - o[a]) / d
                        if t1 < t2:
                            near = t1
                            far = t2
                        else:
                            near = t2
                            far = t1
                    if near > tn:
                        tn = near
                    if far < tf:
                        tf = far
                if tn <= tf and tn >= 0 and tn < best:
                    best = tn
            out[i] = best
    return out_arr


def nearest(const double[:, :] pos, int n, double qx, double qy, double qz):
    """Index of the first of ``pos[:n]`` closest to ``q`` and its distance."""
    cdef int i, best = 0
    cdef double dx, dy, dz, d, bd = INFINITY
    with nogil:
        for i in range(n):
            dx = pos[i, 0] - qx
            dy = pos[i, 1] - qy
            dz = pos[i, 2] - qz
            d = sqrt((dx * dx + dy * dy) + dz * dz)
            if d < bd:
                bd = d
                best = i
    return best, bd
