"""Pure-Python implementations of the hot kernels.

Every function here has a twin with an identical signature in ``_ckernels.pyx``.
Arrays are indexed ``[x, y]`` (2D) or ``[x, y, z]`` (3D); cell codes are
``FREE=0``, ``OCCUPIED=1``, ``UNKNOWN=2``. Output arrays are filled in place.
"""

from __future__ import annotations

import math

import numpy as np

FREE = 0
OCCUPIED = 1
UNKNOWN = 2

# (col_x, col_y, depth_x, depth_y) for the eight octants around a source
OCTANTS = (
    (1, 0, 0, 1),
    (-1, 0, 0, 1),
    (1, 0, 0, -1),
    (-1, 0, 0, -1),
    (0, 1, 1, 0),
    (0, -1, 1, 0),
    (0, 1, -1, 0),
    (0, -1, -1, 0),
)


def _max_depth(sx, sy, w, h, xd, yd):
    if xd == 1:
        return w - 1 - sx
    if xd == -1:
        return sx
    if yd == 1:
        return h - 1 - sy
    return sy


def _scan(cells, vis, mask, sx, sy, depth, start, end, xc, yc, xd, yd, max_depth, w, h):
    reads = 0
    if start > end:
        return 0
    for d in range(depth, max_depth + 1):
        blocked = False
        new_start = start
        ox = sx + d * xd
        oy = sy + d * yd
        c_lo = int(math.floor(start * (d - 0.5) - 0.5))
        if c_lo < 0:
            c_lo = 0
        for c in range(c_lo, d + 1):
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
            if mask is not None and not mask[gx, gy]:
                # outside the mask: transparent and never read
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
                reads += _scan(
                    cells, vis, mask, sx, sy, d + 1, start, left,
                    xc, yc, xd, yd, max_depth, w, h,
                )
                new_start = right
        if blocked:
            break
    return reads


def rsc_fill(cells, sx, sy, vis, mask=None):
    """Recursive shadowcasting from cell ``(sx, sy)``; returns the number of cell-state reads.

    Cells where ``mask`` is zero are transparent and never read or marked.
    """
    w, h = cells.shape
    vis[sx, sy] = 1
    reads = 0
    for xc, yc, xd, yd in OCTANTS:
        md = _max_depth(sx, sy, w, h, xd, yd)
        reads += _scan(cells, vis, mask, sx, sy, 1, 0.0, 1.0, xc, yc, xd, yd, md, w, h)
    return reads


def raycast_fill(cells, sx, sy, n_rays, max_range, vis):
    """March ``n_rays`` evenly spaced rays cell by cell; returns cell-state reads."""
    w, h = cells.shape
    vis[sx, sy] = 1
    reads = 0
    px = sx + 0.5
    py = sy + 0.5
    for i in range(n_rays):
        theta = 2.0 * math.pi * i / n_rays
        dx = math.cos(theta)
        dy = math.sin(theta)
        ix, iy = sx, sy
        if dx > 0:
            step_x, t_max_x, t_dx = 1, (ix + 1 - px) / dx, 1.0 / dx
        elif dx < 0:
            step_x, t_max_x, t_dx = -1, (px - ix) / -dx, -1.0 / dx
        else:
            step_x, t_max_x, t_dx = 0, math.inf, math.inf
        if dy > 0:
            step_y, t_max_y, t_dy = 1, (iy + 1 - py) / dy, 1.0 / dy
        elif dy < 0:
            step_y, t_max_y, t_dy = -1, (py - iy) / -dy, -1.0 / dy
        else:
            step_y, t_max_y, t_dy = 0, math.inf, math.inf
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


def _crossed_blocked(cells, sx, sy, dx, dy):
    """True if the open centre-to-centre segment crosses an occupied cell interior."""
    adx = abs(dx)
    ady = abs(dy)
    if adx >= ady:
        n = adx
        step = 1 if dx > 0 else -1
        for i in range(1, n):
            a = (2 * i - 1) * dy
            b = (2 * i + 1) * dy
            lo = a if a < b else b
            hi = b if a < b else a
            jc = (i * dy) // n
            for j in (jc - 1, jc, jc + 1, jc + 2):
                rlo = (2 * j - 1) * n
                rhi = (2 * j + 1) * n
                if lo == hi:
                    hit = rlo < lo < rhi
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
            jc = (i * dx) // n
            for j in (jc - 1, jc, jc + 1, jc + 2):
                rlo = (2 * j - 1) * n
                rhi = (2 * j + 1) * n
                if lo == hi:
                    hit = rlo < lo < rhi
                else:
                    hit = lo < rhi and rlo < hi
                if hit and cells[sx + j, sy + step * i] == OCCUPIED:
                    return True
    return False


def los_fill(cells, sx, sy, vis):
    """Brute-force line-of-sight from the source centre to every cell centre."""
    w, h = cells.shape
    for tx in range(w):
        for ty in range(h):
            if not _crossed_blocked(cells, sx, sy, tx - sx, ty - sy):
                vis[tx, ty] = 1


def integrate_rays(cells, origin, ends, is_hit):
    """Carve free space along rays and latch hit voxels as occupied.

    ``origin`` and ``ends`` are in voxel units relative to the map corner.
    Hit endpoints must already be nudged into the obstacle by the caller.
    """
    nx, ny, nz = cells.shape
    ox, oy, oz = float(origin[0]), float(origin[1]), float(origin[2])
    n = len(ends)
    hit_cells = []
    for k in range(n):
        ex, ey, ez = float(ends[k][0]), float(ends[k][1]), float(ends[k][2])
        hit = bool(is_hit[k])
        ddx, ddy, ddz = ex - ox, ey - oy, ez - oz
        length = math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
        end_ix, end_iy, end_iz = int(math.floor(ex)), int(math.floor(ey)), int(math.floor(ez))
        if hit:
            hit_cells.append((end_ix, end_iy, end_iz))
        ix, iy, iz = int(math.floor(ox)), int(math.floor(oy)), int(math.floor(oz))
        if length <= 0.0:
            continue
        ux, uy, uz = ddx / length, ddy / length, ddz / length
        steps = []
        for p, u, i in ((ox, ux, ix), (oy, uy, iy), (oz, uz, iz)):
            if u > 0:
                steps.append([1, (i + 1 - p) / u, 1.0 / u])
            elif u < 0:
                steps.append([-1, (p - i) / -u, -1.0 / u])
            else:
                steps.append([0, math.inf, math.inf])
        while True:
            if 0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz:
                if hit and ix == end_ix and iy == end_iy and iz == end_iz:
                    break
                cells[ix, iy, iz] = FREE
            else:
                break
            tx, ty, tz = steps[0][1], steps[1][1], steps[2][1]
            if tx <= ty and tx <= tz:
                t = tx
                ix += steps[0][0]
                steps[0][1] += steps[0][2]
            elif ty <= tz:
                t = ty
                iy += steps[1][0]
                steps[1][1] += steps[1][2]
            else:
                t = tz
                iz += steps[2][0]
                steps[2][1] += steps[2][2]
            if t >= length:
                break
    for ix, iy, iz in hit_cells:
        if 0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz:
            cells[ix, iy, iz] = OCCUPIED


def cuboid_footprint(mask, ox, oy, r, x0, y0, cx, cy, ux, uy, half_len, half_w):
    """Mark window cells whose centres lie in the rectangle ``half_len`` along ``(ux, uy)`` and ``half_w`` across it.

    Cell ``(i, j)`` of the window is map voxel ``(x0 + i, y0 + j)`` with centre
    ``origin + (index + 0.5) * r``.
    """
    w, h = mask.shape
    xs = ox + (np.arange(x0, x0 + w) + 0.5) * r
    ys = oy + (np.arange(y0, y0 + h) + 0.5) * r
    dx = xs[:, None] - cx
    dy = ys[None, :] - cy
    along = np.abs(dx * ux + dy * uy)
    across = np.abs(-dx * uy + dy * ux)
    mask[...] = (along <= half_len + 1e-9) & (across <= half_w + 1e-9)


def cuboid_gain(cells3d, x0, y0, z0, z1, mask, srcs, vis):
    """Shadowcast every layer ``z0..z1`` of the window at ``(x0, y0)`` shaped like ``mask``.

    ``srcs`` holds source cells relative to the window. Returns
    ``(visible Unknown count, reads)`` with visibility unioned over sources per layer.
    """
    w, h = mask.shape
    count = 0
    reads = 0
    for k in range(z0, z1 + 1):
        layer = cells3d[x0 : x0 + w, y0 : y0 + h, k]
        unknown = (layer == UNKNOWN) & (mask != 0)
        if not unknown.any():
            continue
        vis[...] = 0
        for sx, sy in srcs:
            if layer[sx, sy] == OCCUPIED:
                continue
            reads += rsc_fill(layer, int(sx), int(sy), vis, mask)
        count += int((unknown & (vis != 0)).sum())
    return count, reads


def raycast_gain(cells3d, x0, y0, z0, z1, sx, sy, pz, rr, n_rays, vis):
    """Fixed-ray casting on each layer of a ball of radius ``rr`` cells centred at height ``pz``.

    ``pz`` is in voxel units from the map floor. ``n_rays <= 0`` picks one
    cell of spacing at each layer's disc rim. Returns ``(visible Unknown count, reads)``.
    """
    w, h = vis.shape
    count = 0
    reads = 0
    for k in range(z0, z1 + 1):
        dz = k + 0.5 - pz
        rad = math.sqrt(max(rr * rr - dz * dz, 0.0))
        layer = cells3d[x0 : x0 + w, y0 : y0 + h, k]
        if layer[sx, sy] == OCCUPIED or not (layer == UNKNOWN).any():
            continue
        rays = n_rays if n_rays > 0 else max(8, int(math.ceil(2.0 * math.pi * rad)))
        vis[...] = 0
        reads += raycast_fill(layer, sx, sy, rays, rad, vis)
        count += int(((layer == UNKNOWN) & (vis != 0)).sum())
    return count, reads


def segment_clear(cells, a, b, half, n):
    """True if ``n + 1`` evenly spaced prisms from ``a`` to ``b`` contain only Free voxels.

    Points and half-extents are in voxel units from the map corner; a prism
    leaving the grid is not clear.
    """
    nx, ny, nz = cells.shape
    ax, ay, az = a
    bx, by, bz = b
    hx, hy, hz = half
    # the endpoint rejects most candidates, so test it first
    for i in range(n, -1, -1):
        t = i / n
        px = ax + t * (bx - ax)
        py = ay + t * (by - ay)
        pz = az + t * (bz - az)
        x0 = math.floor(_snap9(px - hx))
        y0 = math.floor(_snap9(py - hy))
        z0 = math.floor(_snap9(pz - hz))
        x1 = math.ceil(_snap9(px + hx))
        y1 = math.ceil(_snap9(py + hy))
        z1 = math.ceil(_snap9(pz + hz))
        if x0 < 0 or y0 < 0 or z0 < 0 or x1 > nx or y1 > ny or z1 > nz:
            return False
        if (cells[x0:x1, y0:y1, z0:z1] != FREE).any():
            return False
    return True


def _snap9(v):
    r = round(v)
    return float(r) if abs(v - r) < 1e-9 else v


def ray_boxes_nearest(origin, dirs, lo, hi):
    """Nearest slab-method entry distance of each ray over all boxes; ``inf`` on a miss.

    A ray touching an edge or face counts as a hit; a ray parallel to a
    slab is inside it only if the origin lies strictly between the planes.
    """
    import numpy as np

    n = len(dirs)
    if not len(lo):
        return np.full(n, np.inf)
    o = np.asarray(origin, dtype=float)[None, None, :]
    d = dirs[:, None, :]
    zero = d == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None] - o) / d
        t2 = (hi[None] - o) / d
    near = np.minimum(t1, t2)
    far = np.maximum(t1, t2)
    inside = (o > lo[None]) & (o < hi[None])
    near = np.where(zero, np.where(inside, -np.inf, np.inf), near)
    far = np.where(zero, np.where(inside, np.inf, -np.inf), far)
    t_near = near.max(axis=2)
    t_far = far.min(axis=2)
    hit = (t_near <= t_far) & (t_near >= 0)
    return np.where(hit, t_near, np.inf).min(axis=1)


def nearest(pos, n, qx, qy, qz):
    """Index of the first of ``pos[:n]`` closest to ``q`` and its distance."""
    d = np.linalg.norm(pos[:n] - np.array([qx, qy, qz]), axis=1)
    i = int(np.argmin(d))
    return i, float(d[i])


def _cell_of(p, o, r):
    return math.floor(_snap9((p - o) / r))


def _window(lo, hi, o, r, n):
    a = math.ceil(_snap9((lo - o) / r - 0.5))
    b = math.floor(_snap9((hi - o) / r - 0.5))
    return max(a, 0), min(b, n - 1)


def edge_gain_cells(cells3d, o0, o1, o2, r, ax, ay, az, bx, by, bz, length, ux, uy, I_range, l_max):
    """Cuboid shadowcasting gain of the edge ``a -> b`` straight from map cells.

    ``length`` is the edge length and ``(ux, uy)`` its unit xy heading.
    Returns ``(visible Unknown count, FOV source count, reads)``; the source
    count is -1 when an endpoint lies outside the grid.
    """
    nx, ny, nz = cells3d.shape
    for p in ((ax, ay, az), (bx, by, bz)):
        idx = (_cell_of(p[0], o0, r), _cell_of(p[1], o1, r), _cell_of(p[2], o2, r))
        if not (0 <= idx[0] < nx and 0 <= idx[1] < ny and 0 <= idx[2] < nz):
            return 0, -1, 0
    cx, cy, cz = (ax + bx) / 2.0, (ay + by) / 2.0, (az + bz) / 2.0
    dx, dy = bx - ax, by - ay
    half_len = length / 2.0
    half_w = I_range
    if length <= l_max:
        k = 1
        srcs = [(_cell_of(cx, o0, r), _cell_of(cy, o1, r))]
    else:
        k = math.ceil(_snap9(length / l_max))
        srcs = [
            (_cell_of(ax + dx * ((i + 0.5) / k), o0, r), _cell_of(ay + dy * ((i + 0.5) / k), o1, r))
            for i in range(k)
        ]
    hx = abs(ux) * half_len + abs(uy) * half_w
    hy = abs(uy) * half_len + abs(ux) * half_w
    x0, x1 = _window(cx - hx, cx + hx, o0, r, nx)
    y0, y1 = _window(cy - hy, cy + hy, o1, r, ny)
    z0, z1 = _window(cz - half_w, cz + half_w, o2, r, nz)
    for sx, sy in srcs:
        x0, x1 = min(x0, sx), max(x1, sx)
        y0, y1 = min(y0, sy), max(y1, sy)
    mask = np.empty((x1 - x0 + 1, y1 - y0 + 1), dtype=np.uint8)
    cuboid_footprint(mask, o0, o1, r, x0, y0, cx, cy, ux, uy, half_len, half_w)
    rel = np.array([(sx - x0, sy - y0) for sx, sy in srcs], dtype=np.intc)
    mask[rel[:, 0], rel[:, 1]] = 1
    vis = np.zeros(mask.shape, dtype=np.uint8)
    count, reads = cuboid_gain(cells3d, x0, y0, z0, z1, mask, rel, vis)
    return count, k, reads


def raycast_gain_cells(cells3d, o0, o1, o2, r, px, py, pz, d_max, n_rays):
    """Ball raycast gain at ``p`` straight from map cells; count is -1 when ``p`` is outside the grid."""
    nx, ny, nz = cells3d.shape
    ix, iy, iz = _cell_of(px, o0, r), _cell_of(py, o1, r), _cell_of(pz, o2, r)
    if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
        return -1, 0
    z0, z1 = _window(pz - d_max, pz + d_max, o2, r, nz)
    x0, x1 = _window(px - d_max, px + d_max, o0, r, nx)
    y0, y1 = _window(py - d_max, py + d_max, o1, r, ny)
    x0, x1 = min(x0, ix), max(x1, ix)
    y0, y1 = min(y0, iy), max(y1, iy)
    vis = np.zeros((x1 - x0 + 1, y1 - y0 + 1), dtype=np.uint8)
    return raycast_gain(cells3d, x0, y0, z0, z1, ix - x0, iy - y0, (pz - o2) / r, d_max / r, n_rays, vis)


def sweep_steps(ax, ay, az, bx, by, bz):
    """Prism samples needed to keep spacing at most half a voxel (points in voxel units)."""
    dx, dy, dz = bx - ax, by - ay, bz - az
    return max(1, math.ceil(math.sqrt((dx * dx + dy * dy) + dz * dz) / 0.5))


def extend(cells, pos, n, u, lo, sc, max_len, o, r, half):
    """One RRT extension: sample ``lo + sc * u``, find the nearest of ``pos[:n]``, steer, check the sweep.

    Returns ``(nearest index, distance to sample, qx, qy, qz, collision free)``.
    """
    q = [float(lo[i]) + float(sc[i]) * float(u[i]) for i in range(3)]
    near, dn = nearest(pos, n, q[0], q[1], q[2])
    b = [float(v) for v in pos[near]]
    if dn > max_len:
        s = max_len / dn
        q = [b[i] + (q[i] - b[i]) * s for i in range(3)]
    ok = False
    if dn != 0:
        ra = [(b[i] - float(o[i])) / r for i in range(3)]
        rb = [(q[i] - float(o[i])) / r for i in range(3)]
        ok = segment_clear(cells, ra, rb, half, sweep_steps(*ra, *rb))
    return near, dn, q[0], q[1], q[2], ok
