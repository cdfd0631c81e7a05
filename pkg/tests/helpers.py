"""Shared test oracles, written independently of the library's fast paths."""

import math

import numpy as np


def straight_triangles_image_coords(depth, center_row, center_col, scale,
                                    rotation, height, width):
    """Vertices of all straight-edged layout triangles in image (row, col).

    Rebuilds the midpoint subdivision and the canonical-to-image transform
    from scratch so it cannot share bugs with the library implementation.
    """
    root = [
        (0.0, -1.0),
        (math.sqrt(3.0) / 2.0, 0.5),
        (-math.sqrt(3.0) / 2.0, 0.5),
    ]

    def children(tri):
        (ax, ay), (bx, by), (cx, cy) = tri
        mab = ((ax + bx) / 2.0, (ay + by) / 2.0)
        mbc = ((bx + cx) / 2.0, (by + cy) / 2.0)
        mca = ((cx + ax) / 2.0, (cy + ay) / 2.0)
        return [
            [tri[0], mab, mca],
            [mab, tri[1], mbc],
            [mca, mbc, tri[2]],
        ]

    levels = []
    current = [root]
    for _ in range(depth):
        nxt = []
        for tri in current:
            nxt.extend(children(tri))
        levels.extend(nxt)
        current = nxt

    size = scale * min(height, width)
    out = []
    for tri in levels:
        pts = []
        for (x, y) in tri:
            xr = x * math.cos(rotation) - y * math.sin(rotation)
            yr = x * math.sin(rotation) + y * math.cos(rotation)
            pts.append((center_row * height + size * yr,
                        center_col * width + size * xr))
        out.append(pts)
    return out


def point_in_triangle(row, col, tri):
    """Half-plane sign test; boundary counts as inside."""
    (r0, c0), (r1, c1), (r2, c2) = tri
    d0 = (col - c0) * (r1 - r0) - (row - r0) * (c1 - c0)
    d1 = (col - c1) * (r2 - r1) - (row - r1) * (c2 - c1)
    d2 = (col - c2) * (r0 - r2) - (row - r2) * (c0 - c2)
    has_neg = d0 < 0 or d1 < 0 or d2 < 0
    has_pos = d0 > 0 or d1 > 0 or d2 > 0
    return not (has_neg and has_pos)


def brute_force_mask(depth, center_row, center_col, scale, rotation,
                     height, width):
    """Binary union-of-triangles mask tested at pixel centers."""
    tris = straight_triangles_image_coords(depth, center_row, center_col,
                                           scale, rotation, height, width)
    mask = np.zeros((height, width), dtype=bool)
    for r in range(height):
        for c in range(width):
            pr, pc = r + 0.5, c + 0.5
            for tri in tris:
                if point_in_triangle(pr, pc, tri):
                    mask[r, c] = True
                    break
    return mask


def mask_agreement(coverage, oracle):
    """Agreement on decided pixels; anti-aliased partials are excluded."""
    decided = (coverage == 0.0) | (coverage == 1.0)
    agree = (coverage == 1.0) == oracle
    n = int(decided.sum())
    if n == 0:
        return 1.0
    return float((agree & decided).sum()) / n
