"""Winding-number point-in-polygon, independent of the ray-casting code."""

import math


def winding_number(x, y, ring):
    """ring: closed list of (x, y).  Non-zero means inside."""
    wn = 0
    for (x0, y0), (x1, y1) in zip(ring[:-1], ring[1:]):
        cross = (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)
        if y0 <= y:
            if y1 > y and cross > 0:
                wn += 1
        elif y1 <= y and cross < 0:
            wn -= 1
    return wn


def star_polygon(rng, cx, cy, n, rmin, rmax):
    """Random simple polygon: jittered angles with random radii around a centre."""
    angles = [(k + rng.uniform(0, 0.8)) * 2 * math.pi / n for k in range(n)]
    pts = [(cx + r * math.cos(a), cy + r * math.sin(a))
           for a, r in zip(angles, (rng.uniform(rmin, rmax) for _ in range(n)))]
    return pts + [pts[0]]
