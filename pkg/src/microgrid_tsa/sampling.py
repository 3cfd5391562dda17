"""Seeded sampling helpers for balls and spheres."""

import numpy as np


def uniform_ball(rng, m, radius, n):
    """n points uniformly distributed in the open ball of given radius."""
    g = rng.standard_normal((n, m))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    r = radius * rng.random(n) ** (1.0 / m)
    return g / norms[:, None] * r[:, None]


def uniform_sphere(rng, m, radius, n):
    """n points uniformly distributed on the sphere of given radius."""
    g = rng.standard_normal((n, m))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None] * radius
