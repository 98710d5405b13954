import math

import numpy as np
import pytest

from scatmodes import DipoleScene


def random_positions(rng, n, radius, min_sep):
    """Rejection-sample n points in a ball with pairwise separation."""
    pts = []
    while len(pts) < n:
        p = rng.normal(size=3)
        p *= radius * rng.random() ** (1.0 / 3.0) / np.linalg.norm(p)
        if all(np.linalg.norm(p - q) >= min_sep for q in pts):
            pts.append(p)
    return np.array(pts)


def random_scene(rng, n, ka, k=1.0, n_background=0, anisotropic=False,
                 strength=(0.3, 2.5)):
    """Random lossless dipole cloud of electrical radius ka."""
    radius = ka / k
    pos = random_positions(rng, n, radius, min_sep=0.25 * radius)
    lo, hi = strength
    scal = 6.0 * math.pi / k**3 * (lo + (hi - lo) * rng.random(n))
    if anisotropic:
        alpha = np.zeros((n, 3, 3))
        for i in range(n):
            q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            d = scal[i] * (0.5 + rng.random(3))
            alpha[i] = q @ np.diag(d) @ q.T
    else:
        alpha = scal
    region = ["background"] * n_background + ["controllable"] * (n - n_background)
    return DipoleScene(pos, alpha, tuple(region))


@pytest.fixture(scope="session")
def lossless_bank():
    """50 randomized scenes (N <= 30 dipoles, ka <= 2) for the invariant sweep."""
    rng = np.random.default_rng(2024)
    scenes = []
    for i in range(50):
        if i < 44:
            ka = 0.3 + 0.7 * rng.random()
        elif i < 48:
            ka = 1.0 + 0.5 * rng.random()
        else:
            ka = 2.0
        n = int(rng.integers(4, 31))
        n_bg = int(rng.integers(0, n // 2 + 1))
        scenes.append((random_scene(rng, n, ka, n_background=n_bg,
                                    anisotropic=bool(i % 7 == 3)), 1.0))
    return scenes


@pytest.fixture(scope="session")
def equivalence_bank():
    """20 randomized two-region scenes; all of dimension <= 300."""
    rng = np.random.default_rng(777)
    scenes = []
    for _ in range(20):
        ka = 0.4 + 0.6 * rng.random()
        n = int(rng.integers(5, 13))
        n_bg = int(rng.integers(2, n - 2))
        scenes.append((random_scene(rng, n, ka, n_background=n_bg), 1.0))
    return scenes


@pytest.fixture(scope="session")
def ground_plane_bank():
    """10 randomized scenes above the z = 0 PEC plane."""
    rng = np.random.default_rng(4242)
    scenes = []
    for _ in range(10):
        n = int(rng.integers(3, 7))
        k = 1.0
        pos = random_positions(rng, n, 0.35, min_sep=0.12)
        pos[:, 2] = 0.08 + 0.4 * rng.random(n)
        n_bg = int(rng.integers(0, n // 2 + 1))
        region = ["background"] * n_bg + ["controllable"] * (n - n_bg)
        scenes.append((DipoleScene(pos, 6.0 * math.pi * (0.4 + rng.random(n)),
                                   tuple(region), ground_plane=True), k))
    return scenes
