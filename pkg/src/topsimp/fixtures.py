"""Analytic test fields: noisy terrains and signed distance fields of handles."""
from __future__ import annotations

import numpy as np

from .grid import ScalarField


def terrain(n: int = 64, noise: float = 0.005, seed: int = 0) -> ScalarField:
    """Tilted plane with three Gaussian pits plus uniform noise in [0, noise).

    The tilt puts the global minimum on the x = 0 border, so each pit is a
    separate basin whose minimum-saddle pair has persistence above 0.2.
    """
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:n, 0:n] / (n - 1)
    f = 1.2 * x
    for (cx, cy), depth in zip([(0.65, 0.25), (0.8, 0.7), (0.55, 0.6)], [0.6, 0.65, 0.55]):
        f = f - depth * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * 0.08 ** 2))
    f = f + noise * rng.random(f.shape)
    return ScalarField.from_array(f)


def _grid3(n: int, extent: float = 1.0):
    t = np.linspace(-extent, extent, n)
    z, y, x = np.meshgrid(t, t, t, indexing="ij")
    return x, y, z


def torus_sdf(n: int = 32, major: float = 0.5, minor: float = 0.2, center=(0.0, 0.0, 0.0),
              noise: float = 0.0, seed: int = 0) -> ScalarField:
    """Signed distance to a torus around the z axis (negative inside)."""
    x, y, z = _grid3(n)
    f = _torus(x, y, z, major, minor, center)
    if noise:
        f = f + noise * np.random.default_rng(seed).random(f.shape)
    return ScalarField.from_array(f)


def _torus(x, y, z, major, minor, center):
    cx, cy, cz = center
    q = np.sqrt((x - cx) ** 2 + (y - cy) ** 2) - major
    return np.sqrt(q ** 2 + (z - cz) ** 2) - minor


def multi_handle(n: int = 32, noise: float = 0.3, seed: int = 1) -> ScalarField:
    """Union of three small tori (three handles) plus uniform noise."""
    x, y, z = _grid3(n)
    f = np.minimum.reduce([
        _torus(x, y, z, 0.32, 0.12, (-0.45, -0.4, 0.0)),
        _torus(x, y, z, 0.32, 0.12, (0.45, -0.4, 0.1)),
        _torus(x, y, z, 0.32, 0.12, (0.0, 0.45, -0.1)),
    ])
    f = f + noise * np.random.default_rng(seed).random(f.shape)
    return ScalarField.from_array(f)


def noisy_volume(n: int = 32, noise: float = 0.05, seed: int = 0) -> ScalarField:
    """Smooth 3D blobs plus uniform noise."""
    x, y, z = _grid3(n)
    f = np.sin(2.5 * x) * np.cos(2.0 * y) + 0.5 * np.sin(3.0 * z + x)
    f = (f - f.min()) / (f.max() - f.min())
    f = f + noise * np.random.default_rng(seed).random(f.shape)
    return ScalarField.from_array(f)
