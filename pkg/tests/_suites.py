"""Shared deterministic field suites for the roth tests."""

from __future__ import annotations

import numpy as np


def cell_centers(N):
    c = (np.arange(N) + 0.5) / N
    return np.meshgrid(c, c, indexing="ij")


def calibration_suite(n_fields=60, N=64, seed=2024):
    """Indicators of random density, powered uniforms and discs."""
    rng = np.random.default_rng(seed)
    X, Y = cell_centers(N)
    out = []
    for s in range(n_fields):
        kind = s % 3
        if kind == 0:
            f = (rng.random((N, N)) < rng.uniform(0.05, 0.9)).astype(float)
        elif kind == 1:
            f = rng.random((N, N)) ** rng.uniform(0.5, 4)
        else:
            cx, cy, r = rng.random(3)
            f = ((X - cx) ** 2 + (Y - cy) ** 2 < (0.1 + 0.4 * r) ** 2).astype(float)
            if f.sum() == 0:
                continue
        out.append(f)
    return out


def multiband_field(N, seed):
    X, Y = cell_centers(N)
    rng = np.random.default_rng(seed)
    f = 0.5 + sum(0.1 * np.cos(2 * np.pi * 2**j * X + 6 * rng.random()) * np.cos(2 * np.pi * 2**j * Y)
                  for j in range(1, 8))
    return np.clip(f, 0, 1)
