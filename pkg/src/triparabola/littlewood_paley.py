"""Bump profiles and Littlewood-Paley projections.

The plateau function ``phi`` is built from the ``exp(-1/x)`` smooth step on
``[1, 2]``; ``psi(z) = phi(z) - phi(2 z)`` is supported on ``1/2 <= |z| <= 2``
and ``psi_tilde(z) = phi(z / 4) - phi(4 z)`` equals one on the support of
``psi``. Scaled versions are ``phi_k(z) = phi(2^-k z)`` and
``psi_k(z) = psi(2^-k z)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .grid import Field2D, from_coefficients

__all__ = [
    "smooth_step",
    "BumpProfile",
    "FreqWindow",
    "make_bump_profile",
    "project",
    "partition_defect",
    "telescoped_sum",
    "commutator_defect",
    "unit_partition_bump",
    "export_profile_csv",
]


def smooth_step(x) -> np.ndarray:
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class BumpProfile:
    """The ``phi / psi / psi_tilde`` family.

    Attributes
    ----------
    smoothness_order : int
        Number of continuous derivatives guaranteed (the construction is in
        fact smooth; the field records what callers may rely on).
    tilde_factor : float
        Dilation used for ``psi_tilde``; 4 gives support ``1/4 <= |z| <= 8``.
    """

    smoothness_order: int = 8
    tilde_factor: float = 4.0

    def phi(self, z) -> np.ndarray:
        a = np.abs(np.asarray(z, dtype=float))
        return 1.0 - smooth_step(a - 1.0)

    def psi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.phi(z) - self.phi(2.0 * z)

    def psi_tilde(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        c = self.tilde_factor
        out = self.phi(z / c) - self.phi(c * z)
        # exact 1 wherever psi is nonzero (already true for c >= 2)
        a = np.abs(z)
        return np.where((a >= 0.5) & (a <= 2.0), 1.0, out)

    def phi_k(self, z, k: int) -> np.ndarray:
        return self.phi(np.ldexp(np.asarray(z, dtype=float), -int(k)))

    def psi_k(self, z, k: int) -> np.ndarray:
        return self.psi(np.ldexp(np.asarray(z, dtype=float), -int(k)))

    def psi_tilde_k(self, z, k: int) -> np.ndarray:
        return self.psi_tilde(np.ldexp(np.asarray(z, dtype=float), -int(k)))


def make_bump_profile(smoothness_order: int = 8, tilde_factor: float = 4.0) -> BumpProfile:
    """Construct the bump family; ``smoothness_order`` must be at least 2."""
    if smoothness_order < 2:
        raise ValueError(f"smoothness_order must be at least 2 (got {smoothness_order})")
    if tilde_factor < 2:
        raise ValueError("tilde_factor below 2 would not cover the support of psi")
    return BumpProfile(int(smoothness_order), float(tilde_factor))


DEFAULT_PROFILE = make_bump_profile()


@dataclass(frozen=True)
class FreqWindow:
    """Projection ``Delta_k^(axis)`` (or its tilde version)."""

    axis: Literal[1, 2]
    k: int
    tilde: bool = False

    def __post_init__(self):
        if self.axis not in (1, 2):
            raise ValueError(f"axis must be 1 or 2 (got {self.axis!r})")


def window_symbol(f_grid, w: FreqWindow, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    XI, ETA = f_grid.freq_mesh()
    z = XI if w.axis == 1 else ETA
    return profile.psi_tilde_k(z, w.k) if w.tilde else profile.psi_k(z, w.k)


def project(f: Field2D, w: FreqWindow, profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    """Multiply the spectrum of ``f`` by ``psi_k`` (or ``psi_tilde_k``) along one axis."""
    return from_coefficients(f.grid, f.spectral * window_symbol(f.grid, w, profile))


def telescoped_sum(profile: BumpProfile, K: int, z) -> np.ndarray:
    """``sum_{|k| <= K} psi_k(z)`` evaluated term by term."""
    z = np.asarray(z, dtype=float)
    return sum(profile.psi_k(z, k) for k in range(-K, K + 1))


def partition_defect(profile: BumpProfile, K: int, points) -> float:
    """``sup |1 - sum_{|k| <= K} psi_k(z)|`` over test points.

    Points must satisfy ``2^(1-K) <= |z| <= 2^(K-1)``.
    """
    z = np.atleast_1d(np.asarray(points, dtype=float))
    a = np.abs(z)
    lo, hi = 2.0 ** (1 - K), 2.0 ** (K - 1)
    bad = (a < lo) | (a > hi)
    if bad.any():
        raise ValueError(f"test point {z[bad][0]:g} outside covered range [{lo:g}, {hi:g}]")
    return float(np.max(np.abs(1.0 - telescoped_sum(profile, K, z))))


def commutator_defect(f: Field2D, cutoff, k: int, axis: Literal[1, 2] = 1,
                      profile: BumpProfile = DEFAULT_PROFILE) -> float:
    """Normalized size of ``[cutoff, Delta_k^(axis)] f``.

    Returns ``max |cutoff * Delta_k f - Delta_k(cutoff * f)| / (2^-k (1 + M f))``
    over the grid, where ``M`` is the directional Hardy-Littlewood maximal
    function along ``axis``.

    Parameters
    ----------
    cutoff : Field2D or callable
        Smooth spatial bump; a callable is sampled as ``cutoff(X, Y)``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    from .operators import hl_maximal

    if not isinstance(cutoff, Field2D):
        X, Y = f.grid.mesh()
        cutoff = Field2D(f.grid, np.broadcast_to(cutoff(X, Y), f.grid.shape))
    w = FreqWindow(axis, k)
    comm = cutoff.samples * project(f, w, profile).samples - project(cutoff * f, w, profile).samples
    mf = hl_maximal(f, axis=axis)
    return float(np.max(np.abs(comm) / (2.0 ** (-k) * (1.0 + mf))))


def unit_partition_bump(u, width: float = 0.5) -> np.ndarray:
    """Smooth bump whose integer translates sum to one.

    ``b(u) = H(u + 1/2) - H(u - 1/2)`` where ``H`` rises from 0 to 1 across
    ``[-width, width]``; supported in ``|u| <= 1/2 + width``.
    """
    if not 0 < width <= 0.5:
        raise ValueError("width must lie in (0, 1/2]")
    u = np.asarray(u, dtype=float)

    def H(v):
        return smooth_step((v + width) / (2.0 * width))

    return H(u + 0.5) - H(u - 0.5)


def export_profile_csv(profile: BumpProfile, path, zmax: float = 4.0, n: int = 801) -> None:
    """Write columns ``zeta, phi, psi, psi_tilde`` for plotting."""
    z = np.linspace(-zmax, zmax, n)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zeta", "phi", "psi", "psi_tilde"])
        for row in zip(z, profile.phi(z), profile.psi(z), profile.psi_tilde(z)):
            w.writerow([repr(float(v)) for v in row])
