"""Periodic 2-D grids, spectral transforms, norms and random band-limited fields.

Conventions
-----------
Samples live on the centered torus grid ``x_i = (i - nx/2) * dx`` with
``dx = Lx / nx`` (likewise for ``y``). Arrays have shape ``(nx, ny)`` with
axis 0 indexing ``x``. Frequencies are in cycles per unit length, as given by
``numpy.fft.fftfreq(n, d=dx)``, and spectral coefficients are normalized so
that

    f(x, y) = sum_{xi, eta} c[xi, eta] * exp(2 pi i (xi x + eta y)).

With this normalization ``||f||_2^2 = Lx * Ly * sum |c|^2``.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Literal

import numpy as np

__all__ = [
    "Grid2D",
    "Field2D",
    "FreqSupportSpec",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "from_function",
    "from_coefficients",
    "lp_norm",
    "lp_norm_on",
    "sobolev_norm",
    "random_band_limited",
    "support_mask",
    "save_binary",
    "load_binary",
    "save_csv",
    "coefficient_index",
    "mode",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Periodic sampling grid on ``[-Lx/2, Lx/2) x [-Ly/2, Ly/2)``.

    Parameters
    ----------
    nx, ny : int
        Sample counts, powers of two and at least 8.
    Lx, Ly : float
        Period lengths.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or not _is_pow2(int(n)):
                raise ValueError(f"{name} not a power of two (got {n})")
            if n < 8:
                raise ValueError(f"{name} must be at least 8 (got {n})")
            object.__setattr__(self, name, int(n))
        for name in ("Lx", "Ly"):
            L = getattr(self, name)
            if not np.isfinite(L) or L <= 0:
                raise ValueError(f"{name} must be a positive period length (got {L})")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.nx) - self.nx // 2) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.ny) - self.ny // 2) * self.dy

    @property
    def xi(self) -> np.ndarray:
        """Frequencies along axis 0 in cycles per unit (fft ordering)."""
        return np.fft.fftfreq(self.nx, d=self.dx)

    @property
    def eta(self) -> np.ndarray:
        return np.fft.fftfreq(self.ny, d=self.dy)

    @property
    def nyquist(self) -> tuple[float, float]:
        return (self.nx / (2 * self.Lx), self.ny / (2 * self.Ly))

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def freq_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xi, self.eta, indexing="ij")

    def phase_correction(self) -> np.ndarray:
        """Factor turning raw ``fft2`` output into coefficients of the centered grid."""
        # x_0 = -Lx/2, so a mode e(xi x) picks up e(-xi Lx/2) at index 0
        XI, ETA = self.freq_mesh()
        return np.exp(1j * np.pi * (XI * self.Lx + ETA * self.Ly))


def make_grid(nx: int, ny: int, Lx: float, Ly: float) -> Grid2D:
    """Validated grid descriptor; raises ``ValueError`` naming the bad field."""
    return Grid2D(nx, ny, float(Lx), float(Ly))


@dataclass(frozen=True, eq=False)
class Field2D:
    """Complex samples of a function on a :class:`Grid2D`.

    The spectral representation is computed on first access and cached.
    """

    grid: Grid2D
    samples: np.ndarray
    _spectral: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != self.grid.shape:
            raise ValueError(f"samples shape {s.shape} does not match grid {self.grid.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self._spectral is not None:
            c = np.asarray(self._spectral, dtype=complex)
            c.setflags(write=False)
            object.__setattr__(self, "_spectral", c)

    @cached_property
    def spectral(self) -> np.ndarray:
        if self._spectral is not None:
            return self._spectral
        g = self.grid
        c = np.fft.fft2(self.samples) / (g.nx * g.ny) * g.phase_correction()
        c.setflags(write=False)
        return c

    @property
    def has_spectral(self) -> bool:
        return self._spectral is not None or "spectral" in self.__dict__

    def with_samples(self, samples: np.ndarray) -> "Field2D":
        return Field2D(self.grid, samples)

    def __add__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Field2D") -> "Field2D":
        _check_same_grid(self, other)
        return Field2D(self.grid, self.samples - other.samples)

    def __mul__(self, other):
        if isinstance(other, Field2D):
            _check_same_grid(self, other)
            return Field2D(self.grid, self.samples * other.samples)
        return Field2D(self.grid, self.samples * other)

    __rmul__ = __mul__

    def conj(self) -> "Field2D":
        return Field2D(self.grid, np.conj(self.samples))


def _check_same_grid(a: Field2D, b: Field2D) -> None:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def forward_transform(f: Field2D) -> Field2D:
    """Return ``f`` with its spectral coefficients populated."""
    return Field2D(f.grid, f.samples, f.spectral)


def from_coefficients(grid: Grid2D, coeffs: np.ndarray) -> Field2D:
    """Build a field from spectral coefficients (fft ordering)."""
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != grid.shape:
        raise ValueError(f"coefficient shape {c.shape} does not match grid {grid.shape}")
    samples = np.fft.ifft2(c / grid.phase_correction()) * (grid.nx * grid.ny)
    return Field2D(grid, samples, c)


def inverse_transform(f: Field2D) -> Field2D:
    """Resynthesize samples from the spectral representation of ``f``."""
    return from_coefficients(f.grid, f.spectral)


def from_function(grid: Grid2D, func) -> Field2D:
    """Sample a vectorized callable ``func(X, Y)`` on the grid."""
    X, Y = grid.mesh()
    return Field2D(grid, np.broadcast_to(func(X, Y), grid.shape).astype(complex))


def lp_norm(f: Field2D, p: float) -> float:
    """Cell-area weighted ``L^p`` norm; ``p = inf`` gives the sample supremum."""
    return _lp(np.abs(f.samples), f.grid.cell_area, p)


def _lp(a: np.ndarray, area: float, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be at least 1 (got {p})")
    if np.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return float(a.sum() * area)
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * area))
    return float((np.sum(a**p) * area) ** (1.0 / p))


def lp_norm_on(f: Field2D, region, p: float = 1.0) -> float:
    """``L^p`` norm restricted to a region.

    Parameters
    ----------
    region : tuple or ndarray
        Either a box ``((x0, x1), (y0, y1))`` (closed, in grid coordinates) or
        a boolean mask of the grid shape.
    """
    mask = _region_mask(f.grid, region)
    return _lp(np.abs(f.samples[mask]), f.grid.cell_area, p)


def _region_mask(grid: Grid2D, region) -> np.ndarray:
    if isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != grid.shape:
            raise ValueError("region mask shape does not match grid")
        return region
    (x0, x1), (y0, y1) = region
    X, Y = grid.mesh()
    return (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)


def sobolev_norm(f: Field2D, a: float, b: float) -> float:
    """Anisotropic Sobolev norm with weight ``<xi>^a <eta>^b``.

    ``||f||^2 = Lx Ly sum |c|^2 (1 + xi^2)^(a/2) (1 + eta^2)^(b/2)``, frequencies
    in cycles per unit.
    """
    g = f.grid
    XI, ETA = g.freq_mesh()
    w = (1.0 + XI**2) ** (a / 2.0) * (1.0 + ETA**2) ** (b / 2.0)
    return float(np.sqrt(g.Lx * g.Ly * np.sum(np.abs(f.spectral) ** 2 * w)))


@dataclass(frozen=True)
class FreqSupportSpec:
    """Frequency support prescription.

    ``axis`` selects which frequency variable carries the constraint; ``both``
    applies it to ``max(|xi|, |eta|)``. ``annulus`` keeps ``[scale/2, 2 scale]``
    and ``ball`` keeps ``[0, 2 scale]``. The unconstrained variable is limited to
    ``|.| <= 2 * cross_scale`` (default ``scale``) so fields stay band-limited.
    """

    axis: Literal[1, 2, "both"]
    kind: Literal["annulus", "ball"]
    scale: float
    cross_scale: float | None = None

    def __post_init__(self):
        if self.axis not in (1, 2, "both"):
            raise ValueError(f"axis must be 1, 2 or 'both' (got {self.axis!r})")
        if self.kind not in ("annulus", "ball"):
            raise ValueError(f"kind must be 'annulus' or 'ball' (got {self.kind!r})")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive (got {self.scale})")
        if self.cross_scale is not None and not self.cross_scale > 0:
            raise ValueError(f"cross_scale must be positive (got {self.cross_scale})")

    @property
    def cross(self) -> float:
        return self.scale if self.cross_scale is None else self.cross_scale


def _band(a: np.ndarray, kind: str, lam: float) -> np.ndarray:
    tol = 1e-9 * lam
    if kind == "annulus":
        return (a >= lam / 2 - tol) & (a <= 2 * lam + tol)
    return a <= 2 * lam + tol


def support_mask(grid: Grid2D, spec: FreqSupportSpec) -> np.ndarray:
    """Boolean mask (fft ordering) of admissible coefficients."""
    XI, ETA = grid.freq_mesh()
    ax, ay = np.abs(XI), np.abs(ETA)
    lam, cr = spec.scale, spec.cross
    if spec.axis == 1:
        return _band(ax, spec.kind, lam) & _band(ay, "ball", cr)
    if spec.axis == 2:
        return _band(ay, spec.kind, lam) & _band(ax, "ball", cr)
    return _band(np.maximum(ax, ay), spec.kind, lam)


def random_band_limited(grid: Grid2D, spec: FreqSupportSpec, seed: int) -> Field2D:
    """Unit ``L^2`` field with i.i.d. complex Gaussian coefficients on the support.

    Raises ``ValueError`` when the support reaches the Nyquist limit or contains
    no lattice frequency.
    """
    nyx, nyy = grid.nyquist
    need_x = 2 * (spec.scale if spec.axis in (1, "both") else spec.cross)
    need_y = 2 * (spec.scale if spec.axis in (2, "both") else spec.cross)
    if need_x >= nyx or need_y >= nyy:
        raise ValueError(
            f"frequency support up to ({need_x:g}, {need_y:g}) exceeds the Nyquist "
            f"limit ({nyx:g}, {nyy:g}); use larger nx/ny or smaller periods")
    mask = support_mask(grid, spec)
    if not mask.any():
        raise ValueError("no lattice frequency inside the requested support; use larger periods")
    rng = np.random.default_rng(seed)
    c = np.zeros(grid.shape, dtype=complex)
    k = int(mask.sum())
    c[mask] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
    c /= np.sqrt(grid.Lx * grid.Ly * np.sum(np.abs(c) ** 2))
    return from_coefficients(grid, c)


# -- serialization -----------------------------------------------------------

_HEADER = struct.Struct("<IIdd")


def save_binary(f: Field2D, path) -> None:
    """Write header ``<u4 nx, u4 ny, f8 Lx, f8 Ly>`` then interleaved re/im f64."""
    g = f.grid
    body = np.empty((g.nx, g.ny, 2), dtype="<f8")
    body[..., 0] = f.samples.real
    body[..., 1] = f.samples.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.nx, g.ny, g.Lx, g.Ly))
        fh.write(body.tobytes(order="C"))


def load_binary(path) -> Field2D:
    raw = Path(path).read_bytes()
    nx, ny, Lx, Ly = _HEADER.unpack_from(raw, 0)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * nx * ny:
        raise ValueError(f"truncated field file: expected {2 * nx * ny} doubles, got {body.size}")
    body = body.reshape(nx, ny, 2)
    return Field2D(make_grid(nx, ny, Lx, Ly), body[..., 0] + 1j * body[..., 1])


def save_csv(f: Field2D, path) -> None:
    X, Y = f.grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "re", "im"])
        for row in zip(X.ravel(), Y.ravel(), f.samples.real.ravel(), f.samples.imag.ravel()):
            w.writerow([repr(float(v)) for v in row])


def coefficient_index(grid: Grid2D, xi: float, eta: float) -> tuple[int, int]:
    """Array index of the lattice frequency ``(xi, eta)``."""
    i = int(round(xi * grid.Lx)) % grid.nx
    j = int(round(eta * grid.Ly)) % grid.ny
    return i, j


def mode(grid: Grid2D, xi: float, eta: float, amplitude: complex = 1.0) -> Field2D:
    """Pure exponential ``amplitude * e(xi x + eta y)`` sampled on the grid."""
    X, Y = grid.mesh()
    return Field2D(grid, amplitude * np.exp(2j * np.pi * (xi * X + eta * Y)))
