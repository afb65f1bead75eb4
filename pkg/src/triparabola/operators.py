"""Singular, bilinear and maximal operators on periodic grids.

Axis 0 of a field is ``x`` (the first variable) and axis 1 is ``y``. Off-grid
values ``f(x + s, y)`` are obtained by trigonometric interpolation, i.e. by
multiplying 1-D spectra with ``e(xi s)``; this is exact for the band-limited
fields used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .grid import Field2D, Grid2D, from_coefficients
from .littlewood_paley import DEFAULT_PROFILE, BumpProfile, FreqWindow, project
from .multiplier import (
    QuadratureError,
    _gl,
    _nodes_for,
    family_weight,
    lattice_symbol,
)

__all__ = [
    "KernelPiece",
    "ShiftPlan",
    "CutoffZeta",
    "apply_Hj",
    "apply_HP",
    "apply_kernel_piece",
    "family_on_grid",
    "apply_family",
    "apply_Tj",
    "apply_Tk_piece",
    "apply_Tloc",
    "trilinear_lambda",
    "modulate",
    "shifted_maximal",
    "hl_maximal",
    "maximal_k_range",
    "bilinear_maximal",
    "bilinear_piece",
    "pointwise_domination_ratio",
    "square_function",
    "make_shift_plan",
    "apply_paraproduct",
    "shift_along",
]


# -- helpers -----------------------------------------------------------------


def _axis_freq(grid: Grid2D, axis: int) -> np.ndarray:
    return grid.xi if axis == 0 else grid.eta


def shift_along(samples: np.ndarray, grid: Grid2D, axis: int, s: float) -> np.ndarray:
    """Samples of ``f(. + s)`` along ``axis`` (0 for x, 1 for y) by trigonometric interpolation."""
    F = np.fft.fft(samples, axis=axis)
    ph = np.exp(2j * np.pi * _axis_freq(grid, axis) * s)
    ph = ph[:, None] if axis == 0 else ph[None, :]
    return np.fft.ifft(F * ph, axis=axis)


def _bandwidth(samples: np.ndarray, grid: Grid2D, axis: int, rel: float = 1e-14) -> float:
    """Largest |frequency| along ``axis`` carrying non-negligible energy."""
    F = np.abs(np.fft.fft(samples, axis=axis))
    prof = F.max(axis=1 - axis)
    if prof.max() == 0:
        return 0.0
    live = prof > rel * prof.max()
    return float(np.max(np.abs(_axis_freq(grid, axis))[live]))


def modulate(f: Field2D, a: float = 0.0, b: float = 0.0) -> Field2D:
    """Multiply by ``e(a x + b y)``; frequencies must be grid-commensurate."""
    g = f.grid
    for v, L, name in ((a, g.Lx, "a"), (b, g.Ly, "b")):
        if abs(v * L - round(v * L)) > 1e-9:
            raise ValueError(f"modulation {name} = {v} is not a multiple of 1/L")
    X, Y = g.mesh()
    return Field2D(g, f.samples * np.exp(2j * np.pi * (a * X + b * Y)))


# -- linear pieces -----------------------------------------------------------


def _symbol_on_grid(grid: Grid2D, j: int, plus: bool = False,
                    profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``m(xi / 2^j, eta / 4^j)`` on the frequency lattice of ``grid``."""
    xi = np.ldexp(grid.xi, -j)
    eta = np.ldexp(grid.eta, -2 * j)
    return lattice_symbol(xi, eta, grid.Lx * 2.0**j, plus=plus, profile=profile)


def apply_Hj(f: Field2D, j: int, profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    """``H_j f`` with symbol ``m(xi / 2^j, eta / 4^j)``."""
    return from_coefficients(f.grid, f.spectral * _symbol_on_grid(f.grid, j, False, profile))


def apply_HP(f: Field2D, j_range: Iterable[int], profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    """``sum_j H_j f`` over a finite, ascending ``j_range``."""
    sym = np.zeros(f.grid.shape, dtype=complex)
    for j in sorted(j_range):
        sym += _symbol_on_grid(f.grid, j, False, profile)
    return from_coefficients(f.grid, f.spectral * sym)


@dataclass(frozen=True)
class KernelPiece:
    """Kernel ``K_k`` with symbol ``m(xi, eta) psi_k1(xi) psi_k2(eta)``."""

    k1: int
    k2: int

    def symbol(self, grid: Grid2D, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
        XI, ETA = grid.freq_mesh()
        w = profile.psi_k(XI, self.k1) * profile.psi_k(ETA, self.k2)
        return _symbol_on_grid(grid, 0, False, profile) * w


def apply_kernel_piece(f: Field2D, piece: KernelPiece, profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    return from_coefficients(f.grid, f.spectral * piece.symbol(f.grid, profile))


def family_on_grid(family: str, grid: Grid2D, j_range: Iterable[int], plus: bool = False,
                   profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Truncated ``m_L`` / ``m_M`` / ``m_H`` symbol tabulated on the grid lattice."""
    XI, ETA = grid.freq_mesh()
    out = np.zeros(grid.shape, dtype=complex)
    for j in sorted(j_range):
        a, b = np.ldexp(XI, -j), np.ldexp(ETA, -2 * j)
        w = family_weight(family, a, b, profile)
        if np.any(w != 0):
            out += w * _symbol_on_grid(grid, j, plus, profile)
    return out


def apply_family(f: Field2D, family: str, j_range: Iterable[int],
                 profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    """``H^L f``, ``H^M f`` or ``H^H f`` with the truncated family symbol."""
    return from_coefficients(f.grid, f.spectral * family_on_grid(family, f.grid, j_range, False, profile))


# -- bilinear operators along the parabola ----------------------------------


def _t_rule(n: int, weight: str, profile: BumpProfile):
    """Nodes on ``[1/2, 2]`` with weights ``w psi / t`` (odd) or ``w psi`` (even)."""
    t, w_odd, w_even, _ = _gl(n, profile)
    return t, (w_odd if weight == "odd" else w_even)


def _parabolic_sum(s1: np.ndarray, s2: np.ndarray, grid: Grid2D, scale1: float, scale2: float,
                   n: int, weight: str, profile: BumpProfile, modulus: bool = False) -> np.ndarray:
    """``sum_t w(t) f1(x + scale1 t, y) f2(x, y + scale2 t^2)`` over both signs of ``t``."""
    F1 = np.fft.fft(s1, axis=0)
    F2 = np.fft.fft(s2, axis=1)
    xi = grid.xi[:, None]
    eta = grid.eta[None, :]
    t, w = _t_rule(n, weight, profile)
    out = np.zeros(grid.shape, dtype=complex)
    # f2 only sees t^2, so each node serves both signs of t
    for tk, wk in zip(t, w):
        g2 = np.fft.ifft(F2 * np.exp(2j * np.pi * eta * scale2 * tk * tk), axis=1)
        gp = np.fft.ifft(F1 * np.exp(2j * np.pi * xi * scale1 * tk), axis=0)
        gm = np.fft.ifft(F1 * np.exp(-2j * np.pi * xi * scale1 * tk), axis=0)
        if modulus:
            g2, gp, gm = np.abs(g2), np.abs(gp), np.abs(gm)
        sgn = -1.0 if weight == "odd" else 1.0
        out += wk * (gp + sgn * gm) * g2
    return out


def _adaptive_parabolic(f1: Field2D, f2: Field2D, scale1: float, scale2: float, weight: str,
                        tol: float, profile: BumpProfile, modulus: bool = False):
    if f1.grid != f2.grid:
        raise ValueError("fields live on different grids")
    g = f1.grid
    a = _bandwidth(f1.samples, g, 0) * scale1
    b = _bandwidth(f2.samples, g, 1) * scale2
    n = int(_nodes_for(np.array([a]), np.array([b]))[0])
    if modulus:
        # moduli are not band-limited; resolve the grid instead of the spectrum
        n = max(n, int(_nodes_for(np.array([g.nyquist[0] * scale1]), np.array([g.nyquist[1] * scale2]))[0]))
    prev = _parabolic_sum(f1.samples, f2.samples, g, scale1, scale2, n, weight, profile, modulus)
    scale = max(np.max(np.abs(f1.samples)) * np.max(np.abs(f2.samples)), 1e-300)
    while True:
        cur = _parabolic_sum(f1.samples, f2.samples, g, scale1, scale2, 2 * n, weight, profile, modulus)
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol * scale:
            return cur, {"nodes": 2 * n, "error": err}
        n *= 2
        if n > 2**14:
            raise QuadratureError(f"t-quadrature did not reach tol {tol:g} (error {err:.3g})",
                                  best=cur, error=err)
        prev = cur


def apply_Tj(f1: Field2D, f2: Field2D, j: int, tol: float = 1e-10,
             profile: BumpProfile = DEFAULT_PROFILE, return_stats: bool = False):
    """``T_j(f1, f2)(x, y) = int f1(x + 2^-j t, y) f2(x, y + 4^-j t^2) psi(t) / t dt``.

    Raises
    ------
    QuadratureError
        If node doubling does not settle below ``tol`` (relative to
        ``max|f1| max|f2|``).
    """
    out, stats = _adaptive_parabolic(f1, f2, 2.0**-j, 4.0**-j, "odd", tol, profile)
    res = Field2D(f1.grid, out)
    return (res, stats) if return_stats else res


def apply_Tk_piece(f1: Field2D, f2: Field2D, k1: int, k2: int, j_range: Iterable[int],
                   tol: float = 1e-10, profile: BumpProfile = DEFAULT_PROFILE) -> Field2D:
    """``T^(k)(f1, f2) = sum_j T_j(Delta^(1)_{j+k1} f1, Delta^(2)_{2j+k2} f2)`` over ``j_range``."""
    out = np.zeros(f1.grid.shape, dtype=complex)
    for j in sorted(j_range):
        p1 = project(f1, FreqWindow(1, j + k1), profile)
        p2 = project(f2, FreqWindow(2, 2 * j + k2), profile)
        if not (np.any(p1.spectral) and np.any(p2.spectral)):
            continue
        out += apply_Tj(p1, p2, j, tol, profile).samples
    return Field2D(f1.grid, out)


@dataclass(frozen=True)
class CutoffZeta:
    """``zeta(x, y, t) = chi(x / r) chi(y / r) psi(t)`` with ``chi(s) = phi(2 s)``.

    ``chi`` is supported in ``|s| <= 1``, so the spatial support is
    ``[-r, r]^2`` and the ``t`` support is ``1/2 <= |t| <= 2``.
    """

    radius: float = 1.0
    profile: BumpProfile = field(default=DEFAULT_PROFILE)
    t_lo: float = 0.5
    t_hi: float = 2.0

    def chi(self, s) -> np.ndarray:
        return self.profile.phi(2.0 * np.asarray(s, dtype=float) / self.radius)

    def spatial(self, grid: Grid2D) -> np.ndarray:
        return self.chi(grid.x)[:, None] * self.chi(grid.y)[None, :]

    def __call__(self, x, y, t) -> np.ndarray:
        return self.chi(x) * self.chi(y) * self.profile.psi(t)

    def check_support(self, grid: Grid2D) -> None:
        if self.radius > min(grid.Lx, grid.Ly) / 2:
            raise ValueError(f"zeta support [-{self.radius}, {self.radius}]^2 leaks out of the torus "
                             f"[-{grid.Lx / 2}, {grid.Lx / 2}) x [-{grid.Ly / 2}, {grid.Ly / 2})")


def apply_Tloc(f1: Field2D, f2: Field2D, zeta: CutoffZeta | None = None, tol: float = 1e-10) -> Field2D:
    """``T_loc(f1, f2)(x, y) = int f1(x + t, y) f2(x, y + t^2) zeta(x, y, t) dt`` by t-quadrature."""
    zeta = zeta or CutoffZeta()
    zeta.check_support(f1.grid)
    out, _ = _adaptive_parabolic(f1, f2, 1.0, 1.0, "even", tol, zeta.profile)
    return Field2D(f1.grid, out * zeta.spatial(f1.grid))


def trilinear_lambda(f1: Field2D, f2: Field2D, f3: Field2D, zeta: CutoffZeta | None = None) -> complex:
    """``Lambda = int f1(x + t, y) f2(x, y + t^2) f3(x, y) zeta dt dx dy``.

    Evaluated through the frequency side: the ``t`` integral of
    ``e(xi t + eta t^2) psi(t)`` is ``m_+(xi, eta)``, tabulated on the lattice,
    so no ``t`` quadrature is involved.
    """
    zeta = zeta or CutoffZeta()
    g = f1.grid
    zeta.check_support(g)
    sym = lattice_symbol(g.xi, g.eta, g.Lx, plus=True, profile=zeta.profile)
    P = apply_paraproduct(f1, f2, sym)
    w = f3.samples * zeta.spatial(g)
    return complex(np.sum(P.samples * w) * g.cell_area)


# -- twisted paraproduct ------------------------------------------------------


def apply_paraproduct(f1: Field2D, f2: Field2D, symbol) -> Field2D:
    """``sum_{xi, eta} m(xi, eta) F1(xi; y) F2(x; eta) e(x xi + y eta)``.

    ``F1(.; y)`` is the 1-D Fourier series of ``f1`` in ``x`` and ``F2(x; .)``
    that of ``f2`` in ``y``. ``symbol`` is an array on the frequency mesh or a
    callable ``m(XI, ETA)``.
    """
    if f1.grid != f2.grid:
        raise ValueError("fields live on different grids")
    g = f1.grid
    if callable(symbol):
        XI, ETA = g.freq_mesh()
        sym = np.broadcast_to(symbol(XI, ETA), g.shape)
    else:
        sym = np.asarray(symbol)
        if sym.shape != g.shape:
            raise ValueError("symbol array must match the grid shape")
    # 1-D coefficient arrays: f1 = sum_xi A[xi, y] e(x xi); f2 = sum_eta B[x, eta] e(y eta)
    A = np.fft.fft(f1.samples, axis=0) / g.nx * np.exp(1j * np.pi * g.xi * g.Lx)[:, None]
    F2 = np.fft.fft(f2.samples, axis=1)
    ex = np.exp(2j * np.pi * np.outer(g.x, g.xi))
    out = np.zeros(g.shape, dtype=complex)
    live = np.flatnonzero(np.any(A != 0, axis=1) & np.any(sym != 0, axis=1))
    for i in live:
        h = np.fft.ifft(F2 * sym[i][None, :], axis=1)
        out += ex[:, i][:, None] * A[i][None, :] * h
    return Field2D(g, out)


# -- maximal operators -------------------------------------------------------


def maximal_k_range(grid: Grid2D, axis: int, sigma: float) -> range:
    """Dyadic ``k`` with ``2^k >= dx`` and the window ``[sigma 2^k, (sigma+1) 2^k]`` within half a period."""
    d = grid.dx if axis == 0 else grid.dy
    L = grid.Lx if axis == 0 else grid.Ly
    reach = max(abs(sigma), abs(sigma + 1.0))
    k_lo = int(np.ceil(np.log2(d) - 1e-12))
    k_hi = int(np.floor(np.log2(L / 2 / reach) + 1e-12)) if reach > 0 else k_lo
    return range(k_lo, k_hi + 1)


def _window_averages(a: np.ndarray, axis: int, d: float, sigma: float, k: int) -> np.ndarray:
    """Average of ``a(x - t)`` over grid points ``t in [sigma 2^k, (sigma+1) 2^k)``."""
    n = a.shape[axis]
    m = max(1, int(round(2.0**k / d)))
    i0 = int(round(sigma * 2.0**k / d))
    am = np.moveaxis(a, axis, 0)
    P = np.concatenate([np.zeros((1,) + am.shape[1:]), np.cumsum(np.concatenate([am, am]), axis=0)])
    p = np.arange(n)
    s = (p - i0 - m + 1) % n
    res = (P[s + m] - P[s]) / m
    return np.moveaxis(res, 0, axis)


def shifted_maximal(f: Field2D, axis: Literal[1, 2] = 1, sigma: float = 0.0,
                    k_range: Iterable[int] | None = None) -> np.ndarray:
    """``M_sigma f(x) = sup_k 2^-k int_{[sigma 2^k, (sigma+1) 2^k]} |f(x - t)| dt`` along ``axis``.

    Windows are rounded to whole grid cells and wrap around the torus; an
    explicit ``k_range`` reaching beyond half the period raises ``ValueError``.
    """
    ax = axis - 1
    g = f.grid
    d = g.dx if ax == 0 else g.dy
    auto = maximal_k_range(g, ax, sigma)
    if k_range is None:
        ks = list(auto)
    else:
        ks = sorted(k_range)
        bad = [k for k in ks if k > auto.stop - 1]
        if bad:
            raise ValueError(f"k = {bad[0]} makes the window exceed half the period")
    a = np.abs(f.samples)
    out = np.zeros(g.shape)
    for k in ks:
        out = np.maximum(out, _window_averages(a, ax, d, sigma, k))
    return out


def hl_maximal(f: Field2D, axis: Literal[1, 2] = 1) -> np.ndarray:
    """Directional Hardy-Littlewood maximal function ``max(M_0 f, M_-1 f)``."""
    return np.maximum(shifted_maximal(f, axis, 0.0), shifted_maximal(f, axis, -1.0))


@dataclass(frozen=True)
class ShiftPlan:
    """Shift family ``sigma_{l,n} = 2^-3 n - l^2 2^-kappa``."""

    kappa: int
    windows: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        for l, n, s in self.windows:
            if s != 2.0**-3 * n - l * l * 2.0**-self.kappa:
                raise ValueError(f"window ({l}, {n}) has inconsistent shift {s}")

    @property
    def sigmas(self) -> list[float]:
        return [s for _, _, s in self.windows]


def make_shift_plan(kappa: int, l_range: Iterable[int], n_range: Iterable[int]) -> ShiftPlan:
    wins = tuple((int(l), int(n), 2.0**-3 * int(n) - int(l) ** 2 * 2.0**-kappa)
                 for l in l_range for n in n_range)
    return ShiftPlan(int(kappa), wins)


def square_function(f: Field2D, axis: Literal[1, 2], k_range: Iterable[int], shift: float = 0.0,
                    profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``(sum_k |M_sigma(Delta_k f)|^2)^(1/2)`` with projections and maxima along ``axis``."""
    acc = np.zeros(f.grid.shape)
    for k in sorted(k_range):
        pk = project(f, FreqWindow(axis, k), profile)
        acc += shifted_maximal(pk, axis, shift) ** 2
    return np.sqrt(acc)


# -- bilinear maximal ----------------------------------------------------------


def bilinear_piece(f1: Field2D, f2: Field2D, j: int, tol: float = 1e-4,
                   profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``M_j(f1, f2) = int |f1(x + t, y)| |f2(x, y + t^2)| 2^j psi(2^j t) dt``."""
    out, _ = _adaptive_parabolic(f1, f2, 2.0**-j, 4.0**-j, "even", tol, profile, modulus=True)
    return out.real


def bilinear_maximal(f1: Field2D, f2: Field2D, j_range: Iterable[int], tol: float = 1e-4,
                     profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``sup_j M_j(f1, f2)`` over the declared finite ``j_range``."""
    out = None
    for j in sorted(j_range):
        v = bilinear_piece(f1, f2, j, tol, profile)
        out = v if out is None else np.maximum(out, v)
    if out is None:
        raise ValueError("j_range is empty")
    return out


def _part_symbol(grid: Grid2D, part: str, profile: BumpProfile) -> np.ndarray:
    XI, ETA = grid.freq_mesh()
    mp = lattice_symbol(grid.xi, grid.eta, grid.Lx, plus=True, profile=profile)
    if part == "L":
        return mp * profile.phi(XI) * profile.phi(ETA)
    if part == "M":
        return mp * family_weight("m_M", XI, ETA, profile)
    raise ValueError(f"part must be 'L' or 'M' (got {part!r})")


def pointwise_domination_ratio(f1: Field2D, f2: Field2D, part: Literal["L", "M"] = "L",
                               profile: BumpProfile = DEFAULT_PROFILE, tiny: float = 1e-12) -> float:
    """``sup |M_0^part(f1, f2)| / (M^(1) f1 * M^(2) f2 + tiny)`` over the grid.

    ``M_0^L`` and ``M_0^M`` are twisted paraproducts whose symbols are
    ``m_+`` cut to the Low and Mixed frequency pieces.
    """
    P = apply_paraproduct(f1, f2, _part_symbol(f1.grid, part, profile))
    den = hl_maximal(f1, 1) * hl_maximal(f2, 2) + tiny
    return float(np.max(np.abs(P.samples) / den))
