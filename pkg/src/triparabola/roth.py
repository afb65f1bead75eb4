"""Parabolic corners ``(x, y), (x + t, y), (x, y + t^2)`` in subsets of the unit square.

Functions on ``[0,1]^2`` are voxel arrays ``f[i, j]`` (``x`` index first),
constant on cells ``[i h, (i+1) h) x [j h, (j+1) h)`` with ``h = 1/N`` and
zero outside the square. For such ``f`` the ``(x, y)``-integral of
``f0(x, y) f1(x + t, y) f2(x, y + t^2)`` is exactly bilinear in the
fractional parts of ``t/h`` and ``t^2/h``, so the corner integral is computed
from lag tables with no interpolation error in ``(x, y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .littlewood_paley import smooth_step

__all__ = [
    "theta",
    "tau",
    "scaled",
    "C0_IMPL",
    "CornerConfig",
    "corner_form",
    "corner_integral",
    "axis_convolve",
    "l2_norm",
    "structured_lower_bound_check",
    "dyadic_lower_bound_ratio",
    "split_I123",
    "ScaleSelection",
    "LadderExhausted",
    "scale_select",
    "CornerResult",
    "corner_membership",
    "find_corner",
    "fixture_mask",
]

# With theta = 1/3 on [-1, 1], f *_1 theta_k >= E_k f / 3 pointwise, and the
# dyadic variant is >= (int f)^3 by Jensen; hence the ratio is >= 1/9.
C0_IMPL = 1.0 / 9.0


def theta(x) -> np.ndarray:
    """Even plateau: ``1/3`` on ``[-1, 1]``, smooth monotone decay to 0 on ``[1, 2]``; unit integral."""
    a = np.abs(np.asarray(x, dtype=float))
    return (1.0 - smooth_step(a - 1.0)) / 3.0


def tau(t) -> np.ndarray:
    """Bump on ``[1/2, 2]`` with values in ``[0, 1]``, equal to 1 on ``[1, 3/2]``; unit integral."""
    t = np.asarray(t, dtype=float)
    return smooth_step(2.0 * (t - 0.5)) * (1.0 - smooth_step(2.0 * (t - 1.5)))


def scaled(profile, k: float):
    """``L^1``-normalized dilate ``2^k profile(2^k x)``."""
    s = 2.0**k
    return lambda x: s * profile(s * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CornerConfig:
    """Scale ladder and thresholds for the energy-increment search.

    Round ``i`` uses ``(k_L, k, k_H) = (k1L + 3 i m, k1L + (3 i + 1) m, k1L + (3 i + 2) m)``
    with ``m = log2 M``, so consecutive entries of the ladder are separated by
    the frequency factor ``M`` and the bands of different rounds are disjoint.
    """

    epsilon: float
    M: int = 4
    k1L: int | None = None
    c0: float = C0_IMPL
    max_rounds: int | None = None
    gap_C: float = 1.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.M < 2 or self.M & (self.M - 1):
            raise ValueError("M must be a power of two >= 2")
        if self.k1L is not None and self.k1L < 1:
            raise ValueError("k1L must be positive")

    @property
    def step(self) -> int:
        return int(round(math.log2(self.M)))

    @property
    def base(self) -> int:
        return self.k1L if self.k1L is not None else math.ceil(math.log2(1.0 / self.epsilon)) + 2

    def round_scales(self, i: int) -> tuple[int, int, int]:
        b, m = self.base, self.step
        return b + 3 * i * m, b + (3 * i + 1) * m, b + (3 * i + 2) * m

    @property
    def threshold(self) -> float:
        return 0.5 * self.c0 * self.epsilon**3

    @property
    def gap_reference(self) -> float:
        return math.exp(-math.exp(self.epsilon ** (-self.gap_C)))


# -- corner integral ---------------------------------------------------------------------


def _square(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] < 2:
        raise ValueError("expected a square voxel array")
    return f


def _breaks(N: int, lo: float, hi: float) -> np.ndarray:
    h = 1.0 / N
    m = np.arange(N + 1) * h
    q = np.sqrt(np.arange(N + 1) * h)
    b = np.concatenate([[lo, hi], m, q])
    return np.unique(b[(b >= lo) & (b <= hi)])


def corner_form(f0, f1, f2, weight=None, t_range=(0.0, 1.0), gauss: int = 4) -> float:
    """``int f0(x, y) f1(x + t, y) f2(x, y + t^2) w(t) dx dy dt`` over ``[0,1]^2 x t_range``.

    Exact in ``(x, y)`` for voxel arrays; in ``t`` the integrand is a
    polynomial of degree 3 between consecutive breakpoints ``m h`` and
    ``sqrt(q h)``, so Gauss nodes with ``gauss >= 2`` are exact for ``w = 1``.
    """
    f0, f1, f2 = _square(f0), _square(f1), _square(f2)
    N = f0.shape[0]
    if f1.shape != f0.shape or f2.shape != f0.shape:
        raise ValueError("all three arrays must share a shape")
    lo, hi = float(t_range[0]), float(t_range[1])
    if not 0 <= lo < hi <= 1:
        raise ValueError("t_range must satisfy 0 <= lo < hi <= 1")
    h = 1.0 / N
    b = _breaks(N, lo, hi)
    x, w = np.polynomial.legendre.leggauss(gauss)
    a, c = b[:-1, None], b[1:, None]
    t = (0.5 * (c - a) * x + 0.5 * (c + a)).ravel()
    wt = (0.5 * (c - a) * w).ravel()
    if weight is not None:
        wt = wt * weight(t)
    keep = wt != 0
    t, wt = t[keep], wt[keep]
    if t.size == 0:
        return 0.0
    m = np.minimum(np.floor(t / h).astype(np.int64), N)
    phi = t / h - m
    s = t * t
    q = np.minimum(np.floor(s / h).astype(np.int64), N)
    psi = s / h - q
    m_lo, m_hi = int(m.min()), int(min(m.max() + 1, N))
    P = 2 * N
    F2 = np.fft.rfft(f2, P, axis=1)
    H = np.zeros((m_hi - m_lo + 2, N + 2))
    for r, mm in enumerate(range(m_lo, m_hi + 1)):
        if mm >= N:
            continue
        A = f0[: N - mm] * f1[mm:]
        if not A.any():
            continue
        spec = np.einsum("ij,ij->j", np.conj(np.fft.rfft(A, P, axis=1)), F2[: N - mm])
        H[r, : N + 1] = np.fft.irfft(spec, P)[: N + 1]
    r = m - m_lo
    val = ((1 - phi) * ((1 - psi) * H[r, q] + psi * H[r, q + 1])
           + phi * ((1 - psi) * H[r + 1, q] + psi * H[r + 1, q + 1]))
    return float(h * h * np.sum(wt * val))


def corner_integral(f, t_range=(0.0, 1.0)) -> float:
    """``I = int_{[0,1]^3} f(x, y) f(x + t, y) f(x, y + t^2)`` for a voxel array ``0 <= f <= 1``."""
    f = _square(f)
    if f.min() < 0 or f.max() > 1:
        raise ValueError("f must take values in [0, 1]")
    return corner_form(f, f, f, None, t_range)


# -- convolutions -------------------------------------------------------------------------


def _kernel(N: int, k: float, profile, periodic: bool) -> np.ndarray:
    """Centre samples ``int_{cell j} profile_k(x_i - y) dy`` as a circulant first column."""
    h = 1.0 / N
    g = scaled(profile, k)
    L = N if periodic else 2 * N
    off = np.arange(L)
    off = np.where(off < L // 2 + (L % 2), off, off - L) * h
    x, w = np.polynomial.legendre.leggauss(8)
    # integrate over the cell centred at offset d: [d - h/2, d + h/2]
    vals = g(off[:, None] + 0.5 * h * x[None, :]) @ (0.5 * h * w)
    if periodic:
        # fold in the mass from further periods
        reach = int(np.ceil(2.0 ** (1 - k))) + 1
        for p in range(1, reach + 1):
            for sgn in (1, -1):
                vals = vals + g(off[:, None] + sgn * p + 0.5 * h * x[None, :]) @ (0.5 * h * w)
    return vals


def axis_convolve(f, k: float, axis: int, profile=theta, periodic: bool = True) -> np.ndarray:
    """``f *_axis profile_k`` sampled at cell centres.

    ``periodic`` convolves on the unit torus; otherwise ``f`` is extended by
    zero (the output is still returned on ``[0,1]^2``).
    """
    f = _square(f)
    N = f.shape[0]
    K = _kernel(N, k, profile, periodic)
    L = K.size
    Fh = np.fft.rfft(f, L, axis=axis)
    shape = [1, 1]
    shape[axis] = -1
    out = np.fft.irfft(Fh * np.fft.rfft(K).reshape(shape), L, axis=axis)
    return np.take(out, np.arange(N), axis=axis)


def l2_norm(g) -> float:
    g = np.asarray(g, dtype=float)
    return float(np.sqrt(np.sum(g * g)) / g.shape[0])


# -- structured lower bound -----------------------------------------------------------------


def structured_lower_bound_check(f, k: float, l: float, profile=theta) -> float:
    """``int f (f *_1 theta_k)(f *_2 theta_l) / (int f)^3``; ``+inf`` when ``int f = 0``.

    Convolutions extend ``f`` by zero outside the square.
    """
    f = _square(f)
    if f.min() < 0:
        raise ValueError("f must be nonnegative")
    N = f.shape[0]
    mass = f.sum() / N**2
    if mass == 0:
        return math.inf
    a = axis_convolve(f, k, 0, profile, periodic=False)
    b = axis_convolve(f, l, 1, profile, periodic=False)
    return float(np.sum(f * a * b) / N**2 / mass**3)


def _dyadic_mean(f: np.ndarray, k: int, axis: int) -> np.ndarray:
    N = f.shape[0]
    blocks = 2**k
    if N % blocks:
        raise ValueError(f"grid size {N} is not divisible by 2^{k}")
    w = N // blocks
    g = np.moveaxis(f, axis, 0).reshape(blocks, w, -1)
    g = np.broadcast_to(g.mean(axis=1, keepdims=True), g.shape).reshape(N, -1)
    return np.moveaxis(g, 0, axis)


def dyadic_lower_bound_ratio(f, k: int, l: int) -> float:
    """Same ratio with dyadic conditional expectations ``E_k^(1)``, ``E_l^(2)``; always ``>= 1``."""
    f = _square(f)
    N = f.shape[0]
    mass = f.sum() / N**2
    if mass == 0:
        return math.inf
    return float(np.sum(f * _dyadic_mean(f, k, 0) * _dyadic_mean(f, l, 1)) / N**2 / mass**3)


# -- three-term split ------------------------------------------------------------------------


def _tau_support(k: float) -> tuple[float, float]:
    return min(2.0 ** (-k - 1), 1.0), min(2.0 ** (1 - k), 1.0)


def split_I123(f, k: float, kL: float, kH: float, profile=theta) -> dict[str, float]:
    """Split the ``tau_k``-weighted corner integral by the ``y``-frequency of the third factor.

    ``I1`` uses ``f - f *_2 theta_{kH}``, ``I2`` uses
    ``f *_2 theta_{kH} - f *_2 theta_{kL}`` and ``I3`` uses ``f *_2 theta_{kL}``
    (torus convolutions restricted to the square). Also returned: the direct
    integral ``I``, the Hoelder bound for ``|I2|`` and the reconciliation defect.
    """
    f = _square(f)
    if not kL < k < kH:
        raise ValueError("need kL < k < kH")
    N = f.shape[0]
    if kH > math.log2(N):
        raise ValueError(f"k_H = {kH} exceeds the grid resolution 2^{math.log2(N):g}")
    gH = axis_convolve(f, kH, 1, profile)
    gL = axis_convolve(f, kL, 1, profile)
    w = scaled(tau, k)
    tr = _tau_support(k)
    I = corner_form(f, f, f, w, tr)
    I1 = corner_form(f, f, f - gH, w, tr)
    I2 = corner_form(f, f, gH - gL, w, tr)
    I3 = corner_form(f, f, gL, w, tr)
    holder = float(np.abs(f).max()) * l2_norm(f) * l2_norm(gH - gL)
    return {"I": I, "I1": I1, "I2": I2, "I3": I3,
            "defect": abs(I - (I1 + I2 + I3)), "I2_holder_bound": holder}


# -- scale selection ---------------------------------------------------------------------------


class LadderExhausted(ValueError):
    """The scale ladder ran past the grid resolution before an energy test passed."""

    def __init__(self, message: str, selection: "ScaleSelection"):
        super().__init__(message)
        self.selection = selection


@dataclass
class ScaleSelection:
    """Outcome of the energy-increment search.

    ``rounds`` holds one dict per evaluated round. ``ladder_constant`` is
    ``sup_xi sum_i |K_H_i(xi) - K_L_i(xi)|^2`` over the evaluated rounds, so
    ``sum_i (a_i^2 + b_i^2) <= 2 ladder_constant ||f||^2`` by Plancherel, and
    ``round_bound = 16 ladder_constant ||f||^2 / (c0^2 eps^6)`` caps the
    number of failing rounds.
    """

    chosen: tuple[int, int, int] | None
    rounds: list[dict] = field(default_factory=list)
    certified: bool = False
    ladder_constant: float = 0.0
    energy_total: float = 0.0
    energy_bound: float = 0.0
    round_bound: float = math.inf

    @property
    def round_count(self) -> int:
        return len(self.rounds)


def scale_select(f, epsilon: float, config: CornerConfig | None = None, strict: bool = True) -> ScaleSelection:
    """Walk the ladder until ``||f *_1 (theta_kH - theta_kL)|| + ||f *_2 (...)|| < c0 eps^3 / 2``.

    With ``strict`` an exhausted ladder raises :class:`LadderExhausted`;
    otherwise the uncertified selection is returned with ``chosen = None``.
    """
    f = _square(f)
    cfg = config or CornerConfig(epsilon)
    N = f.shape[0]
    if f.sum() / N**2 < epsilon - 1e-12:
        raise ValueError("need int f >= epsilon")
    kmax = math.log2(N)
    sel = ScaleSelection(None)
    acc = np.zeros(N)
    nf = l2_norm(f)
    i = 0
    while True:
        kL, k, kH = cfg.round_scales(i)
        if kH > kmax or (cfg.max_rounds is not None and i >= cfg.max_rounds):
            break
        KH = np.fft.fft(_kernel(N, kH, theta, True))
        KL = np.fft.fft(_kernel(N, kL, theta, True))
        acc += np.abs(KH - KL) ** 2
        a = l2_norm(axis_convolve(f, kH, 0) - axis_convolve(f, kL, 0))
        b = l2_norm(axis_convolve(f, kH, 1) - axis_convolve(f, kL, 1))
        passed = a + b < cfg.threshold
        sel.rounds.append({"kL": kL, "k": k, "kH": kH, "a": a, "b": b, "energy": a + b,
                           "threshold": cfg.threshold, "passed": bool(passed)})
        sel.energy_total += a * a + b * b
        if passed:
            sel.chosen, sel.certified = (kL, k, kH), True
            break
        i += 1
    sel.ladder_constant = float(acc.max()) if sel.rounds else 0.0
    sel.energy_bound = 2.0 * sel.ladder_constant * nf * nf
    if sel.rounds:
        sel.round_bound = 16.0 * sel.ladder_constant * nf * nf / (cfg.c0**2 * cfg.epsilon**6)
    if sel.energy_total > sel.energy_bound * (1 + 1e-9) + 1e-300:
        raise AssertionError("Plancherel certificate violated")
    if not sel.certified and strict:
        k1 = cfg.round_scales(len(sel.rounds))
        raise LadderExhausted(
            f"ladder reached k_H = {k1[2]} beyond grid resolution log2 N = {kmax:g} after "
            f"{len(sel.rounds)} round(s); grid too coarse for epsilon = {epsilon:g}", sel)
    return sel


# -- corner extraction ---------------------------------------------------------------------------


@dataclass
class CornerResult:
    found: bool
    corner: tuple[float, float, float] | None
    integral_I: float
    chosen_scale: int | None
    certified: bool
    trace: list[dict]
    gap_reference: float
    cells: tuple[tuple[int, int], tuple[int, int], tuple[int, int]] | None = None

    def as_dict(self) -> dict:
        return {
            "found": self.found,
            "corner": list(self.corner) if self.corner else None,
            "cells": [list(c) for c in self.cells] if self.cells else None,
            "integral_I": self.integral_I,
            "chosen_scale": self.chosen_scale,
            "certified": self.certified,
            "trace": self.trace,
            "gap_reference": self.gap_reference,
        }


def _cell(v, N: int):
    v = np.asarray(v, dtype=float)
    return np.floor(v * N).astype(np.int64)


def corner_membership(S, x: float, y: float, t: float) -> tuple[bool, bool, bool]:
    """Voxel lookup of ``(x, y)``, ``(x + t, y)`` and ``(x, y + t^2)`` in the mask ``S``."""
    S = np.asarray(S, dtype=bool)
    N = S.shape[0]

    def inside(px, py):
        i, j = int(_cell(px, N)), int(_cell(py, N))
        return bool(0 <= i < N and 0 <= j < N and S[i, j])

    return inside(x, y), inside(x + t, y), inside(x, y + t * t)


def _search_scale(S: np.ndarray, k: float, guide: np.ndarray, nodes: int):
    N = S.shape[0]
    h = 1.0 / N
    lo, hi = _tau_support(k)
    t = np.linspace(lo, hi, nodes + 2)[1:-1]
    t = t[np.argsort(-scaled(tau, k)(t), kind="stable")]
    c = (np.arange(N) + 0.5) * h
    for tt in t:
        ix = _cell(c + tt, N)
        jy = _cell(c + tt * tt, N)
        okx, oky = ix < N, jy < N
        sx = np.zeros_like(S)
        sx[okx] = S[ix[okx]]
        sy = np.zeros_like(S)
        sy[:, oky] = S[:, jy[oky]]
        valid = S & sx & sy
        if valid.any():
            gy = np.zeros_like(guide)
            gy[:, oky] = guide[:, jy[oky]]
            score = np.where(valid, gy, -np.inf)
            i, j = np.unravel_index(int(np.argmax(score)), score.shape)
            return float(c[i]), float(c[j]), float(tt)
    return None


def find_corner(S, epsilon: float, config: CornerConfig | None = None, nodes: int = 64) -> CornerResult:
    """Locate a voxel corner in ``S`` guided by the ``I3`` integrand at the selected scale.

    Runs :func:`scale_select`; when the ladder does not fit the grid, the
    round with the smallest energy (or the finest admissible round) is used
    and ``certified`` is false. At the bump scale ``k``, ``t`` is scanned over
    ``supp tau_k`` in decreasing order of ``tau_k(t)``, and among valid cells
    the one maximizing ``(f *_2 theta_kL)(x, y + t^2)`` is returned. Coarser
    scales are tried if ``supp tau_k`` yields nothing.
    """
    S = np.asarray(S, dtype=bool)
    f = _square(S.astype(float))
    N = f.shape[0]
    cfg = config or CornerConfig(epsilon)
    if f.sum() / N**2 < epsilon - 1e-12:
        raise ValueError("need |S| >= epsilon")
    sel = scale_select(f, epsilon, cfg, strict=False)
    kmax = int(math.floor(math.log2(N)))
    if sel.chosen is not None:
        kL, k, kH = sel.chosen
    elif sel.rounds:
        best = min(sel.rounds, key=lambda r: r["energy"])
        kL, k, kH = best["kL"], best["k"], best["kH"]
    else:
        m = cfg.step
        kH = kmax
        k, kL = max(kH - m, 1), max(kH - 2 * m, 0)
        if not kL < k < kH:
            kL, k, kH = 0, 1, max(2, kH)
    guide = axis_convolve(f, kL, 1)
    hit, used = None, None
    for kk in range(int(k), -1, -1):
        hit = _search_scale(S, kk, guide, nodes)
        if hit is not None:
            used = kk
            break
    trace = list(sel.rounds)
    I = corner_integral(f)
    if hit is None:
        raise ValueError("no corner found at this grid resolution")
    x, y, t = hit
    mem = corner_membership(S, x, y, t)
    if not all(mem) or not t > 0:
        raise AssertionError(f"corner failed verification: {mem}")
    cells = ((int(_cell(x, N)), int(_cell(y, N))), (int(_cell(x + t, N)), int(_cell(y, N))),
             (int(_cell(x, N)), int(_cell(y + t * t, N))))
    if t <= cfg.gap_reference:
        raise AssertionError("corner gap below the reference bound")
    return CornerResult(True, (x, y, t), I, used, sel.certified, trace, cfg.gap_reference, cells)


def fixture_mask(kind: str, N: int = 256, width: float = 0.1) -> np.ndarray:
    """Reference masks: ``square``, ``strip`` (height ``width`` at ``y`` in ``[0.45, 0.45 + width)``), ``band``.

    ``band`` removes ``|x - y| < width`` from the square.
    """
    c = (np.arange(N) + 0.5) / N
    X, Y = np.meshgrid(c, c, indexing="ij")
    if kind == "square":
        return np.ones((N, N), dtype=bool)
    if kind == "strip":
        return (Y >= 0.45) & (Y < 0.45 + width)
    if kind == "band":
        return np.abs(X - Y) >= width
    raise ValueError(f"unknown fixture {kind!r}")
