"""Frequency pruning of 1-D periodic signals.

Conventions: a :class:`Field1D` holds samples on the centred grid
``x_j = (j - n/2) L / n`` and its coefficients ``c_k = (1/L) int f e(-k x / L)``
sit at frequencies ``k / L``. Continuous-looking quantities are normalized so
that the torus identities match their whole-line versions: ``||f||_2^2 =
L sum |c|^2`` and the multiplicative-derivative energy over all frequencies
equals ``||f||_2^4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .littlewood_paley import unit_partition_bump

__all__ = [
    "Field1D",
    "make_field1d",
    "random_field1d",
    "PruneResult",
    "BallDecomposition",
    "mult_derivative_1d",
    "autocorr_energy",
    "autocorr_energy_closed",
    "autocorr_identity_defect",
    "ball_decompose",
    "window_energies",
    "prune",
    "flat_energy_check",
    "envelope_smoothness",
]

_MASK_WIDTH = 0.375     # transition half-width of the window masks; support |u| <= 7/8 < 1


@dataclass(frozen=True, eq=False)
class Field1D:
    """Samples of a periodic function of one variable."""

    samples: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.samples, dtype=complex)
        if a.ndim != 1 or a.size < 2:
            raise ValueError("samples must be a 1-D array with at least two entries")
        if not self.period > 0:
            raise ValueError("period must be positive")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "samples", a)

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n) - self.n / 2) * self.dx

    @property
    def bins(self) -> np.ndarray:
        """Integer frequency index of each coefficient (fft ordering)."""
        return np.rint(np.fft.fftfreq(self.n, 1.0 / self.n)).astype(np.int64)

    @property
    def freqs(self) -> np.ndarray:
        return self.bins / self.period

    @cached_property
    def coeffs(self) -> np.ndarray:
        # centred grid: shift the fft phase to x_0 = -L/2
        c = np.fft.fft(self.samples) / self.n * np.where(self.bins % 2 == 0, 1.0, -1.0)
        c.setflags(write=False)
        return c

    def norm2(self) -> float:
        return math.sqrt(self.period * float(np.sum(np.abs(self.coeffs) ** 2)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples)))


def make_field1d(coeffs, period: float = 1.0) -> Field1D:
    """Synthesize a field from coefficients in fft ordering."""
    c = np.asarray(coeffs, dtype=complex)
    n = c.size
    k = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(np.int64)
    return Field1D(np.fft.ifft(c * np.where(k % 2 == 0, 1.0, -1.0)) * n, period)


def random_field1d(n: int, bandwidth: int, seed: int, period: float = 1.0,
                   center: int = 0) -> Field1D:
    """Unit-norm field with Gaussian coefficients on bins ``|k - center| <= bandwidth``."""
    if abs(center) + bandwidth >= n // 2:
        raise ValueError("requested band reaches the Nyquist bin")
    rng = np.random.default_rng(seed)
    c = np.zeros(n, dtype=complex)
    k = np.arange(center - bandwidth, center + bandwidth + 1)
    c[k % n] = rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)
    c /= math.sqrt(period * np.sum(np.abs(c) ** 2))
    return make_field1d(c, period)


# -- multiplicative-derivative energy ---------------------------------------------


def mult_derivative_1d(f: Field1D, s: float) -> Field1D:
    """``D_s f(x) = f(x + s) conj(f(x))`` with the shift done spectrally."""
    shifted = make_field1d(f.coeffs * np.exp(2j * np.pi * f.freqs * s), f.period)
    return Field1D(shifted.samples * np.conj(f.samples), f.period)


def _lags(f: Field1D, R: float) -> np.ndarray:
    """Lag bins ``|xi| <= R`` of ``D_s f``; its spectrum lives on ``[-n, n)``, the 2n-point lattice."""
    k = np.arange(-f.n, f.n)
    return k[np.abs(k / f.period) <= R + 1e-12]


def autocorr_energy(f: Field1D, R: float, s_nodes: int | None = None) -> float:
    """``int_0^L sum_{|xi| <= R} |FT(D_s f)(xi)|^2 (1/L) ds`` by direct double sum.

    ``FT`` is the transform over one period, ``L`` times the coefficient, and
    the lattice measure is ``1/L``. The ``s`` integral is a periodic
    trapezoid rule on ``s_nodes`` points (default: ``2 n``, which is exact for
    the band-limited integrand).
    """
    L = f.period
    ns = 2 * f.n if s_nodes is None else int(s_nodes)
    if ns < 1:
        raise ValueError("s_nodes must be positive")
    lags = _lags(f, R) % (2 * f.n)
    if not np.any(f.coeffs):
        return 0.0
    # zero-padding to 2n keeps the product D_s f free of aliasing
    pad = np.zeros(2 * f.n, dtype=complex)
    kb = f.bins
    total = 0.0
    for s in np.arange(ns) * (L / ns):
        cs = f.coeffs * np.exp(2j * np.pi * f.freqs * s)
        # coefficients of f(. + s) conj(f): d[xi] = sum_b cs[b + xi] conj(c[b])
        pad[:] = 0
        pad[kb % (2 * f.n)] = cs
        A = np.fft.ifft(pad)
        pad[:] = 0
        pad[kb % (2 * f.n)] = f.coeffs
        B = np.fft.ifft(pad)
        d = np.fft.fft(A * np.conj(B)) * (2 * f.n)
        total += np.sum(np.abs(L * d[lags]) ** 2) / L
    return float(total * (L / ns))


def autocorr_energy_closed(f: Field1D, R: float) -> float:
    """Closed form ``L^2 sum_{|xi| <= R} sum_b |c_{b + xi}|^2 |c_b|^2``."""
    L = f.period
    p = np.abs(f.coeffs) ** 2
    n = f.n
    pad = np.zeros(2 * n)
    pad[f.bins % (2 * n)] = p
    # autocorrelation sum_b p[b + xi] p[b]
    ac = np.real(np.fft.ifft(np.abs(np.fft.fft(pad)) ** 2))
    return float(L * L * np.sum(ac[_lags(f, R) % (2 * n)]))


def autocorr_identity_defect(f: Field1D, R: float | None = None, s_nodes: int | None = None) -> float:
    """Relative gap between :func:`autocorr_energy` and :func:`autocorr_energy_closed`."""
    R = np.inf if R is None else R
    direct = autocorr_energy(f, R, s_nodes)
    closed = autocorr_energy_closed(f, R)
    scale = max(closed, f.norm2() ** 4, np.finfo(float).tiny)
    return abs(direct - closed) / scale


# -- the orthogonal ball decomposition ---------------------------------------------------


@dataclass(frozen=True)
class BallDecomposition:
    """``f = g + h`` with ``g`` the part of ``f`` in ``[center - R, center + R]``."""

    g: Field1D
    h: Field1D
    center: float
    R: float
    rho: float
    hypothesis_holds: bool
    g_fraction: float           # ||g||^2 / ||f||^2


def ball_decompose(f: Field1D, R: float, rho: float) -> BallDecomposition:
    """Split off the radius-``R`` frequency interval of largest energy.

    The energy hypothesis is ``autocorr_energy(f, R) >= rho ||f||^4``; when it
    holds the returned ``g`` satisfies ``||g||^2 >= rho ||f||^2`` (checked).
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    order = np.argsort(f.bins)
    kb = f.bins[order]
    p = np.abs(f.coeffs[order]) ** 2
    r = int(math.floor(R * f.period + 1e-9))
    csum = np.concatenate([[0.0], np.cumsum(p)])
    # window [i - r, i + r] in sorted (non-cyclic) order
    lo = np.clip(np.arange(kb.size) - r, 0, kb.size)
    hi = np.clip(np.arange(kb.size) + r + 1, 0, kb.size)
    i = int(np.argmax(csum[hi] - csum[lo]))
    mask_sorted = np.zeros(kb.size, dtype=bool)
    mask_sorted[lo[i]:hi[i]] = True
    mask = np.empty_like(mask_sorted)
    mask[order] = mask_sorted
    cg = np.where(mask, f.coeffs, 0)
    g = make_field1d(cg, f.period)
    h = make_field1d(f.coeffs - cg, f.period)
    total = float(np.sum(np.abs(f.coeffs) ** 2))
    frac = float(np.sum(np.abs(cg) ** 2)) / total if total > 0 else 0.0
    nf4 = f.norm2() ** 4
    holds = nf4 > 0 and autocorr_energy_closed(f, R) >= rho * nf4
    if holds and frac < rho * (1 - 1e-12):
        raise AssertionError(f"ball energy fraction {frac:g} below rho = {rho:g} although the hypothesis holds")
    return BallDecomposition(g, h, float(kb[i] / f.period), float(R), float(rho), bool(holds), frac)


# -- the sharp / flat decomposition ------------------------------------------------------


@dataclass(frozen=True)
class PruneResult:
    """``f = f_sharp + f_flat`` with ``f_sharp = sum_n h_n e(alpha_n x)``.

    Attributes
    ----------
    sharp_terms : list of (Field1D, float)
        Envelopes ``h_n`` (frequency support in ``[-R, R]``) and modulation
        frequencies ``alpha_n = n R``.
    selected : list of int
        Window indices ``n``; window ``n`` is centred at ``n R``.
    """

    f: Field1D
    sharp: Field1D
    flat: Field1D
    sharp_terms: list = field(repr=False)
    selected: list
    rho: float
    R: float
    heavy: list


def _check_R(f: Field1D, R: float) -> int:
    r = R * f.period
    if R <= 0 or abs(r - round(r)) > 1e-9 or round(r) < 1:
        raise ValueError(f"R must be a positive multiple of the bin width 1/L = {1 / f.period:g}")
    return int(round(r))


def window_energies(f: Field1D, R: float) -> dict[int, float]:
    """Energy ``L sum |c|^2`` of ``f`` in each stride window ``I_n = [n R, (n + 1) R)``."""
    r = _check_R(f, R)
    idx = np.floor_divide(f.bins, r)
    e = f.period * np.abs(f.coeffs) ** 2
    out: dict[int, float] = {}
    for n in np.unique(idx):
        out[int(n)] = float(np.sum(e[idx == n]))
    return out


def _mask(f: Field1D, R: float, n: int) -> np.ndarray:
    return unit_partition_bump(f.freqs / R - n, _MASK_WIDTH)


def prune(f: Field1D, R: float, rho: float) -> PruneResult:
    """Keep the windows whose neighbourhood carries at least ``rho ||f||^2``.

    ``I_n`` is heavy when its energy is at least ``rho ||f||^2``; the selected
    set is every ``n`` with ``I_{n-1}`` or ``I_n`` heavy, i.e. every smooth
    window ``phi_n`` (support ``((n - 1) R, (n + 1) R)``) that meets a heavy
    interval. Disjointness of the ``I_n`` gives at most ``2 / rho`` windows.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    _check_R(f, R)
    total = f.norm2() ** 2
    en = window_energies(f, R)
    heavy = sorted(n for n, e in en.items() if total > 0 and e >= rho * total)
    selected = sorted({m for n in heavy for m in (n, n + 1)})
    cs = np.zeros(f.n, dtype=complex)
    terms = []
    for n in selected:
        cn = _mask(f, R, n) * f.coeffs
        cs += cn
        alpha = n * R
        # h_n = e(-alpha x) F^-1(phi_n f^): shift the coefficient array by n R L bins
        shift = int(round(alpha * f.period))
        hn = np.zeros(f.n, dtype=complex)
        hn[(f.bins - shift) % f.n] = cn
        terms.append((make_field1d(hn, f.period), float(alpha)))
    sharp = make_field1d(cs, f.period)
    flat = make_field1d(f.coeffs - cs, f.period)
    return PruneResult(f, sharp, flat, terms, selected, float(rho), float(R), heavy)


def flat_energy_check(result: PruneResult) -> float:
    """``autocorr_energy(f_flat, R) / (rho ||f||^4)`` by the direct double sum; zero when ``f_flat = 0``."""
    nf = result.f.norm2()
    if nf == 0:
        return 0.0
    return autocorr_energy(result.flat, result.R) / (result.rho * nf**4)


def envelope_smoothness(result: PruneResult, order: int = 2) -> np.ndarray:
    """``max_n ||d^a h_n||_inf / (R^a ||f||_inf)`` for ``a = 0..order``.

    Derivatives are taken spectrally (exact for the trigonometric envelopes).
    """
    fs = result.f.sup()
    out = np.zeros(order + 1)
    if fs == 0 or not result.sharp_terms:
        return out
    for h, _ in result.sharp_terms:
        for a in range(order + 1):
            d = make_field1d(h.coeffs * (2j * np.pi * h.freqs) ** a, h.period)
            out[a] = max(out[a], d.sup() / (result.R**a * fs))
    return out
