"""Decay experiments and the cell localization machinery.

The three experiments work on coefficient tables, not on sampled grids:
every quantity is a finite sum over lattice frequencies against ``m`` or
``m_+`` tabulated by :func:`~triparabola.multiplier.lattice_symbol`. That keeps
``lambda = 2^9`` within seconds and avoids any Nyquist bookkeeping.

Tori: the cheap smoothing and high-frequency experiments use the unit torus,
whose fundamental domain is exactly ``I_0 = [-1/2, 1/2]^2``. The trilinear
fit uses period 2 so the cutoff ``chi`` (support ``[-1, 1]``) fits in one
period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np

from .fitting import DecayFit, fit_decay
from .grid import Field2D, Grid2D
from .littlewood_paley import DEFAULT_PROFILE, BumpProfile, unit_partition_bump
from .multiplier import lattice_symbol
from .operators import CutoffZeta, shift_along

__all__ = [
    "SmoothingParams",
    "make_smoothing_params",
    "cheap_smoothing_norms",
    "cheap_smoothing_check",
    "highfreq_norms",
    "highfreq_decay_fit",
    "smoothing_trials",
    "smoothing_fit",
    "CellDecomposition",
    "decompose_cells",
    "mult_derivative",
    "local_fourier_coeffs",
    "coefficient_tail_mass",
]


# -- parameters ----------------------------------------------------------------


@dataclass(frozen=True)
class SmoothingParams:
    """Exponents of the localization argument.

    ``delta = gamma - 1/2`` and ``tau = gamma + kappa`` are derived. The
    pruning threshold at frequency ``lambda`` is ``rho = lambda^-rho_exponent``.
    """

    gamma: float = 0.6
    eps1: float = 0.02
    eps2: float = 0.02
    kappa: float = 0.3
    delta_prime: float = 0.1
    rho_exponent: float = 0.1

    def __post_init__(self):
        if not 0.5 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (1/2, 1) (got {self.gamma})")
        if not (self.eps1 > 0 and self.eps2 > 0):
            raise ValueError("eps1 and eps2 must be positive")
        if not 5 * self.eps2 < self.kappa < 1 - self.gamma:
            raise ValueError(f"kappa must lie in (5 eps2, 1 - gamma) = "
                             f"({5 * self.eps2:g}, {1 - self.gamma:g}) (got {self.kappa})")
        if not self.delta_prime > 0:
            raise ValueError("delta_prime must be positive")
        if not self.rho_exponent > 0:
            raise ValueError("rho_exponent must be positive")

    @property
    def delta(self) -> float:
        return self.gamma - 0.5

    @property
    def tau(self) -> float:
        return self.gamma + self.kappa

    def rho(self, lam: float) -> float:
        return float(lam) ** (-self.rho_exponent)


def make_smoothing_params(**kw) -> SmoothingParams:
    return SmoothingParams(**kw)


def _check_lambdas(lambdas, minimum: float = 1.0) -> np.ndarray:
    lam = np.asarray(list(lambdas), dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ValueError("need a non-empty list of scales")
    if np.any(lam < minimum):
        raise ValueError(f"scales must be at least {minimum:g}")
    if np.any(lam > 2.0**12):
        raise ValueError("scales above 2^12 exceed the tabulation budget")
    return lam


def _gauss(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# -- cheap smoothing -----------------------------------------------------------


def _annulus_lattice(lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Integer frequencies with ``lam/2 <= max(|xi|, |eta|) <= 2 lam``, as a mask on a square."""
    K = int(math.floor(2 * lam))
    v = np.arange(-K, K + 1, dtype=float)
    a = np.maximum(np.abs(v)[:, None], np.abs(v)[None, :])
    return v, (a >= lam / 2) & (a <= 2 * lam)


def cheap_smoothing_norms(lam: float, trials: int, seed: int,
                          profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``||H_0 f||_{L^2(I_0)}`` for ``trials`` unit-norm random ``f`` at scale ``lam``.

    On the unit torus ``I_0`` is the whole fundamental domain, so by Parseval
    the norm is ``(sum |m c|^2)^(1/2)`` over the coefficients ``c`` of ``f``.
    """
    v, mask = _annulus_lattice(lam)
    if not mask.any():
        raise ValueError(f"no lattice frequency at scale {lam}")
    m2 = np.abs(lattice_symbol(v, v, 1.0, profile=profile)) ** 2
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    w = m2[mask]
    for i in range(trials):
        c2 = np.abs(_gauss(rng, w.size)) ** 2
        out[i] = math.sqrt(np.sum(w * c2) / np.sum(c2))
    return out


def cheap_smoothing_check(lambdas, trials: int = 20, seed: int = 0,
                          profile: BumpProfile = DEFAULT_PROFILE) -> DecayFit:
    """Fit the trial-median ``||H_0 f||_{L^2(I_0)}`` against ``lambda``."""
    lam = _check_lambdas(lambdas)
    ss = np.random.SeedSequence(seed).spawn(lam.size)
    med = [np.median(cheap_smoothing_norms(l, trials, int(s.generate_state(1)[0]), profile))
           for l, s in zip(lam, ss)]
    return fit_decay(lam, med, trials=trials, seed=seed)


# -- high-frequency decay -------------------------------------------------------


def _band_coeffs(rng, k: int, axis: int, profile: BumpProfile):
    """Random unit-``L^2`` coefficients annular at ``2^k`` along ``axis`` then ``Delta_k``-filtered.

    Returns the frequency vectors along the localized and free axes and the
    coefficient matrix (localized axis first).
    """
    lam = 2.0**k
    K = int(math.floor(2 * lam))
    v = np.arange(-K, K + 1, dtype=float)
    live = v[(np.abs(v) >= lam / 2) & (np.abs(v) <= 2 * lam)]
    c = _gauss(rng, (live.size, v.size))
    c /= np.sqrt(np.sum(np.abs(c) ** 2))
    c *= profile.psi_k(live, k)[:, None]
    return live, v, c


def highfreq_norms(k: int, trials: int, seed: int, points: int = 32,
                   zero_f2: bool = False, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """``||T_0(Delta_k f1, Delta_k f2)||_{L^1(I_0)}`` for random unit pairs.

    ``T_0`` is the paraproduct with symbol ``m``. The ``L^1`` norm over the
    unit torus is estimated by the mean of ``|T_0|`` over a randomly shifted
    ``points x points`` sub-lattice, evaluated exactly from the coefficients.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    M = None
    for i in range(trials):
        xi1, eta1, c1 = _band_coeffs(rng, k, 1, profile)           # c1[xi, eta']
        eta2, xi2, c2t = _band_coeffs(rng, k, 2, profile)          # c2t[eta, xi']
        if zero_f2:
            c2t = np.zeros_like(c2t)
        if M is None:
            M = lattice_symbol(xi1, eta2, 1.0, profile=profile)    # (n_xi, n_eta)
        off = rng.random(2) / points
        xs = off[0] + np.arange(points) / points - 0.5
        ys = off[1] + np.arange(points) / points - 0.5
        # A[xi, q] = sum_eta' c1 e(eta' y_q); B[p, eta] = sum_xi' c2 e(xi' x_p)
        A = c1 @ np.exp(2j * np.pi * np.outer(eta1, ys))
        B = (c2t @ np.exp(2j * np.pi * np.outer(xi2, xs))).T
        Ey = np.exp(2j * np.pi * np.outer(eta2, ys))               # (n_eta, Q)
        X = (B.T[:, :, None] * Ey[:, None, :]).reshape(eta2.size, -1)   # (n_eta, P*Q)
        inner = (M @ X).reshape(xi1.size, points, points)          # [xi, p, q]
        Ex = np.exp(2j * np.pi * np.outer(xi1, xs))                # (n_xi, P)
        T = np.einsum("iq,ip,ipq->pq", A, Ex, inner)
        out[i] = np.mean(np.abs(T))
    return out


def highfreq_decay_fit(ks, trials: int = 20, seed: int = 0, points: int = 32,
                       zero_f2: bool = False, profile: BumpProfile = DEFAULT_PROFILE) -> DecayFit:
    """Fit trial medians of :func:`highfreq_norms` against ``2^k`` along ``k1 = k2 = k``."""
    ks = [int(k) for k in ks]
    if any(k < 1 for k in ks):
        raise ValueError("k must be at least 1")
    if max(ks) > 11:
        raise ValueError("k above 11 exceeds the tabulation budget")
    ss = np.random.SeedSequence(seed).spawn(len(ks))
    med = [np.median(highfreq_norms(k, trials, int(s.generate_state(1)[0]), points, zero_f2, profile))
           for k, s in zip(ks, ss)]
    return fit_decay(2.0 ** np.asarray(ks), med, trials=trials, seed=seed)


# -- trilinear smoothing ---------------------------------------------------------


@dataclass
class _Factor:
    """1-D trigonometric polynomial on period ``L``: coefficients at ``freqs / L``."""

    freqs: np.ndarray      # integer lattice indices
    coef: np.ndarray


def _random_factor(rng, L: float, lam: float, kind: str) -> _Factor:
    K = int(math.floor(2 * lam * L))
    k = np.arange(-K, K + 1)
    a = np.abs(k) / L
    keep = (a >= lam / 2) & (a <= 2 * lam) if kind == "annulus" else (a <= 2 * lam)
    if kind == "one":
        return _Factor(np.array([0]), np.array([1.0 / math.sqrt(L)], dtype=complex))
    k = k[keep]
    c = _gauss(rng, k.size)
    c /= math.sqrt(L * np.sum(np.abs(c) ** 2))
    return _Factor(k, c)


def _samples(f: _Factor, L: float, n: int) -> np.ndarray:
    """Values on the centred grid ``x_j = (j - n/2) L / n``."""
    if np.max(np.abs(f.freqs)) >= n // 2:
        raise ValueError("grid too coarse for the factor's frequencies")
    buf = np.zeros(n, dtype=complex)
    # e(k x_j / L) = (-1)^k e(k j / n)
    buf[f.freqs % n] = f.coef * np.where(f.freqs % 2 == 0, 1.0, -1.0)
    return np.fft.ifft(buf) * n


def _coeffs_at(g: np.ndarray, L: float, kk: np.ndarray) -> np.ndarray:
    """Fourier coefficients ``(1/L) int g e(-k x / L)`` of centred samples at lattice indices ``kk``."""
    n = g.size
    c = np.fft.fft(g) / n * np.exp(1j * np.pi * np.fft.fftfreq(n, 1.0 / n))
    return c[np.asarray(kk) % n]


def smoothing_trials(lam: float, which_arg: Literal[1, 2], trials: int, seed: int,
                     f3_one: bool = False, wrong_axis: bool = False, modulated: bool = False,
                     period: float = 2.0, profile: BumpProfile = DEFAULT_PROFILE,
                     return_fields: bool = False):
    """Normalized ``|Lambda(f1, f2, f3)|`` for rank-one random fields.

    Each ``f_l(x, y) = a_l(x) b_l(y)`` is a product of 1-D trigonometric
    polynomials. ``which_arg`` selects the field whose own-axis factor is
    annular at ``lam`` (``a_1`` for ``f1``, ``b_2`` for ``f2``); every other
    factor is a ball at ``lam``. With ``wrong_axis`` the annulus is moved to
    the other axis of the same field. ``f3_one`` replaces ``f3`` by 1.

    ``modulated`` (with ``wrong_axis``) builds the adversarial configuration
    from the modulation symmetry: all factors are balls at scale 1, the
    wrong-axis factor is multiplied by ``e(lam s)`` and the matching factor of
    ``f3`` by ``e(-lam s)``. The value of ``Lambda`` then does not depend on
    ``lam`` although the chosen field sits at frequency ``~ lam``.

    With ``P = a_2 a_3 chi`` and ``Q = b_1 b_3 chi``,
    ``Lambda = sum_{xi, eta} p(xi) q(eta) m_+(xi, eta)`` where
    ``p(xi) = L a1^(xi) P^(-xi)`` and ``q(eta) = L b2^(eta) Q^(-eta)``.
    The result is divided by ``||f1||_2 ||f2||_2 ||f3||_inf``.
    """
    if which_arg not in (1, 2):
        raise ValueError("which_arg must be 1 or 2")
    if modulated and not wrong_axis:
        raise ValueError("modulated applies to the wrong-axis configuration only")
    L = float(period)
    zeta = CutoffZeta(radius=L / 2, profile=profile)
    kinds = {"a1": "ball", "b1": "ball", "a2": "ball", "b2": "ball",
             "a3": "one" if f3_one else "ball", "b3": "one" if f3_one else "ball"}
    target = {(1, False): "a1", (1, True): "b1", (2, False): "b2", (2, True): "a2"}[(which_arg, wrong_axis)]
    if not modulated:
        kinds[target] = "annulus"
    rng = np.random.default_rng(seed)
    scale = 1.0 if modulated else lam
    facs = [{name: _random_factor(rng, L, scale, kinds[name]) for name in kinds} for _ in range(trials)]
    if modulated:
        shift = int(round(lam * L))
        partner = {"b1": "b3", "a2": "a3"}[target]
        for f in facs:
            f[target] = _Factor(f[target].freqs + shift, f[target].coef)
            f[partner] = _Factor(f[partner].freqs - shift, f[partner].coef)
    n = int(2 ** math.ceil(math.log2(L * (6 * lam + 128))))
    x = (np.arange(n) - n / 2) * (L / n)
    chi = zeta.chi(x)
    kx = np.unique(np.concatenate([f["a1"].freqs for f in facs]))
    ky = np.unique(np.concatenate([f["b2"].freqs for f in facs]))
    pm = np.zeros((trials, kx.size), dtype=complex)
    qm = np.zeros((trials, ky.size), dtype=complex)
    norm = np.empty(trials)
    for i, f in enumerate(facs):
        a1 = np.zeros(kx.size, dtype=complex)
        a1[np.searchsorted(kx, f["a1"].freqs)] = f["a1"].coef
        b2 = np.zeros(ky.size, dtype=complex)
        b2[np.searchsorted(ky, f["b2"].freqs)] = f["b2"].coef
        P = _samples(f["a2"], L, n) * _samples(f["a3"], L, n) * chi
        Q = _samples(f["b1"], L, n) * _samples(f["b3"], L, n) * chi
        pm[i] = L * a1 * _coeffs_at(P, L, -kx)
        qm[i] = L * b2 * _coeffs_at(Q, L, -ky)
        n1 = L * math.sqrt(np.sum(np.abs(f["a1"].coef) ** 2) * np.sum(np.abs(f["b1"].coef) ** 2))
        n2 = L * math.sqrt(np.sum(np.abs(f["a2"].coef) ** 2) * np.sum(np.abs(f["b2"].coef) ** 2))
        sup3 = np.max(np.abs(_samples(f["a3"], L, n))) * np.max(np.abs(_samples(f["b3"], L, n)))
        norm[i] = n1 * n2 * sup3
    lam_val = np.zeros(trials, dtype=complex)
    xi, eta = kx / L, ky / L
    chunk = max(1, 2_000_000 // max(1, xi.size))
    for s in range(0, eta.size, chunk):
        M = lattice_symbol(xi, eta[s:s + chunk], L, plus=True, profile=profile)
        lam_val += np.sum((pm @ M) * qm[:, s:s + chunk], axis=1)
    vals = np.abs(lam_val) / norm
    if return_fields:
        return vals, lam_val, facs
    return vals


def smoothing_fit(lambdas, which_arg: Literal[1, 2] = 1, trials: int = 20, seed: int = 0,
                  f3_one: bool = False, wrong_axis: bool = False, modulated: bool = False,
                  profile: BumpProfile = DEFAULT_PROFILE) -> DecayFit:
    """Fit trial medians of :func:`smoothing_trials` against ``lambda``."""
    lam = _check_lambdas(lambdas)
    ss = np.random.SeedSequence(seed).spawn(lam.size)
    med = [np.median(smoothing_trials(l, which_arg, trials, int(s.generate_state(1)[0]),
                                      f3_one=f3_one, wrong_axis=wrong_axis,
                                      modulated=modulated, profile=profile))
           for l, s in zip(lam, ss)]
    return fit_decay(lam, med, trials=trials, seed=seed)


def factor_field(grid: Grid2D, a: _Factor, b: _Factor) -> Field2D:
    """Sample ``a(x) b(y)`` on a 2-D grid (both periods must equal the factor period)."""
    return Field2D(grid, np.outer(_samples(a, grid.Lx, grid.nx), _samples(b, grid.Ly, grid.ny)))


# -- cell decomposition ------------------------------------------------------------

_CELL_WIDTH = 0.25    # bump transition half-width; support |u| <= 3/4, sole owner on |u| <= 1/4


@dataclass
class CellDecomposition:
    """Cell pieces ``f_{l,m}`` of side ``h ~ lambda^-gamma`` and the interacting pairs.

    Attributes
    ----------
    h : float
        Cell side ``L / N`` with ``N = round(L lambda^gamma)`` so cells tile the torus.
    pairs : ndarray, shape (n, 4)
        Rows ``(m1x, m1y, m2x, m2y)`` of the index set of interacting pairs.
    anchors : ndarray, shape (n, 3)
        ``(x, y, t)`` with ``(x + t, y)`` in ``Q_{m1}``, ``(x, y + t^2)`` in
        ``Q_{m2}``, ``|x|, |y| <= 1`` and ``1/2 <= |t| <= 2``.
    """

    f1: Field2D
    f2: Field2D
    lam: float
    gamma: float
    h: float
    ncell: int
    pairs: np.ndarray
    anchors: np.ndarray
    _wx: np.ndarray = field(repr=False, default=None)
    _wy: np.ndarray = field(repr=False, default=None)

    @property
    def cells(self) -> list[tuple[int, int]]:
        r = range(self.ncell)
        return [(i, j) for i in r for j in r]

    def weight(self, m) -> np.ndarray:
        """Partition weight ``eta(x/h - m1) eta(y/h - m2)`` on the grid."""
        return np.outer(self._wx[m[0] % self.ncell], self._wy[m[1] % self.ncell])

    def piece(self, l: Literal[1, 2], m) -> Field2D:
        f = self.f1 if l == 1 else self.f2
        return Field2D(f.grid, f.samples * self.weight(m))

    def pieces(self, l: Literal[1, 2]) -> Iterator[tuple[tuple[int, int], Field2D]]:
        for m in self.cells:
            yield m, self.piece(l, m)

    def reconstruct(self, l: Literal[1, 2]) -> Field2D:
        f = self.f1 if l == 1 else self.f2
        acc = np.zeros(f.grid.shape, dtype=complex)
        for _, p in self.pieces(l):
            acc += p.samples
        return Field2D(f.grid, acc)

    def pair_count_ratio(self) -> float:
        return len(self.pairs) / self.lam ** (3 * self.gamma)


def _axis_weights(coord: np.ndarray, h: float, n: int, period: float) -> np.ndarray:
    """``w[m, i] = sum_j eta(coord_i / h - m - j n)`` (periodized), for ``m = 0..n-1``."""
    u = coord / h
    m = np.arange(n)[:, None]
    d = (u[None, :] - m + n / 2) % n - n / 2
    return unit_partition_bump(d, _CELL_WIDTH)


def _owners(u: np.ndarray) -> list[np.ndarray]:
    """The two integers nearest ``u``; any cell whose bump reaches ``u`` is one of them."""
    lo = np.floor(u)
    return [lo, lo + 1]


def _merge(keys: list, anchors: list) -> tuple[list, list]:
    k = np.concatenate(keys)
    u, first = np.unique(k, return_index=True)
    return [u], [np.concatenate(anchors)[first]]


def _interacting_pairs(h: float, ncell: int, live1: np.ndarray, live2: np.ndarray):
    """Enumerate pairs by sampling ``(x, y, t)`` at spacing ``h/4``.

    A sample contributes every ``(m1, m2)`` whose bump supports contain
    ``(x + t, y)`` and ``(x, y + t^2)``; the sample itself is the anchor.
    """
    reach = 0.5 + _CELL_WIDTH - 1e-9     # open support: the bump vanishes on the boundary
    s = h / 4
    # generic offsets keep samples off the cell boundaries
    g = np.arange(-1.0 + 0.2071 * s, 1.0, s)
    tp = np.arange(0.5 + 0.3183 * s, 2.0, s)
    t = np.concatenate([-tp[::-1], tp])
    X, Y = np.meshgrid(g, g, indexing="ij")
    X, Y = X.ravel(), Y.ravel()
    keys, anchors = [], []
    for tv in t:
        u1 = (X + tv) / h
        v1 = Y / h
        u2 = X / h
        v2 = (Y + tv * tv) / h
        for a in _owners(u1):
            for b in _owners(v1):
                ab = (np.abs(u1 - a) < reach) & (np.abs(v1 - b) < reach)
                ab &= live1[a.astype(np.int64) % ncell, b.astype(np.int64) % ncell]
                for c in _owners(u2):
                    for d in _owners(v2):
                        ok = ab & (np.abs(u2 - c) < reach) & (np.abs(v2 - d) < reach)
                        ok &= live2[c.astype(np.int64) % ncell, d.astype(np.int64) % ncell]
                        if not ok.any():
                            continue
                        sel = np.flatnonzero(ok)
                        ia, ib, ic, idd = (v[sel].astype(np.int64) % ncell for v in (a, b, c, d))
                        key = ((ia * ncell + ib) * ncell + ic) * ncell + idd
                        key, first = np.unique(key, return_index=True)
                        sel = sel[first]
                        keys.append(key)
                        anchors.append(np.stack([X[sel], Y[sel], np.full(sel.size, tv)], axis=1))
        if len(keys) > 64:
            keys, anchors = _merge(keys, anchors)
    if not keys:
        return np.zeros((0, 4), dtype=np.int64), np.zeros((0, 3))
    (uk,), (anchors,) = _merge(keys, anchors)
    m2y = uk % ncell
    m2x = (uk // ncell) % ncell
    m1y = (uk // ncell**2) % ncell
    m1x = uk // ncell**3
    pairs = np.stack([m1x, m1y, m2x, m2y], axis=1)
    return pairs, anchors


def decompose_cells(f1: Field2D, f2: Field2D, lam: float,
                    params: SmoothingParams | None = None, live_tol: float = 0.0) -> CellDecomposition:
    """Cut ``f1, f2`` into cells of side ``~ lambda^-gamma`` and find interacting pairs.

    A cell piece counts as live when its sup exceeds ``live_tol`` times the
    sup of the field. Pairs are restricted to live pieces and to the support
    of the cutoff ``zeta`` (``|x|, |y| <= 1``, ``1/2 <= |t| <= 2``).
    """
    params = params or SmoothingParams()
    g = f1.grid
    if f2.grid != g:
        raise ValueError("fields live on different grids")
    if g.Lx != g.Ly or g.nx != g.ny:
        raise ValueError("cell decomposition needs a square grid")
    L = g.Lx
    ncell = max(1, int(round(L * lam ** params.gamma)))
    h = L / ncell
    if h < 4 * g.dx:
        raise ValueError(f"cell side {h:g} is below four grid cells ({4 * g.dx:g}); refine the grid")
    wx = _axis_weights(g.x, h, ncell, L)
    wy = _axis_weights(g.y, h, ncell, L)

    def live(f):
        top = np.max(np.abs(f.samples))
        if top == 0:
            return np.zeros((ncell, ncell), dtype=bool)
        a = np.abs(f.samples)
        # sup of |f| on the support of each product weight
        sx = wx > 0
        sy = wy > 0
        out = np.empty((ncell, ncell), dtype=bool)
        for i in range(ncell):
            row = a[sx[i]]
            for j in range(ncell):
                out[i, j] = row[:, sy[j]].max(initial=0.0) > live_tol * top
        return out

    pairs, anchors = _interacting_pairs(h, ncell, live(f1), live(f2))
    return CellDecomposition(f1, f2, float(lam), params.gamma, h, ncell, pairs, anchors, wx, wy)


# -- multiplicative derivatives and local coefficients -------------------------------


def mult_derivative(f: Field2D, s: float, axis: Literal[1, 2] = 1) -> Field2D:
    """``D_s f = f(. + s e_axis) conj(f)`` with the shift by trigonometric interpolation."""
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    shifted = shift_along(f.samples, f.grid, axis - 1, s)
    return Field2D(f.grid, shifted * np.conj(f.samples))


def local_fourier_coeffs(piece: Field2D, s: float, axis: Literal[1, 2], lam: float,
                         kmax: int, gamma: float = 0.6, center=None) -> np.ndarray:
    """``a[k1, k2] = lambda^(2 gamma) * FT(D_s piece)(lambda^gamma k)`` for ``|k1|, |k2| <= kmax``.

    ``FT`` is the continuous Fourier transform over the torus, computed by
    direct summation over the grid, with coordinates unwrapped around
    ``center`` (default: the peak of ``|D_s piece|``). Returned array is
    indexed by ``k + kmax`` on both axes.
    """
    g = piece.grid
    sc = lam ** gamma
    if sc * kmax >= min(g.nyquist):
        raise ValueError(f"frequency lambda^gamma * kmax = {sc * kmax:g} reaches the grid Nyquist "
                         f"limit {min(g.nyquist):g}; lower kmax or refine the grid")
    d = mult_derivative(piece, s, axis).samples
    if center is None:
        i, j = np.unravel_index(np.argmax(np.abs(d)), d.shape)
        center = (g.x[i], g.y[j])
    # unwrap coordinates around the piece so its support is not cut by the seam
    x = (g.x - center[0] + g.Lx / 2) % g.Lx - g.Lx / 2 + center[0]
    y = (g.y - center[1] + g.Ly / 2) % g.Ly - g.Ly / 2 + center[1]
    k = np.arange(-kmax, kmax + 1)
    Ex = np.exp(-2j * np.pi * sc * np.outer(k, x))
    Ey = np.exp(-2j * np.pi * sc * np.outer(y, k))
    return lam ** (2 * gamma) * (Ex @ d @ Ey) * g.cell_area


def coefficient_tail_mass(a: np.ndarray, threshold: float, axis: Literal[1, 2] = 2) -> float:
    """``sum_{|k_axis| >= threshold} sum_{other} |a|^2`` for a table from :func:`local_fourier_coeffs`."""
    kmax = (a.shape[0] - 1) // 2
    k = np.abs(np.arange(-kmax, kmax + 1))
    sel = k >= threshold
    sub = a[sel, :] if axis == 1 else a[:, sel]
    return float(np.sum(np.abs(sub) ** 2))
