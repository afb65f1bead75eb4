"""The oscillatory multiplier and its dyadic family.

    m(xi, eta)   = int e(xi t + eta t^2) psi(t) / t dt
    m_+(xi, eta) = int e(xi t + eta t^2) psi(t) dt

with ``e(s) = exp(2 pi i s)``. Since ``psi`` is even and supported in
``1/2 <= |t| <= 2`` both integrals fold onto ``[1/2, 2]``:

    m   = int_{1/2}^{2} 2i sin(2 pi xi t) e(eta t^2) psi(t) / t dt
    m_+ = int_{1/2}^{2} 2 cos(2 pi xi t) e(eta t^2) psi(t) dt

The integrand never touches ``t = 0``, so no principal value is involved.
Point evaluation uses composite Gauss-Legendre rules whose panel count grows
with the phase derivative ``xi + 2 eta t``; the reported error bound is the change under
node doubling. :func:`lattice_symbol` is an independent FFT route that
tabulates the symbol on a whole frequency lattice at once.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .fitting import DecayFit, fit_decay
from .littlewood_paley import DEFAULT_PROFILE, BumpProfile

__all__ = [
    "THRESHOLD",
    "MAX_FREQ",
    "QuadratureError",
    "RegimeTag",
    "MultiplierSample",
    "classify_regime",
    "point_regime",
    "eval_m",
    "eval_m_plus",
    "eval_m_array",
    "family_weight",
    "eval_m_family",
    "eval_family_array",
    "envelope_bound",
    "lattice_symbol",
    "regime_decay_fit",
    "symbol_bound_scan",
    "PATHS",
]

#: separation between Mixed and High dyadic pairs
THRESHOLD = 100
#: largest |xi| v |eta| accepted by the point evaluator
MAX_FREQ = 2.0**14
_MIN_NODES = 64
_MAX_NODES = 2**21
_FAMILIES = ("m", "m_plus", "m_L", "m_M", "m_H", "m_k")


class QuadratureError(ArithmeticError):
    """Requested tolerance not reached; ``best`` holds the last estimate."""

    def __init__(self, msg: str, best=None, error=None):
        super().__init__(msg)
        self.best = best
        self.error = error


class RegimeTag(enum.Enum):
    LOW = "Low"
    MIXED = "Mixed"
    HIGH = "High"


def classify_regime(k1: int, k2: int) -> RegimeTag:
    """Low if ``k1 v k2 <= 0``; otherwise Mixed if ``|k1 - k2| >= 100``, else High."""
    if max(k1, k2) <= 0:
        return RegimeTag.LOW
    if abs(k1 - k2) >= THRESHOLD:
        return RegimeTag.MIXED
    return RegimeTag.HIGH


def _dyadic_index(v: float) -> int:
    a = abs(v)
    return -(10**6) if a == 0 else int(round(math.log2(a)))


def point_regime(xi: float, eta: float) -> RegimeTag:
    """Regime of the dyadic pair nearest to ``(|xi|, |eta|)``."""
    return classify_regime(_dyadic_index(xi), _dyadic_index(eta))


@dataclass(frozen=True)
class MultiplierSample:
    xi: float
    eta: float
    value: complex
    abs_error_bound: float
    family: str
    k: tuple[int, int] | None = None

    @property
    def regime(self) -> RegimeTag:
        if self.k is not None:
            return classify_regime(*self.k)
        return point_regime(self.xi, self.eta)


# -- quadrature core ---------------------------------------------------------


_PANEL = 32


@lru_cache(maxsize=32)
def _gl(n: int, profile: BumpProfile) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on ``[1/2, 2]`` with ``n / 32`` equal panels."""
    x, w = np.polynomial.legendre.leggauss(_PANEL)
    S = max(1, n // _PANEL)
    h = 1.5 / S
    left = 0.5 + h * np.arange(S)
    t = (left[:, None] + 0.5 * h * (x[None, :] + 1.0)).ravel()
    w = np.tile(0.5 * h * w, S)
    psi = profile.psi(t)
    return t, w * psi / t, w * psi, np.sum(np.abs(w * psi) / t)


def _nodes_for(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    need = np.ceil(8.0 * (1.0 + np.abs(a) + 2.0 * np.abs(b)))
    n = np.maximum(_MIN_NODES, need)
    return (2 ** np.ceil(np.log2(n))).astype(np.int64)


def _quad(a: np.ndarray, b: np.ndarray, n: int, plus: bool, profile: BumpProfile) -> np.ndarray:
    t, w_odd, w_even, _ = _gl(n, profile)
    out = np.empty(a.shape, dtype=complex)
    step = max(1, 2_000_000 // n)
    for s in range(0, a.size, step):
        aa = a[s:s + step, None]
        bb = b[s:s + step, None]
        chirp = np.exp(2j * np.pi * bb * t * t)
        if plus:
            osc = 2.0 * np.cos(2 * np.pi * aa * t)
            out[s:s + step] = (osc * chirp) @ w_even
        else:
            osc = 2j * np.sin(2 * np.pi * aa * t)
            out[s:s + step] = (osc * chirp) @ w_odd
    return out


def eval_m_array(xi, eta, plus: bool = False, tol: float = 1e-10,
                 profile: BumpProfile = DEFAULT_PROFILE, strict: bool = True):
    """Vectorized point evaluation of ``m`` (or ``m_+``).

    Returns
    -------
    values, errors : ndarray
        Values and certified error bounds (difference under node doubling,
        floored at the roundoff level).

    Raises
    ------
    QuadratureError
        If ``strict`` and some point misses ``tol`` within the node budget.
    ValueError
        If ``|xi| v |eta|`` exceeds ``MAX_FREQ`` somewhere.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    a = np.atleast_1d(np.asarray(xi, dtype=float))
    b = np.atleast_1d(np.asarray(eta, dtype=float))
    a, b = np.broadcast_arrays(a, b)
    shape = a.shape
    a, b = a.ravel(), b.ravel()
    big = np.maximum(np.abs(a), np.abs(b)) > MAX_FREQ
    if big.any():
        i = int(np.flatnonzero(big)[0])
        raise ValueError(f"|xi| v |eta| = {max(abs(a[i]), abs(b[i])):g} exceeds 2^14; refusing to evaluate")
    vals = np.zeros(a.size, dtype=complex)
    errs = np.full(a.size, np.inf)
    n_pt = _nodes_for(a, b)
    todo = np.arange(a.size)
    while todo.size:
        nxt = []
        for n in np.unique(n_pt[todo]):
            idx = todo[n_pt[todo] == n]
            v1 = _quad(a[idx], b[idx], int(n), plus, profile)
            v2 = _quad(a[idx], b[idx], int(2 * n), plus, profile)
            # roundoff in the phases 2 pi (a t + b t^2) for t <= 2
            floor = 4 * np.finfo(float).eps * _gl(int(2 * n), profile)[3] * (
                1 + 4 * np.pi * np.abs(a[idx]) + 8 * np.pi * np.abs(b[idx]))
            diff = np.abs(v2 - v1)
            e = np.maximum(diff, floor)
            better = e < errs[idx]
            vals[idx[better]] = v2[better]
            errs[idx[better]] = e[better]
            # refining below the roundoff floor cannot help
            miss = idx[(e > tol) & (diff > floor) & (4 * n <= _MAX_NODES)]
            n_pt[miss] = 2 * n
            nxt.append(miss)
        todo = np.concatenate(nxt) if nxt else np.array([], dtype=int)
    if strict and np.any(errs > tol):
        i = int(np.argmax(errs - tol))
        raise QuadratureError(
            f"tolerance {tol:g} not reached at (xi, eta) = ({a[i]:g}, {b[i]:g}); "
            f"best estimate {vals[i]:.6g} with error {errs[i]:.3g}",
            best=vals.reshape(shape), error=errs.reshape(shape))
    return vals.reshape(shape), errs.reshape(shape)


def eval_m(xi: float, eta: float, tol: float = 1e-10,
           profile: BumpProfile = DEFAULT_PROFILE) -> MultiplierSample:
    """Certified point value of ``m(xi, eta)``."""
    v, e = eval_m_array(xi, eta, False, tol, profile)
    return MultiplierSample(float(xi), float(eta), complex(v[0]), float(e[0]), "m")


def eval_m_plus(xi: float, eta: float, tol: float = 1e-10,
                profile: BumpProfile = DEFAULT_PROFILE) -> MultiplierSample:
    """Certified point value of ``m_+(xi, eta)``."""
    v, e = eval_m_array(xi, eta, True, tol, profile)
    return MultiplierSample(float(xi), float(eta), complex(v[0]), float(e[0]), "m_plus")


# -- a-priori envelope -------------------------------------------------------


@lru_cache(maxsize=8)
def _profile_constants(profile: BumpProfile, plus: bool) -> dict:
    """Norms of the folded amplitude ``g = psi / t`` (or ``psi``) on ``[1/2, 2]``."""
    t = np.linspace(0.5, 2.0, 200_001)
    dt = t[1] - t[0]
    g = profile.psi(t) if plus else profile.psi(t) / t
    dg = np.gradient(g, dt)
    trap = lambda y: float(np.sum(y[1:] + y[:-1]) * dt / 2)  # noqa: E731
    return {
        "int_g": trap(np.abs(g)),
        "int_psi": trap(profile.psi(t)),
        "int_t_g": trap(np.abs(t * g)),
        "dg1": trap(np.abs(dg)),
        "gmax": float(np.max(np.abs(g))),
    }


def envelope_bound(a, b, plus: bool = False, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    """Rigorous a-priori bound on ``|m(a, b)|`` (or ``|m_+|``).

    Minimum of: the trivial bound; the small-``a`` bound from ``|sin x| <= |x|``
    (odd case only); van der Corput with ``phase'' = 4 pi b`` on each half
    line; one integration by parts when the phase has no critical point on
    the support.
    """
    c = _profile_constants(profile, plus)
    a = np.abs(np.asarray(a, dtype=float))
    b = np.abs(np.asarray(b, dtype=float))
    triv = np.full(np.broadcast(a, b).shape, 2.0 * c["int_g"])
    bound = triv
    if not plus:
        bound = np.minimum(bound, 4 * np.pi * a * c["int_t_g"])
    with np.errstate(divide="ignore", invalid="ignore"):
        vdc = np.where(b > 0, 16.0 * (4 * np.pi * b) ** -0.5 * c["dg1"], np.inf)
        # min over |t| in [1/2, 2] of |a + 2 b t|; zero if a critical point lies there
        ends = np.stack([np.abs(a - b), np.abs(a - 4 * b), np.abs(a + b), np.abs(a + 4 * b)])
        crit = (b > 0) & (a / np.where(b > 0, 2 * b, 1.0) >= 0.5) & (a / np.where(b > 0, 2 * b, 1.0) <= 2.0)
        mphi = np.where(crit, 0.0, 2 * np.pi * ends.min(axis=0))
        ibp = np.where(mphi > 0, 2.0 * (c["dg1"] + 2.0 * c["gmax"]) / mphi, np.inf)
    return np.minimum(bound, np.minimum(vdc, ibp))


# -- dyadic families ---------------------------------------------------------


def _cands(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Candidate dyadic indices ``k`` with ``psi_k(v)`` possibly nonzero (3 per entry)."""
    av = np.abs(v)
    with np.errstate(divide="ignore"):
        K = np.where(av > 0, np.floor(np.log2(np.where(av > 0, av, 1.0))), 0.0)
    ks = K[None, ...] + np.array([-1.0, 0.0, 1.0]).reshape((3,) + (1,) * v.ndim)
    live = np.broadcast_to(av > 0, ks.shape)
    return ks, live


def family_weight(family: str, a, b, profile: BumpProfile = DEFAULT_PROFILE,
                  k: tuple[int, int] | None = None) -> np.ndarray:
    """Cutoff weight multiplying ``m(a, b)`` in the rescaled family term.

    ``m_L``: ``phi(a) phi(b)``; ``m_M``: sum over ``k >= 1`` of
    ``psi_k(a) phi_{k-100}(b)`` plus the symmetric term; ``m_H``: sum of
    ``psi_k1(a) psi_k2(b)`` over High pairs; ``m_k``: ``psi_k1(a) psi_k2(b)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    P = profile
    if family == "m_L":
        return P.phi(a) * P.phi(b)
    if family == "m_k":
        if k is None:
            raise ValueError("family m_k needs k = (k1, k2)")
        return P.psi_k(a, k[0]) * P.psi_k(b, k[1])
    ka, la = _cands(a)
    kb, lb = _cands(b)
    if family == "m_M":
        out = np.zeros(a.shape)
        for i in range(3):
            k1 = ka[i]
            use = la[i] & (k1 >= 1)
            out += np.where(use, P.psi(np.ldexp(a, -k1.astype(int))) * P.phi(np.ldexp(b, (100 - k1).astype(int))), 0.0)
            k2 = kb[i]
            use = lb[i] & (k2 >= 1)
            out += np.where(use, P.psi(np.ldexp(b, -k2.astype(int))) * P.phi(np.ldexp(a, (100 - k2).astype(int))), 0.0)
        return out
    if family == "m_H":
        out = np.zeros(a.shape)
        for i in range(3):
            pa = np.where(la[i], P.psi(np.ldexp(a, -ka[i].astype(int))), 0.0)
            for j in range(3):
                high = (np.maximum(ka[i], kb[j]) > 0) & (np.abs(ka[i] - kb[j]) < THRESHOLD)
                pb = np.where(lb[j], P.psi(np.ldexp(b, -kb[j].astype(int))), 0.0)
                out += np.where(high & la[i] & lb[j], pa * pb, 0.0)
        return out
    raise ValueError(f"unknown family {family!r}")


def _live_window(family: str, xi: np.ndarray, eta: np.ndarray) -> tuple[int, int | None]:
    """Range of j outside of which the weight vanishes or only a closed-form tail remains."""
    ax, ay = np.abs(xi), np.abs(eta)
    with np.errstate(divide="ignore"):
        lx, ly = np.log2(ax), np.log2(ay)
    top = np.maximum(lx, 0.5 * ly)
    top = top[np.isfinite(top)]
    if top.size == 0:
        return 0, (None if family == "m_L" else 0)
    hi = int(np.ceil(np.max(top))) + 2
    lo = int(np.floor(np.min(top))) - 2
    if family == "m_L":
        return lo, None
    # High pairs need |k2 - k1| = |log2|eta/xi| - j| < 100 (up to rounding)
    with np.errstate(invalid="ignore"):
        r = ly - lx
    r = r[np.isfinite(r)]
    lo_h = min(lo, int(np.floor(np.min(r))) - 103) if r.size else lo
    if family == "m_M":
        return lo_h - 60, hi
    return lo_h, hi


def eval_family_array(family: str, xi, eta, j_range: Iterable[int] | None = None,
                      tol: float = 1e-10, profile: BumpProfile = DEFAULT_PROFILE,
                      k: tuple[int, int] | None = None):
    """Vectorized family evaluation.

    For ``m_L``, ``m_M`` and ``m_H`` the value is the truncated dyadic sum
    ``sum_{j in j_range} m(2^-j xi, 4^-j eta) w(2^-j xi, 4^-j eta)``. The error
    bound adds quadrature errors of the kept terms and, for every omitted
    ``j`` with nonzero weight, ``|w| * envelope_bound``; the ``j -> +inf``
    tail of ``m_L`` is summed in closed form. Terms beyond ``MAX_FREQ`` are
    never evaluated and count as omitted.
    """
    if family not in _FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {_FAMILIES}")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    xi, eta = np.broadcast_arrays(xi, eta)
    if family in ("m", "m_plus"):
        return eval_m_array(xi, eta, family == "m_plus", tol, profile)
    if family == "m_k":
        w = family_weight("m_k", xi, eta, profile, k)
        v, e = np.zeros(xi.shape, complex), np.zeros(xi.shape)
        nz = w != 0
        if nz.any():
            vv, ee = eval_m_array(xi[nz], eta[nz], False, tol, profile)
            v[nz], e[nz] = vv * w[nz], ee * np.abs(w[nz])
        return v, e
    lo, hi = _live_window(family, xi, eta)
    if j_range is None:
        j_range = range(lo, (hi if hi is not None else lo + 60) + 1)
    js = sorted(set(int(j) for j in j_range))
    if not js:
        raise ValueError("j_range is empty")
    # enumerate kept terms plus every omitted term inside the live window
    hi_enum = max(js[-1], lo) + 1 if hi is None else max(hi, js[-1])
    all_j = np.arange(min(lo, js[0]), hi_enum + 1)
    keep = np.isin(all_j, js)
    A = np.ldexp(xi[None, ...], -all_j.reshape((-1,) + (1,) * xi.ndim))
    B = np.ldexp(eta[None, ...], -2 * all_j.reshape((-1,) + (1,) * xi.ndim))
    W = family_weight(family, A, B, profile)
    inrange = np.maximum(np.abs(A), np.abs(B)) <= MAX_FREQ
    kmask = keep.reshape((-1,) + (1,) * xi.ndim) & (W != 0) & inrange
    omask = ~kmask & (W != 0)
    val = np.zeros(xi.shape, complex)
    err = np.zeros(xi.shape)
    if kmask.any():
        mv, me = eval_m_array(A[kmask], B[kmask], False, tol / 4, profile, strict=False)
        T = np.zeros(A.shape, complex)
        E = np.zeros(A.shape)
        T[kmask] = mv * W[kmask]
        E[kmask] = me * np.abs(W[kmask])
        val = T.sum(axis=0)
        err = E.sum(axis=0)
    if omask.any():
        Eo = np.zeros(A.shape)
        Eo[omask] = np.abs(W[omask]) * envelope_bound(A[omask], B[omask], False, profile)
        err = err + Eo.sum(axis=0)
    if family == "m_L":
        # j > hi_enum: weight <= 1 and |m(a, b)| <= 4 pi |a| int|t g|
        c = _profile_constants(profile, False)["int_t_g"]
        err = err + 4 * np.pi * np.abs(xi) * c * 2.0 ** (-hi_enum)
    elif family == "m_M":
        # j < all_j[0]: the pairs are Mixed and non-stationary there, and the
        # integration-by-parts bound at least halves per step, so twice the
        # bound at all_j[0] - 1 covers the whole tail (weights are <= 1)
        j0 = int(all_j[0]) - 1
        a0 = np.ldexp(np.abs(xi), -j0)
        b0 = np.ldexp(np.abs(eta), -2 * j0)
        err = err + 2.0 * envelope_bound(a0, b0, False, profile)
    return val, err


def eval_m_family(family: str, xi: float, eta: float, j_range: Iterable[int] | None = None,
                  tol: float = 1e-10, profile: BumpProfile = DEFAULT_PROFILE,
                  k: tuple[int, int] | None = None) -> MultiplierSample:
    """Scalar wrapper around :func:`eval_family_array`."""
    v, e = eval_family_array(family, xi, eta, j_range, tol, profile, k)
    return MultiplierSample(float(xi), float(eta), complex(np.ravel(v)[0]),
                            float(np.ravel(e)[0]), family, k)


# -- lattice route -----------------------------------------------------------


def lattice_symbol(xi, eta, period: float, plus: bool = False,
                   profile: BumpProfile = DEFAULT_PROFILE, margin: float = 96.0,
                   chunk: int | None = None) -> np.ndarray:
    """Tabulate ``m`` (or ``m_+``) on ``xi x eta`` with ``xi`` on the lattice ``Z / period``.

    For each ``eta`` the amplitude ``g(t) = psi(t)/t e(eta t^2)`` is sampled on a
    periodic ``t`` grid whose period is a multiple of ``period`` and at least 4,
    and one FFT yields ``m(., eta)`` at every lattice frequency. The sampling
    rate exceeds ``max|xi| + 4 max|eta| + margin`` so aliased copies of ``g``'s
    spectrum are negligible.

    Returns
    -------
    ndarray of shape ``(len(xi), len(eta))``
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    kx = np.rint(xi * period)
    if np.max(np.abs(kx - xi * period), initial=0.0) > 1e-6:
        raise ValueError("xi values are not on the lattice Z / period")
    r = max(1, int(math.ceil(4.0 / period - 1e-12)))
    T = r * period
    rate = np.max(np.abs(xi), initial=0.0) + 4 * np.max(np.abs(eta), initial=0.0) + margin
    N = int(2 ** math.ceil(math.log2(max(16.0, rate * T))))
    dt = T / N
    t = -T / 2 + dt * np.arange(N)
    at = np.abs(t)
    amp = np.zeros(N)
    inside = (at > 0.5) & (at < 2.0)
    amp[inside] = profile.psi(t[inside]) if plus else profile.psi(t[inside]) / t[inside]
    bins = (kx.astype(np.int64) * r) % N
    sign = np.where((kx.astype(np.int64) * r) % 2 == 0, 1.0, -1.0)
    out = np.empty((xi.size, eta.size), dtype=complex)
    if chunk is None:
        chunk = max(1, 4_000_000 // N)
    t2 = t * t
    for s in range(0, eta.size, chunk):
        e = eta[s:s + chunk]
        g = amp[None, :] * np.exp(2j * np.pi * e[:, None] * t2[None, :])
        G = np.fft.ifft(g, axis=1) * (N * dt)
        # m(k/T) = dt sum_n g(t_n) e(k t_n / T) = T (-1)^k ifft(g)[k]
        out[:, s:s + chunk] = (G[:, bins] * sign[None, :]).T
    return out


# -- regime experiments ------------------------------------------------------

PATHS: dict[str, Callable[[float], tuple[float, float]]] = {
    "stationary": lambda lam: (lam, lam),
    "non_stationary": lambda lam: (lam, lam ** 0.25),
    "non_oscillatory": lambda lam: (1.0 / lam, 1.0 / lam),
    "stationary_interior": lambda lam: (2.0 * lam, lam),
}


def regime_decay_fit(regime: str | Callable[[float], tuple[float, float]], lambdas,
                     plus: bool = False, tol: float = 1e-13,
                     profile: BumpProfile = DEFAULT_PROFILE) -> DecayFit:
    """Slope of ``log2 |m|`` against ``log2 lambda`` along a path.

    Parameters
    ----------
    regime : str or callable
        A key of :data:`PATHS` or a map ``lambda -> (xi, eta)``.
    lambdas : array_like
        Dyadic scales, at least six of them.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size < 6:
        raise ValueError("need at least 6 scales")
    l2 = np.log2(lam)
    if np.any(np.abs(l2 - np.rint(l2)) > 1e-12):
        raise ValueError("scales must be powers of two")
    path = PATHS[regime] if isinstance(regime, str) else regime
    pts = np.array([path(x) for x in lam])
    vals, errs = eval_m_array(pts[:, 0], pts[:, 1], plus, tol, profile, strict=False)
    mags = np.abs(vals)
    floor = np.maximum(errs, 1e-14)
    if np.any(mags <= floor):
        i = int(np.argmax(mags <= floor))
        raise ValueError(f"multiplier numerically zero along the path at lambda = {lam[i]:g} "
                         f"(|m| = {mags[i]:.3g}, error bound {errs[i]:.3g})")
    return fit_decay(lam, mags)


_FD = {
    0: (np.array([0]), np.array([1.0])),
    1: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    2: (np.array([-1, 0, 1]), np.array([1.0, -2.0, 1.0])),
    3: (np.array([-2, -1, 1, 2]), np.array([-0.5, 1.0, -1.0, 0.5])),
}


def symbol_bound_scan(family: str, alpha: int, beta: int, xi, eta, fd_step: float,
                      j_range: Iterable[int] | None = None, tol: float = 1e-12,
                      profile: BumpProfile = DEFAULT_PROFILE,
                      k: tuple[int, int] | None = None) -> float:
    """Worst ratio ``|d_xi^alpha d_eta^beta m_F| (|xi| + |eta|^(1/2))^(alpha + 2 beta)``.

    Derivatives are tensor-product central differences with step ``fd_step``
    in both variables, evaluated at the sample points ``(xi, eta)``.
    """
    if alpha < 0 or beta < 0 or alpha + beta > 3:
        raise ValueError("need alpha, beta >= 0 and alpha + beta <= 3")
    xi = np.ravel(np.asarray(xi, dtype=float))
    eta = np.ravel(np.asarray(eta, dtype=float))
    xi, eta = np.broadcast_arrays(xi, eta)
    s = np.abs(xi) + np.sqrt(np.abs(eta))
    if alpha + beta > 0:
        if not fd_step > 0:
            raise ValueError("fd_step must be positive")
        lim = min(0.1 * np.min(s) if alpha else np.inf, 0.1 * np.min(s) ** 2 if beta else np.inf)
        if fd_step > lim:
            raise ValueError(f"fd_step {fd_step:g} too large relative to the phase scale "
                             f"(must be at most {lim:.3g})")
    oa, ca = _FD[alpha]
    ob, cb = _FD[beta]
    X = xi[:, None, None] + fd_step * oa[None, :, None]
    Y = eta[:, None, None] + fd_step * ob[None, None, :]
    X, Y = np.broadcast_arrays(X, Y)
    if j_range is None and family in ("m_L", "m_M", "m_H"):
        lo, hi = _live_window(family, X, Y)
        j_range = range(lo, (hi if hi is not None else lo + 60) + 1)
    v, _ = eval_family_array(family, X, Y, j_range, tol, profile, k)
    d = np.einsum("pab,a,b->p", v, ca, cb) / fd_step ** (alpha + beta)
    return float(np.max(np.abs(d) * s ** (alpha + 2 * beta)))
