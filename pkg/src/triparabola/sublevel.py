"""Sublevel sets of ``alpha(x + t, y) - 2 t beta(x, y + t^2)``.

Three pieces:

* Monte-Carlo measure of the sublevel set in ``K = [0,1]^2 x I``.
* The refinement cascade on a voxelized set ``E`` in ``z = (x, y)``-torus times
  ``I``. Parabola shifts ``s(t) = (-t, t^2)`` are rounded to whole voxels, so
  every fiber count is an exact translate and the Fubini inequalities hold
  exactly at the voxel level.
* The coordinate chain ``t -> u = J t -> v = Lambda_{k,d} u -> w`` (flow box
  coordinates of ``v1 d/dv1 - v2 d/dv2``) together with the polynomial
  factor of the flow derivative and the near/far/boundary cube partition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy.stats import binomtest

from .fitting import DecayFit, fit_decay

__all__ = [
    "PiecewiseTable",
    "SublevelInstance",
    "make_instance",
    "random_instance",
    "sublevel_measure_mc",
    "sublevel_exponent_fit",
    "RefinementCascade",
    "voxel_shifts",
    "voxelize_instance",
    "refine",
    "triple_system_defect",
    "eval_theta",
    "eval_nu",
    "eval_F",
    "eval_V",
    "eval_Vnu",
    "eval_Vnu_closed",
    "J",
    "J_INV",
    "CoordChain",
    "eval_P",
    "eval_P_homogeneous",
    "eval_R",
    "CubePartition",
    "cube_partition",
]

# |alpha| ~ 1 is read as every table cell in [ALPHA_LO, ALPHA_HI]
ALPHA_LO, ALPHA_HI = 0.25, 4.0


# -- instances -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PiecewiseTable:
    """Function constant on the cells of an ``n x n`` grid of ``[0,1)^2``, extended periodically."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 1:
            raise ValueError("table must be a square 2-D array")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __call__(self, x, y) -> np.ndarray:
        n = self.n
        i = np.floor(np.asarray(x, dtype=float) * n).astype(np.int64) % n
        j = np.floor(np.asarray(y, dtype=float) * n).astype(np.int64) % n
        return self.values[i, j]


def _const(c: float) -> PiecewiseTable:
    return PiecewiseTable(np.full((1, 1), float(c)))


@dataclass(frozen=True)
class SublevelInstance:
    """``K = [0,1]^2 x [t_lo, t_lo + 1]`` with coefficient functions and a level ``epsilon``."""

    alpha: Callable
    beta: Callable
    epsilon: float
    t_lo: float = 0.1

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValueError(f"epsilon must lie in [0, 1] (got {self.epsilon})")
        if not self.t_lo > 0:
            raise ValueError("the t-interval must lie in (0, inf)")
        tabs = [f for f in (self.alpha, self.beta) if isinstance(f, PiecewiseTable)]
        if len(tabs) == 2:
            a, b = np.abs(self.alpha.values), np.abs(self.beta.values)

            def sized(v):
                return v.min() >= ALPHA_LO and v.max() <= ALPHA_HI

            if not (sized(a) or sized(b)):
                raise ValueError(f"need |alpha| or |beta| in [{ALPHA_LO}, {ALPHA_HI}] on every cell")
            if a.max() + b.max() > 2 * ALPHA_HI:
                raise ValueError("|alpha| + |beta| exceeds the declared bound")

    @property
    def interval(self) -> tuple[float, float]:
        return self.t_lo, self.t_lo + 1.0

    def mismatch(self, x, y, t) -> np.ndarray:
        return self.alpha(x + t, y) - 2.0 * t * self.beta(x, y + t * t)


def make_instance(alpha, beta, epsilon: float, t_lo: float = 0.1) -> SublevelInstance:
    """Scalars become constant tables; arrays become :class:`PiecewiseTable`."""

    def wrap(f):
        if callable(f):
            return f
        a = np.asarray(f, dtype=float)
        return _const(float(a)) if a.ndim == 0 else PiecewiseTable(a)

    return SublevelInstance(wrap(alpha), wrap(beta), float(epsilon), float(t_lo))


def random_instance(cells: int, epsilon: float, seed: int, t_lo: float = 0.1) -> SublevelInstance:
    """``alpha`` with cells in ``+-[1/2, 1]``, ``beta`` uniform in ``[-1, 1]``."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 1.0, (cells, cells)) * rng.choice([-1.0, 1.0], (cells, cells))
    b = rng.uniform(-1.0, 1.0, (cells, cells))
    return SublevelInstance(PiecewiseTable(a), PiecewiseTable(b), float(epsilon), float(t_lo))


# -- Monte Carlo ------------------------------------------------------------------


def sublevel_measure_mc(inst: SublevelInstance, n_samples: int = 100_000, seed: int = 0,
                        confidence: float = 0.95) -> tuple[float, tuple[float, float]]:
    """Uniform-sampling estimate of ``|{(x, y, t) in K : |mismatch| <= epsilon}|``.

    Returns the estimate and a Wilson score interval (``|K| = 1``).
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 10^4")
    rng = np.random.default_rng(seed)
    x, y = rng.random(n_samples), rng.random(n_samples)
    t = inst.t_lo + rng.random(n_samples)
    hits = int(np.count_nonzero(np.abs(inst.mismatch(x, y, t)) <= inst.epsilon))
    ci = binomtest(hits, n_samples).proportion_ci(confidence_level=confidence, method="wilson")
    return hits / n_samples, (float(ci.low), float(ci.high))


def sublevel_exponent_fit(cells: int = 16, epsilons=None, n_samples: int = 100_000,
                          seed: int = 0) -> DecayFit:
    """Fit ``log2 |E_eps|`` against ``log2 eps`` for one random piecewise instance.

    A positive slope is the empirical sublevel exponent.
    """
    eps = [2.0**-j for j in range(2, 8)] if epsilons is None else list(epsilons)
    vals = []
    for i, e in enumerate(eps):
        inst = random_instance(cells, e, seed)
        est, _ = sublevel_measure_mc(inst, n_samples, seed + 1000 + i)
        if est == 0:
            raise ValueError(f"no sample hit the sublevel set at epsilon = {e:g}; raise n_samples")
        vals.append(est)
    return fit_decay(eps, vals, trials=1, seed=seed)


# -- refinement cascade -----------------------------------------------------------------


def voxel_shifts(r: int, t_lo: float) -> tuple[np.ndarray, np.ndarray]:
    """Voxel centres ``t_l`` of ``I`` and the rounded parabola shifts ``s(t_l) = (-t, t^2)``."""
    t = t_lo + (np.arange(r) + 0.5) / r
    s = np.stack([np.rint(-r * t), np.rint(r * t * t)], axis=1).astype(np.int64)
    return t, s


def voxelize_instance(inst: SublevelInstance, r: int) -> np.ndarray:
    """Boolean ``E[i, j, l]``: ``|alpha(z) - 2 t_l beta(z + s(t_l))| <= epsilon`` at voxel centres.

    This is the form after ``(x, y, t) -> (x - t, y, t)``; ``z + s(t)`` uses
    the rounded voxel shift so the cascade sees exactly the same points.
    """
    t, s = voxel_shifts(r, inst.t_lo)
    c = (np.arange(r) + 0.5) / r
    X, Y = np.meshgrid(c, c, indexing="ij")
    a = inst.alpha(X, Y)
    E = np.empty((r, r, r), dtype=bool)
    for l in range(r):
        bx = (np.arange(r)[:, None] + s[l, 0]) % r
        by = (np.arange(r)[None, :] + s[l, 1]) % r
        b = inst.beta(c[bx] * np.ones((1, r)), c[by] * np.ones((r, 1)))
        E[:, :, l] = np.abs(a - 2.0 * t[l] * b) <= inst.epsilon
    return E


@dataclass
class RefinementCascade:
    """Derived sets of the method of refinements (voxel measures normalized by ``|K| = 1``).

    ``A[l1, l2, l3]`` is true when ``t_{l1} in U``, ``t_{l2} in U_{t1}`` and
    ``t_{l3} in U_{t1, t2}``. For those triples, with ``z' = zbar + s(t1) - s(t2)``,
    the points ``(zbar, t1)``, ``(z', t2)`` and ``(z', t3)`` lie in ``E``.
    """

    r: int
    t_lo: float
    E: np.ndarray
    E0p: np.ndarray
    E1: np.ndarray
    E1p: np.ndarray
    E2: np.ndarray
    E2p: np.ndarray
    zbar: tuple[int, int]
    U: np.ndarray
    A: np.ndarray
    shifts: np.ndarray = field(repr=False)

    def measure(self, name: str) -> float:
        a = getattr(self, name)
        return float(np.count_nonzero(a)) / self.r ** a.ndim

    def measures(self) -> dict[str, float]:
        return {n: self.measure(n) for n in ("E", "E0p", "E1", "E1p", "E2", "E2p", "U", "A")}

    def U_t1(self, l1: int) -> np.ndarray:
        return self.A[l1].any(axis=1) if self.U[l1] else np.zeros(self.r, dtype=bool)

    def zprime(self, l1: int, l2: int) -> tuple[int, int]:
        s = self.shifts
        return ((self.zbar[0] + s[l1, 0] - s[l2, 0]) % self.r,
                (self.zbar[1] + s[l1, 1] - s[l2, 1]) % self.r)

    def bound_check(self) -> dict[str, bool]:
        """The cascade inequalities, in exact voxel arithmetic."""
        e = self.measure("E")
        m = self.measures()
        return {
            "E0p >= |E|/2": m["E0p"] >= e / 2,
            "E1 >= |E|^2/4": m["E1"] >= e**2 / 4,
            "E2 >= 2^-6 |E|^4": m["E2"] >= 2.0**-6 * e**4,
            "E2p >= 2^-7 |E|^4": m["E2p"] >= 2.0**-7 * e**4,
            "A >= 2^-11 |E|^7": m["A"] >= 2.0**-11 * e**7,
        }


def _roll(a: np.ndarray, s) -> np.ndarray:
    """``out[z] = a[z - s]`` on the torus."""
    return np.roll(a, (int(s[0]), int(s[1])), axis=(0, 1))


def refine(E: np.ndarray, t_lo: float = 0.1) -> RefinementCascade:
    """Run the cascade on a voxel set ``E[i, j, l]`` of shape ``(r, r, r)``.

    ``E0p``: z with vertical fiber ``>= |E|/2``. ``E1 = E`` over ``E0p``.
    ``E1p``: Q with ``|{t : (Q - s(t), t) in E1}| >= |E1|/2``.
    ``E2``: points of ``E1`` with ``z + s(t) in E1p``. ``E2p``: z with
    vertical ``E2`` fiber ``>= |E2|/2``. ``zbar`` is the lexicographically
    first voxel of ``E2p``.
    """
    E = np.asarray(E, dtype=bool)
    if E.ndim != 3 or len(set(E.shape)) != 1:
        raise ValueError("E must be a cube array of shape (r, r, r)")
    r = E.shape[0]
    nE = int(np.count_nonzero(E))
    if nE == 0:
        raise ValueError("E is empty")
    _, s = voxel_shifts(r, t_lo)
    # a fiber of count c has measure c / r; |E| = nE / r^3; compare 2 c r^2 >= nE
    E0p = 2 * E.sum(axis=2) * r * r >= nE
    E1 = E & E0p[:, :, None]
    n1 = int(np.count_nonzero(E1))
    cnt = np.zeros((r, r), dtype=np.int64)
    for l in range(r):
        cnt += _roll(E1[:, :, l], s[l])
    E1p = 2 * cnt * r * r >= n1
    E2 = np.empty_like(E1)
    for l in range(r):
        E2[:, :, l] = E1[:, :, l] & _roll(E1p, -s[l])
    n2 = int(np.count_nonzero(E2))
    E2p = 2 * E2.sum(axis=2) * r * r >= n2
    idx = np.argwhere(E2p)
    if idx.size == 0:
        raise AssertionError("E2' is empty although |E| > 0")
    zb = (int(idx[0, 0]), int(idx[0, 1]))
    U = E2[zb[0], zb[1], :].copy()
    # z' = zbar + s(t1) - s(t2) for every (l1, l2)
    zx = (zb[0] + s[:, 0][:, None] - s[:, 0][None, :]) % r
    zy = (zb[1] + s[:, 1][:, None] - s[:, 1][None, :]) % r
    l2 = np.arange(r)[None, :]
    ok12 = U[:, None] & E1[zx, zy, l2]                   # t2 in U_{t1}
    A = ok12[:, :, None] & E[zx, zy, :]                  # t3 in U_{t1, t2}
    return RefinementCascade(r, float(t_lo), E, E0p, E1, E1p, E2, E2p, zb, U, A, s)


def triple_system_defect(cascade: RefinementCascade, inst: SublevelInstance,
                         max_points: int | None = None, seed: int = 0) -> float:
    """Largest ``max(|row| - epsilon)`` of the three inequalities over points of ``A``.

    Uses the same voxel-centre arithmetic as :func:`voxelize_instance`; a
    value ``<= 0`` means every checked triple satisfies the system.
    """
    r = cascade.r
    pts = np.argwhere(cascade.A)
    if pts.size == 0:
        return -np.inf
    if max_points is not None and len(pts) > max_points:
        pts = pts[np.random.default_rng(seed).choice(len(pts), max_points, replace=False)]
    t, s = voxel_shifts(r, cascade.t_lo)
    c = (np.arange(r) + 0.5) / r
    zb = np.array(cascade.zbar)

    def row(z, l):
        a = inst.alpha(c[z[:, 0] % r], c[z[:, 1] % r])
        w = z + s[l]
        b = inst.beta(c[w[:, 0] % r], c[w[:, 1] % r])
        return np.abs(a - 2.0 * t[l] * b)

    l1, l2, l3 = pts[:, 0], pts[:, 1], pts[:, 2]
    z0 = np.broadcast_to(zb, (len(pts), 2))
    zp = zb + s[l1] - s[l2]
    worst = np.maximum.reduce([row(z0, l1), row(zp, l2), row(zp, l3)])
    return float(np.max(worst) - inst.epsilon)


# -- the function F and the vector field V -------------------------------------------------


def _t3(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if t.shape[-1] != 3:
        raise ValueError("t must have a trailing dimension of 3")
    return t


def eval_theta(t) -> tuple[np.ndarray, np.ndarray]:
    """``theta1 = -t1 + t2 - t3`` and ``theta2 = t1^2 - t2^2 + t3^2``."""
    t = _t3(t)
    t1, t2, t3 = t[..., 0], t[..., 1], t[..., 2]
    return -t1 + t2 - t3, t1 * t1 - t2 * t2 + t3 * t3


def eval_nu(t) -> np.ndarray:
    """``nu = t3^-1 t2 t1^-1``."""
    t = _t3(t)
    if np.any(t[..., 0] == 0) or np.any(t[..., 2] == 0):
        raise ZeroDivisionError("nu needs t1 and t3 nonzero")
    return t[..., 1] / (t[..., 0] * t[..., 2])


def eval_F(t, alpha0: float, beta: Callable, zbar=(0.0, 0.0)) -> np.ndarray:
    """``F = alpha0 nu(t) - 2 beta(zbar + (theta1, theta2))``."""
    t = _t3(t)
    if np.any(t == 0):
        raise ZeroDivisionError("F needs every t_j nonzero")
    th1, th2 = eval_theta(t)
    return alpha0 * eval_nu(t) - 2.0 * beta(zbar[0] + th1, zbar[1] + th2)


def eval_V(t) -> np.ndarray:
    """``grad theta1 x grad theta2 = (2 t3 - 2 t2, 2 t3 - 2 t1, 2 t2 - 2 t1)``."""
    t = _t3(t)
    g1 = np.broadcast_to(np.array([-1.0, 1.0, -1.0]), t.shape)
    g2 = np.stack([2 * t[..., 0], -2 * t[..., 1], 2 * t[..., 2]], axis=-1)
    return np.cross(g1, g2)


def eval_Vnu(t) -> np.ndarray:
    """``V . grad nu`` from the explicit gradient."""
    t = _t3(t)
    t1, t2, t3 = t[..., 0], t[..., 1], t[..., 2]
    grad = np.stack([-t2 / (t1 * t1 * t3), 1.0 / (t1 * t3), -t2 / (t1 * t3 * t3)], axis=-1)
    return np.sum(eval_V(t) * grad, axis=-1)


def eval_Vnu_closed(t) -> np.ndarray:
    """``2 t1^-2 t3^-2 ((t2 - t3) t3 t2 + (t3 - t1) t3 t1 + (t1 - t2) t2 t1)``."""
    t = _t3(t)
    t1, t2, t3 = t[..., 0], t[..., 1], t[..., 2]
    return 2.0 / (t1 * t1 * t3 * t3) * ((t2 - t3) * t3 * t2 + (t3 - t1) * t3 * t1 + (t1 - t2) * t2 * t1)


# -- coordinate chain -----------------------------------------------------------------------

J = np.array([[-1, 1, 0], [0, 1, -1], [1, -1, 1]], dtype=np.int64)
J_INV = np.array([[0, 1, 1], [1, 1, 1], [1, 0, 1]], dtype=np.int64)


def eval_P(v, d: float) -> np.ndarray:
    """The stated cubic ``v1 (v2 + v3 + d)^2 - v2 (v1 + v3 + d)^2``."""
    v = _t3(v)
    v1, v2, v3 = v[..., 0], v[..., 1], v[..., 2]
    return v1 * (v2 + v3 + d) ** 2 - v2 * (v1 + v3 + d) ** 2


def eval_P_homogeneous(v) -> np.ndarray:
    """``v1 v2 (v1 - v2)``: the cubic that actually multiplies ``R`` in the flow derivative.

    Direct differentiation gives
    ``(v1 d1 - v2 d2)(nu o J^-1 o Lambda^-1) = 2^(-3k) R v1 v2 (v1 - v2)``.
    """
    v = _t3(v)
    return v[..., 0] * v[..., 1] * (v[..., 0] - v[..., 1])


def eval_R(v, k: int, d: float) -> np.ndarray:
    """``(2^-k (v2 + v3 + d))^-2 (2^-k (v1 + v3 + d))^-2``."""
    v = _t3(v)
    a = 2.0**-k * (v[..., 1] + v[..., 2] + d)
    b = 2.0**-k * (v[..., 0] + v[..., 2] + d)
    if np.any(a == 0) or np.any(b == 0):
        raise ZeroDivisionError("R is singular where v2 + v3 + d or v1 + v3 + d vanishes")
    return 1.0 / (a * a * b * b)


@dataclass(frozen=True)
class CoordChain:
    """``t -> u = J t -> v = 2^k (u1, u2, u3 - 2^-k d) -> w`` with branch ``(l, sign)``.

    The flow box map ``phi_{1,+-}(w) = (+-e^{2 w1}, w2 e^{-2 w1}, w3)`` and
    ``phi_{2,+-}(w) = (w2 e^{2 w1}, +-e^{-2 w1}, w3)`` straightens
    ``2 (v1 d/dv1 - v2 d/dv2)`` to ``d/dw1``; its Jacobian determinant is
    ``+-2``.
    """

    k: int = 0
    d: float = 1.0
    l: Literal[1, 2] = 1
    sign: Literal[1, -1] = 1
    t_lo: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        if self.l not in (1, 2) or self.sign not in (1, -1):
            raise ValueError("branch must be l in {1, 2} and sign in {+1, -1}")
        if abs(self.d) > 4 * 2**self.k + 4:
            raise ValueError("|d| must be O(2^k)")
        if not self.t_lo > 0:
            raise ValueError("I must lie in (0, inf)")

    # t <-> u <-> v
    def to_u(self, t) -> np.ndarray:
        return _t3(t) @ J.T.astype(float)

    def from_u(self, u) -> np.ndarray:
        return _t3(u) @ J_INV.T.astype(float)

    def to_v(self, u) -> np.ndarray:
        u = _t3(u)
        s = 2.0**self.k
        return np.stack([s * u[..., 0], s * u[..., 1], s * u[..., 2] - self.d], axis=-1)

    def from_v(self, v) -> np.ndarray:
        v = _t3(v)
        s = 2.0**-self.k
        return np.stack([s * v[..., 0], s * v[..., 1], s * (v[..., 2] + self.d)], axis=-1)

    def t_of_v(self, v) -> np.ndarray:
        """Closed form of ``J^-1 Lambda^-1 v``."""
        v = _t3(v)
        s, d = 2.0**-self.k, self.d
        v1, v2, v3 = v[..., 0], v[..., 1], v[..., 2]
        return np.stack([s * (v2 + v3 + d), s * (v1 + v2 + v3 + d), s * (v1 + v3 + d)], axis=-1)

    # v <-> w
    def flow_param(self, w) -> np.ndarray:
        w = _t3(w)
        e = np.exp(2.0 * w[..., 0])
        if self.l == 1:
            return np.stack([self.sign * e, w[..., 1] / e, w[..., 2]], axis=-1)
        return np.stack([w[..., 1] * e, self.sign / e, w[..., 2]], axis=-1)

    def flow_inverse(self, v) -> np.ndarray:
        v = _t3(v)
        lead = self.sign * v[..., self.l - 1]
        if np.any(lead <= 0):
            raise ValueError("v is not on the chosen branch (sign of v_l)")
        if self.l == 1:
            w1 = 0.5 * np.log(lead)
            return np.stack([w1, v[..., 1] * lead, v[..., 2]], axis=-1)
        w1 = -0.5 * np.log(lead)
        return np.stack([w1, v[..., 0] * lead, v[..., 2]], axis=-1)

    def flow_jacobian_det(self, w) -> np.ndarray:
        w = _t3(w)
        return np.full(w.shape[:-1], 2.0 * self.sign)

    def t_of_w(self, w) -> np.ndarray:
        return self.t_of_v(self.flow_param(w))

    # G and its w1-derivative
    def eval_G(self, w, alpha0: float, beta: Callable, zbar=(0.0, 0.0)) -> np.ndarray:
        """``G = F o J^-1 o Lambda^-1 o phi``."""
        return eval_F(self.t_of_w(w), alpha0, beta, zbar)

    def dG_dw1_stated(self, w, alpha0: float) -> np.ndarray:
        """``alpha0 2^-2k R P`` with the stated ``P``."""
        v = self.flow_param(w)
        return alpha0 * 2.0 ** (-2 * self.k) * eval_R(v, self.k, self.d) * eval_P(v, self.d)

    def dG_dw1(self, w, alpha0: float) -> np.ndarray:
        """Exact derivative ``2 alpha0 2^-3k R v1 v2 (v1 - v2)`` (same form on every branch)."""
        v = self.flow_param(w)
        return 2.0 * alpha0 * 2.0 ** (-3 * self.k) * eval_R(v, self.k, self.d) * eval_P_homogeneous(v)

    def in_box(self, v) -> np.ndarray:
        """``v`` in ``Box_{l, sign}``: ``1/2 <= sign v_l <= 1``, ``|v_other| <= |v_l|``, ``|v3| <= 1``."""
        v = _t3(v)
        lead = self.sign * v[..., self.l - 1]
        other = np.abs(v[..., 2 - self.l])
        return (lead >= 0.5) & (lead <= 1.0) & (other <= lead) & (np.abs(v[..., 2]) <= 1.0)

    def in_K(self, w) -> np.ndarray:
        """``w`` in ``phi^-1(Lambda Omega_{k,d} cap Box)``: box condition and ``t in I^3``."""
        v = self.flow_param(w)
        t = self.t_of_v(v)
        lo, hi = self.t_lo, self.t_lo + 1.0
        return self.in_box(v) & np.all((t >= lo) & (t <= hi), axis=-1)

    def w_box(self) -> np.ndarray:
        """Axis-aligned box containing ``phi^-1(Box)``: rows ``(lo, hi)`` for ``w1, w2, w3``."""
        a = 0.5 * math.log(0.5)
        w1 = (a, 0.0) if self.l == 1 else (0.0, -a)
        return np.array([w1, (-1.0, 1.0), (-1.0, 1.0)])


# -- cube partition -------------------------------------------------------------------------


@dataclass
class CubePartition:
    """Side-``rho`` cubes covering ``K_{k,d}`` in ``w`` coordinates, split three ways."""

    rho: float
    epsilon: float
    origins: np.ndarray           # (n, 3) lower corners
    labels: np.ndarray            # 0 near, 1 far, 2 boundary
    near_volume: float
    far_sublevel: float
    bdry_volume: float
    far_ratio_max: float          # max over far cubes of measured length / (2 eps / min |dG/dw1|)
    far_C: float                  # max of measured length / (2^3k eps rho^-b) with b from min |P|

    @property
    def counts(self) -> dict[str, int]:
        return {n: int(np.count_nonzero(self.labels == i)) for i, n in enumerate(("near", "far", "bdry"))}


def _chunked(fn, pts: np.ndarray, chunk: int = 1 << 15) -> np.ndarray:
    return np.concatenate([fn(pts[i:i + chunk]) for i in range(0, len(pts), chunk)]) if len(pts) else np.zeros(0, bool)


def cube_partition(chain: CoordChain, epsilon: float, rho: float | None = None,
                   sampling_step: float | None = None, alpha0: float = 1.0,
                   beta: Callable | None = None, zbar=(0.0, 0.0), scan_points: int = 256,
                   polynomial: Literal["derived", "stated"] = "derived") -> CubePartition:
    """Classify side-``rho`` cubes as near, far or boundary.

    A cube meeting ``K`` is *boundary* when its sample points (corners and
    centres, a 3-point lattice per axis) are partly outside ``K``. Inside
    cubes are *near* when some cube within sup-norm distance ``rho`` contains
    a sign change of ``P o phi`` on a lattice of step ``sampling_step``
    (default ``rho / 4``), otherwise *far*. On each far cube the set
    ``{|G| <= epsilon}`` is measured along the centre ``w1``-line by a dense
    scan and compared with the monotone bound ``2 epsilon / min |dG/dw1|``.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    rho = epsilon**0.25 if rho is None else float(rho)
    if not epsilon < rho < 1:
        raise ValueError("need epsilon < rho < 1")
    step = rho / 4 if sampling_step is None else float(sampling_step)
    if step > rho / 2:
        raise ValueError(f"rho = {rho:g} is below the sampling resolution (step {step:g})")
    beta = beta or (lambda x, y: np.zeros_like(np.asarray(x, dtype=float)))
    poly = (lambda v: eval_P_homogeneous(v)) if polynomial == "derived" else (lambda v: eval_P(v, chain.d))
    box = chain.w_box()
    n = np.ceil((box[:, 1] - box[:, 0]) / rho).astype(int)
    lo = box[:, 0]
    idx = np.stack(np.meshgrid(*[np.arange(m) for m in n], indexing="ij"), axis=-1).reshape(-1, 3)
    q = np.array([0.0, 0.5, 1.0])
    sub = np.stack(np.meshgrid(q, q, q, indexing="ij"), axis=-1).reshape(-1, 3) * rho

    def member(ix):
        inside = chain.in_K(lo + ix[:, None, :] * rho + sub[None])
        return np.stack([inside.any(axis=1), inside.all(axis=1)], axis=1)

    flags = _chunked(member, idx, 4096)
    keep = flags[:, 0]
    idx, allin = idx[keep], flags[keep, 1]
    # sign changes of P o phi inside every cube of the kept set and its neighbours
    nb = np.stack(np.meshgrid(*([np.arange(-1, 2)] * 3), indexing="ij"), axis=-1).reshape(-1, 3)
    cand = np.unique((idx[:, None, :] + nb[None]).reshape(-1, 3), axis=0)
    m = int(round(rho / step))
    f = np.arange(m + 1) / m * rho
    fine = np.stack(np.meshgrid(f, f, f, indexing="ij"), axis=-1).reshape(-1, 3)

    def has_zero(ix):
        with np.errstate(all="ignore"):
            sg = np.sign(poly(chain.flow_param(lo + ix[:, None, :] * rho + fine[None])))
        return (sg.min(axis=1) != sg.max(axis=1)) | np.any(sg == 0, axis=1)

    zc = cand[_chunked(has_zero, cand, max(1, (1 << 18) // len(fine)))]
    zset = {tuple(z) for z in zc}
    near = np.array([any((a + o[0], b + o[1], c + o[2]) in zset for o in nb) for a, b, c in idx], dtype=bool)
    labels = np.full(len(idx), 2, dtype=np.int8)
    labels[allin & near] = 0
    labels[allin & ~near] = 1
    O = lo + idx * rho
    # far cubes: dense 1-D scans
    ratio_max, C_max, far_meas = 0.0, 0.0, 0.0
    s1 = (np.arange(scan_points) + 0.5) / scan_points * rho
    for i in np.flatnonzero(labels == 1):
        o = O[i]
        w = np.stack([o[0] + s1, np.full(scan_points, o[1] + rho / 2),
                      np.full(scan_points, o[2] + rho / 2)], axis=1)
        G = chain.eval_G(w, alpha0, beta, zbar)
        length = np.count_nonzero(np.abs(G) <= epsilon) * (rho / scan_points)
        mu = float(np.min(np.abs(chain.dG_dw1(w, alpha0))))
        ratio_max = max(ratio_max, length / (2 * epsilon / mu + rho / scan_points))
        pmin = float(np.min(np.abs(poly(chain.flow_param(w)))))
        b_est = max(math.log(max(pmin, 1e-300)) / math.log(rho), 0.0)
        C_max = max(C_max, length / (2.0 ** (3 * chain.k) * epsilon * rho ** (-b_est)))
        far_meas += length * rho * rho
    vol = rho**3
    return CubePartition(rho, float(epsilon), O, labels,
                         float(np.count_nonzero(labels == 0) * vol), float(far_meas),
                         float(np.count_nonzero(labels == 2) * vol), float(ratio_max), float(C_max))
