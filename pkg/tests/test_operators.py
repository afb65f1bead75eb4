from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from triparabola.grid import Field2D, FreqSupportSpec, lp_norm, make_grid, mode, random_band_limited
from triparabola.littlewood_paley import DEFAULT_PROFILE as P
from triparabola.littlewood_paley import FreqWindow, project
from triparabola.multiplier import eval_family_array, eval_m_array
from triparabola.operators import (
    CutoffZeta,
    KernelPiece,
    ShiftPlan,
    apply_family,
    apply_Hj,
    apply_HP,
    apply_kernel_piece,
    apply_paraproduct,
    apply_Tj,
    apply_Tk_piece,
    apply_Tloc,
    bilinear_maximal,
    bilinear_piece,
    family_on_grid,
    hl_maximal,
    make_shift_plan,
    modulate,
    pointwise_domination_ratio,
    shifted_maximal,
    square_function,
    trilinear_lambda,
)

G = make_grid(32, 32, 4.0, 4.0)
BALL = FreqSupportSpec("both", "ball", 1.5)
# frozen regression guard for the pointwise domination ratio (observed max 0.96)
C_DOM = 4.0


def rand(seed, g=G, spec=BALL):
    return random_band_limited(g, spec, seed)


def close(a, b, tol):
    return np.max(np.abs(np.asarray(a) - np.asarray(b))) <= tol


def along_x(f: Field2D, xs, y):
    """``f(xs, y)`` from the trigonometric polynomial, collapsing ``eta`` first."""
    a = f.spectral @ np.exp(2j * np.pi * f.grid.eta * y)
    return np.exp(2j * np.pi * np.multiply.outer(xs, f.grid.xi)) @ a


def along_y(f: Field2D, x, ys):
    a = np.exp(2j * np.pi * f.grid.xi * x) @ f.spectral
    return np.exp(2j * np.pi * np.multiply.outer(ys, f.grid.eta)) @ a


# -- H_j ---------------------------------------------------------------------


def test_Hj_zero_and_single_mode():
    z = Field2D(G, np.zeros(G.shape, complex))
    assert np.all(apply_Hj(z, 1).samples == 0)
    xi, eta = 2.25, -1.5
    for j in (-1, 0, 1):
        out = apply_Hj(mode(G, xi, eta), j)
        m, e = eval_m_array(xi / 2.0**j, eta / 4.0**j, tol=1e-12)
        assert close(out.samples, m[0] * mode(G, xi, eta).samples, 1e-10)


def test_Hj_dilation_identity():
    g2 = make_grid(32, 32, 4.0 * 2, 4.0 * 4)
    f = rand(3)
    lhs = apply_Hj(f, 1)
    rhs = apply_Hj(Field2D(g2, f.samples), 0)
    assert close(lhs.samples, rhs.samples, 1e-6)


def test_HP_sums_pieces_and_translation_covariance():
    f = rand(4)
    tot = sum((apply_Hj(f, j).samples for j in range(-2, 3)), np.zeros(G.shape, complex))
    assert close(apply_HP(f, range(-2, 3)).samples, tot, 1e-12)
    sh = Field2D(G, np.roll(f.samples, (3, -5), axis=(0, 1)))
    assert close(apply_Hj(sh, 0).samples, np.roll(apply_Hj(f, 0).samples, (3, -5), axis=(0, 1)), 1e-12)


def test_kernel_piece_support():
    g = make_grid(128, 128, 8.0, 8.0)
    f = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 5)
    out = apply_kernel_piece(f, KernelPiece(0, 1))
    XI, ETA = g.freq_mesh()
    outside = ~((np.abs(XI) >= 0.5) & (np.abs(XI) <= 2) & (np.abs(ETA) >= 1) & (np.abs(ETA) <= 4))
    assert np.max(np.abs(out.spectral[outside])) < 1e-14


def test_L2_bound_by_symbol_sup():
    g = 2.0 ** np.linspace(-6, 6, 49)
    # m_M lives near the axes, so the scan must include zero coordinates
    pts = np.concatenate([-g, [0.0], g])
    X, Y = np.meshgrid(pts, pts, indexing="ij")
    for fam in ("m_L", "m_M"):
        v, _ = eval_family_array(fam, X, Y, range(-3, 4))
        S = np.max(np.abs(v))
        for s in range(5):
            f = rand(10 + s)
            assert lp_norm(apply_family(f, fam, range(-3, 4)), 2) <= 1.01 * S * lp_norm(f, 2)
        assert np.max(np.abs(family_on_grid(fam, G, range(-3, 4)))) <= 1.01 * S


# -- T_j ---------------------------------------------------------------------


def test_Tj_trivial_cases():
    f = rand(1)
    z = Field2D(G, np.zeros(G.shape, complex))
    assert np.all(apply_Tj(z, f, 0).samples == 0)
    one = Field2D(G, np.full(G.shape, 2.0 + 1j))
    assert close(apply_Tj(one, one, 0).samples, 0, 1e-12)


@pytest.mark.parametrize("j", [0, 1])
def test_Tj_brute_force_oracle(j):
    spec = FreqSupportSpec("both", "annulus", 1.0)
    f1, f2 = rand(21, spec=spec), rand(22, spec=spec)
    out, stats = apply_Tj(f1, f2, j, tol=1e-12, return_stats=True)
    assert stats["error"] <= 1e-12 * np.abs(f1.samples).max() * np.abs(f2.samples).max()
    rng = np.random.default_rng(j)
    t = np.linspace(-2.0, 2.0, 100_001)
    w = np.where(t != 0, P.psi(t) / np.where(t == 0, 1.0, t), 0.0) * (t[1] - t[0])
    X, Y = G.mesh()
    for p, q in rng.integers(0, 32, (16, 2)):
        x, y = X[p, q], Y[p, q]
        g = along_x(f1, x + 2.0**-j * t, y) * along_y(f2, x, y + 4.0**-j * t * t)
        assert abs(np.sum(w * g) - out.samples[p, q]) < 1e-6


@given(a=st.complex_numbers(max_magnitude=3), b=st.complex_numbers(max_magnitude=3))
@settings(max_examples=10, deadline=None)
def test_Tj_bilinear(a, b):
    f, g, h = rand(31), rand(32), rand(33)
    lhs = apply_Tj(f * a + g * b, h, 0).samples
    rhs = a * apply_Tj(f, h, 0).samples + b * apply_Tj(g, h, 0).samples
    assert close(lhs, rhs, 1e-9 * (1 + abs(a) + abs(b)))
    lhs = apply_Tj(h, f * a + g * b, 0).samples
    rhs = a * apply_Tj(h, f, 0).samples + b * apply_Tj(h, g, 0).samples
    assert close(lhs, rhs, 1e-9 * (1 + abs(a) + abs(b)))


def test_Tj_translation_and_modulation_symmetry():
    f1, f2 = rand(41), rand(42)
    T = apply_Tj(f1, f2, 0).samples
    sh = lambda f: Field2D(G, np.roll(f.samples, (2, 7), axis=(0, 1)))
    assert close(apply_Tj(sh(f1), sh(f2), 0).samples, np.roll(T, (2, 7), axis=(0, 1)), 1e-9)
    xi0, eta0 = 0.5, -0.75
    lhs = apply_Tj(modulate(f1, 0, eta0), modulate(f2, xi0, 0), 0)
    assert close(lhs.samples, modulate(Field2D(G, T), xi0, eta0).samples, 1e-9)


def test_Tk_piece_is_sum_of_projected_Tj():
    g = make_grid(128, 128, 8.0, 8.0)
    f1 = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 50)
    f2 = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 51)
    out = apply_Tk_piece(f1, f2, 1, 0, range(-1, 2))
    ref = sum(apply_Tj(project(f1, FreqWindow(1, j + 1)), project(f2, FreqWindow(2, 2 * j)), j).samples
              for j in range(-1, 2))
    assert close(out.samples, ref, 1e-12)


def test_modulate_rejects_incommensurate():
    with pytest.raises(ValueError, match="multiple of 1/L"):
        modulate(rand(0), 0.1, 0)


# -- T_loc and Lambda ---------------------------------------------------------


def test_lambda_duality_and_zero():
    zeta = CutoffZeta(radius=1.5)
    f1, f2, f3 = rand(61), rand(62), rand(63)
    lam = trilinear_lambda(f1, f2, f3, zeta)
    T = apply_Tloc(f1, f2, zeta, tol=1e-12)
    ref = np.sum(T.samples * f3.samples) * G.cell_area
    assert abs(lam - ref) <= 1e-8 * max(abs(ref), 1.0)
    z = Field2D(G, np.zeros(G.shape, complex))
    assert trilinear_lambda(f1, f2, z, zeta) == 0


def test_lambda_modulation_identity():
    zeta = CutoffZeta(radius=2.0)
    f1, f2, f3 = rand(71), rand(72), rand(73)
    a, b = 1.25, -0.5
    lam = trilinear_lambda(f1, f2, f3, zeta)
    mod = trilinear_lambda(modulate(f1, 0, a), modulate(f2, b, 0), modulate(f3, -b, -a), zeta)
    assert abs(lam - mod) <= 1e-8 * max(abs(lam), 1.0)


def test_zeta_support_guard_and_profile():
    with pytest.raises(ValueError, match="leaks"):
        apply_Tloc(rand(0), rand(1), CutoffZeta(radius=3.0))
    z = CutoffZeta(radius=1.0)
    assert z(0.0, 0.0, 0.3) == 0 and z(0.0, 0.0, 2.5) == 0
    assert z(1.0, 0.0, 1.0) == 0 and z(0.0, 0.0, 1.0) == 1


# -- paraproduct ---------------------------------------------------------------


def test_paraproduct_identity_symbol():
    f1, f2 = rand(81), rand(82)
    out = apply_paraproduct(f1, f2, lambda X, Y: np.ones_like(X))
    assert close(out.samples, f1.samples * f2.samples, 1e-12)


def test_paraproduct_xi_only_symbol():
    xi1, eta1, xi2, eta2 = 1.0, 0.5, -0.25, 1.25
    f1, f2 = mode(G, xi1, eta1), mode(G, xi2, eta2)
    out = apply_paraproduct(f1, f2, lambda X, Y: np.cos(X) + 0 * Y)
    assert close(out.samples, np.cos(xi1) * f1.samples * f2.samples, 1e-12)


def test_paraproduct_double_sum_oracle():
    g = make_grid(16, 16, 4.0, 4.0)
    spec = FreqSupportSpec("both", "ball", 0.75)
    f1, f2 = random_band_limited(g, spec, 1), random_band_limited(g, spec, 2)
    sym = family_on_grid("m_L", g, range(-2, 3))
    out = apply_paraproduct(f1, f2, sym)
    # direct sum over (xi, eta) of 1-D coefficients
    X, Y = g.mesh()
    ex = np.exp(-2j * np.pi * np.multiply.outer(g.xi, g.x))      # [xi, x]
    ey = np.exp(-2j * np.pi * np.multiply.outer(g.eta, g.y))     # [eta, y]
    A = np.einsum("kx,xy->ky", ex, f1.samples) / g.nx              # A[xi, y]
    B = np.einsum("ly,xy->xl", ey, f2.samples) / g.ny              # B[x, eta]
    ref = np.zeros(g.shape, complex)
    for k in range(g.nx):
        for l in range(g.ny):
            ref += sym[k, l] * A[k][None, :] * B[:, l][:, None] * np.exp(2j * np.pi * (X * g.xi[k] + Y * g.eta[l]))
    assert close(out.samples, ref, 1e-7)


# -- maximal operators -----------------------------------------------------------


def _avg_oracle(a, axis, d, sigma, k):
    m = max(1, int(round(2.0**k / d)))
    i0 = int(round(sigma * 2.0**k / d))
    return sum(np.roll(a, i0 + i, axis=axis) for i in range(m)) / m


def test_maximal_constant_and_indicator():
    c = Field2D(G, np.full(G.shape, 3.5))
    for s in (0.0, -1.0, 2.0):
        assert close(shifted_maximal(c, 1, s), 3.5, 1e-12)
        assert close(shifted_maximal(c, 2, s), 3.5, 1e-12)
    g = make_grid(64, 8, 8.0, 8.0)
    X, _ = g.mesh()
    ind = Field2D(g, ((X >= 0) & (X <= 1)).astype(float))
    M = shifted_maximal(ind, 1, 0.0)
    i = int(np.argmin(np.abs(g.x - 1.0)))
    assert M[i, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("axis, sigma", [(1, 0.0), (1, 1.5), (2, -1.0), (2, 3.0)])
def test_maximal_dominates_windows(axis, sigma):
    f = rand(90 + axis)
    M = shifted_maximal(f, axis, sigma)
    d = G.dx if axis == 1 else G.dy
    from triparabola.operators import maximal_k_range
    ks = list(maximal_k_range(G, axis - 1, sigma))
    sup = np.zeros(G.shape)
    for k in ks:
        avg = _avg_oracle(np.abs(f.samples), axis - 1, d, sigma, k)
        assert np.all(M >= avg - 1e-12)
        sup = np.maximum(sup, avg)
    assert close(M, sup, 1e-12)
    with pytest.raises(ValueError, match="half the period"):
        shifted_maximal(f, axis, sigma, k_range=[ks[-1] + 1])


@given(seed=st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_maximal_monotone_and_sublinear(seed):
    rng = np.random.default_rng(seed)
    a = rng.random(G.shape)
    b = a + rng.random(G.shape)
    Ma, Mb = shifted_maximal(Field2D(G, a), 1, 0.5), shifted_maximal(Field2D(G, b), 1, 0.5)
    assert np.all(Ma <= Mb + 1e-12)
    c = rng.standard_normal(G.shape)
    Mac = hl_maximal(Field2D(G, a + c), 2)
    assert np.all(Mac <= hl_maximal(Field2D(G, a), 2) + hl_maximal(Field2D(G, c), 2) + 1e-12)


def test_shift_plan():
    plan = make_shift_plan(4, range(0, 3), range(-2, 3))
    assert len(plan.windows) == 15
    assert plan.sigmas[0] == 2.0**-3 * -2
    assert all(s == n / 8 - l * l / 16 for l, n, s in plan.windows)
    with pytest.raises(ValueError, match="inconsistent"):
        ShiftPlan(4, ((1, 1, 0.5),))


def test_square_function_single_mode_and_monotone():
    g = make_grid(128, 128, 8.0, 8.0)
    f = mode(g, 2.0, 0.5)
    sq = square_function(f, 1, range(-2, 3), shift=0.5)
    assert close(sq, shifted_maximal(f, 1, 0.5), 1e-12)
    h = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 7)
    s1 = square_function(h, 2, range(-1, 1), 0.0)
    s2 = square_function(h, 2, range(-2, 2), 0.0)
    assert np.all(s2 >= s1 - 1e-14)


def test_square_function_L2_against_double_sum():
    g = make_grid(128, 128, 8.0, 8.0)
    h = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 8)
    sq = square_function(h, 1, range(-2, 2), shift=-0.5)
    from triparabola.operators import maximal_k_range
    ks = list(maximal_k_range(g, 0, -0.5))
    XI, _ = g.freq_mesh()
    tot = np.zeros(g.shape)
    for k in range(-2, 2):
        pk = np.fft.ifft2(np.fft.fft2(h.samples) * P.psi_k(XI, k))
        M = np.zeros(g.shape)
        for kk in ks:
            M = np.maximum(M, _avg_oracle(np.abs(pk), 0, g.dx, -0.5, kk))
        tot += M**2
    n_sq = np.sqrt(np.sum(sq**2) * g.cell_area)
    n_ref = np.sqrt(np.sum(tot) * g.cell_area)
    assert abs(n_sq - n_ref) <= 1e-8 * n_ref


# -- bilinear maximal --------------------------------------------------------------


def test_bilinear_maximal_constants():
    one = Field2D(G, np.ones(G.shape))
    ref = quad(P.psi, -2, 2, points=[-1, -0.5, 0.5, 1], limit=200)[0]
    for j in (-1, 0, 2):
        assert close(bilinear_piece(one, one, j), ref, 1e-4 * ref)
    M = bilinear_maximal(one, one, range(-1, 2))
    assert close(M, ref, 1e-4 * ref)
    with pytest.raises(ValueError, match="empty"):
        bilinear_maximal(one, one, [])


def test_bilinear_maximal_dominates_pieces():
    f1, f2 = rand(101), rand(102)
    M = bilinear_maximal(f1, f2, range(-1, 2))
    for j in range(-1, 2):
        assert np.all(M >= bilinear_piece(f1, f2, j) - 1e-12)
    assert np.all(M >= 0)


def test_pointwise_domination_bounded():
    for part in ("L", "M"):
        r = [pointwise_domination_ratio(rand(2 * s), rand(2 * s + 1), part) for s in range(50)]
        assert max(r) <= C_DOM
    with pytest.raises(ValueError):
        pointwise_domination_ratio(rand(0), rand(1), "H")
