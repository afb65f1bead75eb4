from __future__ import annotations

import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triparabola.grid import Field2D, FreqSupportSpec, make_grid, mode, random_band_limited
from triparabola.littlewood_paley import (
    FreqWindow,
    commutator_defect,
    export_profile_csv,
    make_bump_profile,
    partition_defect,
    project,
    smooth_step,
    telescoped_sum,
    unit_partition_bump,
)

P = make_bump_profile(8)


def test_profile_values():
    assert P.phi(0.5) == 1.0
    assert P.phi(2.5) == 0.0
    assert P.psi(1.0) == 1.0
    assert P.phi(1.0) == 1.0 and P.phi(2.0) == 0.0


def test_profile_invariants_on_dense_grid():
    z = np.linspace(-6, 6, 120_001)
    phi, psi, pt = P.phi(z), P.psi(z), P.psi_tilde(z)
    a = np.abs(z)
    assert np.all((phi >= 0) & (phi <= 1))
    assert np.all(phi[a <= 1] == 1) and np.all(phi[a >= 2] == 0)
    assert np.all(psi[(a < 0.5) | (a > 2)] == 0)
    assert np.max(np.abs(psi * pt - psi)) <= 1e-12
    assert np.array_equal(phi, P.phi(-z))


def test_make_bump_profile_errors():
    with pytest.raises(ValueError):
        make_bump_profile(1)
    with pytest.raises(ValueError):
        make_bump_profile(4, tilde_factor=1.5)


def test_smooth_step_symmetry():
    u = np.linspace(-0.5, 1.5, 2001)
    assert np.max(np.abs(smooth_step(u) + smooth_step(1 - u) - 1)) < 1e-15
    assert np.all(np.diff(smooth_step(u)) >= 0)


def test_partition_examples():
    assert partition_defect(P, 10, [1.0]) <= 1e-12
    assert partition_defect(P, 10, [3.7]) <= 1e-12
    with pytest.raises(ValueError, match="outside covered range"):
        partition_defect(P, 10, [2.0**15])


@given(z=st.floats(2.0**-12, 2.0**12), K=st.integers(1, 12))
@settings(max_examples=200, deadline=None)
def test_telescoping_identity(z, K):
    lhs = telescoped_sum(P, K, z)
    # psi_k(z) = phi(2^-k z) - phi(2^(1-k) z) telescopes to the outermost terms
    rhs = P.phi(z / 2.0**K) - P.phi(2.0 ** (K + 1) * z)
    assert abs(lhs - rhs) <= 1e-12


def test_project_single_mode_and_disjoint():
    g = make_grid(64, 64, 1.0, 1.0)
    m = mode(g, 8.0, 3.0)
    out = project(m, FreqWindow(1, 3))
    assert np.max(np.abs(out.samples - m.samples)) < 1e-12
    f = random_band_limited(g, FreqSupportSpec("both", "ball", 12.0), 2)
    for k, kk in [(1, 3), (2, 4), (0, 4)]:
        z = project(project(f, FreqWindow(1, kk)), FreqWindow(1, k))
        assert np.max(np.abs(z.samples)) < 1e-14


def test_tilde_absorbs_and_axes_commute():
    g = make_grid(64, 64, 2.0, 2.0)
    f = random_band_limited(g, FreqSupportSpec("both", "ball", 6.0), 5)
    for axis in (1, 2):
        for k in range(0, 4):
            d = project(f, FreqWindow(axis, k))
            dd = project(d, FreqWindow(axis, k, tilde=True))
            assert np.max(np.abs(dd.samples - d.samples)) <= 1e-12
    a = project(project(f, FreqWindow(1, 1)), FreqWindow(2, 2))
    b = project(project(f, FreqWindow(2, 2)), FreqWindow(1, 1))
    assert np.max(np.abs(a.samples - b.samples)) < 1e-13
    h = random_band_limited(g, FreqSupportSpec("both", "ball", 6.0), 6)
    lin = project(2 * f + h, FreqWindow(1, 2))
    ref = 2 * project(f, FreqWindow(1, 2)) + project(h, FreqWindow(1, 2))
    assert np.max(np.abs(lin.samples - ref.samples)) < 1e-13


def _cutoff(X, Y):
    r2 = X**2 + Y**2
    return P.phi(2 * np.sqrt(r2))


def test_commutator_trivial_cases():
    g = make_grid(64, 64, 4.0, 4.0)
    f = random_band_limited(g, FreqSupportSpec("both", "ball", 3.0), 0)
    assert commutator_defect(f, lambda X, Y: np.ones_like(X), 3) < 1e-13
    assert commutator_defect(Field2D(g, np.zeros(g.shape)), _cutoff, 2) == 0.0
    with pytest.raises(ValueError):
        commutator_defect(f, _cutoff, -1)


def test_commutator_constant_matches_direct_convolution():
    # f = 1: commutator is cutoff - Delta_k(cutoff); compare with a direct periodic convolution
    g = make_grid(32, 32, 4.0, 4.0)
    f = Field2D(g, np.ones(g.shape))
    k = 1
    X, Y = g.mesh()
    cut = _cutoff(X, Y)
    # spatial kernel of psi_k(xi) along axis 1 on the torus
    kern = np.real(np.fft.ifft(P.psi_k(g.xi, k))) * g.nx / g.Lx
    direct = np.zeros_like(cut)
    for i in range(g.nx):
        for s in range(g.nx):
            direct[i] += kern[s] * cut[(i - s) % g.nx] * g.dx
    comm = cut * 0.0 - direct  # Delta_k of a constant vanishes for k >= 0
    ref = np.max(np.abs(comm) / (2.0**-k * 2.0))
    assert abs(commutator_defect(f, _cutoff, k) - ref) < 1e-10


def test_commutator_bounded_uniformly_in_k():
    g = make_grid(256, 256, 8.0, 8.0)
    f = random_band_limited(g, FreqSupportSpec("both", "ball", 6.0), 3)
    vals = [commutator_defect(f, _cutoff, k) for k in range(0, 9)]
    assert max(vals) < 20.0
    assert max(vals[4:]) <= 2 * max(vals[:4])


def test_unit_partition_bump_sums_to_one():
    u = np.linspace(-3, 3, 6001)
    for w in (0.1, 0.25, 0.5):
        tot = sum(unit_partition_bump(u - n, w) for n in range(-6, 7))
        assert np.max(np.abs(tot - 1)) < 1e-14
        assert np.all(unit_partition_bump(u, w)[np.abs(u) > 0.5 + w] == 0)
    with pytest.raises(ValueError):
        unit_partition_bump(u, 0.7)


def test_export_profile_csv(tmp_path):
    export_profile_csv(P, tmp_path / "p.csv", 4.0, 81)
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert len(rows) == 82
    assert [float(v) for v in rows[41]][:2] == [0.0, 1.0]
