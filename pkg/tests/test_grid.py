import numpy as np
import pytest
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq

from nlslab.errors import ConfigurationError, SpectrumError
from nlslab.grid import (PotentialSpec, bound_states, build_grid,
                         check_resonance_condition, count_sign_changes)


def test_grid_spacing_examples():
    g = build_grid(40.0, 2000)
    assert g.dr == pytest.approx(40.0 / 2001)
    assert g.r[-1] < 40.0
    g2 = build_grid(1.0, 16)
    assert g2.dr == pytest.approx(1.0 / 17)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        build_grid(-1.0, 100)
    with pytest.raises(ConfigurationError):
        build_grid(10.0, 8)


def test_laplacian_dirichlet_eigenfunction():
    g = build_grid(20.0, 800)
    f = np.sin(np.pi * g.r / g.r_max) / g.r
    lam_exact = (np.pi / g.r_max) ** 2
    lap = g.laplacian(f)
    # discrete eigenfunction of the reduced-wave Laplacian: exact up to the
    # discrete dispersion, which differs from -(pi/r_max)^2 by O(dr^2)
    err = np.max(np.abs(lap + lam_exact * f)) / np.max(np.abs(f))
    assert err < 2e-4


def test_laplacian_symmetry(grid, rng):
    f = rng.standard_normal(grid.n)
    g2 = rng.standard_normal(grid.n)
    lhs = grid.inner(grid.laplacian(f), g2)
    rhs = grid.inner(f, grid.laplacian(g2))
    assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_bound_states_default(pair):
    assert pair.e0 < pair.e1 < 0
    assert pair.e01 == pytest.approx(pair.e1 - pair.e0)
    assert pair.n_negative == 2
    assert check_resonance_condition(pair)


def test_bound_states_golden_values(pot):
    # regression pins for the shipped grid, plus agreement with a refined
    # (n = 4799) oracle solve within the expected O(dr^2) window
    g = build_grid(60.0, 1199)
    pair = bound_states(pot, g)
    assert pair.e0 == pytest.approx(-11.490412163724837, abs=1e-7)
    assert pair.e1 == pytest.approx(-3.1198469061471816, abs=1e-7)
    refined = bound_states(pot, build_grid(60.0, 4799))
    assert abs(pair.e0 - refined.e0) < 6e-3
    assert abs(pair.e1 - refined.e1) < 1.3e-2


def test_eig_convergence_order(pot):
    es = []
    for n in (599, 1199, 2399):
        g = build_grid(60.0, n)
        es.append(bound_states(pot, g).e0)
    ratio = (es[0] - es[1]) / (es[1] - es[2])
    assert ratio == pytest.approx(4.0, rel=0.15)


def test_orthonormality_and_nodes(pair, grid):
    assert grid.inner_re(pair.phi0, pair.phi1) == pytest.approx(0.0, abs=1e-10)
    assert grid.norm(pair.phi0) == pytest.approx(1.0, rel=1e-10)
    assert grid.norm(pair.phi1) == pytest.approx(1.0, rel=1e-10)
    assert count_sign_changes(grid.to_reduced(pair.phi0)) == 0
    assert count_sign_changes(grid.to_reduced(pair.phi1)) == 1
    assert pair.phi0[0] > 0 and pair.phi1[0] > 0


def test_too_shallow_raises():
    g = build_grid(60.0, 1199)
    with pytest.raises(SpectrumError):
        bound_states(PotentialSpec("gaussian_well", 3.0, 1.0), g)


def test_resonance_condition_arithmetic():
    class FakePair:
        pass

    p = FakePair()
    p.e0, p.e01 = -1.0, 0.6
    assert check_resonance_condition(p)       # 1.2 > 1
    p.e01 = 0.4
    assert not check_resonance_condition(p)   # 0.8 < 1


def _square_well_e1_analytic(v0: float, sigma: float) -> float:
    """Second s-level of the 3-D square well from k cot(k sigma) = -kappa."""

    def match(e):
        k = np.sqrt(v0 + e)          # e < 0
        kap = np.sqrt(-e)
        return k / np.tan(k * sigma) + kap

    # second root: k sigma in (pi, 3pi/2)
    e_lo = (np.pi / sigma) ** 2 - v0 + 1e-9       # k sigma = pi
    e_hi = -1e-9                                  # threshold k sigma = 3pi/2
    return brentq(match, e_lo, e_hi, xtol=1e-12)


def test_square_well_matching_oracle():
    v0, sigma = 23.0, 1.0
    e1_exact = _square_well_e1_analytic(v0, sigma)
    g = build_grid(240.0, 5999)    # shallow state needs a large box
    pair = bound_states(PotentialSpec("square_well", v0, sigma), g)
    assert pair.e1 == pytest.approx(e1_exact, rel=5e-3)


def test_square_well_two_state_threshold():
    # the second s-state appears at V0 = (3 pi / 2 sigma)^2
    v0_star = (1.5 * np.pi) ** 2
    g = build_grid(240.0, 5999)

    def e1_of(v0):
        d, e = g.hamiltonian_tridiag(PotentialSpec("square_well", v0, 1.0).values(g.r))
        vals = eigh_tridiagonal(d, e, select="i", select_range=(0, 1),
                                eigvals_only=True)
        return vals[1]

    # bisect the numerical crossing of e1 through a slightly bound reference
    # level (box-independent) and compare with the analytic depth giving the
    # same binding
    e_ref = -2e-3
    v_num = brentq(lambda v: e1_of(v) - e_ref, v0_star - 2.0, v0_star + 2.0,
                   xtol=1e-6)
    v_ana = brentq(
        lambda v: _square_well_e1_analytic(v, 1.0) - e_ref,
        v0_star + 1e-6, v0_star + 2.0, xtol=1e-12,
    )
    assert v_num == pytest.approx(v_ana, rel=2e-3)
