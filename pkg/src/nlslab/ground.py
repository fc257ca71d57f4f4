"""Nonlinear ground-state branch E -> Q_E and its E-derivative R_E.

Q_E solves (-Delta + V) Q + lambda Q^3 = E Q with Q > 0 and decays
exponentially; differentiating in E gives L_plus_or R_E = Q_E with
L_plus_or = -Delta + V - E + 3 lambda Q^2.  The branch is parameterized by E
(not by mass); the operational definition of the branch interval is the mass
window ||Q||^2 in [1, 10].

All solves happen on the reduced wave u = r*Q, where every operator involved
is tridiagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded, eigh_tridiagonal

from .errors import BranchError, DomainError, SolveError
from .grid import BoundStatePair, RadialGrid

_MAX_NEWTON = 50


@dataclass(frozen=True)
class GroundState:
    """One point of the branch: profile Q, derivative R, and bookkeeping."""

    E: float
    lam: float
    w: float                       # phi0-component amplitude (phi0, Q)
    Q: np.ndarray = field(repr=False)
    R: np.ndarray = field(repr=False)
    grid: RadialGrid = field(repr=False)
    v: np.ndarray = field(repr=False)      # potential values on the grid
    pair: BoundStatePair = field(repr=False)
    residual: float = 0.0          # relative residual of the Q equation
    r_residual: float = 0.0        # relative residual of L_plus_or R = Q

    @property
    def mass(self) -> float:
        return float(np.real(self.grid.inner(self.Q, self.Q)))

    @property
    def c0(self) -> float:
        """(Q, Q)^-1."""
        return 1.0 / self.mass

    @property
    def c1(self) -> float:
        """(Q, R)^-1."""
        return 1.0 / float(np.real(self.grid.inner(self.Q, self.R)))

    def h_tridiag(self):
        """H_E = -Delta + V - E + lambda Q^2 on reduced waves; H_E Q = 0."""
        return self.grid.hamiltonian_tridiag(self.v - self.E + self.lam * self.Q**2)

    def lplus_or_tridiag(self):
        """L_plus_or = -Delta + V - E + 3 lambda Q^2 on reduced waves."""
        return self.grid.hamiltonian_tridiag(self.v - self.E + 3.0 * self.lam * self.Q**2)


def _banded(d, e):
    ab = np.zeros((3, d.size))
    ab[0, 1:] = e
    ab[1, :] = d
    ab[2, :-1] = e
    return ab


def _tridiag_apply(d, e, u):
    out = d * u
    out[:-1] += e * u[1:]
    out[1:] += e * u[:-1]
    return out


def solve_ground_state(
    E: float,
    lam: float,
    pair: BoundStatePair,
    grid: RadialGrid,
    potential_values: np.ndarray,
    tol: float = 1e-11,
) -> GroundState:
    """Damped Newton solve of the bound-state equation at fixed E.

    The initial guess comes from the bifurcation relation w^2 ~ E'/(lambda c)
    with c = (phi0, phi0^3); the iteration runs on the reduced wave where the
    Jacobian L_plus_or is tridiagonal.  After convergence the exponential tail
    is purified by two inverse-power steps on the frozen H_E (an M-matrix, so
    its inverse is entrywise positive), which keeps Q strictly positive down
    to the truncation radius.
    """
    if lam == 0.0:
        raise DomainError("lambda must be nonzero")
    e_prime = E - pair.e0
    c = float(np.real(grid.inner(pair.phi0, pair.phi0**3)))
    w2 = e_prime / (lam * c)
    if w2 <= 0.0:
        raise DomainError(
            f"E - e0 = {e_prime:g} lies on the wrong side of e0 for lambda = {lam:g} "
            f"(w^2 = {w2:g} <= 0)"
        )
    w0 = np.sqrt(w2)

    r2 = grid.r**2
    v_shift = potential_values - E
    d0, e_off = grid.hamiltonian_tridiag(v_shift)

    def residual_vec(u):
        return _tridiag_apply(d0, e_off, u) + lam * u**3 / r2

    u = grid.to_reduced(w0 * pair.phi0)
    res = residual_vec(u)
    res_norm = np.linalg.norm(res)
    scale = np.linalg.norm(u)

    converged = False
    for _ in range(_MAX_NEWTON):
        if res_norm <= tol * scale:
            converged = True
            break
        jac = _banded(d0 + 3.0 * lam * u**2 / r2, e_off)
        step = solve_banded((1, 1), jac, res)
        # damped update: halve on residual increase
        factor = 1.0
        for _ in range(12):
            u_new = u - factor * step
            res_new = residual_vec(u_new)
            if np.linalg.norm(res_new) < res_norm:
                break
            factor *= 0.5
        u, res = u_new, res_new
        res_norm = np.linalg.norm(res)
        scale = np.linalg.norm(u)
    if not converged and res_norm > tol * scale:
        raise SolveError(
            f"ground-state Newton did not converge at E={E:g}, lambda={lam:g} "
            f"(relative residual {res_norm / scale:g})"
        )

    # tail purification: inverse power steps on frozen H_E keep u > 0
    h_d = d0 + lam * u**2 / r2
    for _ in range(2):
        u_pos = solve_banded((1, 1), _banded(h_d + 1e-12, e_off), u)
        u = u_pos * (np.linalg.norm(u) / np.linalg.norm(u_pos))
    res_norm = np.linalg.norm(residual_vec(u))

    Q = grid.to_field(u)
    w = float(np.real(grid.inner(pair.phi0, Q)))

    # R = (L_plus_or)^-1 Q by banded solve with iterative refinement; the
    # smallest eigenvalue of L_plus_or is ~2(E - e0), so deep in the
    # perturbative regime fall back to a spectral solve.
    lp_d = d0 + 3.0 * lam * u**2 / r2
    ab = _banded(lp_d, e_off)
    rhs = u.copy()
    ur = solve_banded((1, 1), ab, rhs)
    r_res = rhs - _tridiag_apply(lp_d, e_off, ur)
    ur = ur + solve_banded((1, 1), ab, r_res)
    r_res_norm = np.linalg.norm(rhs - _tridiag_apply(lp_d, e_off, ur))
    if r_res_norm > 1e-8 * np.linalg.norm(rhs):
        vals, vecs = eigh_tridiagonal(lp_d, e_off)
        coeff = vecs.T @ rhs
        ur = vecs @ (coeff / vals)
        r_res_norm = np.linalg.norm(rhs - _tridiag_apply(lp_d, e_off, ur))
    R = grid.to_field(ur)

    return GroundState(
        E=float(E),
        lam=float(lam),
        w=w,
        Q=Q,
        R=R,
        grid=grid,
        v=potential_values,
        pair=pair,
        residual=float(res_norm / np.linalg.norm(u)),
        r_residual=float(r_res_norm / np.linalg.norm(rhs)),
    )


@dataclass(frozen=True)
class GroundStateBranch:
    lam: float
    samples: tuple
    rejected: tuple = ()   # (E, mass) pairs outside the mass window

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)


MASS_WINDOW = (1.0, 10.0)


def branch_sweep(
    lam: float,
    E_list,
    pair: BoundStatePair,
    grid: RadialGrid,
    potential_values: np.ndarray,
    mass_window=MASS_WINDOW,
) -> GroundStateBranch:
    """Solve the branch over E_list, keeping samples with mass in the window."""
    kept, rejected = [], []
    for E in sorted(E_list) if lam > 0 else sorted(E_list, reverse=True):
        gs = solve_ground_state(E, lam, pair, grid, potential_values)
        if mass_window[0] <= gs.mass <= mass_window[1]:
            kept.append(gs)
        else:
            rejected.append((float(E), gs.mass))
    if not kept:
        raise BranchError(
            f"no branch samples with mass in {mass_window}; rejected: {rejected}"
        )
    return GroundStateBranch(lam=float(lam), samples=tuple(kept), rejected=tuple(rejected))


def solve_for_mass(
    lam: float,
    target_mass: float,
    pair: BoundStatePair,
    grid: RadialGrid,
    potential_values: np.ndarray,
    rtol: float = 1e-10,
    max_iter: int = 60,
) -> GroundState:
    """Pick E on the branch so that ||Q_E||^2 hits target_mass (secant)."""
    c = float(np.real(grid.inner(pair.phi0, pair.phi0**3)))
    e1 = pair.e0 + lam * c * target_mass          # w^2 ~ mass to leading order
    gs1 = solve_ground_state(e1, lam, pair, grid, potential_values)
    e2 = pair.e0 + (e1 - pair.e0) * target_mass / gs1.mass
    gs2 = solve_ground_state(e2, lam, pair, grid, potential_values)
    for _ in range(max_iter):
        if abs(gs2.mass - target_mass) <= rtol * target_mass:
            return gs2
        f1, f2 = gs1.mass - target_mass, gs2.mass - target_mass
        if f2 == f1:
            break
        e_next = e2 - f2 * (e2 - e1) / (f2 - f1)
        gs1, e1 = gs2, e2
        gs2 = solve_ground_state(e_next, lam, pair, grid, potential_values)
        e2 = e_next
    if abs(gs2.mass - target_mass) <= 1e-6 * target_mass:
        return gs2
    raise SolveError(
        f"mass targeting stalled at ||Q||^2={gs2.mass:g} (target {target_mass:g})"
    )
