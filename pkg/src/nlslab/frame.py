"""Soliton-frame decomposition psi = (Q_E + a R_E + h) e^{i Theta}, h perp Q.

decompose_once fixes the frame at a given E by projecting on Q and converting
the Q-component of the correction into the R direction; renormalize_E runs
the fixed-point iteration E <- E + a until the frame has a = 0, which is the
operational version of choosing the ground-state profile by the
orthogonality condition (psi - Q_E' e^{i Theta'}, Q_E') = 0.  split_h
separates the discrete-mode amplitude z from the dispersive remainder eta,
and extract_b removes the fast 2-kappa oscillation a20 (z^2 + conj z^2) from
a, leaving the slow part b.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FrameError, RenormError
from .grid import BoundStatePair, RadialGrid
from .ground import GroundState, solve_ground_state
from .linearize import LinearizedSystem

MAX_RENORM_ITER = 50
RENORM_TOL = 1e-12


@dataclass(frozen=True)
class SolitonFrame:
    """One time slice in the soliton frame (eta split filled when a
    linearization is supplied)."""

    t: float
    E: float
    Theta: float
    a: float
    z: complex = 0.0j
    eta: np.ndarray | None = field(default=None, repr=False)
    b: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def p(self) -> complex:
        """Rotating-frame amplitude p = z e^{i kappa t}; kappa from diagnostics."""
        kappa = self.diagnostics.get("kappa")
        if kappa is None:
            return self.z
        return self.z * np.exp(1j * kappa * self.t)


def decompose_once(psi, gs: GroundState, max_distance: float = 0.2):
    """Unique small (a, Theta, h) with psi = (Q + a R + h) e^{i Theta}, h perp Q.

    Constructive: e^{i Theta} is the phase of (Q, psi); the modulus excess on
    the Q direction is converted into the R direction through
    a = a_Q (Q,Q)/(Q,R).  Raises FrameError when psi is farther than
    max_distance * ||Q|| from the phase-aligned ground state.
    """
    g = gs.grid
    Q = gs.Q
    qq = gs.mass
    proj = g.inner(Q, psi)           # = integral Q psi (Q real)
    if abs(proj) == 0.0:
        raise FrameError("field has no overlap with the ground state")
    theta = float(np.angle(proj))
    rho = abs(proj) / qq
    psi_rot = psi * np.exp(-1j * theta)
    dist = g.norm(psi_rot - Q)
    if dist > max_distance * np.sqrt(qq):
        raise FrameError(
            f"field too far from the branch: |psi - Q e^(i Theta)| = {dist:g} "
            f"> {max_distance:g} * ||Q||"
        )
    a_q = rho - 1.0
    k = psi_rot - rho * Q            # k perp Q by construction
    qr = np.real(g.inner(Q, gs.R))
    a = a_q * qq / qr
    pi_r = gs.R - (qr / qq) * Q
    h = k - a * pi_r
    return float(a), theta, h


def reconstruct(gs: GroundState, a: float, theta: float, h) -> np.ndarray:
    return (gs.Q + a * gs.R + h) * np.exp(1j * theta)


class BranchContext:
    """Ground-state solver with a small E-cache, for frame renormalization."""

    def __init__(self, lam: float, pair: BoundStatePair, grid: RadialGrid,
                 potential_values: np.ndarray, cache_tol: float = 1e-13):
        self.lam = lam
        self.pair = pair
        self.grid = grid
        self.v = potential_values
        self.cache_tol = cache_tol
        self._cache: dict[float, GroundState] = {}

    def solve(self, E: float) -> GroundState:
        for e_cached, gs in self._cache.items():
            if abs(e_cached - E) <= self.cache_tol:
                return gs
        gs = solve_ground_state(E, self.lam, self.pair, self.grid, self.v)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[float(E)] = gs
        return gs


@dataclass(frozen=True)
class RenormResult:
    E: float
    Theta: float
    h: np.ndarray = field(repr=False)
    gs: GroundState = field(repr=False)
    iterations: int = 0
    a_history: tuple = ()
    orthogonality_residual: float = 0.0


def renormalize_E(psi, E_guess: float, ctx: BranchContext,
                  tol: float = RENORM_TOL) -> RenormResult:
    """Re-choose E so the frame has a = 0 (fixed point E <- E + a).

    The iteration contracts geometrically (factor <= 1/3 for small data);
    non-contraction twice in a row aborts with the iterate log."""
    E = float(E_guess)
    a_hist = []
    bad_streak = 0
    for it in range(MAX_RENORM_ITER):
        gs = ctx.solve(E)
        a, theta, h = decompose_once(psi, gs)
        a_hist.append(abs(a))
        if abs(a) <= tol:
            ortho = abs(ctx.grid.inner(gs.Q, psi * np.exp(-1j * theta) - gs.Q)) / gs.mass
            return RenormResult(
                E=E, Theta=theta, h=h, gs=gs, iterations=it + 1,
                a_history=tuple(a_hist), orthogonality_residual=float(ortho),
            )
        if len(a_hist) >= 2 and a_hist[-1] > a_hist[-2]:
            bad_streak += 1
            if bad_streak >= 2:
                raise RenormError(
                    f"renormalization not contracting at E={E:g}", iterates=a_hist
                )
        else:
            bad_streak = 0
        E = E + a
    raise RenormError(
        f"renormalization did not reach |a| <= {tol:g} in {MAX_RENORM_ITER} iterations",
        iterates=a_hist,
    )


def split_h(h, sys: LinearizedSystem):
    """h = zeta + eta with zeta = z u_+ + conj(z) u_- and eta in H_c(L)."""
    z = sys.eigen_amplitude(h)
    eta = h - (z * sys.u_plus + np.conj(z) * sys.u_minus)
    return z, eta


def a20_coefficient(gs: GroundState, sys: LinearizedSystem) -> float:
    """a20 = (lambda / 4 kappa) (c1 Q, Q (u_+^2 - u_-^2))."""
    g = gs.grid
    c1 = gs.c1
    val = g.inner_re(gs.Q, gs.Q * (sys.u_plus**2 - sys.u_minus**2))
    return gs.lam / (4.0 * sys.kappa) * c1 * val


def extract_b(a_values, z_values, a20: float):
    """Slow mass coordinate b = a - a20 (z^2 + conj(z)^2), elementwise."""
    a_values = np.asarray(a_values, dtype=float)
    z_values = np.asarray(z_values, dtype=complex)
    return a_values - a20 * 2.0 * np.real(z_values**2)


def unwrap_theta(theta_values) -> np.ndarray:
    """Continuous phase series from principal values (stride must keep
    |Delta Theta| < pi between samples)."""
    return np.unwrap(np.asarray(theta_values, dtype=float))
