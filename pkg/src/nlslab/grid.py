"""Radial discretization of R^3 (s-wave sector) and the linear spectrum.

Fields psi(r) are sampled on interior nodes r_j = j*dr, j = 1..n, with
Dirichlet truncation at r = 0 and r = r_max.  All operator work happens on
the reduced wave u(r) = r*psi(r), where the radial Laplacian is plain u'',
so -Delta + V becomes a symmetric tridiagonal matrix and the physical inner
product

    (f, g) = 4*pi * sum_j conj(f_j) g_j r_j^2 dr = 4*pi*dr * sum_j conj(u_f) u_g

is a constant multiple of the Euclidean one.  Grid functions are stored as
field values; conversion to/from reduced waves is a pointwise scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigurationError, SpectrumError

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class PotentialSpec:
    """Attractive localized potential well.

    shape 'gaussian_well':  V(r) = -depth * exp(-r^2 / (2 width^2))
    shape 'square_well':    V(r) = -depth * 1{r < width}

    The Gaussian well is smooth with superpolynomial decay (it satisfies the
    regularity/decay hypotheses the analysis needs); the square well is kept
    for closed-form oracle tests only.
    """

    shape: str = "gaussian_well"
    depth: float = 8.0
    width: float = 1.0

    def __post_init__(self):
        if self.shape not in ("gaussian_well", "square_well"):
            raise ConfigurationError(f"unknown potential shape {self.shape!r}")
        if self.depth <= 0 or self.width <= 0:
            raise ConfigurationError("potential depth and width must be positive")

    def values(self, r: np.ndarray) -> np.ndarray:
        if self.shape == "gaussian_well":
            return -self.depth * np.exp(-(r**2) / (2.0 * self.width**2))
        return np.where(r < self.width, -self.depth, 0.0)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid with reduced-wave convention u = r*psi."""

    r_max: float
    n: int
    dr: float
    r: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)  # quadrature weights 4*pi*r^2*dr

    # -- inner products -------------------------------------------------

    def inner(self, f, g) -> complex:
        """Sesquilinear (f, g) = int conj(f) g d^3x on radial functions."""
        return np.sum(self.w * np.conj(f) * g)

    def inner_re(self, f, g) -> float:
        """Real pairing ((f, g)) = (Re f, Re g) + (Im f, Im g)."""
        return float(np.real(self.inner(f, g)))

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(self.w * np.abs(f) ** 2)))

    def norm_lp(self, f, p: float) -> float:
        """L^p norm under the radial measure."""
        return float(np.sum(self.w * np.abs(f) ** p) ** (1.0 / p))

    def norm_local(self, f, beta: float = 3.0) -> float:
        """Weighted local L^2 norm ||<x>^-beta f||."""
        weight = (1.0 + self.r**2) ** (-beta / 2.0)
        return self.norm(weight * f)

    # -- representations ------------------------------------------------

    def to_reduced(self, f):
        return self.r * f

    def to_field(self, u):
        return u / self.r

    def normalize_reduced_eigenvector(self, u: np.ndarray) -> np.ndarray:
        """Rescale a Euclidean-normalized reduced eigenvector to physical norm 1."""
        return u / np.sqrt(FOUR_PI * self.dr)

    # -- operators on reduced waves --------------------------------------

    def kinetic_tridiag(self):
        """(diagonal, off-diagonal) of -u'' with Dirichlet ends."""
        d = np.full(self.n, 2.0 / self.dr**2)
        e = np.full(self.n - 1, -1.0 / self.dr**2)
        return d, e

    def hamiltonian_tridiag(self, v_values: np.ndarray):
        """(diagonal, off-diagonal) of -u'' + V(r) u."""
        d, e = self.kinetic_tridiag()
        return d + v_values, e

    def dense_operator(self, v_values: np.ndarray) -> np.ndarray:
        """Dense symmetric matrix of -Delta + V acting on reduced waves."""
        d, e = self.hamiltonian_tridiag(v_values)
        m = np.diag(d)
        idx = np.arange(self.n - 1)
        m[idx, idx + 1] = e
        m[idx + 1, idx] = e
        return m

    def laplacian(self, f):
        """Radial Laplacian of a field, via u -> u'' on the reduced wave."""
        u = self.to_reduced(f)
        lap = np.empty_like(u)
        lap[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        lap[0] = u[1] - 2.0 * u[0]          # u(0) = 0
        lap[-1] = u[-2] - 2.0 * u[-1]       # u(r_max) = 0
        return self.to_field(lap / self.dr**2)

    def apply_sym(self, matrix: np.ndarray, f):
        """Apply a reduced-wave matrix to a (possibly complex) field."""
        return self.to_field(matrix @ self.to_reduced(f))


def build_grid(r_max: float, n: int) -> RadialGrid:
    """Uniform grid with n interior nodes; dr*(n+1) = r_max."""
    if r_max <= 0:
        raise ConfigurationError(f"r_max must be positive, got {r_max}")
    if n < 16:
        raise ConfigurationError(f"need at least 16 interior nodes, got {n}")
    dr = r_max / (n + 1)
    r = dr * np.arange(1, n + 1)
    w = FOUR_PI * r**2 * dr
    return RadialGrid(r_max=float(r_max), n=int(n), dr=float(dr), r=r, w=w)


@dataclass(frozen=True)
class BoundStatePair:
    """Two lowest s-wave eigenpairs of -Delta + V.

    phi0 and phi1 are L^2-normalized fields; e01 = e1 - e0 is the gap.
    n_negative counts all negative eigenvalues found (a third one is legal
    for the eigensolver but violates the dynamical setup downstream).
    """

    e0: float
    e1: float
    e01: float
    phi0: np.ndarray
    phi1: np.ndarray
    n_negative: int

    def report(self) -> dict:
        return {
            "e0": self.e0,
            "e1": self.e1,
            "e01": self.e01,
            "resonance_ok": check_resonance_condition(self),
            "n_negative": self.n_negative,
        }


def _fix_sign(u: np.ndarray) -> np.ndarray:
    """Make the first interior node value positive."""
    return -u if u[0] < 0 else u


def count_sign_changes(values: np.ndarray, rel_floor: float = 1e-8) -> int:
    """Sign changes of a grid function, ignoring entries below a noise floor."""
    floor = rel_floor * np.max(np.abs(values))
    kept = values[np.abs(values) > floor]
    if kept.size < 2:
        return 0
    return int(np.sum(np.sign(kept[:-1]) * np.sign(kept[1:]) < 0))


def bound_states(potential: PotentialSpec, grid: RadialGrid, n_levels: int = 6) -> BoundStatePair:
    """Two lowest s-wave bound states of -Delta + V by dense tridiagonal solve."""
    v = potential.values(grid.r)
    d, e = grid.hamiltonian_tridiag(v)
    k = min(n_levels, grid.n)
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    n_negative = int(np.sum(vals < 0))
    if n_negative < 2:
        raise SpectrumError(
            f"potential too shallow: {n_negative} negative eigenvalue(s), need 2 "
            f"(lowest levels: {vals[:3]})"
        )
    u0 = _fix_sign(vecs[:, 0])
    u1 = _fix_sign(vecs[:, 1])
    phi0 = grid.to_field(grid.normalize_reduced_eigenvector(u0))
    phi1 = grid.to_field(grid.normalize_reduced_eigenvector(u1))
    e0, e1 = float(vals[0]), float(vals[1])
    return BoundStatePair(
        e0=e0, e1=e1, e01=e1 - e0, phi0=phi0, phi1=phi1, n_negative=n_negative
    )


def check_resonance_condition(pair: BoundStatePair) -> bool:
    """Gap condition: twice the spectral gap lies in the continuum of H0.

    H0 = -Delta + V - e0 has continuum [|e0|, inf), so the condition is
    2*e01 > |e0|.  The positivity constant gamma_0 is checked separately
    (fgr.check_A1).
    """
    return 2.0 * pair.e01 > abs(pair.e0)
