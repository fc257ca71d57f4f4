"""Linearization around Q_E: the matrix pair L+/L-, its eigenpair, and the
self-adjoint conjugate.

On X = {f : f perp Q} the linearized flow is L h = -i{H h + lam Pi Q^2 Pi
(h + conj h)} with H = L_minus and L_plus = H + 2 lam Pi Q^2 Pi.  The
symmetrizers

    B = Pi (L_minus)^(1/2) Pi,     A = sqrt(B L_plus B)

turn it into a self-adjoint problem: L = U^(-1) (-iA) U with
U(f+ig) = A^(1/2) B^(-1) f + i A^(-1/2) B g.  Everything here is computed
from two dense symmetric eigendecompositions (of Pi H Pi and of B L_plus B),
cached on the LinearizedSystem; grid sizes <= ~2500 keep this exact at scale
and replace resolvent-integral representations of operator functions.

Vectors handed to/returned from the public methods are fields; internally
they are reduced-wave columns in the plain Euclidean geometry (the physical
inner product is 4 pi dr times the Euclidean one, so symmetry is preserved).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPSDError, SpectralError
from .grid import FOUR_PI, RadialGrid
from .ground import GroundState

# relative floors for spectral clipping / PSD rejection
_CLIP_REL = 1e-12
_PSD_REL = 1e-6


def matrix_sqrt_psd(m_sym: np.ndarray, clip_rel: float = _CLIP_REL):
    """PSD square root by direct eigendecomposition.

    Eigenvalues in [-clip floor, 0) are discretization artifacts and are
    clipped to zero; anything below -1e-6 (relative to the spectral radius)
    raises NotPSDError.  Returns (sqrt_m, eigvals_clipped, eigvecs).
    """
    vals, vecs = np.linalg.eigh(0.5 * (m_sym + m_sym.T))
    scale = max(abs(vals[0]), abs(vals[-1]), 1e-300)
    if vals[0] < -_PSD_REL * scale:
        raise NotPSDError(
            f"matrix is not PSD: lowest eigenvalue {vals[0]:g} vs scale {scale:g}"
        )
    vals = np.where(vals < clip_rel * scale, 0.0, vals)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return root, vals, vecs


@dataclass(frozen=True)
class ConjugationU:
    """The real-linear maps U, U^-1 intertwining L with -iA.

    U and its inverse do not commute with i; they are stored as the pair of
    symmetric matrices acting separately on real and imaginary parts.
    """

    fwd_re: np.ndarray = field(repr=False)   # A^(1/2) B^-1
    fwd_im: np.ndarray = field(repr=False)   # A^(-1/2) B
    inv_re: np.ndarray = field(repr=False)   # B A^(-1/2)
    inv_im: np.ndarray = field(repr=False)   # B^-1 A^(1/2)

    def _apply(self, grid, f, m_re, m_im):
        x = grid.to_reduced(f)
        out = m_re @ np.real(x) + 1j * (m_im @ np.imag(x))
        return grid.to_field(out)

    def fwd(self, grid: RadialGrid, f):
        return self._apply(grid, f, self.fwd_re, self.fwd_im)

    def inv(self, grid: RadialGrid, f):
        return self._apply(grid, f, self.inv_re, self.inv_im)


class LinearizedSystem:
    """Spectral data of the linearization at one ground state.

    Immutable after construction; heavy members are the cached dense
    eigendecompositions through which every operator function of A
    (propagators, resolvents, fractional powers) is evaluated exactly.
    """

    def __init__(self, gs: GroundState):
        grid = gs.grid
        n = grid.n
        self.gs = gs
        self.grid = grid
        self._phys = FOUR_PI * grid.dr  # physical product = _phys * Euclidean

        q_col = grid.to_reduced(gs.Q)
        q_hat = q_col / np.linalg.norm(q_col)
        self.q_hat = q_hat

        h_d, h_e = gs.h_tridiag()
        H = np.diag(h_d)
        idx = np.arange(n - 1)
        H[idx, idx + 1] = h_e
        H[idx + 1, idx] = h_e

        pi = np.eye(n) - np.outer(q_hat, q_hat)
        hx = pi @ H @ pi
        # B = Pi H^(1/2) Pi via the eigendecomposition of Pi H Pi; the exact
        # zero mode (the Q direction) gets sqrt(0) = 0 so B annihilates it.
        B, hx_vals, hx_vecs = matrix_sqrt_psd(hx)
        self._hx_vals = hx_vals
        self._hx_vecs = hx_vecs

        q2 = np.diag(gs.Q**2)
        l_plus = H + 2.0 * gs.lam * (pi @ q2 @ pi)
        a_sq = B @ l_plus @ B

        vals, vecs = np.linalg.eigh(0.5 * (a_sq + a_sq.T))
        scale = max(abs(vals[0]), abs(vals[-1]))
        if vals[0] < -_PSD_REL * scale:
            raise NotPSDError(
                f"B L_plus B has eigenvalue {vals[0]:g}; linearization not PSD on X"
            )
        vals = np.where(vals < _CLIP_REL * scale, 0.0, vals)
        a_vals = np.sqrt(vals)

        edge_theory = -gs.E
        if edge_theory <= 0:
            raise SpectralError(f"E = {gs.E:g} >= 0: no continuum edge below zero")
        zero = a_vals <= np.sqrt(_CLIP_REL * scale)
        below_edge = (~zero) & (a_vals < 0.99 * edge_theory)
        n_below = int(np.sum(below_edge))
        if n_below != 1:
            raise SpectralError(
                f"expected one isolated eigenvalue below the continuum edge "
                f"{edge_theory:g}, found {n_below} (two-bound-state setup violated)"
            )
        k_idx = int(np.nonzero(below_edge)[0][0])
        self.kappa = float(a_vals[k_idx])
        rest = a_vals[(~zero) & (np.arange(n) != k_idx)]
        self.continuum_edge = float(np.min(rest))

        self._a_vals = a_vals
        self._a_vecs = vecs
        self._zero_mask = zero
        self._k_idx = k_idx
        cont = ~zero
        cont[k_idx] = False
        self._cont_mask = cont

        # eigenpair of L: u = kappa^(-1/2) B w, v = kappa^(1/2) B^(-1) w,
        # normalized so (u, L_plus u) = kappa, (u, v) = 1, v = L_plus u / kappa
        w_col = vecs[:, k_idx] / np.sqrt(self._phys)   # physical norm 1
        binv = self._hx_func(lambda x: 1.0 / np.sqrt(x))
        u_col = B @ w_col / np.sqrt(self.kappa)
        v_col = np.sqrt(self.kappa) * (binv @ w_col)
        if u_col[0] < 0:   # align with phi1 (positive first lobe)
            u_col, v_col, w_col = -u_col, -v_col, -w_col
        self._u_col = u_col
        self._v_col = v_col
        self._w_col = w_col
        self.u = grid.to_field(u_col)
        self.v = grid.to_field(v_col)
        self.u_plus = 0.5 * (self.u + self.v)
        self.u_minus = 0.5 * (self.u - self.v)
        self.w_vec = grid.to_field(w_col)

        self._B = B
        self._Binv = binv
        self._Lp = l_plus
        self._H = H
        self.conjugation = ConjugationU(
            fwd_re=self._a_func_mat(np.sqrt) @ binv,
            fwd_im=self._a_func_mat(lambda x: 1.0 / np.sqrt(x)) @ B,
            inv_re=B @ self._a_func_mat(lambda x: 1.0 / np.sqrt(x)),
            inv_im=binv @ self._a_func_mat(np.sqrt),
        )

    # -- spectral helpers -------------------------------------------------

    def _hx_func(self, fn):
        """fn(Pi H Pi) on X (zero modes mapped to zero)."""
        vals = self._hx_vals
        out = np.zeros_like(vals)
        pos = vals > 0
        out[pos] = fn(vals[pos])
        return (self._hx_vecs * out) @ self._hx_vecs.T

    def _a_func_mat(self, fn):
        """fn(A) on X as a dense matrix (zero modes mapped to zero)."""
        vals = self._a_vals
        out = np.zeros_like(vals)
        pos = ~self._zero_mask
        out[pos] = fn(vals[pos])
        return (self._a_vecs * out) @ self._a_vecs.T

    def a_apply(self, f, fn, continuum_only: bool = True):
        """Apply fn(A) [P_c^A] to a field; fn may return complex values."""
        x = self.grid.to_reduced(f)
        coeff = self._a_vecs.T @ x
        mask = self._cont_mask if continuum_only else ~self._zero_mask
        vals = fn(self._a_vals[mask])
        out = self._a_vecs[:, mask] @ (vals * coeff[mask])
        return self.grid.to_field(out)

    def continuum_modes(self):
        """(eigenvalues, spectral weights basis) of A restricted to its continuum."""
        return self._a_vals[self._cont_mask], self._a_vecs[:, self._cont_mask]

    def spectral_weights(self, f) -> np.ndarray:
        """Physical-inner-product coefficients (e_k, f) over continuum modes of A."""
        x = self.grid.to_reduced(f)
        return np.sqrt(self._phys) * (self._a_vecs[:, self._cont_mask].T @ x)

    def level_spacing_near(self, energy: float, k_neighbors: int = 8) -> float:
        vals = np.sort(self._a_vals[self._cont_mask])
        j = np.searchsorted(vals, energy)
        lo = max(j - k_neighbors // 2, 0)
        hi = min(lo + k_neighbors, vals.size - 1)
        window = vals[lo : hi + 1]
        return float(np.mean(np.diff(window)))

    # -- projections ------------------------------------------------------

    def project_x(self, f):
        """Remove the Q-component (the projection Pi), complex-linear."""
        x = self.grid.to_reduced(f)
        return self.grid.to_field(x - self.q_hat * (self.q_hat @ x))

    def continuum_project_a(self, f):
        """P_c^A Pi: orthogonal projection onto the continuum of A."""
        x = self.grid.to_reduced(f)
        x = x - self.q_hat * (self.q_hat @ x)
        wv = self._a_vecs[:, self._k_idx]
        x = x - wv * (wv @ x)
        return self.grid.to_field(x)

    def eigen_amplitude(self, h) -> complex:
        """z = (v, Re h) + i (u, Im h), the E_kappa coordinate of h in X."""
        g = self.grid
        return complex(
            g.inner_re(self.v, np.real(h)) + 1j * g.inner_re(self.u, np.imag(h))
        )

    def apply_l(self, h):
        """The linearized generator L h = -i{H h + lam Pi Q^2 Pi (h + conj h)}."""
        g = self.grid
        hx = g.to_reduced(h)
        re2 = 2.0 * np.real(hx)
        re2 = re2 - self.q_hat * (self.q_hat @ re2)
        nl = self.gs.Q**2 * g.to_field(re2)
        nl_x = g.to_reduced(nl)
        nl_x = nl_x - self.q_hat * (self.q_hat @ nl_x)
        return -1j * g.to_field(self._H @ hx + self.gs.lam * nl_x)

    def diagnostics(self) -> dict:
        g = self.grid
        return {
            "kappa": self.kappa,
            "e01": self.gs.pair.e01,
            "continuum_edge": self.continuum_edge,
            "continuum_edge_theory": -self.gs.E,
            "gap_2kappa_into_continuum": 2.0 * self.kappa - self.continuum_edge,
            "norm_u_plus": g.norm(self.u_plus),
            "norm_u_minus": g.norm(self.u_minus),
        }


def build_linearization(gs: GroundState) -> LinearizedSystem:
    """Assemble and spectrally decompose the linearized system at Q_E."""
    return LinearizedSystem(gs)


def project_continuum(sys: LinearizedSystem, f, remove_q: bool = False):
    """Project a field onto H_c(L) = {f1 + i f2 : f1 perp v, f2 perp u}.

    The (non-orthogonal) spectral projection along E_kappa: subtract
    zeta = z u_+ + conj(z) u_- with z the eigen-amplitude of f.  Idempotent.
    """
    if remove_q:
        f = sys.project_x(f)
    z = sys.eigen_amplitude(f)
    return f - (z * sys.u_plus + np.conj(z) * sys.u_minus)
