"""Time integration of the radial NLS with an optional absorbing layer.

Strang splitting: half-step of the diagonal phase exp(-i(V - E0 + lam
|psi|^2) dt/2), exact kinetic step by sine-transform diagonalization of the
reduced-wave Laplacian, half-step phase.  The kinetic sub-flow uses the
eigenvalues of the *discrete* Dirichlet Laplacian, so the stepper is exactly
consistent with the operator the ground-state solver used; the scheme is
unconditionally stable and conserves the discrete mass to roundoff when the
absorbing layer is off.

A complex absorbing potential (CAP) W(r) ramps up polynomially near r_max and
is applied as exp(-W dt), emulating radiation escaping to infinity; its
reflection error is measured by the tests, not assumed.  A global phase gauge
exp(+i E0 t) can be factored out (shifting V by -E0) to slow phase wind-up in
stored snapshots; observers account for it through meta["gauge_e0"].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dst

from .errors import ConfigurationError, IntegrationError
from .grid import RadialGrid
from .kernels import nonlinear_phase


@dataclass(frozen=True)
class CapSpec:
    """Absorbing layer W(r) = strength * ((r - start)/(r_max - start))^power."""

    start_radius: float
    strength: float = 0.08
    power: float = 3.0

    def values(self, grid: RadialGrid) -> np.ndarray:
        if not (0 < self.start_radius < grid.r_max):
            raise ConfigurationError(
                f"CAP start radius {self.start_radius} outside (0, {grid.r_max})"
            )
        if self.strength < 0:
            raise ConfigurationError("CAP strength must be >= 0")
        ramp = np.clip((grid.r - self.start_radius) / (grid.r_max - self.start_radius), 0.0, None)
        return self.strength * ramp**self.power


@dataclass(frozen=True)
class FieldState:
    t: float
    psi: np.ndarray = field(repr=False)
    meta: dict = field(default_factory=dict)


class Physics:
    """Problem data (grid, potential, coupling, CAP, gauge) plus stepper cache."""

    def __init__(self, grid: RadialGrid, v_values: np.ndarray, lam: float,
                 cap: CapSpec | None = None, gauge_e0: float = 0.0):
        self.grid = grid
        self.v = np.asarray(v_values, dtype=float)
        self.lam = float(lam)
        self.cap = cap
        self.gauge_e0 = float(gauge_e0)
        self.v_eff = self.v - self.gauge_e0
        self.cap_w = cap.values(grid) if cap is not None else None
        n = grid.n
        m = np.arange(1, n + 1)
        self._kin_eig = (2.0 - 2.0 * np.cos(np.pi * m / (n + 1))) / grid.dr**2
        self._dst_norm = 1.0 / (2.0 * (n + 1))
        self._stepper_cache: dict = {}

    def _phases(self, dt: float):
        key = float(dt)
        cached = self._stepper_cache.get(key)
        if cached is None:
            kin_phase = np.exp(-1j * dt * self._kin_eig) * self._dst_norm
            cap_decay = None
            if self.cap_w is not None:
                cap_decay = np.exp(-0.5 * dt * self.cap_w)
            cached = (kin_phase, cap_decay)
            self._stepper_cache[key] = cached
        return cached

    def dt_accuracy_bound(self, psi) -> float:
        """Accuracy guideline dt <= 0.1 / max|V_eff + lam |psi|^2|."""
        scale = np.max(np.abs(self.v_eff + self.lam * np.abs(psi) ** 2))
        return 0.1 / max(scale, 1e-300)


def step(state: FieldState, dt: float, physics: Physics) -> FieldState:
    """One Strang split step (phase half, exact kinetic, phase half)."""
    kin_phase, cap_decay = physics._phases(dt)
    r = physics.grid.r
    psi = state.psi.copy()
    nonlinear_phase(psi, physics.v_eff, physics.lam, 0.5 * dt, cap_decay)
    u = dst(r * psi, type=1)
    u *= kin_phase
    u = dst(u, type=1)
    psi = u / r
    nonlinear_phase(psi, physics.v_eff, physics.lam, 0.5 * dt, cap_decay)
    if not np.isfinite(psi[0]) or not np.isfinite(np.abs(psi).max()):
        raise IntegrationError(f"non-finite field at t={state.t + dt:g}", last_state=state)
    return FieldState(t=state.t + dt, psi=psi, meta=state.meta)


def evolve(
    state: FieldState,
    T: float,
    dt: float,
    physics: Physics,
    observers=(),
    stride: int = 1,
    check_every: int = 200,
) -> FieldState:
    """Advance to time state.t + T, invoking observers every `stride` steps.

    Observers are callables (t, psi) -> None and must not mutate psi.  On a
    non-finite field the last checked state is attached to the error.
    """
    n_steps = int(round(T / dt))
    kin_phase, cap_decay = physics._phases(dt)
    r = physics.grid.r
    psi = state.psi.astype(np.complex128, copy=True)
    t0 = state.t
    for obs in observers:
        obs(t0, psi)
    last_good = (t0, psi.copy())
    for s in range(1, n_steps + 1):
        nonlinear_phase(psi, physics.v_eff, physics.lam, 0.5 * dt, cap_decay)
        u = dst(r * psi, type=1)
        u *= kin_phase
        u = dst(u, type=1)
        psi = u / r
        nonlinear_phase(psi, physics.v_eff, physics.lam, 0.5 * dt, cap_decay)
        t = t0 + s * dt
        if s % check_every == 0:
            if not np.isfinite(np.abs(psi).max()):
                raise IntegrationError(
                    f"non-finite field at t={t:g}",
                    last_state=FieldState(t=last_good[0], psi=last_good[1], meta=state.meta),
                )
            last_good = (t, psi.copy())
        if s % stride == 0:
            for obs in observers:
                obs(t, psi)
    if not np.isfinite(np.abs(psi).max()):
        raise IntegrationError(
            f"non-finite field at t={t0 + n_steps * dt:g}",
            last_state=FieldState(t=last_good[0], psi=last_good[1], meta=state.meta),
        )
    return FieldState(t=t0 + n_steps * dt, psi=psi, meta=state.meta)


def conserved_quantities(state: FieldState, physics: Physics) -> dict:
    """Discrete mass and the energy functional
    H[psi] = int 1/2 |grad psi|^2 + 1/2 V |psi|^2 + 1/4 lam |psi|^4."""
    g = physics.grid
    psi = state.psi
    mass = float(np.real(g.inner(psi, psi)))
    lap = g.laplacian(psi)
    kinetic = 0.5 * float(np.real(g.inner(psi, -lap)))
    potential = 0.5 * float(np.sum(g.w * physics.v * np.abs(psi) ** 2))
    quartic = 0.25 * physics.lam * float(np.sum(g.w * np.abs(psi) ** 4))
    return {"mass": mass, "energy": kinetic + potential + quartic}


def soliton_state(gs, phase: float = 0.0) -> FieldState:
    """Exact stationary initial state psi0 = Q_E e^{i phase}."""
    return FieldState(t=0.0, psi=gs.Q.astype(np.complex128) * np.exp(1j * phase),
                      meta={"E": gs.E})
