"""nlslab: a numerical laboratory for soliton relaxation in radial NLS.

Builds the nonlinear ground-state branch of i dpsi/dt = (-Delta + V) psi
+ lambda |psi|^2 psi, the non-self-adjoint linearization around it together
with its self-adjoint conjugate, the golden-rule decay constant Gamma, and
the soliton-frame bookkeeping needed to watch a full PDE run relax either
through the resonance channel ({t}^-1/2) or the radiation channel (t^-3/2).
"""

__version__ = "0.1.0"
