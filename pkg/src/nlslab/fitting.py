"""Log-log decay-exponent fits used by probes and experiment post-processing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError

MIN_DECADES = 1.5


@dataclass(frozen=True)
class DecayFit:
    """Power-law fit series ~ prefactor * x^exponent over [window_lo, window_hi]."""

    exponent: float
    prefactor: float
    window_lo: float
    window_hi: float
    rms_residual: float   # in log10 units
    n_points: int

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "window": [self.window_lo, self.window_hi],
            "rms_residual": self.rms_residual,
            "n_points": self.n_points,
        }


def fit_decay(x, y, window=None, min_decades: float = MIN_DECADES) -> DecayFit:
    """Least-squares line in log-log over the window.

    Refuses windows spanning fewer than min_decades decades and nonpositive
    data inside the window; the residual is reported, never hidden.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if window is not None:
        mask = (x >= window[0]) & (x <= window[1])
    else:
        mask = np.ones(x.shape, dtype=bool)
    mask &= x > 0
    xs, ys = x[mask], y[mask]
    if xs.size < 4:
        raise FitError(f"only {xs.size} samples in fit window")
    span = np.log10(xs.max() / xs.min())
    if span < min_decades:
        raise FitError(
            f"fit window spans {span:.2f} decades, need >= {min_decades}"
        )
    if np.any(ys <= 0):
        raise FitError("nonpositive values inside the fit window")
    lx, ly = np.log10(xs), np.log10(ys)
    coeff = np.polyfit(lx, ly, 1)
    resid = ly - np.polyval(coeff, lx)
    return DecayFit(
        exponent=float(coeff[0]),
        prefactor=float(10.0 ** coeff[1]),
        window_lo=float(xs.min()),
        window_hi=float(xs.max()),
        rms_residual=float(np.sqrt(np.mean(resid**2))),
        n_points=int(xs.size),
    )


def envelope_series(t, y, block: float):
    """Blockwise running maxima of |y|; the natural series for an envelope fit
    of an oscillating decaying signal (block should cover >= one period)."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y))
    if t.size == 0:
        return t, y
    edges = np.arange(t[0], t[-1] + block, block)
    tt, yy = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (t >= lo) & (t < hi)
        if np.any(m):
            j = np.argmax(y[m])
            tt.append(t[m][j])
            yy.append(y[m][j])
    return np.asarray(tt), np.asarray(yy)
