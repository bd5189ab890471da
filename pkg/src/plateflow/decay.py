"""Exponential decay-rate estimation from norm time series.

The slowest pair of coupling-matrix eigenvalues is complex, so decaying
norm series oscillate under an exponential envelope; alongside a plain
log-linear regression there is therefore an envelope method that
regresses over strict local maxima of the log norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveSamples, WindowTooSmall
from .spectral import ScalarField, laplacian_solve
from .timestepping import Trajectory

FIT_METHODS = ("regression", "envelope")

#: minimum samples inside the window / minimum envelope peaks for a fit
MIN_SAMPLES = 10
MIN_PEAKS = 3


@dataclass
class DecayFit:
    omega_fit: float
    intercept: float
    r2: float
    method: str
    t_lo: float
    t_hi: float
    n_samples: int
    n_peaks: int | None = None
    s_A: float | None = None

    @property
    def rel_gap(self) -> float | None:
        """Relative gap between the fitted rate and the linear bound -s(A)."""
        if self.s_A is None:
            return None
        return abs(self.omega_fit - (-self.s_A)) / abs(self.s_A)


def _log_linear(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 and ss_res <= 1e-30 else 1.0 - ss_res / max(ss_tot, 1e-300)
    return float(slope), float(intercept), float(min(max(r2, 0.0), 1.0))


def strict_local_maxima(values: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima (3-sample window, ties to the earlier sample)."""
    v = np.asarray(values)
    idx = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    return idx


def envelope_peaks(times: np.ndarray, logvals: np.ndarray) -> np.ndarray:
    """Peak indices of the oscillation riding on the exponential trend.

    Peaks are strict local maxima of the detrended log series (log norm
    minus its least-squares line).  Detrending matters: when the decay
    per oscillation period exceeds the oscillation amplitude the raw log
    norm is monotone and carries no maxima of its own, yet the same-phase
    envelope points are still well defined.
    """
    slope, intercept, _ = _log_linear(np.asarray(times), np.asarray(logvals))
    resid = np.asarray(logvals) - (slope * np.asarray(times) + intercept)
    return strict_local_maxima(resid)


def fit_decay(times, values, window: tuple[float, float],
              method: str = "envelope", s_A: float | None = None) -> DecayFit:
    """Fit norm(t) ~ exp(intercept - omega t) inside the window.

    ``regression`` least-squares the log norm directly; ``envelope``
    regresses over its local maxima.  Raises NonPositiveSamples when a
    sample in the window is not strictly positive and WindowTooSmall when
    fewer than 10 samples (or 3 envelope peaks) are available.
    """
    if method not in FIT_METHODS:
        raise ValueError(f"method must be one of {FIT_METHODS}, got {method!r}")
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    t_lo, t_hi = float(window[0]), float(window[1])
    sel = (times >= t_lo) & (times <= t_hi)
    t = times[sel]
    v = values[sel]
    if t.size < MIN_SAMPLES:
        raise WindowTooSmall(
            f"{t.size} samples in window [{t_lo:g}, {t_hi:g}], need >= {MIN_SAMPLES}")
    if np.any(v <= 0.0) or not np.isfinite(v).all():
        raise NonPositiveSamples("decay fits need strictly positive finite norms")
    y = np.log(v)
    n_peaks = None
    if method == "envelope":
        peaks = envelope_peaks(t, y)
        if peaks.size < MIN_PEAKS:
            raise WindowTooSmall(
                f"only {peaks.size} envelope peaks in window, need >= {MIN_PEAKS}")
        n_peaks = int(peaks.size)
        t, y = t[peaks], y[peaks]
    slope, intercept, r2 = _log_linear(t, y)
    return DecayFit(omega_fit=-slope, intercept=intercept, r2=r2, method=method,
                    t_lo=t_lo, t_hi=t_hi, n_samples=int(v.size), n_peaks=n_peaks,
                    s_A=s_A)


def recover_W(traj: Trajectory) -> list[ScalarField]:
    """Deflection fields W(t) from the stored curvature components."""
    return [laplacian_solve(ScalarField(traj.grid, traj.states[i][0], "spectral"))
            for i in range(len(traj))]


def decay_prefactor(times, norm_series, omega: float, norm0: float,
                    sigma: float) -> float:
    """Smallest C with norm(t) <= C * exp(-omega t) * norm0 for t >= sigma."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(norm_series, dtype=float)
    sel = times >= sigma
    if not np.any(sel):
        raise WindowTooSmall(f"no samples at or beyond sigma = {sigma}")
    return float(np.max(series[sel] * np.exp(omega * times[sel])) / norm0)
