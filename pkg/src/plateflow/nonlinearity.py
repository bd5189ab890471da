"""Nonlinearity families and the two evaluation routes for the coupling term.

The model nonlinearity acts on the curvature variable Z only.  It can be
evaluated either directly (the "semilinear" route: transform, apply phi
pointwise, transform back, push through the generator rows) or through
the product-rule split

    lap(phi(u)) = phi'(u) lap(u) + phi''(u) |grad u|^2,

which separates a principal-part perturbation from a lower-order forcing
term.  Both routes agree up to discretization; the split is what the
frozen-coefficient solver iterates on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BlowUp, InadmissiblePhi
from .spectral import (PHYSICAL, SPECTRAL, ScalarField, SpectralState,
                       axis_derivatives, dealias, dst_forward, dst_inverse)

PHI_KINDS = ("zero", "cubic", "odd_power", "smoothed_cubic")

#: nodal overflow guard: |phi(Z)| beyond this raises BlowUp
DEFAULT_GUARD = 1e12


@dataclass(frozen=True)
class PhiModel:
    """Closed-form nonlinearity with consistent first and second derivatives.

    ``antiderivative`` (the primitive with value 0 at 0) is carried along
    because the energy functional integrates it.
    """

    kind: str
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    d2phi: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]
    m: int = 3

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def __repr__(self):
        extra = f", m={self.m}" if self.kind == "odd_power" else ""
        return f"PhiModel({self.kind!r}{extra})"


def phi_model(kind: str, m: int = 3) -> PhiModel:
    """Build one of the supported nonlinearity families."""
    if kind == "zero":
        return PhiModel("zero",
                        phi=lambda s: np.zeros_like(s),
                        dphi=lambda s: np.zeros_like(s),
                        d2phi=lambda s: np.zeros_like(s),
                        antiderivative=lambda s: np.zeros_like(s))
    # odd factors are written as s * (even in s) so that negating the
    # argument negates the value bit for bit
    if kind == "cubic":
        return PhiModel("cubic",
                        phi=lambda s: s * (s * s),
                        dphi=lambda s: 3.0 * (s * s),
                        d2phi=lambda s: 6.0 * s,
                        antiderivative=lambda s: 0.25 * (s * s) * (s * s))
    if kind == "odd_power":
        if m < 3 or m % 2 == 0:
            raise ValueError(f"odd_power requires odd m >= 3, got {m}")
        half = (m - 1) // 2
        return PhiModel("odd_power",
                        phi=lambda s: s * (s * s) ** half,
                        dphi=lambda s: m * (s * s) ** half,
                        d2phi=lambda s: m * (m - 1.0) * s * (s * s) ** (half - 1),
                        antiderivative=lambda s: (s * s) ** (half + 1) / (m + 1.0),
                        m=m)
    if kind == "smoothed_cubic":
        return PhiModel("smoothed_cubic",
                        phi=lambda s: s * (s * s) / (1.0 + s * s),
                        dphi=lambda s: ((s * s) * (s * s) + 3.0 * (s * s))
                        / (1.0 + s * s) ** 2,
                        d2phi=lambda s: 2.0 * s * (3.0 - s * s) / (1.0 + s * s) ** 3,
                        antiderivative=lambda s: 0.5 * (s * s) - 0.5 * np.log1p(s * s))
    raise ValueError(f"unknown nonlinearity kind {kind!r}; choose from {PHI_KINDS}")


@dataclass
class AdmissibilityReport:
    kind: str
    value_at_zero: float
    slope_at_zero: float
    curvature_at_zero: float
    zero_conditions_pass: bool
    derivative_consistent: bool
    max_derivative_mismatch: float
    monotone: bool

    @property
    def ok(self) -> bool:
        return self.zero_conditions_pass and self.derivative_consistent

    def __str__(self):
        flags = (f"phi(0)={self.value_at_zero:.2e}, phi'(0)={self.slope_at_zero:.2e}, "
                 f"phi''(0)={self.curvature_at_zero:.2e}, "
                 f"zero-conditions={'pass' if self.zero_conditions_pass else 'FAIL'}, "
                 f"derivatives={'consistent' if self.derivative_consistent else 'INCONSISTENT'}"
                 f" (max mismatch {self.max_derivative_mismatch:.2e}), "
                 f"monotone={self.monotone}")
        return f"{self.kind}: {flags}"


def validate_phi(model: PhiModel, rng=None, raise_on_fail: bool = True) -> AdmissibilityReport:
    """Check the origin conditions, derivative consistency, and monotonicity.

    The slope/curvature evaluators are compared against central finite
    differences at 100 random points of [-2, 2]; the mismatch is measured
    relative to the family's derivative scale on that interval, since the
    admissibility conditions force zeros of the derivatives at the origin.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    z = np.zeros(1)
    v0 = float(model.phi(z)[0])
    d0 = float(model.dphi(z)[0])
    dd0 = float(model.d2phi(z)[0])
    zero_ok = max(abs(v0), abs(d0), abs(dd0)) <= 1e-14

    s = rng.uniform(-2.0, 2.0, size=100)
    step = 6e-6 * (1.0 + np.abs(s))
    fd1 = (model.phi(s + step) - model.phi(s - step)) / (2.0 * step)
    fd2 = (model.dphi(s + step) - model.dphi(s - step)) / (2.0 * step)
    scale1 = max(float(np.max(np.abs(model.dphi(s)))), 1e-30)
    scale2 = max(float(np.max(np.abs(model.d2phi(s)))), 1e-30)
    mis1 = float(np.max(np.abs(fd1 - model.dphi(s)))) / scale1
    mis2 = float(np.max(np.abs(fd2 - model.d2phi(s)))) / scale2
    if model.is_zero:
        mis1 = mis2 = 0.0
    consistent = max(mis1, mis2) <= 1e-6

    grid = np.linspace(-10.0, 10.0, 2001)
    monotone = bool(np.all(model.dphi(grid) >= 0.0))

    report = AdmissibilityReport(
        kind=model.kind, value_at_zero=v0, slope_at_zero=d0, curvature_at_zero=dd0,
        zero_conditions_pass=zero_ok, derivative_consistent=consistent,
        max_derivative_mismatch=max(mis1, mis2), monotone=monotone)
    if raise_on_fail and not report.ok:
        raise InadmissiblePhi(report)
    return report


def _guarded_nodal_phi(model: PhiModel, z_nodal: np.ndarray, t: float,
                       guard: float) -> np.ndarray:
    vals = model.phi(z_nodal)
    if not np.isfinite(vals).all() or np.max(np.abs(vals)) > guard:
        raise BlowUp(t, "nodal nonlinearity exceeded the overflow guard")
    return vals


def eval_semilinear(state: SpectralState, model: PhiModel, a: float,
                    dealias_products: bool = True,
                    guard: float = DEFAULT_GUARD) -> SpectralState:
    """Increment from the direct route: (0, -a*lap(phi(Z)), 0).

    The coefficients of Z are truncated by the 2/3 rule before the
    pointwise evaluation so the cubic frequency tripling cannot fold
    back onto the retained band.
    """
    zc = state.z
    if dealias_products:
        zc = dealias(zc)
    z_nodal = dst_inverse(zc).data
    vals = _guarded_nodal_phi(model, z_nodal, state.t, guard)
    phi_hat = dst_forward(ScalarField(state.grid, vals, PHYSICAL)).data
    out = np.zeros_like(state.coeffs)
    # -a * lap in spectral form is +a * lam_k on each coefficient
    out[1] = a * state.grid.lam * phi_hat
    return SpectralState(state.grid, out, state.t)


def _as_nodal(v, grid) -> np.ndarray:
    if isinstance(v, ScalarField):
        if v.grid != grid:
            raise ValueError("V must live on the state's grid")
        return v.data
    v = np.asarray(v, dtype=float)
    if v.shape != grid.shape:
        raise ValueError("nodal V has the wrong shape")
    return v


def eval_quasilinear(state: SpectralState, V, model: PhiModel, a: float,
                     dealias_products: bool = True,
                     guard: float = DEFAULT_GUARD) -> tuple[SpectralState, SpectralState]:
    """Split route: principal part B(V)x and forcing f(V, x).

    B(V)x has second component -a * phi'(V) * lap(Z); f(V, x) has second
    component -a * phi''(V) * (grad V . grad Z); the other components
    vanish.  V may be a ScalarField in either representation or a plain
    nodal array.
    """
    grid = state.grid
    if isinstance(V, ScalarField) and V.rep == SPECTRAL:
        v_spec = dealias(V) if dealias_products else V
        v_nodal = dst_inverse(v_spec).data
    else:
        v_nodal = _as_nodal(V, grid)
        v_spec = dst_forward(ScalarField(grid, v_nodal, PHYSICAL))
        if dealias_products:
            v_spec = dealias(v_spec)
    if not np.isfinite(v_nodal).all() or np.max(np.abs(v_nodal), initial=0.0) > guard:
        raise BlowUp(state.t, "frozen coefficient exceeded the overflow guard")

    zc = state.z
    if dealias_products:
        zc = dealias(zc)
    lap_z_nodal = dst_inverse(ScalarField(grid, -grid.lam * zc.data, SPECTRAL)).data
    dphi_v = model.dphi(v_nodal)
    b_nodal = -a * dphi_v * lap_z_nodal

    grad_v = axis_derivatives(v_spec)
    grad_z = axis_derivatives(zc)
    dot = np.zeros(grid.shape)
    for gv, gz in zip(grad_v, grad_z):
        dot += gv * gz
    f_nodal = -a * model.d2phi(v_nodal) * dot

    b_out = np.zeros_like(state.coeffs)
    f_out = np.zeros_like(state.coeffs)
    b_out[1] = dst_forward(ScalarField(grid, b_nodal, PHYSICAL)).data
    f_out[1] = dst_forward(ScalarField(grid, f_nodal, PHYSICAL)).data
    return (SpectralState(grid, b_out, state.t),
            SpectralState(grid, f_out, state.t))
