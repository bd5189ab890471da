"""Discrete norms, weighted time norms, and the regime hypothesis checker.

Fractional smoothness is measured with the spectral Bessel-potential
surrogate: the coefficient field is multiplied by (1 + lam_k)^(s/2) and
the result is measured in L_p by nodal quadrature.  At p = 2 this is the
exact spectrally defined H^s norm; for other p it is a documented,
monotone surrogate (decay fits use log-slopes, which are insensitive to
norm equivalence constants).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InadmissibleParams
from .spectral import (PHYSICAL, SPECTRAL, Grid, ScalarField, SpectralState,
                       dst_inverse)


@dataclass(frozen=True)
class HypothesisParams:
    """Parameter bundle (n, p, mu, omega, a) for the decay theory."""

    n: int = 1
    p: float = 2.0
    mu: float = 1.0
    omega: float = 0.0
    a: float = 1.0

    def __post_init__(self):
        if self.n not in (1, 2):
            raise InadmissibleParams(f"n must be 1 or 2, got {self.n}")
        if not (1.0 < self.p):
            raise InadmissibleParams(f"p must lie in (1, inf), got {self.p}")
        if not (0.0 < self.mu <= 1.0):
            raise InadmissibleParams(f"mu must lie in (0, 1], got {self.mu}")
        if self.omega < 0.0:
            raise InadmissibleParams(f"omega must be >= 0, got {self.omega}")
        if self.a <= 0.0:
            raise InadmissibleParams(f"material constant a must be > 0, got {self.a}")

    @property
    def trace_smoothness(self) -> float:
        """s = 2(mu - 1/p), the Sobolev order of the trace space."""
        return 2.0 * (self.mu - 1.0 / self.p)


# NormKind selectors
LP = "lp"
SOBOLEV = "sobolev"
TRACE = "trace"          # X_{p,mu} surrogate, s = 2(mu - 1/p)
TRACE_MU1 = "trace_mu1"  # X_p surrogate, s = 2(1 - 1/p)


def lp_norm(f: ScalarField, p: float) -> float:
    """Nodal-quadrature L_p norm; p = inf gives the nodal max."""
    if p != np.inf and p < 1.0:
        raise InadmissibleParams(f"p must be >= 1 or inf, got {p}")
    vals = dst_inverse(f).data if f.rep == SPECTRAL else f.data
    if p == np.inf:
        return float(np.max(np.abs(vals)))
    w = f.grid.quad_weight
    return float((w * np.sum(np.abs(vals) ** p)) ** (1.0 / p))


def sobolev_multiplier(grid: Grid, s: float) -> np.ndarray:
    return (1.0 + grid.lam) ** (s / 2.0)


def sobolev_norm(f: ScalarField, s: float, p: float) -> float:
    """Bessel-potential surrogate norm of smoothness order s in [0, 2]."""
    if f.rep != SPECTRAL:
        raise InadmissibleParams("sobolev_norm expects a spectral field")
    if not (0.0 <= s <= 2.0):
        raise InadmissibleParams(f"smoothness order must lie in [0, 2], got {s}")
    if s == 0.0:
        return lp_norm(f, p)
    weighted = ScalarField(f.grid, sobolev_multiplier(f.grid, s) * f.data, SPECTRAL)
    return lp_norm(weighted, p)


def _component_smoothness(kind: str, params: HypothesisParams, s: float | None) -> float:
    if kind == LP:
        return 0.0
    if kind == SOBOLEV:
        if s is None:
            raise InadmissibleParams("sobolev kind needs an explicit order s")
        return float(s)
    if kind == TRACE:
        if params.mu * params.p <= 1.0:
            raise InadmissibleParams(
                f"trace norm needs mu*p > 1, got mu*p = {params.mu * params.p}")
        return params.trace_smoothness
    if kind == TRACE_MU1:
        return 2.0 * (1.0 - 1.0 / params.p)
    raise InadmissibleParams(f"unknown norm kind {kind!r}")


def state_norm(x: SpectralState, kind: str, params: HypothesisParams,
               s: float | None = None) -> float:
    """l_p combination over the three components of the component norms."""
    order = _component_smoothness(kind, params, s)
    comps = [sobolev_norm(ScalarField(x.grid, c, SPECTRAL), order, params.p)
             for c in x.coeffs]
    if params.p == np.inf:
        return float(max(comps))
    return float(np.sum(np.asarray(comps) ** params.p) ** (1.0 / params.p))


def state_norm_series(coeff_paths: np.ndarray, grid: Grid, params: HypothesisParams,
                      kind: str = TRACE) -> np.ndarray:
    """Vectorized p = 2 trace/Sobolev norms along a path (nt, 3, ...).

    Fast path used by the fixed-point solvers; falls back to the generic
    per-sample routine when p != 2.
    """
    order = _component_smoothness(kind, params, None)
    if params.p == 2.0:
        mult2 = sobolev_multiplier(grid, order) ** 2
        flat = coeff_paths.reshape(coeff_paths.shape[0], 3, -1)
        sq = np.einsum("tcm,m->t", flat ** 2, mult2.reshape(-1))
        return np.sqrt(grid.parseval * sq)
    out = np.empty(coeff_paths.shape[0])
    for i in range(coeff_paths.shape[0]):
        out[i] = state_norm(SpectralState(grid, coeff_paths[i]), kind, params)
    return out


def weighted_time_norm(times: np.ndarray, values: np.ndarray, mu: float, p: float,
                       omega: float = 0.0) -> float:
    """Trapezoid quadrature of the weighted time norm

        ( integral e^(omega p t) t^((1-mu) p) v(t)^p dt )^(1/p).

    For mu < 1 the weight vanishes at t = 0, so the first sample drops
    out of the quadrature on its own (open-left trapezoid).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < 2:
        raise InadmissibleParams("need at least 2 samples in time")
    if not (0.0 < mu <= 1.0) or p < 1.0:
        raise InadmissibleParams(f"need mu in (0,1] and p >= 1, got mu={mu}, p={p}")
    expo = (1.0 - mu) * p
    with np.errstate(divide="ignore"):
        weight = np.exp(omega * p * times) * np.power(times, expo)
    integrand = weight * np.abs(values) ** p
    return float(np.trapezoid(integrand, times) ** (1.0 / p))


def shifted_norm_series(times: np.ndarray, values: np.ndarray, omega: float) -> np.ndarray:
    """Exponentially shifted diagnostic series e^(omega t) * v(t)."""
    return np.exp(omega * np.asarray(times, dtype=float)) * np.asarray(values, dtype=float)


@dataclass
class HypothesisReport:
    """Pure pass/fail record of the regime predicates for one parameter set."""

    params: HypothesisParams
    small_data_p: bool
    small_data_mu: bool
    large_data_p: bool
    large_data_mu: bool
    monotone_required_note: str
    omega_admissible: bool
    omega_max: float
    mu_p_boundary: bool

    @property
    def small_data_ok(self) -> bool:
        return self.small_data_p and self.small_data_mu

    @property
    def large_data_ok(self) -> bool:
        return self.large_data_p and self.large_data_mu

    def table(self) -> str:
        q = self.params
        rows = [
            ("small-data regime: p > 1 + n/2",
             f"p = {q.p:g} vs {1 + q.n / 2:g}", self.small_data_p),
            ("small-data regime: mu in ((n+2)/(2p), 1]",
             f"mu = {q.mu:g} vs ({(q.n + 2) / (2 * q.p):g}, 1]", self.small_data_mu),
            ("large-data regime: p > (n+4)/2",
             f"p = {q.p:g} vs {(q.n + 4) / 2:g}", self.large_data_p),
            ("large-data regime: mu in ((n+4)/(4p)+1/2, 1]",
             f"mu = {q.mu:g} vs ({(q.n + 4) / (4 * q.p) + 0.5:g}, 1]", self.large_data_mu),
            ("decay shift: omega < -s(A)",
             f"omega = {q.omega:g} vs {self.omega_max:g}", self.omega_admissible),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{name:<{width}}  {detail:<28} {'PASS' if ok else 'FAIL'}"
                 for name, detail, ok in rows]
        if self.mu_p_boundary:
            lines.append("note: mu*p = 3/2 sits on the trace-space case split; "
                         "no space is assigned at the boundary")
        if self.large_data_ok:
            lines.append("note: " + self.monotone_required_note)
        return "\n".join(lines)


def check_hypotheses(params: HypothesisParams, grid: Grid,
                     omega_max: float | None = None) -> HypothesisReport:
    """Evaluate both regime predicates; never raises.

    Strict inequalities are enforced strictly (equality fails).  The
    admissible decay window may be passed in; otherwise it is computed
    from the default coupling matrix on the given grid.
    """
    if omega_max is None:
        from .operators import CouplingMatrix, spectral_bound
        omega_max = spectral_bound(CouplingMatrix(), grid).omega_max
    n, p, mu = params.n, params.p, params.mu
    report = HypothesisReport(
        params=params,
        small_data_p=p > 1.0 + n / 2.0,
        small_data_mu=(n + 2.0) / (2.0 * p) < mu <= 1.0,
        large_data_p=p > (n + 4.0) / 2.0,
        large_data_mu=(n + 4.0) / (4.0 * p) + 0.5 < mu <= 1.0,
        monotone_required_note=("the large-data short-time regime additionally "
                                "requires a monotone nonlinearity (phi' >= 0)"),
        omega_admissible=0.0 <= params.omega < omega_max,
        omega_max=float(omega_max),
        mu_p_boundary=bool(abs(mu * p - 1.5) < 1e-12),
    )
    return report
