"""Time propagation of the coupled system with exponential and IMEX steppers.

The linear flow is applied exactly through cached per-mode matrix
exponentials, so the exponential schemes (exponential Euler, two-stage
exponential Runge-Kutta) reduce to the exact semigroup whenever the
nonlinearity vanishes.  A Crank-Nicolson/Adams-Bashforth IMEX stepper is
included for cross-checks; being a rational approximation it is *not*
exact on the linear part.

Stepping is sequential in time; all per-mode work uses fixed-order numpy
reductions so repeated runs are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUp
from .nonlinearity import DEFAULT_GUARD, PhiModel
from .norms import (TRACE, TRACE_MU1, HypothesisParams, state_norm)
from .operators import ModeBlocks, apply_blocks
from .spectral import Grid, SpectralState, batch_to_nodal, batch_to_spectral

METHODS = ("exp_euler", "etdrk2", "imex_cn")


@dataclass
class StepperConfig:
    method: str = "etdrk2"
    h: float = 1e-3
    T: float = 1.0
    dealias: bool = True
    guard: float = DEFAULT_GUARD
    store_every: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.h <= 0 or self.T <= 0:
            raise ValueError("h and T must be > 0")
        steps = self.T / self.h
        if not (1.0 - 1e-9 <= steps <= 1e7):
            raise ValueError(f"T/h = {steps:g} outside the supported range [1, 1e7]")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))


@dataclass
class Trajectory:
    """Stored (t, state) samples plus per-sample diagnostics.

    ``diag`` maps column names (E, D, l2_Z, l2_U, l2_Theta, norm_Xpmu,
    norm_Xp) to arrays aligned with ``times``; ``status`` is one of
    completed / blowup / diverged.
    """

    grid: Grid
    times: np.ndarray
    states: np.ndarray                      # (n_stored, 3) + grid.shape
    diag: dict = field(default_factory=dict)
    status: str = "completed"
    blow_time: float | None = None
    contraction_factors: list = field(default_factory=list)
    inner_factors: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time stamps must be strictly increasing")
        for name, col in self.diag.items():
            if len(col) != len(self.times):
                raise ValueError(f"diagnostic column {name!r} misaligned with times")

    def __len__(self):
        return len(self.times)

    def state_at(self, i: int) -> SpectralState:
        return SpectralState(self.grid, self.states[i].copy(), float(self.times[i]))

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def norm_series(self, kind: str, params: HypothesisParams) -> np.ndarray:
        from .norms import state_norm_series
        return state_norm_series(self.states, self.grid, params, kind=kind)

    def weighted_time_norm(self, mu: float, p: float, omega: float = 0.0,
                           kind: str = TRACE,
                           params: HypothesisParams | None = None) -> float:
        """Weighted time norm of the stored state-norm series."""
        from .norms import weighted_time_norm
        if params is None:
            params = HypothesisParams(n=self.grid.n, p=p, mu=mu)
        return weighted_time_norm(self.times, self.norm_series(kind, params),
                                  mu=mu, p=p, omega=omega)


def make_nonlinearity(grid: Grid, model: PhiModel, a: float,
                      dealias: bool = True, guard: float = DEFAULT_GUARD):
    """Increment operator N(x) = (0, -a*lap(phi(Z)), 0) on raw coefficients.

    Returns None for the zero nonlinearity so steppers can skip the work.
    """
    if model.is_zero:
        return None
    mask = grid.dealias_mask
    lam = grid.lam

    def nonlin(coeffs: np.ndarray, t: float) -> np.ndarray:
        zc = coeffs[0] * mask if dealias else coeffs[0]
        z_nodal = batch_to_nodal(zc, grid)
        vals = model.phi(z_nodal)
        if not np.isfinite(vals).all() or np.max(np.abs(vals)) > guard:
            raise BlowUp(t, "nodal nonlinearity exceeded the overflow guard")
        out = np.zeros_like(coeffs)
        out[1] = a * lam * batch_to_spectral(vals, grid)
        return out

    return nonlin


def _step_exp_euler(coeffs, blocks, nonlin, t, h):
    lin = blocks.apply_exp(coeffs)
    if nonlin is None:
        return lin
    return lin + h * apply_blocks(blocks.phi1, nonlin(coeffs, t))


def _step_etdrk2(coeffs, blocks, nonlin, t, h):
    if nonlin is None:
        return blocks.apply_exp(coeffs)
    n0 = nonlin(coeffs, t)
    stage = blocks.apply_exp(coeffs) + h * apply_blocks(blocks.phi1, n0)
    n1 = nonlin(stage, t + h)
    return stage + h * apply_blocks(blocks.phi2, n1 - n0)


class _ImexBlocks:
    """Per-mode Crank-Nicolson propagator and source weight."""

    def __init__(self, grid: Grid, m: np.ndarray, h: float):
        lam_flat = grid.lam.reshape(-1)
        uniq, inverse = np.unique(lam_flat, return_inverse=True)
        eye = np.eye(3)
        half = 0.5 * h * (-uniq[:, None, None] * m[None, :, :])
        inv = np.linalg.inv(eye[None] - half)
        self.prop = (inv @ (eye[None] + half))[inverse]
        self.src = inv[inverse]


def step_exp_euler(x: SpectralState, h: float, model: PhiModel, a: float,
                   M=None, dealias: bool = True,
                   guard: float = DEFAULT_GUARD) -> SpectralState:
    """One exponential-Euler step x+ = e^(hA) x + h phi1(hA) N(x)."""
    blocks = ModeBlocks(x.grid, M=M, h=h)
    nonlin = make_nonlinearity(x.grid, model, a, dealias, guard)
    out = _step_exp_euler(x.coeffs, blocks, nonlin, x.t, h)
    return SpectralState(x.grid, out, x.t + h)


def step_etdrk2(x: SpectralState, h: float, model: PhiModel, a: float,
                M=None, dealias: bool = True,
                guard: float = DEFAULT_GUARD) -> SpectralState:
    """One two-stage exponential step (observed order 2)."""
    blocks = ModeBlocks(x.grid, M=M, h=h)
    nonlin = make_nonlinearity(x.grid, model, a, dealias, guard)
    out = _step_etdrk2(x.coeffs, blocks, nonlin, x.t, h)
    return SpectralState(x.grid, out, x.t + h)


class DiagnosticsComputer:
    """Per-sample energy, dissipation, and norm columns.

    The energy is E = (|Z|^2 + |U|^2 + |Theta|^2)_L2 / 2 + a * int Phi(Z)
    with Phi the primitive of phi; its decay rate is the thermal
    dissipation D = |grad Theta|^2_L2.
    """

    COLUMNS = ("E", "D", "l2_Z", "l2_U", "l2_Theta", "norm_Xpmu", "norm_Xp")

    def __init__(self, grid: Grid, model: PhiModel, a: float,
                 params: HypothesisParams):
        self.grid = grid
        self.model = model
        self.a = a
        self.params = params
        from .norms import sobolev_multiplier
        self._fast = params.p == 2.0
        if self._fast:
            self._m_pmu = sobolev_multiplier(grid, params.trace_smoothness) ** 2
            self._m_p1 = sobolev_multiplier(grid, 2.0 * (1.0 - 1.0 / params.p)) ** 2

    def compute(self, coeffs: np.ndarray) -> tuple[float, ...]:
        g = self.grid
        sq = coeffs ** 2
        comp_l2sq = g.parseval * sq.reshape(3, -1).sum(axis=1)
        energy = 0.5 * float(comp_l2sq.sum())
        if not self.model.is_zero:
            z_nodal = batch_to_nodal(coeffs[0], g)
            energy += self.a * g.quad_weight * float(
                np.sum(self.model.antiderivative(z_nodal)))
        dissipation = g.parseval * float(np.sum(g.lam * sq[2]))
        l2 = np.sqrt(comp_l2sq)
        if self._fast:
            n_pmu = float(np.sqrt(g.parseval * np.sum(self._m_pmu * sq.sum(axis=0))))
            n_p1 = float(np.sqrt(g.parseval * np.sum(self._m_p1 * sq.sum(axis=0))))
        else:
            st = SpectralState(g, coeffs)
            n_pmu = state_norm(st, TRACE, self.params)
            n_p1 = state_norm(st, TRACE_MU1, self.params)
        return (energy, dissipation, float(l2[0]), float(l2[1]), float(l2[2]),
                n_pmu, n_p1)


def integrate(x0: SpectralState, model: PhiModel, a: float, cfg: StepperConfig,
              M=None, params: HypothesisParams | None = None) -> Trajectory:
    """March the system from x0 to T, recording diagnostics at the store stride.

    Overflow never surfaces as NaN: the step raises an overflow error,
    which truncates the trajectory with status "blowup" at that time.
    """
    grid = x0.grid
    if params is None:
        params = HypothesisParams(n=grid.n)
    nonlin = make_nonlinearity(grid, model, a, cfg.dealias, cfg.guard)
    n_steps = cfg.n_steps
    h = cfg.h
    t0 = x0.t

    if cfg.method == "imex_cn":
        blocks = ModeBlocks(grid, M=M, h=h)   # validates M; exp unused below
        imex = _ImexBlocks(grid, blocks.M, h)
        stepper = None
    else:
        blocks = ModeBlocks(grid, M=M, h=h)
        imex = None
        stepper = _step_exp_euler if cfg.method == "exp_euler" else _step_etdrk2

    diag_fn = DiagnosticsComputer(grid, model, a, params)
    stored_idx = list(range(0, n_steps + 1, cfg.store_every))
    if stored_idx[-1] != n_steps:
        stored_idx.append(n_steps)
    stored_pos = {k: i for i, k in enumerate(stored_idx)}

    states = np.empty((len(stored_idx), 3) + grid.shape)
    times = np.empty(len(stored_idx))
    diag_rows = np.empty((len(stored_idx), len(DiagnosticsComputer.COLUMNS)))

    coeffs = x0.coeffs.copy()
    if not np.isfinite(coeffs).all():
        raise BlowUp(t0, "initial state is not finite")
    states[0] = coeffs
    times[0] = t0
    diag_rows[0] = diag_fn.compute(coeffs)

    status = "completed"
    blow_time = None
    n_prev = None
    last = 0
    for k in range(n_steps):
        t = t0 + k * h
        try:
            if imex is not None:
                nk = (nonlin(coeffs, t) if nonlin is not None
                      else np.zeros_like(coeffs))
                expl = 1.5 * nk - 0.5 * n_prev if n_prev is not None else nk
                coeffs = (apply_blocks(imex.prop, coeffs)
                          + h * apply_blocks(imex.src, expl))
                n_prev = nk
            else:
                coeffs = stepper(coeffs, blocks, nonlin, t, h)
            if not np.isfinite(coeffs).all():
                raise BlowUp(t + h, "state became non-finite")
        except BlowUp as err:
            status = "blowup"
            blow_time = err.t
            break
        pos = stored_pos.get(k + 1)
        if pos is not None:
            states[pos] = coeffs
            times[pos] = t0 + (k + 1) * h
            diag_rows[pos] = diag_fn.compute(coeffs)
            last = pos

    states = states[:last + 1]
    times = times[:last + 1]
    diag_rows = diag_rows[:last + 1]
    diag = {name: diag_rows[:, i].copy()
            for i, name in enumerate(DiagnosticsComputer.COLUMNS)}
    return Trajectory(grid=grid, times=times, states=states, diag=diag,
                      status=status, blow_time=blow_time)
