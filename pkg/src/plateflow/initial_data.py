"""Initial-data families for experiments.

Either an explicit mode sum (in the evolved variables or in the plate
variables, which are mapped through the curvature substitution) or a
seeded random low-pass field whose top half of modes is zeroed so the
trace norms are grid-stable.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .norms import TRACE, HypothesisParams, state_norm
from .spectral import Grid, SpectralState

COMPONENTS = ("Z", "U", "Theta")
PLATE_COMPONENTS = ("f", "g", "h")


def random_lowpass_state(grid: Grid, seed: int, amplitude: float,
                         params: HypothesisParams,
                         profile: float = 1.5) -> SpectralState:
    """Seeded random state, low-passed and rescaled to the target trace norm.

    Coefficients are drawn i.i.d., damped by (1 + lam_k)^(-profile) so the
    high-mode content stays small, zeroed above half the mode range per
    axis, and normalized so the trace norm of the state equals
    ``amplitude`` (amplitude 0 returns the zero state).
    """
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((3,) + grid.shape)
    k = grid.axis_modes
    half = grid.N // 2
    if grid.n == 1:
        keep = k <= half
    else:
        keep = (k[:, None] <= half) & (k[None, :] <= half)
    coeffs = raw * keep * (1.0 + grid.lam) ** (-profile)
    state = SpectralState(grid, coeffs)
    if amplitude == 0.0:
        return SpectralState.zero(grid)
    nrm = state_norm(state, TRACE, params)
    state.coeffs *= amplitude / nrm
    return state


def mode_sum_state(grid: Grid, modes: dict, variables: str = "x") -> SpectralState:
    """State from explicit per-component mode lists.

    ``modes`` maps component names to lists of [k, amp] (1-D) or
    [k1, k2, amp] (2-D) rows.  With ``variables = "x"`` the components
    are the evolved triple directly; with ``variables = "w"`` they are
    the plate deflection/velocity/temperature (f, g, h) and the first
    component is pushed through the Laplacian.
    """
    if variables not in ("x", "w"):
        raise ConfigError(f"initial-data variables must be 'x' or 'w', got {variables!r}")
    names = COMPONENTS if variables == "x" else PLATE_COMPONENTS
    coeffs = np.zeros((3,) + grid.shape)
    for key in modes:
        if key not in names:
            raise ConfigError(f"unknown initial-data component {key!r}; "
                              f"expected one of {names}", key=key)
    for i, name in enumerate(names):
        for row in modes.get(name, []):
            row = list(row)
            if len(row) != grid.n + 1:
                raise ConfigError(
                    f"mode rows for {name!r} need {grid.n + 1} entries, got {row}",
                    key=name)
            idx = tuple(int(v) - 1 for v in row[:-1])
            if any(j < 0 or j >= grid.N - 1 for j in idx):
                raise ConfigError(f"mode index {row[:-1]} outside 1..{grid.N - 1}",
                                  key=name)
            coeffs[(i,) + idx] += float(row[-1])
    if variables == "w":
        coeffs[0] = -grid.lam * coeffs[0]       # Z = lap(f)
    return SpectralState(grid, coeffs)
