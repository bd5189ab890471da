"""Frozen-coefficient solves and the outer fixed-point iteration."""

import numpy as np
import pytest

from plateflow.errors import NeumannDiverged
from plateflow.fixedpoint import (PicardConfig, _FrozenPath, _solve_frozen_raw,
                                  _zero_data_scan, picard_solve,
                                  solve_frozen_coefficient)
from plateflow.initial_data import random_lowpass_state
from plateflow.nonlinearity import phi_model
from plateflow.norms import TRACE, HypothesisParams, state_norm, state_norm_series
from plateflow.operators import ModeBlocks, semigroup_apply
from plateflow.spectral import SPECTRAL, Grid, ScalarField, SpectralState
from plateflow.timestepping import StepperConfig, integrate

PARAMS = HypothesisParams(n=1, p=2.0, mu=0.9)
CUBIC = phi_model("cubic")


def smooth_state(grid, seed=5, scale=0.01):
    rng = np.random.default_rng(seed)
    prof = np.exp(-0.3 * np.arange(1, grid.N))
    return SpectralState(grid, scale * rng.standard_normal((3,) + grid.shape) * prof)


def test_zero_coefficient_path_gives_exact_linear_flow():
    g = Grid(1, 16)
    x0 = smooth_state(g)
    cfg = PicardConfig(h=0.01, T=0.5)
    v = np.zeros((cfg.n_steps + 1,) + g.shape)
    traj, factors = solve_frozen_coefficient(v, x0, cfg, CUBIC, 1.0, params=PARAMS)
    ref = semigroup_apply(x0, 0.5)
    assert np.abs(traj.states[-1] - ref.coeffs).max() <= 1e-13
    assert factors == []                     # one correction sweep, already zero


def test_small_coefficient_contracts_fast():
    g = Grid(1, 16)
    x0 = smooth_state(g)
    cfg = PicardConfig(h=0.01, T=1.0, inner_tol=1e-10)
    v = ScalarField(g, 0.01 * np.eye(g.N - 1)[0], SPECTRAL)
    traj, factors = solve_frozen_coefficient(v, x0, cfg, CUBIC, 1.0, params=PARAMS)
    assert traj.status == "completed"
    # factors scale like the square of the coefficient amplitude
    assert all(f <= 1e-2 for f in factors)
    assert len(factors) <= 3                 # <= 3 ratio tests to tolerance


def test_frozen_limit_satisfies_frozen_recursion_exactly():
    # the converged correction series reproduces, step for step, the
    # one-step recursion of the frozen-coefficient problem
    g = Grid(1, 16)
    x0 = smooth_state(g, seed=8, scale=0.02)
    cfg = PicardConfig(h=0.02, T=0.6, inner_tol=1e-14)
    rng = np.random.default_rng(3)
    v_path = np.broadcast_to(0.02 * rng.standard_normal(g.shape)
                             * np.exp(-0.4 * np.arange(1, g.N)),
                             (cfg.n_steps + 1,) + g.shape).copy()
    traj, _ = solve_frozen_coefficient(v_path, x0, cfg, CUBIC, 1.0, params=PARAMS)

    blocks = ModeBlocks(g, h=cfg.h)
    frozen = _FrozenPath(g, v_path[:1], CUBIC, 1.0, cfg.dealias, cfg.guard)
    from plateflow.operators import apply_blocks
    for k in range(cfg.n_steps):
        pert = frozen.perturbation(traj.states[k:k + 1])[0]
        x = apply_blocks(blocks.exp, traj.states[k]) \
            + cfg.h * apply_blocks(blocks.phi1, pert)
        assert np.abs(x - traj.states[k + 1]).max() <= 1e-11


def test_frozen_agrees_with_direct_stepping_of_frozen_system():
    # independent route: integrate the frozen linear system with the
    # exponential-Euler stepper driven by a hand-built nonlinearity
    g = Grid(1, 16)
    x0 = smooth_state(g, seed=12, scale=0.05)
    cfg = PicardConfig(h=0.005, T=0.5, inner_tol=1e-14)
    v_const = 0.05 * np.eye(g.N - 1)[0]
    v_path = np.broadcast_to(v_const, (cfg.n_steps + 1,) + g.shape).copy()
    traj, _ = solve_frozen_coefficient(v_path, x0, cfg, CUBIC, 1.0, params=PARAMS)

    frozen = _FrozenPath(g, v_path[:1], CUBIC, 1.0, cfg.dealias, cfg.guard)
    blocks = ModeBlocks(g, h=cfg.h)
    from plateflow.operators import apply_blocks
    x = x0.coeffs.copy()
    for _ in range(cfg.n_steps):
        pert = frozen.perturbation(x[None])[0]
        x = apply_blocks(blocks.exp, x) + cfg.h * apply_blocks(blocks.phi1, pert)
    assert np.abs(x - traj.states[-1]).max() <= 1e-12


def test_large_coefficient_diverges_with_report():
    g = Grid(1, 16)
    x0 = smooth_state(g)
    cfg = PicardConfig(h=0.05, T=0.5)
    v = ScalarField(g, 50.0 * np.eye(g.N - 1)[0], SPECTRAL)
    with pytest.raises(NeumannDiverged) as err:
        solve_frozen_coefficient(v, x0, cfg, CUBIC, 1.0, params=PARAMS)
    assert len(err.value.factors) >= 3
    assert all(f >= 1.0 for f in err.value.factors[-3:])


def test_divergence_confirmed_by_power_iteration():
    # the iteration map w -> K[B w + f w] has spectral radius > 1 for the
    # large frozen coefficient, measured by plain power iteration
    g = Grid(1, 16)
    cfg = PicardConfig(h=0.05, T=0.5)
    v_path = np.broadcast_to(50.0 * np.eye(g.N - 1)[0],
                             (cfg.n_steps + 1,) + g.shape).copy()
    frozen = _FrozenPath(g, v_path, CUBIC, 1.0, cfg.dealias, cfg.guard)
    blocks = ModeBlocks(g, h=cfg.h)
    rng = np.random.default_rng(0)
    w = rng.standard_normal((cfg.n_steps + 1, 3) + g.shape)
    growth = None
    for _ in range(8):
        nxt = _zero_data_scan(frozen.perturbation(w), blocks.exp,
                              cfg.h * blocks.phi1, g.shape)
        growth = (np.linalg.norm(nxt.ravel()) / np.linalg.norm(w.ravel()))
        w = nxt / np.linalg.norm(nxt.ravel())
    assert growth > 1.0


def test_picard_zero_data_one_sweep():
    g = Grid(1, 16)
    cfg = PicardConfig(h=0.05, T=0.5)
    traj, factors = picard_solve(SpectralState.zero(g), cfg, CUBIC, 1.0,
                                 params=PARAMS)
    assert np.all(traj.states == 0.0)
    assert factors == []


def test_picard_matches_etdrk2_small_data():
    g = Grid(1, 32)
    x0 = random_lowpass_state(g, seed=5, amplitude=1e-2, params=PARAMS,
                              profile=1.5)
    cfg = PicardConfig(h=1e-3, T=5.0)
    traj, factors = picard_solve(x0, cfg, CUBIC, 1.0, params=PARAMS)
    scfg = StepperConfig(method="etdrk2", h=1e-3, T=5.0)
    ref = integrate(x0, CUBIC, 1.0, scfg, params=PARAMS)
    assert np.abs(traj.states - ref.states).max() <= 1e-6
    assert all(f < 0.5 for f in factors)


def test_picard_factor_shrinks_with_amplitude():
    g = Grid(1, 16)
    cfg = PicardConfig(h=0.01, T=1.0)
    maxima = []
    for amp in (1e-2, 1e-3):
        x0 = random_lowpass_state(g, seed=4, amplitude=amp, params=PARAMS,
                                  profile=1.5)
        _, factors = picard_solve(x0, cfg, CUBIC, 1.0, params=PARAMS)
        maxima.append(max(factors))
    assert maxima[1] < maxima[0]


def test_picard_large_data_reports_divergence_not_nan():
    g = Grid(1, 32)
    x0 = random_lowpass_state(g, seed=5, amplitude=50.0, params=PARAMS,
                              profile=1.5)
    cfg = PicardConfig(h=0.01, T=2.0)
    with pytest.raises(NeumannDiverged):
        picard_solve(x0, cfg, CUBIC, 1.0, params=PARAMS)


def test_contraction_norm_is_sup_in_time_trace_norm():
    g = Grid(1, 16)
    rng = np.random.default_rng(2)
    path = rng.standard_normal((4, 3) + g.shape)
    series = state_norm_series(path, g, PARAMS)
    per_sample = [state_norm(SpectralState(g, path[i]), TRACE, PARAMS)
                  for i in range(4)]
    np.testing.assert_allclose(series, per_sample, atol=1e-12)
