"""Experiment orchestration: configured runs, probes, studies, and reports.

Everything here is deterministic given the configuration and seed: output
files carry no timestamps, floats are written with a fixed 17-digit
format, and random initial data is drawn from a seeded generator, so
rerunning a config reproduces every output byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import flatten, load_config, parse_config_text
from .decay import DecayFit, fit_decay
from .errors import (BlowUp, ConfigError, NeumannDiverged, NonPositiveSamples,
                     OuterDiverged, WindowTooSmall)
from .fixedpoint import PicardConfig, picard_solve
from .initial_data import mode_sum_state, random_lowpass_state
from .nonlinearity import PhiModel, phi_model, validate_phi
from .norms import HypothesisParams, check_hypotheses
from .operators import CouplingMatrix, spectral_bound
from .spectral import Grid, SpectralState
from .timestepping import StepperConfig, Trajectory, integrate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_SOLVER = 4

TRAJECTORY_COLUMNS = ("t", "E", "D", "l2_Z", "l2_U", "l2_Theta",
                      "norm_Xpmu", "norm_Xp", "status")
DECAY_COLUMNS = ("method", "t_lo", "t_hi", "omega_fit", "intercept", "r2",
                 "s_A", "rel_gap")


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _get(section: dict, key: str, default, where: str):
    val = section.get(key, default)
    if val is None:
        raise ConfigError(f"missing required key in [{where}]", key=key)
    return val


@dataclass
class ExperimentConfig:
    """Fully resolved experiment description."""

    grid: Grid
    params: HypothesisParams
    model: PhiModel
    a: float
    initial: dict
    stepper: StepperConfig
    picard: PicardConfig
    fit_window: tuple[float, float] | None
    fit_method: str = "envelope"
    rel_gap_tol: float = 0.15
    out_dir: str = "out"
    snapshots: bool = False
    sections: dict = field(default_factory=dict)

    @classmethod
    def from_sections(cls, sections: dict) -> "ExperimentConfig":
        top = sections.get("", {})
        gsec = sections.get("grid", {})
        n = int(_get(gsec, "n", 1, "grid"))
        N = int(_get(gsec, "N", 64, "grid"))
        try:
            grid = Grid(n, N)
        except ValueError as err:
            raise ConfigError(str(err), key="grid")

        psec = sections.get("hypothesis", {})
        phisec = sections.get("phi", {})
        a = float(phisec.get("a", top.get("a", psec.get("a", 1.0))))
        from .errors import InadmissibleParams
        try:
            params = HypothesisParams(
                n=n,
                p=float(_get(psec, "p", 2.0, "hypothesis")),
                mu=float(_get(psec, "mu", 1.0, "hypothesis")),
                omega=float(_get(psec, "omega", 0.0, "hypothesis")),
                a=a)
            model = phi_model(str(_get(phisec, "kind", "cubic", "phi")),
                              m=int(phisec.get("m", 3)))
        except (ValueError, InadmissibleParams) as err:
            raise ConfigError(str(err), key="phi/hypothesis")

        isec = dict(sections.get("initial", {}))
        isec.setdefault("kind", "random_lowpass")
        if isec["kind"] == "random_lowpass":
            isec.setdefault("seed", 0)
            isec.setdefault("amplitude", 1e-2)
            isec.setdefault("profile", 1.5)
            if not np.isfinite(float(isec["amplitude"])):
                raise ConfigError("initial amplitude must be finite", key="amplitude")
        elif isec["kind"] != "modes":
            raise ConfigError(f"unknown initial kind {isec['kind']!r}", key="kind")

        ssec = sections.get("stepper", {})
        try:
            stepper = StepperConfig(
                method=str(ssec.get("method", "etdrk2")),
                h=float(ssec.get("h", 1e-3)),
                T=float(ssec.get("T", 1.0)),
                dealias=bool(ssec.get("dealias", True)),
                guard=float(ssec.get("guard", 1e12)),
                store_every=int(ssec.get("store_every", 1)))
        except ValueError as err:
            raise ConfigError(str(err), key="stepper")

        csec = sections.get("picard", {})
        try:
            picard = PicardConfig(
                h=float(csec.get("h", stepper.h)),
                T=float(csec.get("T", stepper.T)),
                outer_tol=float(csec.get("outer_tol", 1e-10)),
                max_outer=int(csec.get("max_outer", 50)),
                inner_tol=float(csec.get("inner_tol", 1e-12)),
                max_inner=int(csec.get("max_inner", 100)),
                dealias=bool(csec.get("dealias", stepper.dealias)),
                guard=float(csec.get("guard", stepper.guard)),
                store_every=int(csec.get("store_every", stepper.store_every)))
        except ValueError as err:
            raise ConfigError(str(err), key="picard")

        fsec = sections.get("fit", {})
        window = None
        method = str(fsec.get("method", "envelope"))
        if "t_lo" in fsec or "t_hi" in fsec:
            window = (float(_get(fsec, "t_lo", None, "fit")),
                      float(_get(fsec, "t_hi", None, "fit")))
            if not (0.0 <= window[0] < window[1] <= stepper.T + 1e-12):
                raise ConfigError(
                    f"fit window {window} must sit inside [0, T={stepper.T:g}]",
                    key="t_lo/t_hi")

        osec = sections.get("output", {})
        return cls(grid=grid, params=params, model=model, a=a, initial=isec,
                   stepper=stepper, picard=picard, fit_window=window,
                   fit_method=method,
                   rel_gap_tol=float(fsec.get("rel_gap_tol", 0.15)),
                   out_dir=str(osec.get("dir", "out")),
                   snapshots=bool(osec.get("snapshots", False)),
                   sections=sections)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_sections(load_config(path))

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_sections(parse_config_text(text))

    def build_initial_state(self, seed_override: int | None = None) -> SpectralState:
        spec = self.initial
        if spec["kind"] == "modes":
            modes = {k: v for k, v in spec.items() if k not in ("kind", "vars")}
            return mode_sum_state(self.grid, modes, str(spec.get("vars", "x")))
        seed = int(spec["seed"] if seed_override is None else seed_override)
        return random_lowpass_state(self.grid, seed, float(spec["amplitude"]),
                                    self.params, float(spec["profile"]))


@dataclass
class ExperimentResult:
    exit_code: int
    status: str
    out_dir: Path
    trajectory_csv: Path | None = None
    decay_csv: Path | None = None
    report_txt: Path | None = None
    snapshot_bin: Path | None = None
    trajectory: Trajectory | None = None
    fit: DecayFit | None = None
    messages: list = field(default_factory=list)


def write_trajectory_csv(path, traj: Trajectory):
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for i in range(len(traj)):
        row = [_fmt(float(traj.times[i]))]
        row += [_fmt(float(traj.diag[c][i])) for c in TRAJECTORY_COLUMNS[1:-1]]
        row.append(traj.status)
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_trajectory_csv(path) -> tuple[dict, str]:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    if tuple(header) != TRAJECTORY_COLUMNS:
        raise ConfigError(f"unexpected trajectory CSV header {header}")
    cols: dict = {name: [] for name in TRAJECTORY_COLUMNS[:-1]}
    status = "completed"
    for line in text[1:]:
        parts = line.split(",")
        for name, val in zip(TRAJECTORY_COLUMNS[:-1], parts):
            cols[name].append(float(val))
        status = parts[-1]
    return {k: np.asarray(v) for k, v in cols.items()}, status


def write_decay_csv(path, fits: list[DecayFit]):
    lines = [",".join(DECAY_COLUMNS)]
    for f in fits:
        rel = f.rel_gap
        lines.append(",".join([
            f.method, _fmt(f.t_lo), _fmt(f.t_hi), _fmt(f.omega_fit),
            _fmt(f.intercept), _fmt(f.r2),
            _fmt(f.s_A) if f.s_A is not None else "nan",
            _fmt(rel) if rel is not None else "nan"]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_snapshots(path, traj: Trajectory):
    """Plain binary snapshots: int64 LE header (n, N, count) + per-sample
    coefficient blocks (3 * (N-1)^n little-endian float64, C order)."""
    g = traj.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<3q", g.n, g.N, len(traj)))
        for i in range(len(traj)):
            fh.write(traj.states[i].astype("<f8").tobytes(order="C"))


def read_snapshots(path) -> tuple[Grid, np.ndarray]:
    raw = Path(path).read_bytes()
    n, N, count = struct.unpack("<3q", raw[:24])
    grid = Grid(int(n), int(N))
    per = 3 * (N - 1) ** n
    data = np.frombuffer(raw[24:], dtype="<f8", count=count * per)
    return grid, data.reshape((count, 3) + grid.shape).copy()


def _report_text(cfg: ExperimentConfig, mode: str, spectrum, hyp_report,
                 traj: Trajectory | None, fits: list[DecayFit],
                 messages: list[str]) -> str:
    lines = ["plateflow experiment report", ""]
    lines.append("[config]")
    for key, val in flatten(cfg.sections).items():
        lines.append(f"  {key} = {val}")
    lines += ["", "[spectrum]"]
    lines += ["  " + ln for ln in spectrum.as_text().splitlines()]
    lines += ["", "[hypothesis]"]
    lines += ["  " + ln for ln in hyp_report.table().splitlines()]
    lines += ["", "[run]", f"  mode = {mode}"]
    if traj is not None:
        lines.append(f"  status = {traj.status}")
        lines.append(f"  samples = {len(traj)}")
        lines.append(f"  t_final = {_fmt(float(traj.times[-1]))}")
        if traj.blow_time is not None:
            lines.append(f"  blow_time = {_fmt(traj.blow_time)}")
        if traj.contraction_factors:
            factors = ", ".join(_fmt(float(f)) for f in traj.contraction_factors)
            lines.append(f"  outer_contraction_factors = [{factors}]")
    lines += ["", "[fit]"]
    if fits:
        for f in fits:
            gap = f.rel_gap
            verdict = ""
            if gap is not None:
                verdict = ("PASS" if gap <= cfg.rel_gap_tol else "FAIL") \
                    + f" (rel_gap {_fmt(gap)} vs tol {_fmt(cfg.rel_gap_tol)})"
            lines.append(f"  method = {f.method}, window = [{_fmt(f.t_lo)}, "
                         f"{_fmt(f.t_hi)}], omega_fit = {_fmt(f.omega_fit)}, "
                         f"r2 = {_fmt(f.r2)} {verdict}".rstrip())
    else:
        lines.append("  (no fit requested or fit unavailable)")
    if messages:
        lines += ["", "[messages]"] + [f"  {m}" for m in messages]
    return "\n".join(lines) + "\n"


def run_experiment(cfg: ExperimentConfig, out_dir=None, mode: str = "simulate",
                   force: bool = False, seed: int | None = None) -> ExperimentResult:
    """Run one configured experiment and write its three output files.

    ``mode`` selects direct time stepping ("simulate") or the fixed-point
    construction ("picard").  A failing hypothesis check refuses to run
    unless ``force`` is set; solver blow-up/divergence is captured in the
    report and the exit code, never as an exception.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    messages: list[str] = []

    validate_phi(cfg.model)
    spectrum = spectral_bound(CouplingMatrix(), cfg.grid)
    hyp = check_hypotheses(cfg.params, cfg.grid, omega_max=spectrum.omega_max)
    result = ExperimentResult(exit_code=EXIT_OK, status="completed", out_dir=out)

    if not hyp.small_data_ok and not force:
        messages.append("refusing to run: small-data hypothesis check failed "
                        "(rerun with --force to override)")
        failed = [name for name, ok in
                  (("p > 1 + n/2", hyp.small_data_p),
                   ("mu in ((n+2)/(2p), 1]", hyp.small_data_mu)) if not ok]
        messages.append("failed predicates: " + "; ".join(failed))
        report = _report_text(cfg, mode, spectrum, hyp, None, [], messages)
        result.report_txt = out / "report.txt"
        result.report_txt.write_text(report, encoding="utf-8")
        result.exit_code = EXIT_HYPOTHESIS
        result.status = "hypothesis_failed"
        result.messages = messages
        return result

    x0 = cfg.build_initial_state(seed_override=seed)
    traj: Trajectory | None = None
    try:
        if mode == "simulate":
            traj = integrate(x0, cfg.model, cfg.a, cfg.stepper, params=cfg.params)
        elif mode == "picard":
            traj, _ = picard_solve(x0, cfg.picard, cfg.model, cfg.a,
                                   params=cfg.params)
        else:
            raise ValueError(f"unknown mode {mode!r}")
    except (NeumannDiverged, OuterDiverged) as err:
        messages.append(f"solver diverged: {err}")
        result.status = "diverged"
        result.exit_code = EXIT_SOLVER
    except BlowUp as err:
        messages.append(f"solver blow-up: {err}")
        result.status = "blowup"
        result.exit_code = EXIT_SOLVER

    fits: list[DecayFit] = []
    if traj is not None:
        if traj.status != "completed":
            result.status = traj.status
            result.exit_code = EXIT_SOLVER
            messages.append(f"run terminated with status {traj.status}"
                            + (f" at t = {traj.blow_time:g}" if traj.blow_time else ""))
        result.trajectory = traj
        result.trajectory_csv = out / "trajectory.csv"
        write_trajectory_csv(result.trajectory_csv, traj)
        if cfg.snapshots:
            result.snapshot_bin = out / "snapshots.bin"
            write_snapshots(result.snapshot_bin, traj)
        if cfg.fit_window is not None and traj.status == "completed":
            try:
                fit = fit_decay(traj.times, traj.diag["norm_Xpmu"], cfg.fit_window,
                                method=cfg.fit_method, s_A=spectrum.s_A)
                fits.append(fit)
                result.fit = fit
            except (NonPositiveSamples, WindowTooSmall) as err:
                messages.append(f"decay fit unavailable: {err}")
    result.decay_csv = out / "decay.csv"
    write_decay_csv(result.decay_csv, fits)
    result.report_txt = out / "report.txt"
    result.report_txt.write_text(
        _report_text(cfg, mode, spectrum, hyp, traj, fits, messages),
        encoding="utf-8")
    result.messages = messages
    return result


@dataclass
class ProbeRow:
    amplitude: float
    status: str
    omega_fit: float = float("nan")
    blow_time: float = float("nan")
    max_outer_factor: float = float("nan")


def smallness_probe(cfg: ExperimentConfig, amplitudes, mode: str = "simulate",
                    seed: int | None = None) -> tuple[list[ProbeRow], tuple]:
    """Scan an amplitude ladder and record the outcome per row.

    Returns the rows plus the empirical threshold bracket (largest
    amplitude that completed with decay, smallest that failed); the
    bracket is discretization-dependent and makes no claim about the
    underlying continuum smallness radius.
    """
    amplitudes = sorted(float(x) for x in amplitudes)
    base = cfg.build_initial_state(seed_override=seed)
    from .norms import TRACE, state_norm
    base_norm = state_norm(base, TRACE, cfg.params)
    spectrum = spectral_bound(CouplingMatrix(), cfg.grid)
    rows: list[ProbeRow] = []
    for amp in amplitudes:
        if amp == 0.0 or base_norm == 0.0:
            x0 = SpectralState.zero(cfg.grid)
        else:
            x0 = SpectralState(cfg.grid, base.coeffs * (amp / base_norm))
        row = ProbeRow(amplitude=amp, status="completed")
        try:
            if mode == "picard":
                traj, factors = picard_solve(x0, cfg.picard, cfg.model, cfg.a,
                                             params=cfg.params)
                if factors:
                    row.max_outer_factor = float(max(factors))
            else:
                traj = integrate(x0, cfg.model, cfg.a, cfg.stepper,
                                 params=cfg.params)
            row.status = traj.status
            if traj.blow_time is not None:
                row.blow_time = traj.blow_time
            if traj.status == "completed" and cfg.fit_window is not None and amp > 0:
                try:
                    fit = fit_decay(traj.times, traj.diag["norm_Xpmu"],
                                    cfg.fit_window, method=cfg.fit_method,
                                    s_A=spectrum.s_A)
                    row.omega_fit = fit.omega_fit
                except (NonPositiveSamples, WindowTooSmall):
                    pass
        except (NeumannDiverged, OuterDiverged):
            row.status = "diverged"
        except BlowUp as err:
            row.status = "blowup"
            row.blow_time = err.t
        rows.append(row)
    ok_amps = [r.amplitude for r in rows if r.status == "completed"]
    bad_amps = [r.amplitude for r in rows if r.status != "completed"]
    bracket = (max(ok_amps) if ok_amps else float("nan"),
               min(bad_amps) if bad_amps else float("inf"))
    return rows, bracket


def _final_state_error(coarse: np.ndarray, fine: np.ndarray, grid_c: Grid,
                       grid_f: Grid) -> float:
    """L2 distance of final states, embedding the coarse mode set if needed."""
    if grid_c == grid_f:
        diff = coarse - fine
        return float(np.sqrt(grid_c.parseval * np.sum(diff ** 2)))
    emb = np.zeros_like(fine)
    m = grid_c.N - 1
    if grid_c.n == 1:
        emb[:, :m] = coarse
    else:
        emb[:, :m, :m] = coarse
    diff = emb - fine
    return float(np.sqrt(grid_f.parseval * np.sum(diff ** 2)))


def convergence_study(cfg: ExperimentConfig, axis: str = "h",
                      values=None, seed: int | None = None) -> list[dict]:
    """Self-refinement error table along the step size or the mode count.

    For ``axis = "h"`` the values must halve; the reference run uses half
    the finest step.  For ``axis = "N"`` the values must double; the
    reference doubles the finest mode count and coarse solutions are
    compared after exact embedding of their mode sets.  Observed order is
    log2(e_coarse / e_fine) between consecutive rows.
    """
    if axis not in ("h", "N"):
        raise ValueError("refinement axis must be 'h' or 'N'")
    if axis == "h":
        h_values = values or [cfg.stepper.h * 4, cfg.stepper.h * 2, cfg.stepper.h]
        hs = sorted((float(v) for v in h_values), reverse=True)
        x0 = cfg.build_initial_state(seed_override=seed)
        ladder = hs + [hs[-1] / 2.0]
        finals = {}
        for h in ladder:
            scfg = StepperConfig(method=cfg.stepper.method, h=h, T=cfg.stepper.T,
                                 dealias=cfg.stepper.dealias,
                                 guard=cfg.stepper.guard,
                                 store_every=max(1, int(round(cfg.stepper.T / h))))
            finals[h] = integrate(x0, cfg.model, cfg.a, scfg,
                                  params=cfg.params).states[-1]
        # consecutive-pair differences: their ratios approach 2^order
        errs = [_final_state_error(finals[ladder[i]], finals[ladder[i + 1]],
                                   cfg.grid, cfg.grid) for i in range(len(hs))]
        rows = []
        for i, h in enumerate(hs):
            order = (np.log2(errs[i] / errs[i + 1])
                     if i + 1 < len(errs) and errs[i + 1] > 0 else float("nan"))
            rows.append({"h": h, "error": errs[i], "order": float(order)})
        return rows

    ns = sorted(int(v) for v in (values or [cfg.grid.N // 4, cfg.grid.N // 2,
                                            cfg.grid.N]))
    ref_n = ns[-1] * 2
    runs = {}
    for N in ns + [ref_n]:
        grid = Grid(cfg.grid.n, N)
        spec = dict(cfg.initial)
        if spec["kind"] != "modes":
            raise ConfigError("N-refinement studies need mode-sum initial data "
                              "(identical across grids)", key="initial.kind")
        modes = {k: v for k, v in spec.items() if k not in ("kind", "vars")}
        x0 = mode_sum_state(grid, modes, str(spec.get("vars", "x")))
        scfg = StepperConfig(method=cfg.stepper.method, h=cfg.stepper.h,
                             T=cfg.stepper.T, dealias=cfg.stepper.dealias,
                             guard=cfg.stepper.guard,
                             store_every=cfg.stepper.n_steps)
        runs[N] = (integrate(x0, cfg.model, cfg.a, scfg,
                             params=cfg.params), grid)
    ref_traj, ref_grid = runs[ref_n]
    errs = [_final_state_error(runs[N][0].states[-1], ref_traj.states[-1],
                               runs[N][1], ref_grid) for N in ns]
    rows = []
    for i, N in enumerate(ns):
        ratio = errs[i] / errs[i + 1] if i + 1 < len(errs) and errs[i + 1] > 0 \
            else float("nan")
        rows.append({"N": N, "error": errs[i], "ratio": float(ratio)})
    return rows
