"""Flat key=value configuration, named presets, and problem assembly.

A configuration file is plain text: one `key = value` per line, `#`
comments, nothing nested.  Spatial profiles (initial data, targets,
control, ceiling) are small strings of the form

    constant:0.5
    gaussian-bump:amplitude,center,width    (center as a fraction of L)
    step:left,right,at                      (jump along the first axis)
    csv:path/to/values.csv                  (one value per cell, C order)

`build_problem` turns a validated record into the concrete grid,
operators, initial data, cost, and solver options that the rest of the
package consumes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .costs import AdmissibleSet, CostWeights
from .errors import ConfigError
from .grid import Field, Grid, TimeGrid, Trajectory
from .nonlocal_op import Kernel, NonlocalOperator
from .optimize import PGDOptions
from .potentials import PotentialConfig
from .state import InitialData, SolverOptions

__all__ = [
    "ProblemConfig",
    "Problem",
    "TOLERANCES",
    "PRESETS",
    "parse_config_text",
    "load_config",
    "apply_overrides",
    "profile_values",
    "build_problem",
]


# Every tolerance the package promises, in one place.
TOLERANCES = {
    "fixed_point_abs": 1e-14,       # trivial rest state deviation
    "mu_floor": -1e-10,             # chemical potential under nonnegative data
    "energy_residual_max": 0.05,    # balance defect at the reference step count
    "energy_ratio_range": (1.6, 2.6),   # defect drop when the step is halved
    "operator_adjoint_rel": 1e-12,  # adjoint identity, relative to norms
    "quadrature_abs": 1e-12,        # weight table vs double-loop quadrature
    "resolvent_residual": 1e-12,    # quench resolvent defect
    "resolvent_bisection": 1e-10,   # agreement with the bisection oracle
    "quench_gap_small_scale": 1e-3,    # obstacle gap at scale 1e-6
    "lipschitz_slack": 1e-12,       # nonexpansiveness slack for resolvents
    "taylor_slope_range": (1.8, 2.2),   # gradient remainder decay
    "trivial_control_norm": 1e-8,   # pure-energy cost drives u to zero
    "sweep_final_distance": 1e-2,   # state distance to the obstacle run
    "xi_decade_factor": 10.0,       # constraint-reaction spread over a sweep
    "vi_floor": -1e-6,              # sampled first-order optimality values
    "projection_residual_factor": 10.0,    # times the stationarity tolerance
    "concentration_slope_range": (0.9, 1.1),    # reaction mass vs quench scale
    "stationarity_tol": 1e-7,       # projected-gradient stopping threshold
    "cg_rtol_contract": 1e-10,      # linear solves must be at least this tight
}


@dataclass
class ProblemConfig:
    """Every knob of a run; defaults give the contact tracking setup."""

    # space and time
    dim: int = 1
    cells_x: int = 64
    cells_y: int = 8
    length_x: float = 1.0
    length_y: float = 1.0
    horizon: float = 1.0
    steps: int = 200
    # interaction kernel
    kernel: str = "gaussian"
    kernel_amplitude: float = 1.0
    kernel_width: float = 0.1
    kernel_core_radius: float = 1e-3
    kernel_radius: float = 0.25
    # potentials and coupling
    f_strength: float = 0.25
    g_family: str = "linear"
    quench_exponent: float = 1.0
    # data profiles
    rho0: str = "constant:0.5"
    mu0: str = "constant:1.0"
    control: str = "constant:1.0"
    # single-run quench parameter (0 means the obstacle solver)
    alpha: float = 1e-3
    # cost: targets above/at the reach of the uncontrolled run so the
    # optimum sits inside the box, and a control weight heavy enough to
    # contract the anchored continuation quickly
    rho_weight: float = 1.0
    mu_weight: float = 0.5
    control_weight: float = 2.0
    rho_target: str = "constant:0.8"
    mu_target: str = "constant:1.0"
    # admissible set
    ceiling: str = "constant:2.0"
    h1_budget: float = 1e6
    # optimizer
    schedule: str = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6,1e-7,1e-8"
    tol: float = 1e-7
    max_iters: int = 200
    vi_samples: int = 100
    # sweeps
    sweep_alphas: str = "1e-1,1e-2,1e-3,1e-4,1e-5"
    # inner solvers
    cg_rtol: float = 1e-12
    cg_max_iter: int = 5000
    coefficient_floor: float = 1e-8
    resolvent_tol: float = 1e-13
    # bookkeeping
    out_dir: str = "out"
    seed: int = 42

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError("grid dimension must be 1 or 2")
        if self.cells_x < 1 or (self.dim == 2 and self.cells_y < 1):
            raise ConfigError("cell counts must be positive")
        if self.length_x <= 0.0 or (self.dim == 2 and self.length_y <= 0.0):
            raise ConfigError("domain lengths must be positive")
        if self.horizon <= 0.0 or self.steps < 1:
            raise ConfigError("need a positive horizon and at least one step")
        if self.alpha < 0.0:
            raise ConfigError("(A1) quench parameter must be >= 0 (0 = obstacle)")
        if self.tol <= 0.0 or self.max_iters < 0 or self.vi_samples < 1:
            raise ConfigError("optimizer options out of range")
        if self.cg_rtol > TOLERANCES["cg_rtol_contract"]:
            raise ConfigError(
                f"cg_rtol must be <= {TOLERANCES['cg_rtol_contract']:g}"
            )

    def schedule_values(self) -> list[float]:
        return _float_list("schedule", self.schedule)

    def sweep_values(self) -> list[float]:
        return _float_list("sweep_alphas", self.sweep_alphas)


def _float_list(key: str, text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: could not parse float list {text!r}") from exc
    if not vals:
        raise ConfigError(f"{key}: empty list")
    return vals


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ProblemConfig)}


def parse_config_text(text: str) -> dict[str, str]:
    """key = value lines into a raw string mapping; rejects unknown keys."""
    out: dict[str, str] = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {ln}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {ln}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {ln}: duplicate config key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind}, got {value!r}") from exc
    return value


def apply_overrides(cfg_map: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Merge key=value override strings (CLI style) over a parsed map."""
    merged = dict(cfg_map)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        merged[key] = value
    return merged


def config_from_map(cfg_map: dict[str, str]) -> ProblemConfig:
    kwargs = {key: _coerce(key, value) for key, value in cfg_map.items()}
    return ProblemConfig(**kwargs)


def load_config(path: str | Path | None, overrides: list[str] | None = None) -> ProblemConfig:
    """Read a config file (or start from the defaults) plus overrides."""
    cfg_map: dict[str, str] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} does not exist")
        cfg_map = parse_config_text(p.read_text())
    if overrides:
        cfg_map = apply_overrides(cfg_map, overrides)
    return config_from_map(cfg_map)


# Named presets, applied on top of the dataclass defaults.
PRESETS: dict[str, dict[str, str]] = {
    # contact-driven tracking run: the constant source pushes the order
    # parameter onto the upper obstacle, so the constraint reaction is
    # active in the quench limit.
    "default": {},
    # stays strictly inside the unit interval for the whole horizon
    "smooth": {
        "kernel_amplitude": "0.5",
        "kernel_width": "0.25",
        "mu0": "constant:0.5",
        "control": "constant:0.25",
        "horizon": "0.5",
        "steps": "100",
        "alpha": "0.5",
    },
    # balanced rest state: exact fixed point of the march
    "trivial": {
        "kernel": "zero",
        "f_strength": "0.0",
        "mu0": "constant:0.0",
        "control": "constant:0.0",
        "rho_weight": "0.0",
        "mu_weight": "0.0",
        "alpha": "1.0",
    },
    # small two-dimensional smoke setup
    "twod": {
        "dim": "2",
        "cells_x": "12",
        "cells_y": "10",
        "length_y": "0.8",
        "steps": "40",
        "horizon": "0.25",
    },
}


def preset_config(name: str, overrides: list[str] | None = None) -> ProblemConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    cfg_map = dict(PRESETS[name])
    if overrides:
        cfg_map = apply_overrides(cfg_map, overrides)
    return config_from_map(cfg_map)


def profile_values(profile: str, grid: Grid) -> np.ndarray:
    """Evaluate a named spatial profile on the cell centers."""
    if ":" not in profile:
        raise ConfigError(f"profile {profile!r} has no 'name:' prefix")
    name, arg = profile.split(":", 1)
    if name == "constant":
        try:
            return np.full(grid.shape, float(arg))
        except ValueError as exc:
            raise ConfigError(f"constant profile needs a float, got {arg!r}") from exc
    if name == "gaussian-bump":
        parts = _float_list("gaussian-bump", arg)
        if len(parts) != 3:
            raise ConfigError("gaussian-bump profile needs amplitude,center,width")
        amp, center, width = parts
        if width <= 0.0:
            raise ConfigError("gaussian-bump profile needs width > 0")
        pts = grid.center_points()
        mid = np.array([center * length for length in grid.lengths])
        d2 = np.sum((pts - mid) ** 2, axis=1)
        return (amp * np.exp(-d2 / (2.0 * width**2))).reshape(grid.shape)
    if name == "step":
        parts = _float_list("step", arg)
        if len(parts) != 3:
            raise ConfigError("step profile needs left,right,at")
        left, right, at = parts
        x = grid.center_points()[:, 0]
        return np.where(x < at * grid.lengths[0], left, right).reshape(grid.shape)
    if name == "csv":
        path = Path(arg)
        if not path.is_file():
            raise ConfigError(f"profile file {path} does not exist")
        vals = np.loadtxt(path, delimiter=",", ndmin=1).reshape(-1)
        if vals.size != grid.n_cells:
            raise ConfigError(
                f"profile file {path} has {vals.size} values, grid needs {grid.n_cells}"
            )
        return vals.reshape(grid.shape)
    raise ConfigError(f"unknown profile kind {name!r}")


@dataclass
class Problem:
    """Everything a command needs, assembled from one config."""

    config: ProblemConfig
    grid: Grid
    tgrid: TimeGrid
    model: PotentialConfig
    op: NonlocalOperator
    init: InitialData
    control: Trajectory
    weights: CostWeights
    box: AdmissibleSet
    solver_opts: SolverOptions
    pgd_opts: PGDOptions


def build_problem(cfg: ProblemConfig) -> Problem:
    if cfg.dim == 1:
        grid = Grid.line(cfg.cells_x, cfg.length_x)
    else:
        grid = Grid.box((cfg.cells_x, cfg.cells_y), (cfg.length_x, cfg.length_y))
    tgrid = TimeGrid(cfg.horizon, cfg.steps)

    model = PotentialConfig(
        f_strength=cfg.f_strength,
        g_family=cfg.g_family,
        quench_exponent=cfg.quench_exponent,
    )
    if cfg.kernel == "gaussian":
        kernel = Kernel.gaussian(cfg.kernel_amplitude, cfg.kernel_width)
    elif cfg.kernel == "newtonian":
        kernel = Kernel.newtonian(cfg.kernel_amplitude, cfg.kernel_core_radius)
    elif cfg.kernel == "tophat":
        kernel = Kernel.tophat(cfg.kernel_amplitude, cfg.kernel_radius)
    elif cfg.kernel == "zero":
        kernel = Kernel.zero()
    else:
        raise ConfigError(f"(A3) unknown kernel variant {cfg.kernel!r}")
    op = NonlocalOperator(kernel, grid)

    init = InitialData(
        Field(grid, profile_values(cfg.rho0, grid)),
        Field(grid, profile_values(cfg.mu0, grid)),
    )
    control = Trajectory.constant_profile(tgrid, grid, profile_values(cfg.control, grid))

    ceiling_vals = profile_values(cfg.ceiling, grid)
    if np.min(ceiling_vals) < 0.0:
        raise ConfigError("(A4) control ceiling must be nonnegative")
    box = AdmissibleSet(
        Trajectory.constant_profile(tgrid, grid, ceiling_vals), h1_budget=cfg.h1_budget
    )
    weights = CostWeights(
        rho_weight=cfg.rho_weight,
        mu_weight=cfg.mu_weight,
        control_weight=cfg.control_weight,
        rho_target=Trajectory.constant_profile(tgrid, grid, profile_values(cfg.rho_target, grid)),
        mu_target=Trajectory.constant_profile(tgrid, grid, profile_values(cfg.mu_target, grid)),
    )

    solver_opts = SolverOptions(
        cg_rtol=cfg.cg_rtol,
        cg_max_iter=cfg.cg_max_iter,
        coefficient_floor=cfg.coefficient_floor,
        resolvent_tol=cfg.resolvent_tol,
    )
    pgd_opts = PGDOptions(tol=cfg.tol, max_iters=cfg.max_iters, vi_samples=cfg.vi_samples)

    return Problem(
        config=cfg,
        grid=grid,
        tgrid=tgrid,
        model=model,
        op=op,
        init=init,
        control=control,
        weights=weights,
        box=box,
        solver_opts=solver_opts,
        pgd_opts=pgd_opts,
    )
