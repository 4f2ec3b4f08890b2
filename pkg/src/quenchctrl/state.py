"""Semi-implicit time stepping for the coupled state system.

Per step, the order-parameter update is pointwise: everything smooth and
the nonlocal term are frozen at the old node, only the monotone
constraint term (obstacle or quench logarithm) is implicit, so the
update is a resolvent evaluation.  The chemical-potential update then
solves one symmetric positive definite linear system by conjugate
gradients.  The constraint term must be the implicit one, otherwise the
iterates leave [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SolverError
from .grid import (
    Field,
    Grid,
    TimeGrid,
    Trajectory,
    h1_seminorm_sq,
    inner_product,
    laplacian_values,
    norm_l2_spacetime,
    norm_lp_spacetime,
    trapezoid_weights,
)
from .nonlocal_op import NonlocalOperator
from .potentials import (
    PotentialConfig,
    QuenchLevel,
    log_potential_prime,
    log_potential_second,
    obstacle_resolvent,
    quench_resolvent_detail,
)

__all__ = [
    "InitialData",
    "SolverOptions",
    "StateDiagnostics",
    "StateSolution",
    "step_rho",
    "step_mu",
    "solve_state",
    "energy_residual_profile",
    "energy_residual",
    "apriori_report",
    "check_obstacle_signs",
    "conjugate_gradient",
]


@dataclass
class InitialData:
    """Initial order parameter and chemical potential.

    The order parameter must start strictly inside (0, 1) and the
    chemical potential must be nonnegative; both are requirements of the
    well-posedness assumptions, rejected under the (A2) tag.
    """

    rho0: Field
    mu0: Field

    def __post_init__(self):
        if self.rho0.grid != self.mu0.grid:
            raise ConfigError("(A2) initial fields live on different grids")
        if np.min(self.rho0.values) <= 0.0 or np.max(self.rho0.values) >= 1.0:
            raise ConfigError("(A2) initial rho must lie strictly inside (0, 1)")
        if np.min(self.mu0.values) < 0.0:
            raise ConfigError("(A2) initial mu must be nonnegative")

    @property
    def grid(self) -> Grid:
        return self.rho0.grid


@dataclass(frozen=True)
class SolverOptions:
    cg_rtol: float = 1e-12  # contract is 1e-10; default is tighter
    cg_max_iter: int = 5000
    coefficient_floor: float = 1e-8
    resolvent_tol: float = 1e-13


@dataclass
class StateDiagnostics:
    alpha: float
    min_mu: float
    min_rho: float
    max_rho: float
    xi_l6: float
    energy_residual_max: float
    clamp_events: int
    cg_iterations_max: int
    mu_nonneg_ok: bool | None

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "min_mu": self.min_mu,
            "min_rho": self.min_rho,
            "max_rho": self.max_rho,
            "xi_l6": self.xi_l6,
            "energy_residual_max": self.energy_residual_max,
            "clamp_events": self.clamp_events,
            "cg_iterations_max": self.cg_iterations_max,
            "mu_nonneg_ok": self.mu_nonneg_ok,
        }


@dataclass
class StateSolution:
    """Forward trajectories plus run diagnostics.

    xi is the constraint reaction: the obstacle multiplier at alpha = 0
    and scale·log_potential_prime(rho) on a quench level.
    """

    mu: Trajectory
    rho: Trajectory
    xi: Trajectory
    alpha: float
    diagnostics: StateDiagnostics


def conjugate_gradient(apply_a, b: np.ndarray, x0: np.ndarray, rtol: float, max_iter: int):
    """Plain CG for an SPD operator given matrix-free; returns (x, iters).

    Convergence is relative to ||b||; a zero right-hand side short
    circuits to the exact solution 0.
    """
    b_norm = float(np.sqrt(np.sum(b * b)))
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    tol = rtol * b_norm
    x = x0.copy()
    r = b - apply_a(x)
    rs = float(np.sum(r * r))
    if np.sqrt(rs) <= tol:
        return x, 0
    p = r.copy()
    for k in range(1, max_iter + 1):
        ap = apply_a(p)
        alpha = rs / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.sum(r * r))
        if np.sqrt(rs_new) <= tol:
            return x, k
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"conjugate gradient did not reach rtol={rtol:g} in {max_iter} iterations "
        f"(relative residual {np.sqrt(rs) / b_norm:.3e})"
    )


def mu_zeroth_coefficient(
    rho_new: np.ndarray,
    rho_old: np.ndarray,
    tau: float,
    model: PotentialConfig,
    floor: float,
) -> tuple[np.ndarray, int]:
    """Zeroth-order coefficient of the chemical-potential solve.

    (1 + 2 g(rho_new) + g'(rho_new)(rho_new - rho_old)) / tau, clamped
    below at `floor` so the system stays positive definite; the clamp
    count is reported.  The backward solve reuses this function verbatim
    so that its operator is the exact transpose of the forward one.
    """
    c = (1.0 + 2.0 * model.g(rho_new) + model.g_prime(rho_new) * (rho_new - rho_old)) / tau
    clamped = c < floor
    n = int(np.count_nonzero(clamped))
    if n:
        c = np.where(clamped, floor, c)
    return c, n


def step_rho(
    rho_n: Field,
    mu_n: Field,
    level: QuenchLevel | None,
    tau: float,
    model: PotentialConfig,
    op: NonlocalOperator,
    resolvent_tol: float = 1e-13,
) -> tuple[Field, Field]:
    """One order-parameter update; level None means the obstacle problem."""
    drive = (
        mu_n.values * model.g_prime(rho_n.values)
        - model.f_prime(rho_n.values)
        - op.apply_values(rho_n.values)
    )
    b = rho_n.values + tau * drive
    if level is None:
        rho, xi = obstacle_resolvent(b, tau)
    else:
        rho, slope = quench_resolvent_detail(b, tau * level.scale, tol_factor=resolvent_tol)
        xi = level.scale * slope
    return Field(rho_n.grid, rho), Field(rho_n.grid, xi)


def step_mu(
    mu_n: Field,
    rho_n: Field,
    rho_np1: Field,
    u_np1: Field,
    tau: float,
    model: PotentialConfig,
    opts: SolverOptions = SolverOptions(),
    stats: dict | None = None,
) -> Field:
    """One chemical-potential update: CG on the SPD step system."""
    grid = mu_n.grid
    a, clamps = mu_zeroth_coefficient(
        rho_np1.values, rho_n.values, tau, model, opts.coefficient_floor
    )
    rhs = (1.0 + 2.0 * model.g(rho_np1.values)) * mu_n.values / tau + u_np1.values

    def apply_a(x):
        return a * x - laplacian_values(grid, x)

    mu, iters = conjugate_gradient(apply_a, rhs, mu_n.values, opts.cg_rtol, opts.cg_max_iter)
    if stats is not None:
        stats["clamp_events"] = stats.get("clamp_events", 0) + clamps
        stats["cg_iterations_max"] = max(stats.get("cg_iterations_max", 0), iters)
    return Field(grid, mu)


def solve_state(
    u: Trajectory,
    level: QuenchLevel | None,
    init: InitialData,
    model: PotentialConfig,
    op: NonlocalOperator,
    opts: SolverOptions = SolverOptions(),
) -> StateSolution:
    """March the coupled system over the whole time grid.

    u supplies the source of the chemical-potential equation; the step
    from node n to n+1 consumes u at node n+1.
    """
    tgrid = u.tgrid
    grid = u.grid
    if grid != init.grid:
        raise ConfigError("(A2) control grid does not match the initial data")
    tau = tgrid.tau
    nodes = tgrid.n_nodes

    rho = np.empty((nodes,) + grid.shape)
    mu = np.empty_like(rho)
    xi = np.empty_like(rho)
    rho[0] = init.rho0.values
    mu[0] = init.mu0.values
    if level is None:
        xi[0] = 0.0  # interior start, multiplier inactive at t = 0
        alpha = 0.0
    else:
        xi[0] = level.scale * log_potential_prime(rho[0])
        alpha = level.alpha

    stats: dict = {}
    rho_f = Field(grid, rho[0])
    mu_f = Field(grid, mu[0])
    for n in range(tgrid.steps):
        rho_next, xi_next = step_rho(
            rho_f, mu_f, level, tau, model, op, resolvent_tol=opts.resolvent_tol
        )
        mu_next = step_mu(
            mu_f, rho_f, rho_next, u.snapshot(n + 1), tau, model, opts, stats
        )
        rho[n + 1] = rho_next.values
        xi[n + 1] = xi_next.values
        mu[n + 1] = mu_next.values
        rho_f, mu_f = rho_next, mu_next

    mu_t = Trajectory(tgrid, grid, mu)
    rho_t = Trajectory(tgrid, grid, rho)
    xi_t = Trajectory(tgrid, grid, xi)

    control_nonneg = bool(np.min(u.values) >= 0.0) and bool(np.min(init.mu0.values) >= 0.0)
    min_mu = float(np.min(mu))
    diag = StateDiagnostics(
        alpha=alpha,
        min_mu=min_mu,
        min_rho=float(np.min(rho)),
        max_rho=float(np.max(rho)),
        xi_l6=norm_lp_spacetime(xi_t, 6.0),
        energy_residual_max=0.0,
        clamp_events=stats.get("clamp_events", 0),
        cg_iterations_max=stats.get("cg_iterations_max", 0),
        mu_nonneg_ok=(min_mu >= -1e-10) if control_nonneg else None,
    )
    sol = StateSolution(mu=mu_t, rho=rho_t, xi=xi_t, alpha=alpha, diagnostics=diag)
    diag.energy_residual_max = energy_residual(sol, u, model)
    return sol


def energy_residual_profile(sol: StateSolution, u: Trajectory, model: PotentialConfig) -> np.ndarray:
    """Relative defect of the balance law

        ∫ (1/2 + g(rho(t))) mu(t)² + ∫₀ᵗ∫ |∇mu|² = same at t=0 + ∫₀ᵗ∫ u·mu

    evaluated on the discrete solution with trapezoidal time quadrature.
    The scheme satisfies it to first order in the step size.
    """
    tgrid = sol.mu.tgrid
    grid = sol.mu.grid
    nodes = tgrid.n_nodes
    tau = tgrid.tau

    stored = np.empty(nodes)
    dissip = np.empty(nodes)
    source = np.empty(nodes)
    for n in range(nodes):
        mu_n = sol.mu.values[n]
        g_n = model.g(sol.rho.values[n])
        stored[n] = float(np.sum((0.5 + g_n) * mu_n * mu_n)) * grid.cell_volume
        dissip[n] = h1_seminorm_sq(sol.mu.snapshot(n))
        source[n] = inner_product(u.snapshot(n), sol.mu.snapshot(n))

    res = np.zeros(nodes)
    cum_d = 0.0
    cum_s = 0.0
    for n in range(1, nodes):
        cum_d += 0.5 * tau * (dissip[n - 1] + dissip[n])
        cum_s += 0.5 * tau * (source[n - 1] + source[n])
        lhs = stored[n] + cum_d
        rhs = stored[0] + cum_s
        scale = max(abs(stored[n]), abs(stored[0]), abs(cum_d), abs(cum_s))
        gap = abs(lhs - rhs)
        res[n] = 0.0 if gap == 0.0 else gap / max(scale, 1e-300)
    return res


def energy_residual(sol: StateSolution, u: Trajectory, model: PotentialConfig) -> float:
    return float(np.max(energy_residual_profile(sol, u, model)))


@dataclass
class AprioriReport:
    """Discrete counterparts of the uniform-in-alpha estimates."""

    mu_time_h1: float
    mu_sup: float
    rho_time_w16: float
    xi_l6: float
    weighted_gradient: float

    def as_dict(self) -> dict:
        return self.__dict__.copy()


def apriori_report(sol: StateSolution, level: QuenchLevel | None, model: PotentialConfig) -> AprioriReport:
    tgrid = sol.mu.tgrid
    grid = sol.mu.grid
    tau = tgrid.tau
    w = trapezoid_weights(tgrid.n_nodes)

    mu_l2_sq = norm_l2_spacetime(sol.mu) ** 2
    dmu = np.diff(sol.mu.values, axis=0) / tau
    mu_h1 = float(np.sqrt(mu_l2_sq + np.sum(dmu * dmu) * tau * grid.cell_volume))
    mu_sup = float(np.max(np.abs(sol.mu.values)))

    rho6 = np.sum(np.abs(sol.rho.values) ** 6, axis=tuple(range(1, sol.rho.values.ndim)))
    drho = np.diff(sol.rho.values, axis=0) / tau
    drho6 = np.sum(np.abs(drho) ** 6, axis=tuple(range(1, drho.ndim)))
    rho_w16 = float(
        (np.sum(w * rho6) * tau * grid.cell_volume + np.sum(drho6) * tau * grid.cell_volume)
        ** (1.0 / 6.0)
    )

    weighted = 0.0
    if level is not None:
        for n in range(tgrid.n_nodes):
            r = sol.rho.values[n]
            acc = 0.0
            for axis, h in enumerate(grid.spacing):
                d = np.diff(r, axis=axis) / h
                lo = [slice(None)] * r.ndim
                hi = [slice(None)] * r.ndim
                lo[axis] = slice(0, -1)
                hi[axis] = slice(1, None)
                face = 0.5 * (r[tuple(lo)] + r[tuple(hi)])
                acc += float(np.sum(d * d * log_potential_second(face)) * grid.cell_volume)
            weighted += w[n] * tau * level.scale * acc

    return AprioriReport(
        mu_time_h1=mu_h1,
        mu_sup=mu_sup,
        rho_time_w16=rho_w16,
        xi_l6=norm_lp_spacetime(sol.xi, 6.0),
        weighted_gradient=float(weighted),
    )


def check_obstacle_signs(sol: StateSolution) -> list[str]:
    """Exact multiplier sign structure for an obstacle run.

    Strictly interior cells must carry xi = 0, cells pinned at 0 need
    xi ≤ 0 and cells pinned at 1 need xi ≥ 0; no tolerance anywhere.
    Returns a list of violation descriptions (empty when clean).
    """
    if sol.alpha != 0.0:
        raise ValueError("sign structure applies to obstacle runs only")
    out: list[str] = []
    rho = sol.rho.values
    xi = sol.xi.values
    if np.any(rho < 0.0) or np.any(rho > 1.0):
        out.append("rho leaves [0, 1]")
    interior = (rho > 0.0) & (rho < 1.0)
    if np.any(xi[interior] != 0.0):
        out.append("xi != 0 at interior cells")
    if np.any(xi[rho == 0.0] > 0.0):
        out.append("xi > 0 at cells pinned to 0")
    if np.any(xi[rho == 1.0] < 0.0):
        out.append("xi < 0 at cells pinned to 1")
    return out
