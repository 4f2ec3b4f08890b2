"""Projected gradient descent and the deep-quench continuation.

Each continuation level solves a box-constrained control problem at a
fixed quench parameter.  Level 0 minimizes the plain tracking cost; each
later level minimizes the anchored cost whose proximity term is
centered at the optimizer of the previous level and is warm-started
there, so the controls form a Cauchy-like chain whose tail approximates
the obstacle-limit optimality system.  After the last level the state is
re-solved with the obstacle constraint and the limit diagnostics are
reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import AdjointSolution, concentration_metric, solve_adjoint, time_ramp_probe
from .costs import (
    AdmissibleSet,
    CostWeights,
    anchored_tracking_cost,
    project_admissible,
    tracking_cost,
)
from .grid import Trajectory, inner_product_spacetime, norm_l2_spacetime
from .nonlocal_op import NonlocalOperator
from .potentials import PotentialConfig, QuenchLevel
from .state import (
    InitialData,
    SolverOptions,
    StateSolution,
    check_obstacle_signs,
    solve_state,
)

__all__ = [
    "PGDOptions",
    "HistoryRow",
    "PGDResult",
    "reduced_gradient",
    "projected_gradient_descent",
    "LevelRecord",
    "ContinuationRun",
    "deep_quench_continuation",
    "sample_variational_inequality",
]


@dataclass(frozen=True)
class PGDOptions:
    tol: float = 1e-7          # stationarity residual target
    max_iters: int = 200
    sigma: float = 1e-4        # Armijo fraction
    step0: float | None = None  # None: 1/control_weight, or 1 if that weight is 0
    shrink: float = 0.5
    max_backtracks: int = 40
    vi_samples: int = 100


@dataclass
class HistoryRow:
    iteration: int
    cost: float
    stationarity: float
    step: float


@dataclass
class PGDResult:
    control: Trajectory
    state: StateSolution
    adjoint: AdjointSolution
    gradient: Trajectory
    cost: float
    stationarity: float
    converged: bool
    iterations: int
    stalled: bool
    history: list[HistoryRow] = field(default_factory=list)


def _gradient_trajectory(
    u: Trajectory, adj: AdjointSolution, w: CostWeights, anchor: Trajectory | None
) -> Trajectory:
    vals = w.control_weight * u.values + adj.mu_dual.values
    if anchor is not None:
        vals = vals + (u.values - anchor.values)
    return Trajectory(u.tgrid, u.grid, vals)


def reduced_gradient(
    u: Trajectory,
    level: QuenchLevel,
    weights: CostWeights,
    anchor: Trajectory | None,
    init: InitialData,
    model: PotentialConfig,
    op: NonlocalOperator,
    opts: SolverOptions = SolverOptions(),
) -> Trajectory:
    """Gradient of the (optionally anchored) reduced cost at u.

    One forward and one backward solve; the result is the exact gradient
    of the discrete cost up to the inner solver tolerances.
    """
    state = solve_state(u, level, init, model, op, opts)
    adj = solve_adjoint(level, state, weights, model, op, opts)
    return _gradient_trajectory(u, adj, weights, anchor)


def _cost_of(
    u: Trajectory,
    level: QuenchLevel,
    weights: CostWeights,
    anchor: Trajectory | None,
    init: InitialData,
    model: PotentialConfig,
    op: NonlocalOperator,
    opts: SolverOptions,
) -> tuple[float, StateSolution]:
    state = solve_state(u, level, init, model, op, opts)
    if anchor is None:
        return tracking_cost(state, u, weights), state
    return anchored_tracking_cost(state, u, weights, anchor), state


def projected_gradient_descent(
    u0: Trajectory,
    level: QuenchLevel,
    weights: CostWeights,
    box: AdmissibleSet,
    opts: PGDOptions = PGDOptions(),
    *,
    init: InitialData,
    model: PotentialConfig,
    op: NonlocalOperator,
    anchor: Trajectory | None = None,
    solver_opts: SolverOptions = SolverOptions(),
) -> PGDResult:
    """Armijo projected gradient on the reduced cost at one quench level.

    The stationarity residual is ‖u - P(u - s0·g)‖ with the fixed
    reference step s0; a trial step is accepted when the cost drop
    reaches sigma·‖u - u_trial‖²/s.  Cost history is nonincreasing by
    construction; if no acceptable step exists the run stops flagged as
    stalled.
    """
    step0 = opts.step0
    if step0 is None:
        step0 = 1.0 / weights.control_weight if weights.control_weight > 0.0 else 1.0

    u = project_admissible(u0, box)
    cost, state = _cost_of(u, level, weights, anchor, init, model, op, solver_opts)
    adj = solve_adjoint(level, state, weights, model, op, solver_opts)
    grad = _gradient_trajectory(u, adj, weights, anchor)

    history: list[HistoryRow] = []
    converged = False
    stalled = False
    iterations = 0
    stationarity = float("inf")

    for it in range(opts.max_iters + 1):
        reference = project_admissible(
            Trajectory(u.tgrid, u.grid, u.values - step0 * grad.values), box
        )
        stationarity = norm_l2_spacetime(u - reference)
        history.append(HistoryRow(iteration=it, cost=cost, stationarity=stationarity, step=step0))
        if stationarity <= opts.tol:
            converged = True
            break
        if it == opts.max_iters:
            break

        s = step0
        accepted = False
        for _ in range(opts.max_backtracks):
            trial = project_admissible(
                Trajectory(u.tgrid, u.grid, u.values - s * grad.values), box
            )
            move_sq = norm_l2_spacetime(u - trial) ** 2
            if move_sq == 0.0:
                break  # projection pinned every coordinate; stationary
            trial_cost, trial_state = _cost_of(
                trial, level, weights, anchor, init, model, op, solver_opts
            )
            if cost - trial_cost >= opts.sigma * move_sq / s:
                accepted = True
                break
            s *= opts.shrink
        if not accepted:
            stalled = True
            break

        u, cost, state = trial, trial_cost, trial_state
        adj = solve_adjoint(level, state, weights, model, op, solver_opts)
        grad = _gradient_trajectory(u, adj, weights, anchor)
        iterations = it + 1

    return PGDResult(
        control=u,
        state=state,
        adjoint=adj,
        gradient=grad,
        cost=cost,
        stationarity=stationarity,
        converged=converged,
        iterations=iterations,
        stalled=stalled,
        history=history,
    )


def sample_variational_inequality(
    u_star: Trajectory,
    plain_gradient: Trajectory,
    box: AdmissibleSet,
    rng: np.random.Generator,
    n_samples: int,
) -> float:
    """Min over random admissible v of ∫∫ (mu_dual + w·u)(v - u).

    Nonnegative (up to the stationarity tolerance) at a box-constrained
    minimizer of the plain cost.
    """
    worst = float("inf")
    for _ in range(n_samples):
        v_vals = rng.uniform(0.0, 1.0, size=u_star.values.shape) * box.ceiling.values
        v = Trajectory(u_star.tgrid, u_star.grid, v_vals)
        worst = min(worst, inner_product_spacetime(plain_gradient, v - u_star))
    return worst


@dataclass
class LevelRecord:
    alpha: float
    scale: float
    control: Trajectory
    cost: float
    cost_plain: float
    stationarity: float
    converged: bool
    stalled: bool
    iterations: int
    anchor_distance: float | None
    pairing_value: float
    concentration_value: float
    concentration_cross: float
    projection_residual: float | None
    vi_min: float
    control_h1: float
    within_budget: bool
    history: list[HistoryRow] = field(default_factory=list)


@dataclass
class ContinuationRun:
    levels: list[LevelRecord]
    final_control: Trajectory
    final_state: StateSolution          # obstacle solve with the final control
    final_sign_violations: list[str]
    final_state_distance: float          # ‖rho(last level) - rho(obstacle)‖ over space-time
    anchor_distances: list[float]
    vi_min_final: float
    projection_residual_final: float | None

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.levels)


def _projection_residual(
    u_star: Trajectory, adj: AdjointSolution, weights: CostWeights, box: AdmissibleSet
) -> float | None:
    """Distance of u to the projection form P(-mu_dual / control_weight)."""
    if weights.control_weight <= 0.0:
        return None
    candidate = Trajectory(
        u_star.tgrid, u_star.grid, -adj.mu_dual.values / weights.control_weight
    )
    return norm_l2_spacetime(u_star - project_admissible(candidate, box))


def deep_quench_continuation(
    schedule: list[float],
    weights: CostWeights,
    box: AdmissibleSet,
    opts: PGDOptions = PGDOptions(),
    *,
    u0: Trajectory,
    init: InitialData,
    model: PotentialConfig,
    op: NonlocalOperator,
    solver_opts: SolverOptions = SolverOptions(),
    probe: Trajectory | None = None,
    seed: int = 0,
) -> ContinuationRun:
    """Drive the quench parameter down the schedule, re-optimizing at
    each level, then report the obstacle-limit diagnostics."""
    if len(schedule) == 0:
        raise ValueError("continuation schedule is empty")
    if any(a <= 0.0 for a in schedule):
        raise ValueError("continuation schedule must be strictly positive")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("continuation schedule must be strictly decreasing")

    rng = np.random.default_rng(seed)
    if probe is None:
        probe = time_ramp_probe(u0.tgrid, u0.grid)

    levels: list[LevelRecord] = []
    u = project_admissible(u0, box)
    anchor: Trajectory | None = None
    result: PGDResult | None = None

    for alpha in schedule:
        level = model.level(alpha)
        result = projected_gradient_descent(
            u,
            level,
            weights,
            box,
            opts,
            init=init,
            model=model,
            op=op,
            anchor=anchor,
            solver_opts=solver_opts,
        )
        # a non-converged level is recorded and the later levels still run
        u_star = result.control
        metric = concentration_metric(result.adjoint, result.state, probe)
        plain_grad = _gradient_trajectory(u_star, result.adjoint, weights, anchor=None)
        vi_min = sample_variational_inequality(u_star, plain_grad, box, rng, opts.vi_samples)
        rec = LevelRecord(
            alpha=alpha,
            scale=level.scale,
            control=u_star,
            cost=result.cost,
            cost_plain=tracking_cost(result.state, u_star, weights),
            stationarity=result.stationarity,
            converged=result.converged,
            stalled=result.stalled,
            iterations=result.iterations,
            anchor_distance=None if anchor is None else norm_l2_spacetime(u_star - anchor),
            pairing_value=result.adjoint.diagnostics.pairing_value,
            concentration_value=metric.value,
            concentration_cross=metric.cross_check,
            projection_residual=_projection_residual(u_star, result.adjoint, weights, box),
            vi_min=vi_min,
            control_h1=box.h1_norm(u_star),
            within_budget=box.within_budget(u_star),
            history=result.history,
        )
        levels.append(rec)
        anchor = u_star
        u = u_star

    final_control = levels[-1].control
    obstacle_state = solve_state(final_control, None, init, model, op, solver_opts)
    last_state = result.state
    distance = norm_l2_spacetime(last_state.rho - obstacle_state.rho)

    return ContinuationRun(
        levels=levels,
        final_control=final_control,
        final_state=obstacle_state,
        final_sign_violations=check_obstacle_signs(obstacle_state),
        final_state_distance=distance,
        anchor_distances=[r.anchor_distance for r in levels if r.anchor_distance is not None],
        vi_min_final=levels[-1].vi_min,
        projection_residual_final=levels[-1].projection_residual,
    )
