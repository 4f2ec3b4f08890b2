import numpy as np
import pytest

from quenchctrl.costs import AdmissibleSet, CostWeights, project_admissible
from quenchctrl.grid import Field, Grid, TimeGrid, Trajectory, norm_l2_spacetime
from quenchctrl.nonlocal_op import Kernel, NonlocalOperator
from quenchctrl.optimize import (
    PGDOptions,
    deep_quench_continuation,
    projected_gradient_descent,
    reduced_gradient,
    sample_variational_inequality,
)
from quenchctrl.potentials import PotentialConfig
from quenchctrl.state import InitialData


def small_problem(n=12, steps=15, rw=1.0, mw=0.5, cw=2.0, rho_t=0.8, mu_t=1.0):
    grid = Grid.line(n, 1.0)
    tgrid = TimeGrid(1.0, steps)
    model = PotentialConfig(f_strength=0.25, g_family="linear")
    op = NonlocalOperator(Kernel.gaussian(1.0, 0.1), grid)
    init = InitialData(Field.constant(grid, 0.5), Field.constant(grid, 1.0))
    weights = CostWeights(
        rho_weight=rw,
        mu_weight=mw,
        control_weight=cw,
        rho_target=Trajectory.constant(tgrid, grid, rho_t),
        mu_target=Trajectory.constant(tgrid, grid, mu_t),
    )
    box = AdmissibleSet(Trajectory.constant(tgrid, grid, 2.0))
    return grid, tgrid, model, op, init, weights, box


def test_pure_control_cost_collapses_to_zero():
    # no tracking reward: the optimum is u = 0 and one projected step
    # from anywhere lands exactly on it
    grid, tgrid, model, op, init, _, box = small_problem()
    weights = CostWeights(
        rho_weight=0.0,
        mu_weight=0.0,
        control_weight=1.0,
        rho_target=Trajectory.zeros(tgrid, grid),
        mu_target=Trajectory.zeros(tgrid, grid),
    )
    u0 = Trajectory.constant(tgrid, grid, 1.0)
    res = projected_gradient_descent(
        u0, model.level(1e-2), weights, box,
        PGDOptions(tol=1e-10), init=init, model=model, op=op,
    )
    assert res.converged
    assert res.iterations <= 2
    assert norm_l2_spacetime(res.control) <= 1e-12


def test_reduced_gradient_decoupled_exact():
    # zero tracking weights decouple the adjoint: gradient = cw*u (+ the
    # anchor pull), bit-for-bit
    grid, tgrid, model, op, init, _, box = small_problem()
    weights = CostWeights(
        rho_weight=0.0,
        mu_weight=0.0,
        control_weight=3.0,
        rho_target=Trajectory.zeros(tgrid, grid),
        mu_target=Trajectory.zeros(tgrid, grid),
    )
    u = Trajectory.constant(tgrid, grid, 0.7)
    g = reduced_gradient(u, model.level(1e-2), weights, None, init, model, op)
    assert np.array_equal(g.values, 3.0 * u.values)
    anchor = Trajectory.constant(tgrid, grid, 0.2)
    g2 = reduced_gradient(u, model.level(1e-2), weights, anchor, init, model, op)
    assert np.array_equal(g2.values, 3.0 * u.values + 0.5)


def test_history_costs_nonincreasing():
    grid, tgrid, model, op, init, weights, box = small_problem()
    u0 = Trajectory.constant(tgrid, grid, 1.0)
    res = projected_gradient_descent(
        u0, model.level(1e-2), weights, box,
        PGDOptions(tol=1e-6, max_iters=60), init=init, model=model, op=op,
    )
    costs = [row.cost for row in res.history]
    assert all(a >= b - 1e-15 for a, b in zip(costs, costs[1:]))
    assert res.history[0].iteration == 0
    assert res.cost == costs[-1]


def test_stationary_start_returns_immediately():
    grid, tgrid, model, op, init, weights, box = small_problem()
    u0 = Trajectory.constant(tgrid, grid, 1.0)
    first = projected_gradient_descent(
        u0, model.level(1e-2), weights, box,
        PGDOptions(tol=1e-8, max_iters=100), init=init, model=model, op=op,
    )
    assert first.converged
    again = projected_gradient_descent(
        first.control, model.level(1e-2), weights, box,
        PGDOptions(tol=1e-8, max_iters=100), init=init, model=model, op=op,
    )
    assert again.converged
    assert again.iterations == 0
    assert np.array_equal(again.control.values, first.control.values)


def test_initial_point_is_projected():
    grid, tgrid, model, op, init, weights, box = small_problem()
    wild = Trajectory.constant(tgrid, grid, 50.0)
    res = projected_gradient_descent(
        wild, model.level(1e-1), weights, box,
        PGDOptions(tol=1e-5, max_iters=5), init=init, model=model, op=op,
    )
    assert np.max(res.control.values) <= 2.0
    assert np.min(res.control.values) >= 0.0


def test_vi_sampler_sign():
    # at u = 0 with gradient identically +1 every admissible v >= 0 gives
    # a nonnegative pairing; gradient -1 gives the mirror image
    grid = Grid.line(4, 1.0)
    tgrid = TimeGrid(1.0, 3)
    box = AdmissibleSet(Trajectory.constant(tgrid, grid, 1.0))
    u = Trajectory.zeros(tgrid, grid)
    plus = Trajectory.constant(tgrid, grid, 1.0)
    rng = np.random.default_rng(0)
    assert sample_variational_inequality(u, plus, box, rng, 50) >= 0.0
    minus = Trajectory.constant(tgrid, grid, -1.0)
    assert sample_variational_inequality(u, minus, box, rng, 50) < 0.0


def test_continuation_schedule_validation():
    grid, tgrid, model, op, init, weights, box = small_problem()
    u0 = Trajectory.zeros(tgrid, grid)
    kw = dict(u0=u0, init=init, model=model, op=op)
    with pytest.raises(ValueError):
        deep_quench_continuation([], weights, box, **kw)
    with pytest.raises(ValueError):
        deep_quench_continuation([1e-2, 1e-1], weights, box, **kw)
    with pytest.raises(ValueError):
        deep_quench_continuation([1e-1, -1e-3], weights, box, **kw)


def test_continuation_small_run_structure():
    grid, tgrid, model, op, init, weights, box = small_problem()
    u0 = Trajectory.constant(tgrid, grid, 1.0)
    schedule = [1e-1, 1e-2, 1e-3, 1e-4]
    run = deep_quench_continuation(
        schedule, weights, box,
        PGDOptions(tol=1e-6, max_iters=80),
        u0=u0, init=init, model=model, op=op,
    )
    assert [r.alpha for r in run.levels] == schedule
    assert run.all_converged
    # level 0 runs unanchored, so exactly the later levels report a gap
    assert run.levels[0].anchor_distance is None
    assert len(run.anchor_distances) == len(schedule) - 1
    assert all(d >= 0 for d in run.anchor_distances)
    # obstacle limit: the last quench state is already close
    assert run.final_state_distance < 1e-2
    assert run.final_sign_violations == []
    assert run.final_state.alpha == 0.0
    for rec in run.levels:
        assert rec.pairing_value >= 0.0
        assert rec.within_budget
        assert rec.cost_plain <= rec.cost + 1e-15
    # the anchored optimality condition ties the projection residual to
    # the anchored displacement, both shrinking along the schedule
    assert run.anchor_distances[-1] < run.anchor_distances[0]


def test_continuation_warm_start_continuity():
    # consecutive level optimizers stay close: the anchored gap at the
    # last level is far below the first one and the control moves little
    grid, tgrid, model, op, init, weights, box = small_problem()
    u0 = Trajectory.constant(tgrid, grid, 1.0)
    run = deep_quench_continuation(
        [1e-1, 1e-2, 1e-3], weights, box,
        PGDOptions(tol=1e-6, max_iters=80),
        u0=u0, init=init, model=model, op=op,
    )
    last_gap = run.anchor_distances[-1]
    ctrl_norm = norm_l2_spacetime(run.final_control)
    assert last_gap <= 0.1 * max(ctrl_norm, 1e-12)
