"""Acceptance gate: the eleven release criteria, one test each.

Every test prints a single PASS/FAIL line with the measured numbers so a
plain `pytest -rA tests/test_acceptance.py` reads as a checklist.  The
expensive continuation run and the quench sweep are shared module-scoped
fixtures; everything else is computed in place at the stated sizes.
"""

import numpy as np
import pytest

from quenchctrl.adjoint import solve_adjoint, time_ramp_probe
from quenchctrl.cli import main, read_fields_csv
from quenchctrl.config import ProblemConfig, build_problem, preset_config
from quenchctrl.costs import CostWeights, project_admissible, tracking_cost
from quenchctrl.grid import (
    Field,
    Grid,
    Trajectory,
    inner_product,
    norm_l2,
    norm_l2_spacetime,
)
from quenchctrl.optimize import (
    PGDOptions,
    deep_quench_continuation,
    reduced_gradient,
    sample_variational_inequality,
)
from quenchctrl.potentials import (
    log_potential_prime,
    obstacle_resolvent,
    quench_resolvent,
)
from quenchctrl.state import check_obstacle_signs, energy_residual, solve_state
from quenchctrl.verify import bisection_quench_root, convolution_quadrature_oracle


def report(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def solve_cfg(cfg: ProblemConfig, alpha: float):
    prob = build_problem(cfg)
    level = None if alpha == 0.0 else prob.model.level(alpha)
    sol = solve_state(prob.control, level, prob.init, prob.model, prob.op, prob.solver_opts)
    return prob, sol


# -- shared expensive artifacts ---------------------------------------------


@pytest.fixture(scope="module")
def default_problem():
    return build_problem(ProblemConfig())


@pytest.fixture(scope="module")
def sweep_solutions(default_problem):
    """Obstacle base plus quench solves at the five sweep levels, default config."""
    p = default_problem
    base = solve_state(p.control, None, p.init, p.model, p.op, p.solver_opts)
    quench = {}
    for alpha in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
        quench[alpha] = solve_state(
            p.control, p.model.level(alpha), p.init, p.model, p.op, p.solver_opts
        )
    return base, quench


@pytest.fixture(scope="module")
def default_run(default_problem):
    """Full continuation on the default tracking config (the costly fixture)."""
    p = default_problem
    return deep_quench_continuation(
        p.config.schedule_values(),
        p.weights,
        p.box,
        p.pgd_opts,
        u0=p.control,
        init=p.init,
        model=p.model,
        op=p.op,
        solver_opts=p.solver_opts,
        seed=p.config.seed,
    )


# -- criteria ----------------------------------------------------------------


def test_criterion_01_fixed_point_exactness():
    cfg = preset_config("trivial")
    worst = 0.0
    for alpha in (1.0, 1e-3, 0.0):
        _, sol = solve_cfg(cfg, alpha)
        dev = max(
            float(np.max(np.abs(sol.rho.values - 0.5))),
            float(np.max(np.abs(sol.mu.values))),
        )
        worst = max(worst, dev)
    report(1, worst <= 1e-14, f"max deviation {worst:.2e} <= 1e-14 at alpha in {{1, 1e-3, 0}}")


def test_criterion_02_bounds_everywhere(sweep_solutions):
    base, quench = sweep_solutions
    tested = [("default obstacle", base)] + [
        (f"default alpha={a:g}", s) for a, s in quench.items()
    ]
    trivial = preset_config("trivial")
    for alpha in (1.0, 1e-3, 0.0):
        tested.append((f"trivial alpha={alpha:g}", solve_cfg(trivial, alpha)[1]))
    smooth = preset_config("smooth")
    tested.append(("smooth alpha=0.5", solve_cfg(smooth, 0.5)[1]))
    twod = preset_config("twod")
    tested.append(("twod alpha=1e-3", solve_cfg(twod, 1e-3)[1]))
    varied = preset_config(
        "default",
        overrides=[
            "cells_x=16",
            "steps=50",
            "kernel=tophat",
            "kernel_radius=0.3",
            "rho0=step:0.3,0.7,0.5",
            "g_family=saturating",
        ],
    )
    tested.append(("step/tophat alpha=1e-2", solve_cfg(varied, 1e-2)[1]))
    tested.append(("step/tophat obstacle", solve_cfg(varied, 0.0)[1]))

    failures = []
    for name, sol in tested:
        d = sol.diagnostics
        if d.min_mu < -1e-10:
            failures.append(f"{name}: min mu {d.min_mu:.2e}")
        if sol.alpha > 0.0:
            if not (d.min_rho > 0.0 and d.max_rho < 1.0):
                failures.append(f"{name}: rho not strictly interior")
        else:
            if not (d.min_rho >= 0.0 and d.max_rho <= 1.0):
                failures.append(f"{name}: rho leaves [0, 1]")
            failures.extend(f"{name}: {v}" for v in check_obstacle_signs(sol))
    report(
        2,
        not failures,
        failures[0] if failures else f"{len(tested)} configs: mu floor, rho bounds, sign table all clean",
    )


def test_criterion_03_energy_identity():
    residuals = {}
    for steps in (200, 400):
        cfg = ProblemConfig(steps=steps)
        prob, sol = solve_cfg(cfg, cfg.alpha)
        residuals[steps] = energy_residual(sol, prob.control, prob.model)
    res200 = residuals[200]
    ratio = residuals[200] / residuals[400]
    ok = res200 <= 0.05 and 1.6 <= ratio <= 2.6
    report(3, ok, f"residual(nt=200) {res200:.2e} <= 0.05, halving ratio {ratio:.3f} in [1.6, 2.6]")


def test_criterion_04_operator_adjoint_identity(default_problem):
    op = default_problem.op
    grid = op.grid
    rng = np.random.default_rng(0)
    anchor = Field(grid, rng.uniform(0.2, 0.8, grid.shape))
    worst = 0.0
    for _ in range(100):
        v = Field(grid, rng.standard_normal(grid.shape))
        w = Field(grid, rng.standard_normal(grid.shape))
        lhs = inner_product(op.apply_derivative_adjoint(anchor, v), w)
        rhs = inner_product(v, op.apply_derivative(anchor, w))
        gap = abs(lhs - rhs) / max(norm_l2(v) * norm_l2(w), 1e-300)
        worst = max(worst, gap)
    f = rng.standard_normal(grid.shape)
    quad_gap = float(
        np.max(
            np.abs(
                op.apply_values(f)
                - convolution_quadrature_oracle(op.kernel, grid, f).reshape(grid.shape)
            )
        )
    )
    ok = worst <= 1e-12 and quad_gap <= 1e-12
    report(4, ok, f"adjoint identity {worst:.2e} <= 1e-12 on 100 pairs, quadrature gap {quad_gap:.2e}")


def test_criterion_05_resolvent_correctness():
    rng = np.random.default_rng(1)
    residual_worst = 0.0
    bisect_worst = 0.0
    lip_q = 0.0
    lip_o = 0.0
    for _ in range(50):
        b = float(rng.uniform(-0.5, 1.5))
        s = float(10.0 ** rng.uniform(np.log10(0.05), 0.0))
        rho = quench_resolvent(b, s)
        residual_worst = max(residual_worst, abs(rho + s * log_potential_prime(rho) - b))
        bisect_worst = max(bisect_worst, abs(rho - bisection_quench_root(b, s)))
        b2 = float(rng.uniform(-0.5, 1.5))
        if b2 != b:
            lip_q = max(lip_q, abs(quench_resolvent(b2, s) - rho) / abs(b2 - b))
            r1, _ = obstacle_resolvent(b, 0.1)
            r2, _ = obstacle_resolvent(b2, 0.1)
            lip_o = max(lip_o, abs(r1 - r2) / abs(b2 - b))
    gap_worst = 0.0
    for _ in range(50):
        b = float(rng.uniform(-0.5, 1.5))
        rho_q = quench_resolvent(b, 1e-6)
        rho_o, _ = obstacle_resolvent(b, 1.0)
        gap_worst = max(gap_worst, abs(rho_q - rho_o))
    ok = (
        residual_worst <= 1e-12
        and bisect_worst <= 1e-10
        and gap_worst < 1e-3
        and lip_q <= 1.0 + 1e-12
        and lip_o <= 1.0 + 1e-12
    )
    report(
        5,
        ok,
        f"residual {residual_worst:.2e}, bisection gap {bisect_worst:.2e}, "
        f"obstacle gap {gap_worst:.2e} at scale 1e-6, Lipschitz {lip_q:.6f}/{lip_o:.6f}",
    )


def test_criterion_06_gradient_taylor(default_problem):
    p = default_problem
    level = p.model.level(p.config.alpha)
    u = p.control
    rng = np.random.default_rng(2)
    v = Trajectory(u.tgrid, u.grid, rng.uniform(-1.0, 1.0, u.values.shape))

    def cost_at(w: Trajectory) -> float:
        sol = solve_state(w, level, p.init, p.model, p.op, p.solver_opts)
        return tracking_cost(sol, w, p.weights)

    j0 = cost_at(u)
    grad = reduced_gradient(u, level, p.weights, None, p.init, p.model, p.op, p.solver_opts)
    from quenchctrl.grid import inner_product_spacetime

    slope_dir = inner_product_spacetime(grad, v)
    eps = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    remainders = np.array(
        [abs(cost_at(Trajectory(u.tgrid, u.grid, u.values + e * v.values)) - j0 - e * slope_dir) for e in eps]
    )
    slope = float(np.polyfit(np.log(eps), np.log(remainders), 1)[0])

    # decoupled case: no tracking, gradient is w*u bit for bit and the
    # remainder is the exact quadratic term
    w0 = CostWeights(
        rho_weight=0.0,
        mu_weight=0.0,
        control_weight=2.0,
        rho_target=Trajectory.zeros(u.tgrid, u.grid),
        mu_target=Trajectory.zeros(u.tgrid, u.grid),
    )
    g0 = reduced_gradient(u, level, w0, None, p.init, p.model, p.op, p.solver_opts)
    exact_grad = np.array_equal(g0.values, 2.0 * u.values)
    e = 1e-2
    sol_e = solve_state(
        Trajectory(u.tgrid, u.grid, u.values + e * v.values), level, p.init, p.model, p.op, p.solver_opts
    )
    j_e = tracking_cost(sol_e, Trajectory(u.tgrid, u.grid, u.values + e * v.values), w0)
    sol_0 = solve_state(u, level, p.init, p.model, p.op, p.solver_opts)
    j_0 = tracking_cost(sol_0, u, w0)
    remainder = abs(j_e - j_0 - e * inner_product_spacetime(g0, v))
    analytic = 0.5 * 2.0 * e * e * norm_l2_spacetime(v) ** 2
    decoupled_rel = abs(remainder - analytic) / analytic

    ok = 1.8 <= slope <= 2.2 and exact_grad and decoupled_rel <= 1e-10
    report(
        6,
        ok,
        f"Taylor slope {slope:.4f} in [1.8, 2.2] at nt=200/64 cells; decoupled gradient exact, "
        f"remainder matches analytic to rel {decoupled_rel:.2e}",
    )


def test_criterion_07_trivial_optimum(default_problem):
    p = default_problem
    weights = CostWeights(
        rho_weight=0.0,
        mu_weight=0.0,
        control_weight=1.0,
        rho_target=Trajectory.zeros(p.tgrid, p.grid),
        mu_target=Trajectory.zeros(p.tgrid, p.grid),
    )
    u0 = Trajectory(p.tgrid, p.grid, 0.5 * p.box.ceiling.values)
    run = deep_quench_continuation(
        p.config.schedule_values(),
        weights,
        p.box,
        PGDOptions(tol=1e-9, max_iters=50),
        u0=u0,
        init=p.init,
        model=p.model,
        op=p.op,
        solver_opts=p.solver_opts,
    )
    norms = [norm_l2_spacetime(rec.control) for rec in run.levels]
    iters = [rec.iterations for rec in run.levels]
    ok = all(n <= 1e-8 for n in norms) and all(i <= 50 for i in iters) and run.all_converged
    report(
        7,
        ok,
        f"pure control-energy run: max level norm {max(norms):.2e} <= 1e-8, "
        f"max iterations {max(iters)} <= 50 over {len(norms)} levels",
    )


def test_criterion_08_deep_quench_convergence(sweep_solutions, default_run):
    base, quench = sweep_solutions
    alphas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    dists = [norm_l2_spacetime(quench[a].rho - base.rho) for a in alphas]
    decreasing = all(a > b for a, b in zip(dists, dists[1:]))
    gaps = default_run.anchor_distances
    gaps_decreasing = all(a >= b for a, b in zip(gaps, gaps[1:]))
    ok = decreasing and dists[-1] < 1e-2 and gaps_decreasing
    report(
        8,
        ok,
        f"state distances {dists[0]:.2e} -> {dists[-1]:.2e} strictly decreasing, final < 1e-2; "
        f"control gaps {gaps[0]:.2e} -> {gaps[-1]:.2e} decreasing over {len(gaps)} anchored levels",
    )


def test_criterion_09_uniform_reaction_norm(sweep_solutions):
    _, quench = sweep_solutions
    norms = [sol.diagnostics.xi_l6 for sol in quench.values()]
    spread = max(norms) / min(norms)
    report(9, spread < 10.0, f"xi L6 norms spread factor {spread:.3f} < 10 across the sweep")


def test_criterion_10_limit_optimality(default_problem, default_run):
    p = default_problem
    final = default_run.levels[-1]
    u_star = final.control
    level = p.model.level(final.alpha)
    state = solve_state(u_star, level, p.init, p.model, p.op, p.solver_opts)
    adj = solve_adjoint(level, state, p.weights, p.model, p.op, p.solver_opts)
    plain_grad = Trajectory(
        u_star.tgrid, u_star.grid, p.weights.control_weight * u_star.values + adj.mu_dual.values
    )
    rng = np.random.default_rng(123)
    vi_min = sample_variational_inequality(u_star, plain_grad, p.box, rng, 100)

    candidate = Trajectory(
        u_star.tgrid, u_star.grid, -adj.mu_dual.values / p.weights.control_weight
    )
    proj_res = norm_l2_spacetime(u_star - project_admissible(candidate, p.box))

    pairings = [rec.pairing_value for rec in default_run.levels]
    usable = [
        (rec.scale, rec.concentration_value)
        for rec in default_run.levels
        if rec.concentration_value > 0.0
    ]
    slope = float(
        np.polyfit(np.log([s for s, _ in usable]), np.log([c for _, c in usable]), 1)[0]
    )

    tol = p.pgd_opts.tol
    ok = (
        vi_min >= -1e-6
        and proj_res <= 10.0 * tol
        and all(pv >= 0.0 for pv in pairings)
        and 0.9 <= slope <= 1.1
    )
    report(
        10,
        ok,
        f"VI min {vi_min:.2e} >= -1e-6 on 100 samples, projection residual {proj_res:.2e} "
        f"<= {10 * tol:.0e}, pairings all >= 0, concentration slope {slope:.4f} in [0.9, 1.1]",
    )


def test_criterion_11_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("cells_x = 32\nsteps = 60\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    sim_same = (a / "fields.csv").read_bytes() == (b / "fields.csv").read_bytes()

    opt_cfg = tmp_path / "opt.cfg"
    opt_cfg.write_text(
        "cells_x = 8\nsteps = 10\nschedule = 1e-1,1e-2\ntol = 1e-5\nmax_iters = 60\nvi_samples = 20\n"
    )
    c, d = tmp_path / "c", tmp_path / "d"
    assert main(["optimize", "--config", str(opt_cfg), "--out", str(c)]) == 0
    assert main(["optimize", "--config", str(opt_cfg), "--out", str(d)]) == 0
    opt_same = all(
        (c / name).read_bytes() == (d / name).read_bytes()
        for name in ("control_0.csv", "control_1.csv", "history.csv", "limit_report.json")
    )

    fields = read_fields_csv(a / "fields.csv")
    from quenchctrl.config import load_config

    prob = build_problem(load_config(cfg))
    sol = solve_state(
        prob.control,
        prob.model.level(prob.config.alpha),
        prob.init,
        prob.model,
        prob.op,
        prob.solver_opts,
    )
    round_trip = (
        np.array_equal(fields["rho"], sol.rho.values)
        and np.array_equal(fields["mu"], sol.mu.values)
        and np.array_equal(fields["xi"], sol.xi.values)
        and np.array_equal(fields["u"], prob.control.values)
    )
    ok = sim_same and opt_same and round_trip
    report(
        11,
        ok,
        f"simulate reruns byte-identical: {sim_same}; optimize reruns byte-identical: {opt_same}; "
        f"CSV round-trip lossless: {round_trip}",
    )
