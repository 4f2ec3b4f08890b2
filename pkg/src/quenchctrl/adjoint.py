"""Backward-in-time dual solve for the reduced gradient.

The dual pair (mu_dual, rho_dual) marches backward with the time mirror
of the forward scheme: the mu_dual update solves the same SPD operator
the forward chemical-potential step used at that node (conservative
form of the (1+2g) time derivative), and the rho_dual update is
pointwise with the quench curvature term implicit and all couplings
taken one-sided, consistent with the backward march.  These lag choices
make the march the exact transpose of the forward stepping, so
mu_dual + control_weight·u is the exact gradient of the discrete cost;
it is at the same time a consistent discretization of the continuous
dual system.

The terminal dual values vanish identically, and the node-0 values are
stored as zero as well: the initial data carry no dual degree of
freedom, which mirrors the fact that admissible probe functions vanish
at t = 0.  Only quench levels are supported; the obstacle problem has
no differentiable control-to-state map, its optimality system is
reached through the continuation instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .costs import CostWeights
from .errors import ConfigError
from .grid import (
    Field,
    Trajectory,
    h1_seminorm_sq,
    inner_product_spacetime,
    laplacian_values,
    norm_l2,
    norm_l2_spacetime,
)
from .nonlocal_op import NonlocalOperator
from .potentials import PotentialConfig, QuenchLevel, log_potential_second
from .state import SolverOptions, StateSolution, conjugate_gradient, mu_zeroth_coefficient

__all__ = [
    "AdjointDiagnostics",
    "AdjointSolution",
    "solve_adjoint",
    "ConcentrationMetric",
    "concentration_metric",
    "time_ramp_probe",
]


@dataclass
class AdjointDiagnostics:
    pairing_value: float
    mu_dual_time_h1: float
    mu_dual_sup_h1: float
    rho_dual_sup_l2: float
    multiplier_l2: float

    def as_dict(self) -> dict:
        return self.__dict__.copy()


@dataclass
class AdjointSolution:
    """Dual trajectories: mu_dual drives the gradient, rho_dual pairs with
    the constraint, multiplier = scale·log_potential_second(rho)·rho_dual."""

    mu_dual: Trajectory
    rho_dual: Trajectory
    multiplier: Trajectory
    alpha: float
    scale: float
    diagnostics: AdjointDiagnostics


def solve_adjoint(
    level: QuenchLevel,
    state: StateSolution,
    weights: CostWeights,
    model: PotentialConfig,
    op: NonlocalOperator,
    opts: SolverOptions = SolverOptions(),
) -> AdjointSolution:
    """Backward march over the stored state trajectories.

    Requires a quench level (alpha > 0) and a state solved at the same
    level.
    """
    if level is None or level.alpha <= 0.0:
        raise ValueError("the dual system is only defined on quench levels (alpha > 0)")
    if state.alpha != level.alpha:
        raise ValueError("state was not solved at the given quench level")
    rho = state.rho.values
    mu = state.mu.values
    tgrid = state.rho.tgrid
    grid = state.rho.grid
    if weights.rho_target.values.shape != rho.shape or weights.mu_target.values.shape != mu.shape:
        raise ConfigError("(A4) target does not match the state discretization")
    tau = tgrid.tau
    nt = tgrid.steps
    scale = level.scale

    p = np.zeros_like(rho)
    q = np.zeros_like(rho)
    b1 = weights.rho_weight
    b2 = weights.mu_weight
    rho_tgt = weights.rho_target.values
    mu_tgt = weights.mu_target.values

    for m in range(nt - 1, 0, -1):
        a_m, _ = mu_zeroth_coefficient(rho[m], rho[m - 1], tau, model, opts.coefficient_floor)
        gp_m = model.g_prime(rho[m])
        rhs = (
            (1.0 + 2.0 * model.g(rho[m + 1])) * p[m + 1] / tau
            + gp_m * q[m + 1]
            + b2 * (mu[m] - mu_tgt[m])
        )

        def apply_a(x, a=a_m):
            return a * x - laplacian_values(grid, x)

        p[m], _ = conjugate_gradient(apply_a, rhs, p[m + 1], opts.cg_rtol, opts.cg_max_iter)

        source = (
            b1 * (rho[m] - rho_tgt[m])
            - (model.f_second(rho[m]) - mu[m] * model.g_second(rho[m])) * q[m + 1]
            - op.apply_adjoint_values(q[m + 1])
            - (
                2.0 * gp_m * (mu[m] - mu[m - 1])
                + model.g_second(rho[m]) * (rho[m] - rho[m - 1]) * mu[m]
                + gp_m * mu[m]
            )
            * p[m]
            / tau
            + model.g_prime(rho[m + 1]) * mu[m + 1] * p[m + 1] / tau
        )
        q[m] = (q[m + 1] + tau * source) / (1.0 + tau * scale * log_potential_second(rho[m]))

    lam = np.zeros_like(q)
    for m in range(1, nt):
        lam[m] = scale * log_potential_second(rho[m]) * q[m]

    mu_dual = Trajectory(tgrid, grid, p)
    rho_dual = Trajectory(tgrid, grid, q)
    multiplier = Trajectory(tgrid, grid, lam)

    pairing = inner_product_spacetime(multiplier, rho_dual)
    dp = np.diff(p, axis=0) / tau
    p_h1_time = float(
        np.sqrt(norm_l2_spacetime(mu_dual) ** 2 + np.sum(dp * dp) * tau * grid.cell_volume)
    )
    p_sup_h1 = max(
        np.sqrt(norm_l2(mu_dual.snapshot(m)) ** 2 + h1_seminorm_sq(mu_dual.snapshot(m)))
        for m in range(nt + 1)
    )
    q_sup_l2 = max(norm_l2(rho_dual.snapshot(m)) for m in range(nt + 1))

    diag = AdjointDiagnostics(
        pairing_value=pairing,
        mu_dual_time_h1=p_h1_time,
        mu_dual_sup_h1=float(p_sup_h1),
        rho_dual_sup_l2=float(q_sup_l2),
        multiplier_l2=norm_l2_spacetime(multiplier),
    )
    return AdjointSolution(
        mu_dual=mu_dual,
        rho_dual=rho_dual,
        multiplier=multiplier,
        alpha=level.alpha,
        scale=level.scale,
        diagnostics=diag,
    )


class ConcentrationMetric(NamedTuple):
    value: float        # ∫∫ multiplier · rho(1-rho) · probe
    cross_check: float  # scale · ∫∫ rho_dual · probe, identical in exact arithmetic


def time_ramp_probe(tgrid, grid) -> Trajectory:
    """Canonical probe t/T: vanishes at t = 0, spatially constant."""
    ramp = tgrid.times() / tgrid.horizon
    vals = np.broadcast_to(
        ramp.reshape((-1,) + (1,) * len(grid.shape)), (tgrid.n_nodes,) + grid.shape
    ).copy()
    return Trajectory(tgrid, grid, vals)


def concentration_metric(
    adj: AdjointSolution, state: StateSolution, probe: Trajectory
) -> ConcentrationMetric:
    """Pair multiplier·rho(1-rho) with a probe vanishing at t = 0.

    The pointwise identity multiplier·rho(1-rho) = scale·rho_dual makes
    value and cross_check agree to rounding; across quench levels the
    metric shrinks linearly with the scale factor.
    """
    if np.any(probe.values[0] != 0.0):
        raise ValueError("probe must vanish at t = 0")
    rho = state.rho.values
    weighted = Trajectory(
        probe.tgrid, probe.grid, adj.multiplier.values * rho * (1.0 - rho)
    )
    value = inner_product_spacetime(weighted, probe)
    cross = adj.scale * inner_product_spacetime(adj.rho_dual, probe)
    return ConcentrationMetric(value=value, cross_check=cross)
