"""Nonlocal coupling operator: kernel catalog and dense convolution table.

The spatial coupling B[f](x) = ∫ k(|y - x|) f(y) dy is discretized by
midpoint quadrature on the cell centers and stored as a dense weight
table w[i, j] = k(|y_j - x_i|) · vol_j.  The operator is linear, so its
directional derivative is itself and the adjoint is the transpose of
the table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid, Trajectory, norm_l2_spacetime

__all__ = ["Kernel", "NonlocalOperator", "A3Report", "check_a3"]

_VARIANTS = ("gaussian", "newtonian", "tophat", "zero")


@dataclass(frozen=True)
class Kernel:
    """Radial interaction kernel k(r).

    Variants:
      gaussian   amplitude · exp(-r² / (2 width²))
      newtonian  strength / max(r, core_radius)
      tophat     amplitude on r ≤ radius, zero beyond
      zero       identically zero
    """

    variant: str
    amplitude: float = 1.0
    width: float = 1.0
    core_radius: float = 1e-3
    radius: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ConfigError(
                f"(A3) unknown kernel variant {self.variant!r}; "
                f"expected one of {_VARIANTS}"
            )
        if self.variant == "gaussian" and self.width <= 0:
            raise ConfigError("(A3) gaussian kernel needs width > 0")
        if self.variant == "newtonian" and self.core_radius <= 0:
            raise ConfigError("(A3) newtonian kernel needs core_radius > 0")
        if self.variant == "tophat" and self.radius < 0:
            raise ConfigError("(A3) tophat kernel needs radius >= 0")

    @classmethod
    def gaussian(cls, amplitude: float, width: float) -> "Kernel":
        return cls("gaussian", amplitude=amplitude, width=width)

    @classmethod
    def newtonian(cls, strength: float, core_radius: float) -> "Kernel":
        return cls("newtonian", amplitude=strength, core_radius=core_radius)

    @classmethod
    def tophat(cls, amplitude: float, radius: float) -> "Kernel":
        return cls("tophat", amplitude=amplitude, radius=radius)

    @classmethod
    def zero(cls) -> "Kernel":
        return cls("zero", amplitude=0.0)

    def evaluate(self, r):
        """k(r) for scalar or array r ≥ 0; always finite."""
        r = np.asarray(r, dtype=float)
        if self.variant == "gaussian":
            out = self.amplitude * np.exp(-(r * r) / (2.0 * self.width**2))
        elif self.variant == "newtonian":
            out = self.amplitude / np.maximum(r, self.core_radius)
        elif self.variant == "tophat":
            out = np.where(r <= self.radius, self.amplitude, 0.0)
        else:
            out = np.zeros_like(r)
        return float(out) if out.ndim == 0 else out


class NonlocalOperator:
    """Precomputed quadrature weights for B on a fixed grid."""

    def __init__(self, kernel: Kernel, grid: Grid):
        self.kernel = kernel
        self.grid = grid
        pts = grid.center_points()
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        self.weights = kernel.evaluate(dist) * grid.cell_volume

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        return (self.weights @ values.reshape(-1)).reshape(self.grid.shape)

    def apply_adjoint_values(self, values: np.ndarray) -> np.ndarray:
        return (self.weights.T @ values.reshape(-1)).reshape(self.grid.shape)

    def apply(self, f: Field) -> Field:
        """B[f], the discrete convolution."""
        if f.grid != self.grid:
            raise ConfigError("field grid does not match the operator grid")
        return Field(self.grid, self.apply_values(f.values))

    def apply_derivative(self, anchor: Field, direction: Field) -> Field:
        """Directional derivative DB(anchor)[direction]; B is linear, so
        it does not depend on the anchor point."""
        return self.apply(direction)

    def apply_derivative_adjoint(self, anchor: Field, dual: Field) -> Field:
        """Adjoint of the directional derivative: the transposed table."""
        if dual.grid != self.grid:
            raise ConfigError("field grid does not match the operator grid")
        return Field(self.grid, self.apply_adjoint_values(dual.values))

    @property
    def row_sum_bound(self) -> float:
        """Max absolute row sum: an induced-norm upper bound for the table."""
        return float(np.max(np.sum(np.abs(self.weights), axis=1)))

    def induced_norm(self) -> float:
        """Exact operator 2-norm of the weight table."""
        return float(np.linalg.norm(self.weights, 2))


@dataclass
class A3Report:
    """Empirical boundedness/Lipschitz constants of the discrete operator.

    The sampled ratios are the smallest constants consistent with the
    drawn trajectories; `induced_norm` is the exact table norm and
    `row_sum_bound` the cheap a-priori cap.  The operator acts snapshot
    by snapshot, so it is trivially causal in time.
    """

    lipschitz_sampled: float
    bounded_sampled: float
    induced_norm: float
    row_sum_bound: float
    n_pairs: int
    ratios: list = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        slack = 1.0 + 1e-10
        return (
            self.lipschitz_sampled <= self.induced_norm * slack
            and self.induced_norm <= self.row_sum_bound * slack
        )


def check_a3(
    op: NonlocalOperator,
    tgrid,
    rng: np.random.Generator,
    n_pairs: int = 20,
) -> A3Report:
    """Sample random trajectory pairs and report operator constants."""
    shape = (tgrid.n_nodes,) + op.grid.shape
    lip = 0.0
    bnd = 0.0
    ratios = []
    for _ in range(n_pairs):
        v = Trajectory(tgrid, op.grid, rng.standard_normal(shape))
        w = Trajectory(tgrid, op.grid, rng.standard_normal(shape))
        bv = Trajectory(tgrid, op.grid, np.stack([op.apply_values(s) for s in v.values]))
        bw = Trajectory(tgrid, op.grid, np.stack([op.apply_values(s) for s in w.values]))
        gap = norm_l2_spacetime(v - w)
        if gap > 0:
            r = norm_l2_spacetime(bv - bw) / gap
            ratios.append(r)
            lip = max(lip, r)
        bnd = max(bnd, norm_l2_spacetime(bv) / (1.0 + norm_l2_spacetime(v)))
    return A3Report(
        lipschitz_sampled=lip,
        bounded_sampled=bnd,
        induced_norm=op.induced_norm(),
        row_sum_bound=op.row_sum_bound,
        n_pairs=n_pairs,
        ratios=ratios,
    )
