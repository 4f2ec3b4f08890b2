import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quenchctrl.errors import ShapeMismatchError
from quenchctrl.grid import (
    Field,
    Grid,
    TimeGrid,
    Trajectory,
    h1_seminorm_sq,
    inner_product,
    inner_product_spacetime,
    laplacian_neumann,
    laplacian_values,
    norm_l2,
    norm_l2_spacetime,
    norm_lp_spacetime,
    time_h1_norm,
    trapezoid_weights,
)


def test_grid_basic_geometry():
    g = Grid.line(4, 2.0)
    assert g.dim == 1
    assert g.spacing == (0.5,)
    assert g.cell_volume == 0.5
    assert g.total_volume == 2.0
    assert np.allclose(g.centers()[0], [0.25, 0.75, 1.25, 1.75])

    b = Grid.box((3, 2), (3.0, 1.0))
    assert b.dim == 2
    assert b.shape == (3, 2)
    assert b.spacing == (1.0, 0.5)
    assert b.cell_volume == 0.5
    pts = b.center_points()
    assert pts.shape == (6, 2)
    # C order: the y index runs fastest, matching reshape(-1)
    assert np.allclose(pts[0], [0.5, 0.25])
    assert np.allclose(pts[1], [0.5, 0.75])
    assert np.allclose(pts[2], [1.5, 0.25])


def test_grid_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Grid((2, 2, 2), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        Grid.line(0, 1.0)
    with pytest.raises(ValueError):
        Grid.line(4, -1.0)


def test_time_grid_endpoints_exact():
    tg = TimeGrid(1.0, 200)
    t = tg.times()
    assert t[0] == 0.0
    assert t[-1] == 1.0
    assert len(t) == tg.n_nodes == 201
    assert tg.tau == pytest.approx(1.0 / 200)


def test_field_validation():
    g = Grid.line(4)
    with pytest.raises(ShapeMismatchError):
        Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        Field(g, np.array([1.0, np.nan, 0.0, 0.0]))


def test_laplacian_frozen_ramp():
    # unit spacing; interior of a linear ramp is flat, ends feel the
    # zero-flux mirror
    g = Grid.line(5, 5.0)
    out = laplacian_values(g, np.arange(5.0))
    assert np.array_equal(out, np.array([1.0, 0.0, 0.0, 0.0, -1.0]))


def test_laplacian_constant_is_zero():
    g = Grid.box((6, 4), (1.0, 2.0))
    out = laplacian_values(g, np.full(g.shape, 3.7))
    assert np.array_equal(out, np.zeros(g.shape))


def test_laplacian_conserves_mass_and_is_symmetric():
    rng = np.random.default_rng(3)
    for g in (Grid.line(17, 1.3), Grid.box((5, 7), (2.0, 1.0))):
        f = rng.standard_normal(g.shape)
        h = rng.standard_normal(g.shape)
        lf = laplacian_values(g, f)
        lh = laplacian_values(g, h)
        assert abs(np.sum(lf) * g.cell_volume) < 1e-12
        lhs = inner_product(Field(g, lf), Field(g, h))
        rhs = inner_product(Field(g, f), Field(g, lh))
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_laplacian_neumann_wrapper():
    g = Grid.line(5, 5.0)
    f = Field(g, np.arange(5.0))
    assert np.array_equal(laplacian_neumann(f).values, laplacian_values(g, f.values))


def test_norms_frozen_values():
    g = Grid.line(4, 2.0)  # cell volume 0.5
    f = Field(g, np.array([1.0, -1.0, 1.0, -1.0]))
    assert norm_l2(f) == pytest.approx(np.sqrt(2.0))

    tg = TimeGrid(1.0, 2)
    traj = Trajectory.constant(tg, g, 3.0)
    # constant 3 over a domain of measure 2 and unit horizon
    assert norm_l2_spacetime(traj) == pytest.approx(3.0 * np.sqrt(2.0))
    assert norm_lp_spacetime(traj, 6.0) == pytest.approx(3.0 * 2.0 ** (1.0 / 6.0))


def test_trapezoid_weights():
    w = trapezoid_weights(5)
    assert np.array_equal(w, np.array([0.5, 1.0, 1.0, 1.0, 0.5]))


def test_inner_product_spacetime_linear_ramp():
    # f = t on [0,1], unit domain: integral of t^2 is 1/3; the trapezoid
    # rule on a quadratic has a known tau^2/6 defect
    g = Grid.line(8, 1.0)
    tg = TimeGrid(1.0, 100)
    t = tg.times()
    traj = Trajectory(tg, g, np.broadcast_to(t[:, None], (tg.n_nodes,) + g.shape).copy())
    got = inner_product_spacetime(traj, traj)
    assert got == pytest.approx(1.0 / 3.0 + tg.tau**2 / 6.0, rel=1e-12)


def test_h1_seminorm_ramp():
    # slope 1 ramp over a unit interval: integral of |grad|^2 counts
    # interior faces only
    g = Grid.line(10, 1.0)
    x = g.centers()[0]
    val = h1_seminorm_sq(Field(g, x))
    assert val == pytest.approx(9 * 0.1)  # 9 faces, slope 1, volume h


def test_time_h1_norm_constant():
    g = Grid.line(4, 1.0)
    tg = TimeGrid(2.0, 20)
    traj = Trajectory.constant(tg, g, 2.0)
    # no time variation: just the L2 part, |const|*sqrt(T)
    assert time_h1_norm(traj) == pytest.approx(2.0 * np.sqrt(2.0))


def test_trajectory_algebra_and_snapshots():
    g = Grid.line(3, 1.0)
    tg = TimeGrid(1.0, 2)
    a = Trajectory.constant(tg, g, 1.0)
    b = Trajectory.constant(tg, g, 2.0)
    assert np.array_equal((a + b).values, np.full((3, 3), 3.0))
    assert np.array_equal((b - a).values, np.full((3, 3), 1.0))
    assert np.array_equal((a * 4.0).values, np.full((3, 3), 4.0))
    snap = b.snapshot(1)
    assert snap.grid == g
    assert np.array_equal(snap.values, np.full(3, 2.0))


def test_constant_profile_broadcasts_and_copies():
    g = Grid.line(4, 1.0)
    tg = TimeGrid(1.0, 3)
    prof = np.array([1.0, 2.0, 3.0, 4.0])
    traj = Trajectory.constant_profile(tg, g, prof)
    assert traj.values.shape == (4, 4)
    assert np.array_equal(traj.values[2], prof)
    traj.values[0, 0] = 99.0  # writable, not a broadcast view
    assert prof[0] == 1.0


@settings(max_examples=30, deadline=None)
@given(
    vals=st.lists(st.floats(-10, 10), min_size=4, max_size=4),
    scale=st.floats(0.1, 10),
)
def test_norm_scaling_property(vals, scale):
    g = Grid.line(4, 1.0)
    f = Field(g, np.array(vals))
    assert norm_l2(Field(g, scale * f.values)) == pytest.approx(scale * norm_l2(f), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 40))
def test_laplacian_kills_constants_any_size(n):
    g = Grid.line(n, 1.0)
    assert np.array_equal(laplacian_values(g, np.full(n, 2.5)), np.zeros(n))
