import numpy as np
import pytest

from svi.blocks import BlockVector
from svi.errors import ParameterError, ProjectionError
from svi.projections import (
    DykstraConfig,
    check_nonempty,
    compile_projector,
    project_block,
    project_cartesian,
)
from svi.projections import _dykstra_python, _run_dykstra, _polyhedron_parts
from svi.sets import Ball, Box, CartesianSet, Halfspace, Polyhedron, WholeSpace

from oracles import brute_force_projection

CFG = DykstraConfig()


def test_box_clamps():
    assert np.array_equal(
        project_block(Box([0, 0], [1, 1]), np.array([2.0, -1.0])), [1.0, 0.0])


def test_halfspace_closed_form():
    y = project_block(Halfspace([1.0, 1.0], 1.0), np.array([2.0, 0.0]))
    assert np.allclose(y, [1.5, -0.5])
    inside = project_block(Halfspace([1.0, 1.0], 1.0), np.array([0.2, 0.2]))
    assert np.array_equal(inside, [0.2, 0.2])


def test_ball_projection():
    blk = Ball(center=[1.0, 0.0], radius=2.0)
    assert np.allclose(project_block(blk, np.array([5.0, 0.0])), [3.0, 0.0])
    assert np.array_equal(project_block(blk, np.array([0.0, 0.5])), [0.0, 0.5])


def test_wholespace_identity():
    x = np.array([3.0, -7.0])
    assert np.array_equal(project_block(WholeSpace(2), x), x)


def test_polyhedron_hand_example():
    blk = Polyhedron(A=[[1.0, 1.0]], b=[1.0], nonneg=True)
    y = project_block(blk, np.array([2.0, 2.0]), CFG)
    assert np.allclose(y, [0.5, 0.5], atol=10 * CFG.tol)
    oracle = brute_force_projection(blk.A, blk.b, True, [2.0, 2.0])
    assert np.allclose(y, oracle, atol=10 * CFG.tol)


def test_dykstra_matches_bruteforce_random(rng):
    for _ in range(60):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 5))
        nonneg = bool(rng.integers(0, 2))
        A = rng.standard_normal((m, n))
        interior = rng.uniform(0.1, 1.0, size=n) if nonneg else rng.standard_normal(n)
        b = A @ interior + rng.uniform(0.05, 1.0, size=m)  # keeps the set nonempty
        blk = Polyhedron(A, b, nonneg=nonneg)
        x = rng.standard_normal(n) * 3.0
        y = project_block(blk, x, CFG)
        oracle = brute_force_projection(A, b, nonneg, x)
        assert np.linalg.norm(y - oracle) <= 10 * CFG.tol + 1e-7


def test_python_and_compiled_kernels_agree(rng):
    blk = Polyhedron(rng.standard_normal((3, 4)),
                     rng.uniform(0.5, 1.5, size=3), nonneg=True)
    A, b, lo, hi, has_box = _polyhedron_parts(blk)
    x = rng.standard_normal(4) * 2
    y1, _, ok1 = _run_dykstra(x, A, b, lo, hi, has_box, CFG, use_numba=True)
    y2, _, ok2 = _run_dykstra(x, A, b, lo, hi, has_box, CFG, use_numba=False)
    assert ok1 and ok2
    assert np.allclose(y1, y2, atol=10 * CFG.tol)


def test_nonexpansiveness(rng):
    blk = Polyhedron([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]], [1.0, 1.0], nonneg=True)
    for _ in range(1000):
        x = rng.standard_normal(3) * 2
        y = rng.standard_normal(3) * 2
        px = project_block(blk, x, CFG)
        py = project_block(blk, y, CFG)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 10 * CFG.tol


def test_idempotence_and_variational_characterization(rng):
    blk = Polyhedron([[1.0, 2.0], [2.0, 1.0]], [2.0, 2.0], nonneg=True)
    for _ in range(50):
        x = rng.standard_normal(2) * 3
        y = project_block(blk, x, CFG)
        yy = project_block(blk, y, CFG)
        assert np.linalg.norm(yy - y) <= 10 * CFG.tol
        # (x - y)^T (u - y) <= slack for feasible u
        for _ in range(100):
            u = brute_force_projection(blk.A, blk.b, True, rng.standard_normal(2) * 2)
            slack = 10 * CFG.tol * (1 + np.linalg.norm(x - y))
            assert (x - y) @ (u - y) <= slack


def test_dykstra_nonconvergence_error():
    blk = Polyhedron([[1.0, 1.0]], [1.0], nonneg=True)
    tiny = DykstraConfig(max_iters=1, tol=1e-16)
    with pytest.raises(ProjectionError) as exc:
        project_block(blk, np.array([50.0, -3.0]), tiny)
    assert exc.value.last_iterate is not None
    assert exc.value.residual is not None


def test_check_nonempty_flags_empty_set():
    # x <= -1 intersected with x >= 0 is empty
    blk = Polyhedron([[1.0]], [-1.0], nonneg=True)
    with pytest.raises(ProjectionError):
        check_nonempty(blk, DykstraConfig(max_iters=2000, tol=1e-10))


def test_cartesian_wholespace_identity():
    cs = CartesianSet((WholeSpace(2), WholeSpace(3)))
    x = BlockVector(np.arange(5.0), (2, 3))
    assert project_cartesian(cs, x) == x


def test_cartesian_boxes_match_flat_box(rng):
    cs = CartesianSet((Box([0, 0], [1, 1]), Box([-1], [1])))
    flat = Box([0, 0, -1], [1, 1, 1])
    for _ in range(100):
        x = rng.standard_normal(3) * 2
        y = project_cartesian(cs, BlockVector(x, (2, 1)))
        assert np.array_equal(y.data, project_block(flat, x))


def test_cartesian_mixed_matches_oracle(rng):
    poly = Polyhedron([[1.0, 1.0, 1.0]], [1.0], nonneg=True)
    cs = CartesianSet((Box([-1, -1], [1, 1]), poly))
    for _ in range(50):
        x = rng.standard_normal(5) * 2
        y = project_cartesian(cs, BlockVector(x, (2, 3)))
        box_part = np.clip(x[:2], -1, 1)
        poly_part = brute_force_projection(poly.A, poly.b, True, x[2:])
        assert np.allclose(y.data, np.concatenate([box_part, poly_part]),
                           atol=10 * CFG.tol + 1e-7)


def test_cartesian_error_carries_block_index():
    poly = Polyhedron([[1.0, 1.0]], [1.0], nonneg=True)
    cs = CartesianSet((Box([0], [1]), poly))
    tiny = DykstraConfig(max_iters=1, tol=1e-16)
    with pytest.raises(ProjectionError) as exc:
        project_cartesian(cs, BlockVector(np.array([0.5, 40.0, -7.0]), (1, 2)), tiny)
    assert exc.value.block == 1


def test_compile_projector_matches_blockwise(rng):
    poly = Polyhedron([[1.0, 1.0], [1.0, -1.0]], [1.0, 1.0], nonneg=False)
    cs = CartesianSet((Box([-1, -1], [1, 1]), poly, Ball([0.0], 1.0), WholeSpace(2)))
    proj = compile_projector(cs, CFG)
    for _ in range(50):
        x = rng.standard_normal(7) * 2
        got = proj(x)
        want = project_cartesian(cs, BlockVector(x, cs.dims), CFG)
        assert np.allclose(got, want.data, atol=10 * CFG.tol)


def test_compile_projector_identical_blocks_fast_path(rng):
    poly = Polyhedron([[1.0, 1.0], [1.0, -1.0]], [1.0, 0.5], nonneg=True)
    cs = CartesianSet((poly,) * 4)
    proj = compile_projector(cs, CFG)
    for _ in range(50):
        x = rng.standard_normal(8) * 2
        got = proj(x)
        want = project_cartesian(cs, BlockVector(x, cs.dims), CFG)
        assert np.allclose(got, want.data, atol=10 * CFG.tol)


def test_config_validation():
    with pytest.raises(ParameterError):
        DykstraConfig(tol=0.0)
    with pytest.raises(ParameterError):
        DykstraConfig(max_iters=0)
