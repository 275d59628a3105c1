"""Euclidean projections onto set blocks and Cartesian products.

Box, ball, halfspace and whole-space projections use their closed forms.
Polyhedra are handled by Dykstra's alternating projection with correction
terms, decomposed as one box (the nonnegative orthant when flagged) plus
one halfspace per row; plain cyclic projection would converge to a
feasible point but not the nearest one.  The Dykstra inner loop is JIT
compiled with numba when available; a pure-numpy twin of the same
recursion is kept both as a fallback and as a cross-check target.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector
from .errors import DimensionMismatchError, ParameterError, ProjectionError
from .sets import Ball, Box, CartesianSet, Halfspace, Polyhedron, WholeSpace

__all__ = [
    "DykstraConfig",
    "project_block",
    "project_cartesian",
    "check_nonempty",
    "compile_projector",
]

try:  # pragma: no cover - exercised indirectly
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True)
class DykstraConfig:
    """Stopping rule for the alternating-projection loop.

    ``tol`` bounds the Euclidean change of the iterate over one full cycle.
    """

    max_iters: int = 100_000
    tol: float = 1e-10

    def __post_init__(self):
        if self.tol <= 0:
            raise ParameterError("tol must be positive")
        if self.max_iters < 1:
            raise ParameterError("max_iters must be at least 1")


DEFAULT_DYKSTRA = DykstraConfig()


@njit(cache=True)
def _dykstra_kernel(x0, A, b, anorm2, lo, hi, has_box, tol, max_iters):
    # stopping tracks the change of the full state (iterate plus correction
    # terms) over a cycle; the iterate change alone can stall far from the
    # projection when constraints meet at a shallow angle
    n = x0.shape[0]
    m = A.shape[0]
    x = x0.copy()
    p_box = np.zeros(n)
    P = np.zeros((m, n))
    x_prev = np.empty(n)
    p_old = np.empty(n)
    for it in range(max_iters):
        change = 0.0
        for j in range(n):
            x_prev[j] = x[j]
        if has_box:
            for j in range(n):
                t = x[j] + p_box[j]
                y = t
                if y < lo[j]:
                    y = lo[j]
                elif y > hi[j]:
                    y = hi[j]
                d = (t - y) - p_box[j]
                change += d * d
                p_box[j] = t - y
                x[j] = y
        for i in range(m):
            viol = -b[i]
            for j in range(n):
                p_old[j] = P[i, j]
                t = P[i, j] + x[j]
                P[i, j] = t
                viol += A[i, j] * t
            if viol > 0.0:
                scale = viol / anorm2[i]
                for j in range(n):
                    y = P[i, j] - scale * A[i, j]
                    x[j] = y
                    pnew = P[i, j] - y
                    d = pnew - p_old[j]
                    change += d * d
                    P[i, j] = pnew
            else:
                for j in range(n):
                    x[j] = P[i, j]
                    change += p_old[j] * p_old[j]
                    P[i, j] = 0.0
        for j in range(n):
            d = x[j] - x_prev[j]
            change += d * d
        if change <= tol * tol:
            return x, it + 1, True
    return x, max_iters, False


@njit(cache=True)
def _dykstra_multi(x0, A, b, anorm2, lo, hi, has_box, tol, max_iters, n_blocks):
    """All blocks share one constraint description; projects each segment."""
    d = x0.shape[0] // n_blocks
    out = np.empty_like(x0)
    for bi in range(n_blocks):
        seg = np.ascontiguousarray(x0[bi * d:(bi + 1) * d])
        y, _, ok = _dykstra_kernel(seg, A, b, anorm2, lo, hi, has_box, tol, max_iters)
        if not ok:
            return out, bi, False
        out[bi * d:(bi + 1) * d] = y
    return out, -1, True


def _dykstra_python(x0, A, b, anorm2, lo, hi, has_box, tol, max_iters):
    """Pure-numpy twin of :func:`_dykstra_kernel` (same recursion)."""
    m = A.shape[0]
    x = x0.copy()
    p_box = np.zeros_like(x)
    P = np.zeros((m, x.size))
    for it in range(max_iters):
        change = 0.0
        x_prev = x.copy()
        if has_box:
            t = x + p_box
            x = np.clip(t, lo, hi)
            change += float(np.sum((t - x - p_box) ** 2))
            p_box = t - x
        for i in range(m):
            t = x + P[i]
            viol = A[i] @ t - b[i]
            if viol > 0.0:
                x = t - (viol / anorm2[i]) * A[i]
            else:
                x = t
            change += float(np.sum((t - x - P[i]) ** 2))
            P[i] = t - x
        change += float(np.sum((x - x_prev) ** 2))
        if change <= tol * tol:
            return x, it + 1, True
    return x, max_iters, False


def _run_dykstra(x, A, b, lo, hi, has_box, cfg: DykstraConfig, use_numba: bool = True):
    anorm2 = (A * A).sum(axis=1)
    fn = _dykstra_kernel if (HAVE_NUMBA and use_numba) else _dykstra_python
    y, iters, ok = fn(
        np.ascontiguousarray(x, dtype=np.float64),
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(anorm2, dtype=np.float64),
        np.ascontiguousarray(lo, dtype=np.float64),
        np.ascontiguousarray(hi, dtype=np.float64),
        has_box,
        cfg.tol,
        cfg.max_iters,
    )
    return y, iters, ok


def _polyhedron_parts(block: Polyhedron):
    n = block.dim
    if block.nonneg:
        lo = np.zeros(n)
        hi = np.full(n, np.inf)
        has_box = True
    else:
        lo = np.full(n, -np.inf)
        hi = np.full(n, np.inf)
        has_box = False
    return block.A, block.b, lo, hi, has_box


def _project_polyhedron(block: Polyhedron, x: np.ndarray, cfg: DykstraConfig,
                        use_numba: bool = True) -> np.ndarray:
    A, b, lo, hi, has_box = _polyhedron_parts(block)
    y, _, ok = _run_dykstra(x, A, b, lo, hi, has_box, cfg, use_numba)
    if not ok:
        raise ProjectionError(
            f"Dykstra did not converge within {cfg.max_iters} iterations "
            f"(constraint residual {block.max_violation(y):.3e})",
            last_iterate=y,
            residual=block.max_violation(y),
        )
    return y


def project_block(block, x, cfg: DykstraConfig | None = None) -> np.ndarray:
    """Nearest point of ``block`` to ``x`` in the Euclidean norm."""
    cfg = cfg or DEFAULT_DYKSTRA
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (block.dim,):
        raise DimensionMismatchError(
            f"point has shape {x.shape}, block has dimension {block.dim}")
    if isinstance(block, WholeSpace):
        return x.copy()
    if isinstance(block, Box):
        return np.clip(x, block.lower, block.upper)
    if isinstance(block, Ball):
        d = x - block.center
        nrm = np.linalg.norm(d)
        if nrm <= block.radius:
            return x.copy()
        return block.center + (block.radius / nrm) * d
    if isinstance(block, Halfspace):
        viol = block.a @ x - block.b
        if viol <= 0:
            return x.copy()
        return x - (viol / (block.a @ block.a)) * block.a
    if isinstance(block, Polyhedron):
        return _project_polyhedron(block, x, cfg)
    raise ParameterError(f"unknown block kind {type(block).__name__}")


def project_cartesian(feasible: CartesianSet, x: BlockVector,
                      cfg: DykstraConfig | None = None) -> BlockVector:
    """Blockwise projection; equals the projection onto the product set."""
    feasible.check_conforms(x)
    out = np.empty(x.n)
    offset = 0
    for i, blk in enumerate(feasible.blocks):
        try:
            out[offset:offset + blk.dim] = project_block(blk, x.block(i), cfg)
        except ProjectionError as exc:
            raise ProjectionError(
                f"block {i}: {exc}", last_iterate=exc.last_iterate,
                residual=exc.residual, block=i) from exc
        offset += blk.dim
    return x.with_data(out)


def check_nonempty(block: Polyhedron, cfg: DykstraConfig | None = None) -> np.ndarray:
    """Find a feasible point of the polyhedron or raise.

    Projects the origin; Dykstra converges to the projection exactly when
    the intersection is nonempty, so a large terminal residual flags an
    empty (or numerically intractable) instance.
    """
    cfg = cfg or DEFAULT_DYKSTRA
    y = _project_polyhedron(block, np.zeros(block.dim), cfg)
    resid = block.max_violation(y)
    if resid > 10 * cfg.tol:
        raise ProjectionError(
            f"no feasible point found (residual {resid:.3e})",
            last_iterate=y, residual=resid)
    return y


def compile_projector(feasible: CartesianSet, cfg: DykstraConfig | None = None):
    """Build a flat-array projector for the hot loop.

    Returns ``proj(v: (n,) float64) -> (n,) float64`` performing the
    blockwise projection without BlockVector wrapping.  Raises
    ProjectionError on Dykstra non-convergence, identifying the block.
    """
    cfg = cfg or DEFAULT_DYKSTRA
    dims = feasible.dims
    offsets = np.concatenate(([0], np.cumsum(dims)))
    steps = []
    for i, blk in enumerate(feasible.blocks):
        s, e = int(offsets[i]), int(offsets[i + 1])
        if isinstance(blk, WholeSpace):
            steps.append(None)
        elif isinstance(blk, Box):
            lo, hi = blk.lower, blk.upper
            steps.append(("box", s, e, lo, hi))
        elif isinstance(blk, Ball):
            steps.append(("ball", s, e, blk))
        elif isinstance(blk, Halfspace):
            steps.append(("half", s, e, blk))
        else:
            A, b, lo, hi, has_box = _polyhedron_parts(blk)
            anorm2 = (A * A).sum(axis=1)
            steps.append(("poly", s, e,
                          np.ascontiguousarray(A), np.ascontiguousarray(b),
                          anorm2, lo, hi, has_box, blk, i))

    kernel = _dykstra_kernel if HAVE_NUMBA else _dykstra_python

    # fast path: every block is the same polyhedron (e.g. identical per-agent
    # sets); one fused kernel call projects all segments
    polys = [blk for blk in feasible.blocks if isinstance(blk, Polyhedron)]
    if (HAVE_NUMBA and len(polys) == len(feasible.blocks) > 1
            and all(blk.dim == polys[0].dim and blk.nonneg == polys[0].nonneg
                    and np.array_equal(blk.A, polys[0].A)
                    and np.array_equal(blk.b, polys[0].b) for blk in polys)):
        A, b, lo, hi, has_box = _polyhedron_parts(polys[0])
        A = np.ascontiguousarray(A)
        anorm2 = (A * A).sum(axis=1)
        n_blocks = len(polys)
        first = polys[0]

        def proj_multi(v: np.ndarray) -> np.ndarray:
            y, bad, ok = _dykstra_multi(np.ascontiguousarray(v), A, b, anorm2,
                                        lo, hi, has_box, cfg.tol, cfg.max_iters,
                                        n_blocks)
            if not ok:
                raise ProjectionError(
                    f"block {bad}: Dykstra did not converge within "
                    f"{cfg.max_iters} iterations", last_iterate=y, block=bad,
                    residual=first.max_violation(
                        y[bad * first.dim:(bad + 1) * first.dim]))
            return y

        return proj_multi

    def proj(v: np.ndarray) -> np.ndarray:
        out = v.copy()
        for step in steps:
            if step is None:
                continue
            kind = step[0]
            if kind == "box":
                _, s, e, lo, hi = step
                np.clip(out[s:e], lo, hi, out=out[s:e])
            elif kind == "poly":
                _, s, e, A, b, anorm2, lo, hi, has_box, blk, i = step
                y, _, ok = kernel(np.ascontiguousarray(out[s:e]), A, b, anorm2,
                                  lo, hi, has_box, cfg.tol, cfg.max_iters)
                if not ok:
                    raise ProjectionError(
                        f"block {i}: Dykstra did not converge within "
                        f"{cfg.max_iters} iterations",
                        last_iterate=y, residual=blk.max_violation(y), block=i)
                out[s:e] = y
            else:
                _, s, e, blk = step
                out[s:e] = project_block(blk, out[s:e], cfg)
        return out

    return proj
