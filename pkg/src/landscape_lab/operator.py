"""Matrix-free periodic Schrodinger operator ``-Laplacian_h + V`` and a Jacobi-PCG solver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Grid, ScalarField


class SolverError(RuntimeError):
    """Raised by callers when an iterative solve fails to converge."""


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool

    def as_dict(self) -> dict:
        return {"iterations": self.iterations, "relative_residual": self.relative_residual, "converged": self.converged}


def neg_laplacian(values: np.ndarray, h: float) -> np.ndarray:
    """Second-order periodic 3-point (1D) / 5-point (2D) stencil for ``-Laplacian``."""
    scaled = values * (1.0 / (h * h))
    out = (2.0 * values.ndim) * scaled
    for axis in range(values.ndim):
        lo = [slice(None)] * values.ndim
        hi = [slice(None)] * values.ndim
        lo[axis], hi[axis] = slice(None, -1), slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        out[hi] -= scaled[lo]
        out[lo] -= scaled[hi]
        first, last = [slice(None)] * values.ndim, [slice(None)] * values.ndim
        first[axis], last[axis] = 0, -1
        out[tuple(first)] -= scaled[tuple(last)]
        out[tuple(last)] -= scaled[tuple(first)]
    return out


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    grid: Grid
    v_field: ScalarField

    def __post_init__(self):
        if self.v_field.grid != self.grid:
            raise ValueError("potential field lives on a different grid")
        v = self.v_field.values
        if np.any(v < 0):
            raise ValueError("potential must be nonnegative")
        if not np.any(v > 0):
            raise ValueError("potential must be positive somewhere")

    @property
    def v(self) -> np.ndarray:
        return self.v_field.values

    @property
    def diagonal(self) -> np.ndarray:
        return 2.0 * self.grid.dim / self.grid.h**2 + self.v

    def apply(self, values: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """``(H - shift) values`` on raw arrays of the grid's shape."""
        out = neg_laplacian(values, self.grid.h)
        out += (self.v - shift) * values if shift else self.v * values
        return out


def make_operator(v_field: ScalarField) -> DiscreteOperator:
    return DiscreteOperator(v_field.grid, v_field)


def apply_h(op: DiscreteOperator, f: ScalarField) -> ScalarField:
    if f.grid != op.grid:
        raise ValueError("field lives on a different grid")
    return ScalarField(op.grid, op.apply(f.values))


def solve_spd(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs,
    diag: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradients with Jacobi preconditioning.

    ``apply`` must be symmetric positive definite. The iteration stops once the
    recomputed residual satisfies ``|b - A x| <= tol |b|``; if the recursive
    residual claims convergence but the true one disagrees, CG restarts from
    the true residual. Negative curvature ends the solve with ``converged=False``.
    Accepts either an array or a ScalarField right-hand side and returns the
    same kind.
    """
    as_field = isinstance(rhs, ScalarField)
    b = rhs.values if as_field else np.asarray(rhs, dtype=float)
    wrap = (lambda a: ScalarField(rhs.grid, a)) if as_field else (lambda a: a)

    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return wrap(np.zeros_like(b)), SolveReport(0, 0.0, True)
    if max_iter is None:
        max_iter = 10 * b.size
    inv_d = np.ones_like(b) if diag is None else 1.0 / diag

    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - apply(x)
    z = inv_d * r
    p = z.copy()
    rz = float(np.vdot(r, z))
    rel = float(np.linalg.norm(r)) / bnorm
    if rel <= tol:
        return wrap(x), SolveReport(0, rel, True)

    it = 0
    while it < max_iter:
        it += 1
        ap = apply(p)
        pap = float(np.vdot(p, ap))
        if not pap > 0.0:
            return wrap(x), SolveReport(it, rel, False)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / bnorm
        if rel <= tol:
            r = b - apply(x)
            rel = float(np.linalg.norm(r)) / bnorm
            if rel <= tol:
                return wrap(x), SolveReport(it, rel, True)
            z = inv_d * r
            p = z.copy()
            rz = float(np.vdot(r, z))
            continue
        z = inv_d * r
        rz_new = float(np.vdot(r, z))
        p *= rz_new / rz
        p += z
        rz = rz_new
    return wrap(x), SolveReport(it, rel, False)
