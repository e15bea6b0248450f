"""Landscape function ``u`` (``H u = 1``), effective potential ``W = 1/u`` and their identities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ScalarField
from .operator import DiscreteOperator, SolveReport, SolverError, solve_spd


@dataclass(frozen=True, eq=False)
class LandscapePair:
    u: ScalarField
    w: ScalarField
    solve_report: SolveReport
    op: DiscreteOperator

    @property
    def grid(self):
        return self.u.grid


def compute_landscape(op: DiscreteOperator, tol: float = 1e-10, max_iter: int | None = None) -> LandscapePair:
    ones = np.ones(op.grid.shape)
    u, report = solve_spd(op.apply, ones, op.diagonal, tol=tol, max_iter=max_iter)
    if not report.converged:
        raise SolverError(
            f"landscape solve did not converge: {report.iterations} iterations, "
            f"relative residual {report.relative_residual:.3e}"
        )
    if np.any(u <= 0):
        raise SolverError(f"landscape function is not positive (min {u.min():.3e})")
    return LandscapePair(ScalarField(op.grid, u), ScalarField(op.grid, 1.0 / u), report, op)


def lower_bounds(v_field: ScalarField, w_field: ScalarField) -> tuple[float, float]:
    """``(inf V, inf W)``: the two lower bounds on every eigenvalue."""
    if v_field.grid != w_field.grid:
        raise ValueError("fields live on different grids")
    return v_field.min(), w_field.min()


def check_landscape_bound(u: ScalarField, pair) -> float:
    """Largest violation of ``|psi| <= lambda * u * max|psi|`` over the grid (<= 0 when it holds)."""
    psi = np.abs(pair.psi.values)
    return float(np.max(psi - pair.lam * u.values * psi.max()))


def conjugated_operator(pair: LandscapePair, phi: ScalarField) -> ScalarField:
    """``(L_h + W) phi`` with ``L_h phi = -(1/u^2) div_h(u^2 grad_h phi)`` in flux form.

    ``u^2`` at half points is the arithmetic mean of the neighboring squares.
    """
    if phi.grid != pair.grid:
        raise ValueError("phi lives on a different grid")
    u2 = pair.u.values ** 2
    f = phi.values
    flux_div = np.zeros_like(f)
    for axis in range(f.ndim):
        u2_fwd = 0.5 * (u2 + np.roll(u2, -1, axis=axis))
        flux = u2_fwd * (np.roll(f, -1, axis=axis) - f)  # lives at j + 1/2
        flux_div += flux - np.roll(flux, 1, axis=axis)
    h2 = pair.grid.h ** 2
    return ScalarField(pair.grid, -flux_div / (u2 * h2) + pair.w.values * f)


def conjugated_residual(pair: LandscapePair, phi: ScalarField) -> float:
    """``|H_h(u phi) - u (L_h + W) phi| / |phi|`` in the Euclidean grid norm."""
    lhs = pair.op.apply(pair.u.values * phi.values)
    rhs = pair.u.values * conjugated_operator(pair, phi).values
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(phi.values))
