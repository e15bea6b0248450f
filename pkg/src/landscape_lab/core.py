"""Periodic grids, scalar fields and the reductions shared by the pipeline.

Grid points sit at cell-interior midpoints, ``x_j = (j + 1/2) * h`` along each
axis, so a piecewise-constant potential sampled on the grid is never evaluated
on a discontinuity. Flat indices are row-major with axis 0 = x.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice over ``[0, units_0] x ... `` with ``r`` points per unit length."""

    dim: int
    units: tuple[int, ...]
    points_per_unit: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.units) != self.dim:
            raise ValueError(f"expected {self.dim} unit counts, got {len(self.units)}")
        if any(int(n) < 2 for n in self.units):
            raise ValueError(f"units must all be >= 2, got {self.units}")
        if int(self.points_per_unit) < 2:
            raise ValueError(f"points_per_unit must be >= 2, got {self.points_per_unit}")
        object.__setattr__(self, "units", tuple(int(n) for n in self.units))
        object.__setattr__(self, "points_per_unit", int(self.points_per_unit))

    @property
    def spacing_exact(self) -> Fraction:
        return Fraction(1, self.points_per_unit)

    @property
    def h(self) -> float:
        return 1.0 / self.points_per_unit

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(n * self.points_per_unit for n in self.units)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(float(n) for n in self.units)

    @property
    def measure(self) -> float:
        return float(np.prod(self.units))

    def unravel(self, index: int) -> tuple[int, ...]:
        self._check_index(index)
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def ravel(self, multi: Sequence[int]) -> int:
        wrapped = [int(m) % n for m, n in zip(multi, self.shape)]
        return int(np.ravel_multi_index(wrapped, self.shape))

    def coords(self, index: int) -> tuple[float, ...]:
        return tuple((i + 0.5) * self.h for i in self.unravel(index))

    def axis_coords(self, axis: int) -> np.ndarray:
        return (np.arange(self.shape[axis]) + 0.5) * self.h

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.n_points:
            raise IndexError(f"flat index {index} outside [0, {self.n_points})")


def make_grid(dim: int, units: Sequence[int] | int, points_per_unit: int) -> Grid:
    if isinstance(units, (int, np.integer)):
        units = [units] * dim
    return Grid(dim, tuple(units), points_per_unit)


def stencil_offsets(dim: int, stencil: str = "axis") -> list[tuple[int, ...]]:
    """Neighbor offsets: ``"axis"`` gives the 2*dim axis-aligned ones, ``"full"`` adds 2D diagonals."""
    if stencil not in ("axis", "full"):
        raise ValueError(f"unknown stencil {stencil!r}")
    if dim == 1:
        return [(-1,), (1,)]
    offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if stencil == "full":
        offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    return offsets


def neighbors(grid: Grid, index: int, stencil: str = "axis") -> list[int]:
    """Distinct periodic neighbors of a flat index, in stencil order."""
    multi = grid.unravel(index)
    out: list[int] = []
    for off in stencil_offsets(grid.dim, stencil):
        j = grid.ravel([m + o for m, o in zip(multi, off)])
        if j != index and j not in out:
            out.append(j)
    return out


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values on every point of a grid, stored with the grid's shape."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


def constant_field(grid: Grid, c: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(c)))


def integrate(field: ScalarField) -> float:
    """Periodic midpoint rule, ``h**dim * sum(values)``; exact for constants."""
    return float(field.grid.h ** field.grid.dim * field.values.sum())


def inner(f: ScalarField, g: ScalarField) -> float:
    return float(f.grid.h ** f.grid.dim * np.vdot(f.values, g.values))


def _extreme(field, pick) -> tuple[int, float]:
    vals = np.asarray(field.values if isinstance(field, ScalarField) else field, dtype=float).reshape(-1)
    if vals.size == 0:
        raise ValueError("empty field")
    if not np.all(np.isfinite(vals)):
        raise ValueError("field contains non-finite values")
    # numpy argmin/argmax return the first occurrence, i.e. the smallest flat index on ties
    i = int(pick(vals))
    return i, float(vals[i])


def argmin_field(field) -> tuple[int, float]:
    return _extreme(field, np.argmin)


def argmax_field(field) -> tuple[int, float]:
    return _extreme(field, np.argmax)


def periodic_distance(grid, a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance on the torus of side lengths ``grid.lengths`` (or a plain tuple of lengths)."""
    lengths = grid.lengths if isinstance(grid, Grid) else tuple(grid)
    d2 = 0.0
    for x, y, length in zip(a, b, lengths):
        dx = abs(x - y) % length
        dx = min(dx, length - dx)
        d2 += dx * dx
    return float(np.sqrt(d2))
