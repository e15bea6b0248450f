"""Wells, sublevel components, watershed basins and the W-distance of an effective potential.

Every function accepts either a ScalarField or a bare periodic array. A bare
array is treated as living on a lattice of unit spacing with points at
``j + 1/2``; this keeps hand-sized examples usable.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import Grid, ScalarField, stencil_offsets


@dataclass(frozen=True)
class Well:
    min_index: int
    min_location: tuple[float, ...]
    w_min: float
    rank: int
    basin_label: int


@dataclass(frozen=True, eq=False)
class Region:
    members: np.ndarray  # sorted flat indices
    energy: float
    seed_index: int
    seed_rank: int | None = None

    def __len__(self):
        return len(self.members)

    def __contains__(self, index) -> bool:
        i = np.searchsorted(self.members, index)
        return bool(i < len(self.members) and self.members[i] == index)

    def as_set(self) -> set[int]:
        return set(int(i) for i in self.members)


@dataclass(frozen=True, eq=False)
class BasinMap:
    labels: np.ndarray  # int, grid shape; label = rank of the well
    crest_mask: np.ndarray  # bool, grid shape

    @property
    def n_basins(self) -> int:
        return int(np.unique(self.labels).size)


def _unpack(w) -> tuple[np.ndarray, float, Grid | None]:
    if isinstance(w, ScalarField):
        return w.values, w.grid.h, w.grid
    vals = np.asarray(w, dtype=float)
    if vals.ndim not in (1, 2):
        raise ValueError("expected a 1D or 2D field")
    if not np.all(np.isfinite(vals)):
        raise ValueError("field values must be finite")
    return vals, 1.0, None


def _neighbor_table(shape: tuple[int, ...], stencil: str) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """``table[i, s]`` = flat index of the periodic neighbor of ``i`` along stencil offset ``s``."""
    offsets = stencil_offsets(len(shape), stencil)
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    cols = [np.roll(idx, tuple(-o for o in off), axis=tuple(range(len(shape)))).reshape(-1) for off in offsets]
    return np.stack(cols, axis=1), offsets


def local_minima(w) -> list[Well]:
    """Strict local minima (2 neighbors in 1D, 8 in 2D, periodic), ranked by increasing value.

    Plateaus produce no minima; rank ties go to the smaller flat index.
    """
    vals, h, _ = _unpack(w)
    flat = vals.reshape(-1)
    table, _ = _neighbor_table(vals.shape, "full")
    is_min = np.all(flat[:, None] < flat[table], axis=1)
    cand = np.flatnonzero(is_min)
    cand = cand[np.lexsort((cand, flat[cand]))]
    wells = []
    for rank, i in enumerate(cand, start=1):
        multi = np.unravel_index(int(i), vals.shape)
        loc = tuple((m + 0.5) * h for m in multi)
        wells.append(Well(int(i), loc, float(flat[i]), rank, rank))
    return wells


def sublevel_component(w, seed_index: int, energy: float, seed_rank: int | None = None) -> Region:
    """Connected component of ``{W <= energy}`` through ``seed_index`` (axis-aligned, periodic)."""
    vals, _, _ = _unpack(w)
    flat = vals.reshape(-1)
    if flat[seed_index] > energy:
        raise ValueError(f"seed value {flat[seed_index]:.6g} lies above the level {energy:.6g}")
    table, _ = _neighbor_table(vals.shape, "axis")
    inside = flat <= energy
    seen = np.zeros(flat.size, dtype=bool)
    seen[seed_index] = True
    queue = deque([seed_index])
    while queue:
        i = queue.popleft()
        for j in table[i]:
            if inside[j] and not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return Region(np.flatnonzero(seen), float(energy), int(seed_index), seed_rank)


def watershed_basins(w, wells: list[Well]) -> BasinMap:
    """Priority-flood watershed seeded at the wells.

    Points are flooded in increasing (W, flat index) order. A point touching
    exactly one basin joins it; a point touching two or more basins is a crest
    point and keeps the smallest adjacent label so labels still partition the
    grid. Crest points pass their label on but never count when deciding
    whether a later point is itself on a crest.
    """
    if not wells:
        raise ValueError("watershed needs at least one well")
    vals, _, _ = _unpack(w)
    flat = vals.reshape(-1)
    table, _ = _neighbor_table(vals.shape, "axis")
    labels = np.zeros(flat.size, dtype=np.int64)
    crest = np.zeros(flat.size, dtype=bool)
    heap: list[tuple[float, int]] = []
    queued = np.zeros(flat.size, dtype=bool)
    for well in wells:
        labels[well.min_index] = well.basin_label
        queued[well.min_index] = True
    for well in wells:
        for j in table[well.min_index]:
            if not queued[j]:
                queued[j] = True
                heapq.heappush(heap, (flat[j], int(j)))
    while heap:
        _, i = heapq.heappop(heap)
        nb = table[i]
        nb_labels = labels[nb]
        basin = {int(l) for l, c in zip(nb_labels, crest[nb]) if l and not c}
        if len(basin) == 1:
            labels[i] = basin.pop()
        elif len(basin) > 1:
            labels[i] = min(basin)
            crest[i] = True
        else:
            labels[i] = int(min(l for l in nb_labels if l))
        for j in nb:
            if not queued[j]:
                queued[j] = True
                heapq.heappush(heap, (flat[j], int(j)))
    return BasinMap(labels.reshape(vals.shape), crest.reshape(vals.shape))


def _edges(shape: tuple[int, ...], h: float):
    stencil = "full" if len(shape) == 2 else "axis"
    table, offsets = _neighbor_table(shape, stencil)
    lengths = np.array([h * math.sqrt(sum(o * o for o in off)) for off in offsets])
    return table, lengths


def w_distance_array(values: np.ndarray, spacing: float, lam: float, delta: float = 0.0) -> np.ndarray:
    """Multi-source Dijkstra from ``S = {W <= lam + delta}`` in the metric ``sqrt((W - lam)_+) |dx|``.

    Edges join axis neighbors (and diagonals in 2D, with length ``sqrt(2) h``);
    an edge costs its length times the mean of the endpoint densities.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    vals = np.asarray(values, dtype=float)
    flat = vals.reshape(-1)
    sources = np.flatnonzero(flat <= lam + delta)
    if sources.size == 0:
        raise ValueError("sublevel set is empty: lam + delta lies below min W")
    density = np.sqrt(np.maximum(flat - lam, 0.0))
    table, lengths = _edges(vals.shape, spacing)
    weights = lengths[None, :] * 0.5 * (density[:, None] + density[table])
    dist = np.full(flat.size, np.inf)
    dist[sources] = 0.0
    heap = [(0.0, int(i)) for i in sources]
    done = np.zeros(flat.size, dtype=bool)
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        for j, c in zip(table[i], weights[i]):
            nd = d + c
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, int(j)))
    return dist.reshape(vals.shape)


def w_distance(w, lam: float, delta: float = 0.0):
    """W-distance to the sublevel set ``{W <= lam + delta}``; zero on that set."""
    vals, h, grid = _unpack(w)
    dist = w_distance_array(vals, h, lam, delta)
    return ScalarField(grid, dist) if grid is not None else dist


def decay_profile(psi, h_field, thresholds) -> tuple[np.ndarray, float]:
    """``sup{|psi| : h >= t}`` for each threshold, and the ratio ``int e^h psi^2 / int psi^2``."""
    p = np.abs(np.asarray(psi.values if isinstance(psi, ScalarField) else psi)).reshape(-1)
    hv = np.asarray(h_field.values if isinstance(h_field, ScalarField) else h_field).reshape(-1)
    sup = np.array([p[hv >= t].max() if np.any(hv >= t) else 0.0 for t in thresholds])
    ratio = float(np.sum(np.exp(hv) * p * p) / np.sum(p * p))
    return sup, ratio
