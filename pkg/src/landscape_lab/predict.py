"""Spectral predictions read off the effective potential.

Eigenvalues come from well depths, ``lambda_k ~ (1 + n/4) * W_min(k)``;
supports from sublevel components of ``W``; counting functions from the
phase-space volume with ``V`` or ``W`` as the potential.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ScalarField, argmax_field, integrate, periodic_distance
from .geometry import Region, Well, sublevel_component

SUPPORT_ALPHA = {1: 1.875, 2: 1.56}  # level / well depth; 1.5 * 1.25 in 1D, 1.04 * 1.5 in 2D
UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}


def bump_factor(dim: int) -> float:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    return 1.0 + dim / 4.0


@dataclass(frozen=True)
class Prediction:
    well: Well
    lambda_hat: float
    support: Region


def predict_eigenvalues(wells: Sequence[Well], dim: int) -> list[float]:
    c = bump_factor(dim)
    return [c * w.w_min for w in wells]


def support_regions(wells: Sequence[Well], w: ScalarField, alpha: float | None = None) -> list[Region]:
    """Component of ``{W <= alpha * W_min}`` around each well; ``alpha`` defaults per dimension."""
    dim = w.grid.dim if isinstance(w, ScalarField) else np.ndim(w)
    if alpha is None:
        alpha = SUPPORT_ALPHA[dim]
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    return [sublevel_component(w, well.min_index, alpha * well.w_min, seed_rank=well.rank) for well in wells]


def predictions(wells: Sequence[Well], w: ScalarField, alpha: float | None = None) -> list[Prediction]:
    lams = predict_eigenvalues(wells, w.grid.dim)
    regions = support_regions(wells, w, alpha)
    return [Prediction(well, lam, reg) for well, lam, reg in zip(wells, lams, regions)]


@dataclass
class MatchReport:
    pairs: list[tuple[int, int, float]]  # (well rank, eigen rank, distance)
    unmatched_wells: list[int]
    unmatched_eigen: list[int]
    rank_to_rank: list[tuple[int, float]] = field(default_factory=list)  # (rank, distance)
    peaks: list[tuple[float, ...]] = field(default_factory=list)

    def distance_for_eigen(self, eigen_rank: int) -> float:
        for _, e, d in self.pairs:
            if e == eigen_rank:
                return d
        return math.inf


def match_locations(wells: Sequence[Well], eigenpairs) -> MatchReport:
    """Greedy matching: each eigenfunction, in eigenvalue order, takes the nearest unpaired well.

    The eigenfunction location is the argmax of ``|psi|``. Distances are
    periodic Euclidean. Naive rank-to-rank distances are reported alongside.
    """
    if not wells or not eigenpairs:
        raise ValueError("need at least one well and one eigenpair")
    grid = eigenpairs[0].psi.grid
    peaks = []
    for pair in eigenpairs:
        i, _ = argmax_field(np.abs(pair.psi.values))
        peaks.append(grid.coords(i))
    return match_peaks(wells, peaks, grid.lengths)


def match_peaks(wells: Sequence[Well], peaks: Sequence[Sequence[float]], lengths: Sequence[float]) -> MatchReport:
    """``match_locations`` on precomputed peak coordinates, for a torus with the given side lengths."""
    if not wells or not peaks:
        raise ValueError("need at least one well and one peak")
    peaks = [tuple(float(c) for c in p) for p in peaks]
    free = {w.rank: w for w in wells}
    pairs = []
    for e_rank, loc in enumerate(peaks, start=1):
        if not free:
            break
        best = min(free.values(), key=lambda w: (periodic_distance(lengths, w.min_location, loc), w.rank))
        pairs.append((best.rank, e_rank, periodic_distance(lengths, best.min_location, loc)))
        del free[best.rank]
    matched_e = {e for _, e, _ in pairs}
    ranked = sorted(wells, key=lambda w: w.rank)
    r2r = [(k, periodic_distance(lengths, well.min_location, loc)) for k, (well, loc) in enumerate(zip(ranked, peaks), start=1)]
    return MatchReport(
        pairs=pairs,
        unmatched_wells=sorted(free),
        unmatched_eigen=[e for e in range(1, len(peaks) + 1) if e not in matched_e],
        rank_to_rank=r2r,
        peaks=peaks,
    )


def ratio_stats(eigenvalues: Sequence[float], wells: Sequence[Well], counts: Sequence[int]) -> dict[int, tuple[float, float]]:
    """Mean and population SD of ``lambda_k / W_min(k)`` over the first ``m`` rank pairs, per ``m``."""
    lams = np.asarray(eigenvalues, dtype=float)
    depths = np.array([w.w_min for w in sorted(wells, key=lambda w: w.rank)])
    out = {}
    for m in counts:
        if m > len(depths):
            raise ValueError(f"only {len(depths)} wells available, {m} requested")
        if m > len(lams):
            raise ValueError(f"only {len(lams)} eigenvalues available, {m} requested")
        q = lams[:m] / depths[:m]
        out[int(m)] = (float(q.mean()), float(q.std()))
    return out


@dataclass(frozen=True, eq=False)
class Histogram:
    lo: float
    hi: float
    bins: int
    counts: np.ndarray

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.bins + 1)

    def normalized(self) -> np.ndarray:
        total = self.counts.sum()
        return self.counts / total if total else self.counts.astype(float)


def dos_histogram(values: Sequence[float], lo: float, hi: float, bins: int) -> Histogram:
    """Counts per uniform bin of ``[lo, hi)``; values outside, including ``hi``, are dropped."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    if bins < 1:
        raise ValueError("need at least one bin")
    v = np.asarray(values, dtype=float)
    v = v[(v >= lo) & (v < hi)]
    idx = np.minimum(((v - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
    return Histogram(float(lo), float(hi), int(bins), np.bincount(idx, minlength=bins))


def total_variation(a: Histogram, b: Histogram) -> float:
    if a.bins != b.bins or a.lo != b.lo or a.hi != b.hi:
        raise ValueError("histograms use different bins")
    return 0.5 * float(np.abs(a.normalized() - b.normalized()).sum())


def counting_function(eigenvalues: Sequence[float], energy: float) -> int:
    """Number of eigenvalues ``<= energy``."""
    lams = list(eigenvalues)
    if any(b < a for a, b in zip(lams, lams[1:])):
        raise ValueError("eigenvalues must be sorted")
    return bisect.bisect_right(lams, energy)


def weyl_counting(field_: ScalarField, energy: float, dim: int | None = None) -> float:
    """``(2 pi)^-n * omega_n * int (E - f)_+^(n/2) dx`` for ``f = V`` (Weyl) or ``f = W`` (effective Weyl)."""
    dim = field_.grid.dim if dim is None else dim
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    excess = np.maximum(energy - field_.values, 0.0) ** (dim / 2)
    return (2 * math.pi) ** -dim * UNIT_BALL_VOLUME[dim] * integrate(field_.with_values(excess))


def bump_constant(dim: int, semiaxes: Sequence[float], resolution: int = 2000) -> float:
    """``int b / int b^2`` for the bump ``b = (1 - sum (x_i/a_i)^2)_+``, by midpoint quadrature.

    All axes share the spacing ``2 max(a) / resolution``, so elongated
    ellipsoids are resolved by fewer points along their short axes.
    """
    a = [float(x) for x in semiaxes]
    if len(a) != dim or any(x <= 0 for x in a):
        raise ValueError("need one positive semiaxis per dimension")
    step = 2 * max(a) / resolution
    rho2 = np.zeros(())
    for axis, ai in enumerate(a):
        n = int(math.ceil(2 * ai / step))
        x = (np.arange(n) + 0.5 - n / 2) * step
        rho2 = np.add.outer(rho2, (x / ai) ** 2) if axis else (x / ai) ** 2
    bump = np.maximum(1.0 - rho2, 0.0)
    # the cell volume cancels in the ratio
    return float(bump.sum() / (bump * bump).sum())
