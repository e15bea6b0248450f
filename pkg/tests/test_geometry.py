import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landscape_lab.core import ScalarField, make_grid, neighbors
from landscape_lab.geometry import (
    decay_profile,
    local_minima,
    sublevel_component,
    w_distance,
    w_distance_array,
    watershed_basins,
)
from landscape_lab.landscape import compute_landscape
from landscape_lab.operator import make_operator
from landscape_lab.potential import Rng, gen_bernoulli, gen_uniform, sample_on_grid

FIVE = np.array([5.0, 1.0, 4.0, 2.0, 3.0])


def _w(units, seed, r, lo=0.0, hi=4.0, gen=None):
    pot = gen(units, seed) if gen else gen_uniform(units, lo, hi, seed)
    op = make_operator(sample_on_grid(pot, make_grid(len(units), units, r)))
    return compute_landscape(op)


def _bfs_component(grid, values, seed, energy):
    """Independent flood fill through core.neighbors."""
    flat = values.reshape(-1)
    seen = {seed}
    queue = deque([seed])
    while queue:
        i = queue.popleft()
        for j in neighbors(grid, i, "axis"):
            if flat[j] <= energy and j not in seen:
                seen.add(j)
                queue.append(j)
    return seen


def test_minima_five_point_example():
    wells = local_minima(FIVE)
    assert [(w.min_index, w.w_min, w.rank) for w in wells] == [(1, 1.0, 1), (3, 2.0, 2)]


def test_minima_constant_field_empty():
    assert local_minima(np.full(6, 2.0)) == []
    assert local_minima(np.full((4, 4), 2.0)) == []


def test_minima_2d_uses_diagonals():
    w = np.full((5, 5), 10.0)
    w[1, 1] = 1.0
    w[2, 2] = 0.5  # diagonal neighbour of (1,1): only (2,2) is a minimum
    wells = local_minima(w)
    assert [w_.min_index for w_ in wells] == [12]


def test_minima_rank_ties_by_index():
    w = np.array([3.0, 1.0, 3.0, 3.0, 1.0, 3.0])
    assert [w_.min_index for w_ in local_minima(w)] == [1, 4]


def test_minima_locations_are_midpoints():
    g = make_grid(1, [3], 2)
    f = ScalarField(g, [3, 2, 0, 2, 3, 4])
    (well,) = local_minima(f)
    assert well.min_location == (1.25,) and well.w_min == 0


def test_minima_count_2d_uniform_16():
    counts = [len(local_minima(_w([40, 40], seed, 5, 0, 16).w)) for seed in range(1, 9)]
    assert all(150 <= c <= 400 for c in counts), counts


def test_sublevel_five_point_examples():
    assert sublevel_component(FIVE, 1, 3.0).as_set() == {1}
    assert sublevel_component(FIVE, 3, 3.0).as_set() == {3, 4}
    assert sublevel_component(FIVE, 1, 0.9 + 0.1).as_set() == {1}
    assert sublevel_component(FIVE, 1, 5.0).as_set() == set(range(5))
    with pytest.raises(ValueError):
        sublevel_component(FIVE, 0, 3.0)


def test_sublevel_axis_adjacency_only():
    w = np.full((4, 4), 9.0)
    w[0, 0] = w[1, 1] = 0.0
    assert sublevel_component(w, 0, 1.0).as_set() == {0}


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.1, 0.9), st.sampled_from([1, 2]))
def test_sublevel_matches_independent_bfs(seed, q, dim):
    g = make_grid(dim, [5] if dim == 1 else [3, 4], 3)
    vals = Rng(seed).uniform(g.n_points).reshape(g.shape)
    field = ScalarField(g, vals)
    start = int(np.argmin(vals))
    energy = float(np.quantile(vals, q))
    region = sublevel_component(field, start, energy)
    assert region.as_set() == _bfs_component(g, vals, start, energy)
    assert np.all(vals.reshape(-1)[region.members] <= energy)
    assert start in region and list(region.members) == sorted(region.members)


def test_watershed_single_well():
    w = np.array([3.0, 1.0, 2.0, 4.0])
    b = watershed_basins(w, local_minima(w))
    assert np.all(b.labels == 1) and not b.crest_mask.any()


def test_watershed_five_point_crests_at_maxima():
    b = watershed_basins(FIVE, local_minima(FIVE))
    assert list(np.flatnonzero(b.crest_mask)) == [0, 2]
    assert b.labels[1] == 1 and b.labels[3] == 2 and b.labels[4] == 2
    assert b.n_basins == 2


def test_watershed_requires_wells():
    with pytest.raises(ValueError):
        watershed_basins(FIVE, [])


def _check_partition(w, wells, basins):
    labels = basins.labels
    g = w.grid
    assert set(np.unique(labels)) == {well.basin_label for well in wells}
    for well in wells:
        assert labels.reshape(-1)[well.min_index] == well.basin_label
        members = np.flatnonzero(labels.reshape(-1) == well.basin_label)
        comp = _bfs_component(g, np.where(labels == well.basin_label, 0.0, 1.0), well.min_index, 0.5)
        assert comp == set(members.tolist())  # each basin is connected


@pytest.mark.parametrize("dim,seed", [(1, 1), (1, 2), (2, 3), (2, 4)])
def test_watershed_partitions_into_connected_basins(dim, seed):
    pair = _w([64] if dim == 1 else [12, 12], seed, 4)
    wells = local_minima(pair.w)
    basins = watershed_basins(pair.w, wells)
    assert basins.n_basins == len(wells)
    _check_partition(pair.w, wells, basins)


def test_watershed_bernoulli_basin_count():
    pair = _w([80, 80], 2, 2, gen=lambda u, s: gen_bernoulli(u, 0, 4, 0.3, s))
    wells = local_minima(pair.w)
    basins = watershed_basins(pair.w, wells)
    assert basins.n_basins == len(wells)
    assert 100 <= basins.n_basins <= 900


def test_w_distance_hand_example():
    h = w_distance_array(np.array([0.0, 0.0, 4.0, 4.0, 0.0]), 1.0, 0.0)
    np.testing.assert_allclose(h, [0, 0, 1, 1, 0])


def test_w_distance_everything_in_sublevel():
    pair = _w([8, 8], 1, 3)
    h = w_distance(pair.w, pair.w.max())
    assert isinstance(h, ScalarField) and np.all(h.values == 0)


def test_w_distance_empty_sublevel_rejected():
    with pytest.raises(ValueError):
        w_distance(np.array([1.0, 2.0, 3.0]), 0.5)
    with pytest.raises(ValueError):
        w_distance(np.array([1.0, 2.0, 3.0]), 1.0, -0.1)


def test_w_distance_diagonal_edges():
    w = np.full((3, 3), 1.0)
    w[0, 0] = 0.0
    h = w_distance_array(w, 0.5, 0.0)
    # every non-source point sits one axis step or one diagonal step away
    assert h[1, 1] == pytest.approx(math.sqrt(2) * 0.5 * 0.5 * (0 + 1))
    assert h[0, 1] == pytest.approx(0.5 * 0.5 * (0 + 1))


@pytest.mark.parametrize("dim", [1, 2])
def test_w_distance_monotone_and_lipschitz(dim):
    pair = _w([48] if dim == 1 else [10, 10], 5, 3)
    w = pair.w
    lam = w.min() + 0.2
    h0 = w_distance(w, lam).values.reshape(-1)
    h1 = w_distance(w, lam + 0.3).values.reshape(-1)
    assert np.all(h1 <= h0 + 1e-12)
    dens = np.sqrt(np.maximum(w.flat - lam, 0))
    g = w.grid
    for i in range(g.n_points):
        for j in neighbors(g, i, "full" if dim == 2 else "axis"):
            steps = [min(abs(a - b), n - abs(a - b)) for a, b, n in zip(g.unravel(i), g.unravel(j), g.shape)]
            weight = g.h * math.hypot(*steps) * 0.5 * (dens[i] + dens[j])
            assert abs(h0[i] - h0[j]) <= weight + 1e-12


def test_decay_profile_first_eigenfunction():
    units = [48]
    op = make_operator(sample_on_grid(gen_uniform(units, 0, 8, 3), make_grid(1, units, 6)))
    pair = compute_landscape(op)
    dense = np.diag(op.diagonal) - np.diag(np.full(op.grid.n_points - 1, 1 / op.grid.h**2), 1)
    dense = np.triu(dense) + np.triu(dense, 1).T
    dense[0, -1] = dense[-1, 0] = -1 / op.grid.h**2
    lam, vecs = np.linalg.eigh(dense)
    psi = vecs[:, 0]
    h = w_distance(pair.w, lam[0]).values
    thresholds = np.linspace(0, h.max(), 12)
    sup, ratio = decay_profile(psi, h, thresholds)
    assert np.all(np.diff(sup) <= 0)
    assert np.isfinite(ratio) and ratio >= 1
    assert sup[-1] < 0.1 * sup[0]  # far from the well in W-distance the eigenfunction is small
