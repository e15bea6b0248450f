import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from landscape_lab.core import ScalarField, constant_field, make_grid
from landscape_lab.landscape import (
    check_landscape_bound,
    compute_landscape,
    conjugated_operator,
    conjugated_residual,
    lower_bounds,
)
from landscape_lab.operator import SolverError, make_operator
from landscape_lab.potential import Potential, gen_bernoulli, gen_uniform, sample_on_grid
from landscape_lab.spectra import EigenPair


def _instance(units, lo, hi, seed, r, gen=gen_uniform):
    pot = gen(units, lo, hi, seed)
    g = make_grid(len(units), units, r)
    return make_operator(sample_on_grid(pot, g))


def _scipy_pairs(op, k):
    """Lowest eigenpairs from scipy's ARPACK shift-invert, an oracle independent of the package."""
    n = op.grid.n_points
    mat = sp.linalg.LinearOperator((n, n), matvec=lambda x: op.apply(x.reshape(op.grid.shape)).reshape(-1), dtype=float)
    rows = []
    shape = op.grid.shape
    for axis, m in enumerate(shape):
        idx = np.arange(n).reshape(shape)
        rows.append((idx.reshape(-1), np.roll(idx, -1, axis=axis).reshape(-1)))
    h2 = op.grid.h ** 2
    diag = sp.diags(op.diagonal.reshape(-1))
    off = sum(sp.csr_matrix((np.full(n, -1 / h2), (a, b)), shape=(n, n)) for a, b in rows)
    H = (diag + off + off.T).tocsc()
    assert abs(H @ np.ones(n) - mat @ np.ones(n)).max() < 1e-9
    lam, vecs = spla.eigsh(H, k=k, sigma=float(op.v.min()) - 0.1, which="LM")
    order = np.argsort(lam)
    scale = op.grid.h ** (-op.grid.dim / 2)
    return [EigenPair(float(lam[i]), ScalarField(op.grid, vecs[:, i] * scale), 0.0) for i in order]


def test_constant_potential_gives_constant_landscape():
    op = make_operator(constant_field(make_grid(2, [3, 3], 4), 2.0))
    pair = compute_landscape(op)
    np.testing.assert_allclose(pair.u.values, 0.5, rtol=1e-14)
    np.testing.assert_allclose(pair.w.values, 2.0, rtol=1e-14)
    assert lower_bounds(op.v_field, pair.w) == (2.0, pytest.approx(2.0, rel=1e-14))


def test_landscape_solves_and_inverts():
    op = _instance([256], 0, 4, 3, 10)
    pair = compute_landscape(op)
    assert pair.solve_report.converged
    assert np.linalg.norm(op.apply(pair.u.values) - 1) / math.sqrt(op.grid.n_points) <= 1e-10
    assert np.all(pair.u.values > 0)
    np.testing.assert_allclose(pair.u.values * pair.w.values, 1.0, rtol=1e-14)


def test_landscape_has_many_peaks_matching_wells():
    op = _instance([256], 0, 4, 3, 10)
    pair = compute_landscape(op)
    u = pair.u.values
    peaks = np.flatnonzero((u > np.roll(u, 1)) & (u > np.roll(u, -1)))
    w = pair.w.values
    wells = np.flatnonzero((w < np.roll(w, 1)) & (w < np.roll(w, -1)))
    assert len(peaks) > 10
    np.testing.assert_array_equal(peaks, wells)


@pytest.mark.parametrize("seed", range(1, 9))
def test_sandwich_min_v_le_min_w_le_max_v(seed):
    dim = 1 + seed % 2
    op = _instance([40] if dim == 1 else [8, 8], 0, 6, seed, 5)
    pair = compute_landscape(op)
    inf_v, inf_w = lower_bounds(op.v_field, pair.w)
    assert inf_v <= inf_w <= op.v.max() + 1e-9


def test_landscape_rejects_nonconvergence():
    op = _instance([64], 0, 4, 1, 10)
    with pytest.raises(SolverError):
        compute_landscape(op, tol=1e-14, max_iter=2)


def test_scaling_law_maps_u_and_wells():
    # stretching the domain by 2 and dividing V by 4 scales H by exactly 1/4
    pot = gen_uniform([64], 0, 4, 9)
    small = make_operator(sample_on_grid(pot, make_grid(1, [64], 10)))
    stretched = Potential(1, (128,), np.repeat(pot.cell_values, 2) / 4)
    big = make_operator(sample_on_grid(stretched, make_grid(1, [128], 5)))
    a, b = compute_landscape(small), compute_landscape(big)
    np.testing.assert_allclose(b.u.values, 4 * a.u.values, rtol=1e-10)
    assert np.argmin(a.w.values) == np.argmin(b.w.values)


def test_lower_bounds_with_oracle_eigenvalue():
    for seed in range(1, 9):
        op = _instance([64], 0, 8, seed, 10)
        pair = compute_landscape(op)
        inf_v, inf_w = lower_bounds(op.v_field, pair.w)
        lam1 = _scipy_pairs(op, 1)[0].lam
        assert lam1 >= inf_v
        assert lam1 >= inf_w  # exact for the discrete operator (M-matrix argument)
        assert inf_w > 3 * inf_v  # W is the sharper bound on every realization


def test_lower_bounds_grid_mismatch():
    a = constant_field(make_grid(1, [3], 2), 1.0)
    b = constant_field(make_grid(1, [3], 3), 1.0)
    with pytest.raises(ValueError):
        lower_bounds(a, b)


def test_landscape_bound_first_four_eigenpairs():
    op = _instance([256], 0, 4, 3, 10)
    pair = compute_landscape(op)
    for ep in _scipy_pairs(op, 4):
        assert check_landscape_bound(pair.u, ep) <= 1e-6 * np.abs(ep.psi.values).max()


def test_landscape_bound_tight_for_constant_potential():
    g = make_grid(1, [4], 4)
    op = make_operator(constant_field(g, 3.0))
    pair = compute_landscape(op)
    psi = constant_field(g, 0.5)
    assert check_landscape_bound(pair.u, EigenPair(3.0, psi, 0.0)) == pytest.approx(0.0, abs=1e-15)


def test_landscape_bound_bernoulli_2d():
    op = _instance([40, 40], 0, 4, 2, 2, gen=lambda u, a, b, s: gen_bernoulli(u, a, b, 0.3, s))
    pair = compute_landscape(op)
    ep = _scipy_pairs(op, 1)[0]
    assert check_landscape_bound(pair.u, ep) <= 1e-6 * np.abs(ep.psi.values).max()


def test_conjugated_residual_constant_phi():
    op = _instance([12, 10], 0, 4, 5, 4)
    pair = compute_landscape(op, tol=1e-14)
    assert conjugated_residual(pair, constant_field(op.grid, 2.0)) <= 1e-12


def _trig_residual(r):
    units = [16]
    op = make_operator(sample_on_grid(gen_uniform(units, 1, 3, 4), make_grid(1, units, r)))
    pair = compute_landscape(op, tol=1e-13)
    x = op.grid.axis_coords(0)
    phi = ScalarField(op.grid, 1 + 0.5 * np.cos(2 * np.pi * x / 16) + 0.3 * np.sin(6 * np.pi * x / 16))
    return conjugated_residual(pair, phi)  # ratio of grid norms, so already resolution-independent


def test_conjugated_residual_second_order():
    res = [_trig_residual(r) for r in (5, 10, 20)]
    orders = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    assert all(1.7 <= p <= 2.3 for p in orders), orders


def test_eigenfunction_over_u_solves_conjugated_problem():
    op = _instance([64], 0, 4, 6, 10)
    pair = compute_landscape(op, tol=1e-13)
    ep = _scipy_pairs(op, 1)[0]
    phi = ep.psi.with_values(ep.psi.values / pair.u.values)
    lhs = conjugated_operator(pair, phi).values
    # H(u phi) = u (L + W) phi holds exactly in the discrete flux form only up to O(h^2)
    rel = np.linalg.norm(lhs - ep.lam * phi.values) / np.linalg.norm(phi.values)
    assert rel <= 0.05 * ep.lam


def test_conjugated_operator_grid_mismatch():
    op = _instance([8], 0, 4, 1, 4)
    pair = compute_landscape(op)
    with pytest.raises(ValueError):
        conjugated_operator(pair, constant_field(make_grid(1, [8], 5), 1.0))
