"""Eigensolver oracle for the discrete operator and the square-well reference value.

The oracle is a shift-invert Lanczos iteration. Each step solves
``(H - sigma) w = q`` with Jacobi-PCG and fully reorthogonalizes ``w`` against
the basis. The basis is restarted thick (Krylov-Schur style): the wanted Ritz
vectors are kept together with their coupling to the next Lanczos vector.
Convergence is judged on residuals recomputed from ``H`` itself, so the inner
solve tolerance affects speed, never the accuracy of what is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ScalarField
from .operator import DiscreteOperator, SolverError, solve_spd
from .potential import Rng


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    psi: ScalarField  # integrate(psi**2) == 1
    residual: float



class _Breakdown(Exception):
    pass


def eigen_residual(op: DiscreteOperator, pair: EigenPair) -> float:
    """``|H psi - lambda psi| / |psi|``, recomputed from scratch."""
    psi = pair.psi.values
    r = op.apply(psi) - pair.lam * psi
    return float(np.linalg.norm(r) / np.linalg.norm(psi))


def _normalized_pair(op: DiscreteOperator, x: np.ndarray, lam: float, residual: float) -> EigenPair:
    i = int(np.argmax(np.abs(x)))
    if x[i] < 0:
        x = -x
    scale = op.grid.h ** (-op.grid.dim / 2)  # unit Euclidean norm -> unit L2 norm
    return EigenPair(float(lam), ScalarField(op.grid, (x * scale).reshape(op.grid.shape)), float(residual))


def _orthogonalize(w: np.ndarray, basis: np.ndarray) -> np.ndarray:
    if basis.shape[0]:
        for _ in range(2):
            w -= basis.T @ (basis @ w)
    return w


def _lanczos(op, k, tol, shift, locked, solve_tol, max_basis, max_restarts, seed):
    n = op.grid.n_points
    shape = op.grid.shape
    free = n - locked.shape[0]
    if k > free - 2:
        raise ValueError(f"cannot compute {k} eigenpairs on {free} free degrees of freedom")
    nev = min(k + max(2, k // 5), free - 2)
    m_max = min(max_basis or max(2 * nev, nev + 24), free - 1)
    diag = (op.diagonal - shift).reshape(shape)
    inner_max_iter = max(2000, 200 * int(math.sqrt(n)))

    def h_apply(x):
        return op.apply(x.reshape(shape)).reshape(-1)

    def shifted(x):
        return op.apply(x, shift)

    def inverse(x):
        y, rep = solve_spd(shifted, x.reshape(shape), diag, tol=solve_tol, max_iter=inner_max_iter)
        if not rep.converged:
            raise _Breakdown(rep)
        return _orthogonalize(y.reshape(-1), locked)

    rng = Rng(seed)

    def fresh(basis):
        v = _orthogonalize(_orthogonalize(rng.normal(n), locked), basis)
        return v / np.linalg.norm(v)

    # Q rows are orthonormal; T holds the projection of (H - shift)^-1 plus one
    # extra row carrying the coupling to the next basis vector.
    Q = np.zeros((m_max + 1, n))
    T = np.zeros((m_max + 1, m_max + 1))
    q0 = inverse(fresh(Q[:0]))  # filters the high-frequency part of the random start
    Q[0] = q0 / np.linalg.norm(q0)
    j = 1
    last_check = 0
    check_every = max(4, nev // 4)
    restarts = 0

    while True:
        w = inverse(Q[j - 1])
        wnorm = np.linalg.norm(w)
        c = Q[:j] @ w
        w -= Q[:j].T @ c
        c2 = Q[:j] @ w
        w -= Q[:j].T @ c2
        c += c2
        T[:j, j - 1] = c
        T[j - 1, :j] = c
        beta = np.linalg.norm(w)
        if beta <= 1e-10 * max(wnorm, 1e-300):
            w = fresh(Q[:j])  # invariant subspace: restart the sequence
            beta = 0.0
        else:
            w /= beta
        Q[j] = w
        T[j, j - 1] = beta
        j += 1

        m = j - 1  # basis size; Q[m] is the continuation vector
        if m < nev or (m - last_check < check_every and m < m_max):
            continue
        last_check = m
        theta, s = np.linalg.eigh(T[:m, :m])
        order = np.argsort(-theta)[:nev]
        theta, s = theta[order], s[:, order]
        X = s.T @ Q[:m]
        lam = shift + 1.0 / theta
        res = np.array([np.linalg.norm(h_apply(x) - l * x) for x, l in zip(X[:k], lam[:k])])
        if np.all(res <= tol):
            return lam[:k], X[:k], res
        if m == m_max:
            restarts += 1
            if restarts > max_restarts:
                raise SolverError(f"Lanczos did not converge after {max_restarts} restarts (max residual {res.max():.3e})")
            coupling = T[m, m - 1] * s[m - 1, :]
            Q[nev] = Q[m]
            Q[:nev] = X
            T[:] = 0.0
            T[:nev, :nev] = np.diag(theta)
            T[nev, :nev] = coupling
            T[:nev, nev] = coupling
            j = nev + 1
            last_check = nev


def smallest_eigenpairs(
    op: DiscreteOperator,
    k: int,
    tol: float = 1e-8,
    *,
    shift: float | None = None,
    locked: Sequence[EigenPair] = (),
    solve_tol: float = 1e-12,
    max_basis: int | None = None,
    max_restarts: int = 60,
    seed: int = 0x5EED,
) -> list[EigenPair]:
    """The ``k`` smallest eigenpairs of ``H`` in ascending order.

    The default shift is ``min V`` (at or below the spectrum); if the shifted
    solve breaks down (for instance on a constant potential, where ``min V``
    is itself an eigenvalue) it falls back to ``min V - 0.1``. ``locked`` pairs
    are deflated, so consecutive calls slice the spectrum from the bottom.
    Degenerate eigenvalues come back in an arbitrary orthonormal basis; each
    vector is signed so that its largest-magnitude entry is positive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    vmin = float(op.v.min())
    lock = np.array([p.psi.values.reshape(-1) for p in locked]) if locked else np.zeros((0, op.grid.n_points))
    if lock.shape[0]:
        lock = lock / np.linalg.norm(lock, axis=1, keepdims=True)
    shifts = [shift] if shift is not None else [vmin, vmin - 0.1]
    if shift is None and float(op.v.max()) == vmin:
        shifts = [vmin - 0.1]
    for sigma in shifts:
        try:
            theta, X, res = _lanczos(op, k, tol, sigma, lock, solve_tol, max_basis, max_restarts, seed)
            break
        except _Breakdown:
            continue
    else:
        raise SolverError("shifted solves broke down for every shift tried")
    return [_normalized_pair(op, x, t, r) for t, x, r in zip(theta, X, res)]


def eigenpairs_below(op: DiscreteOperator, e_max: float, batch: int = 32, tol: float = 1e-8, **kw) -> list[EigenPair]:
    """All eigenpairs with ``lambda <= e_max``, computed in slices of ``batch`` with locking."""
    found: list[EigenPair] = []
    while True:
        new = smallest_eigenpairs(op, batch, tol, locked=found, seed=0x5EED + len(found), **kw)
        found.extend(new)
        if new[-1].lam > e_max:
            break
    found.sort(key=lambda p: p.lam)
    return [p for p in found if p.lam <= e_max]


def square_well_eigenvalue(nu: float, tol: float = 1e-12) -> float:
    """Root of ``cos(sqrt(lam)) = sqrt(lam / nu)`` in ``(0, pi**2/4)`` by bisection."""
    if nu <= 0:
        raise ValueError("well height must be positive")

    def f(lam):
        return math.cos(math.sqrt(lam)) - math.sqrt(lam / nu)

    lo, hi = 0.0, math.pi**2 / 4  # f(lo) = 1 > 0, f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
