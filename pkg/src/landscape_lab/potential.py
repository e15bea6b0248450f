"""Seeded piecewise-constant random potentials.

Every generator is a pure function of its parameters and a 64-bit seed. The
random stream is SplitMix64, which is cheap to vectorize because its state
after ``i`` steps is simply ``seed + i * GAMMA (mod 2**64)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import Grid, ScalarField

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 stream. Single-owner; not safe to share between threads."""

    def __init__(self, seed: int):
        if not 0 <= int(seed) <= MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.state = int(seed)

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            out = _mix(z)
        self.state = (self.state + n * GAMMA) & MASK64
        return out

    def uniform(self, n: int) -> np.ndarray:
        """``n`` doubles in [0, 1) from the top 53 bits of each output."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        """Box-Muller on consecutive uniform pairs; a trailing odd sample is discarded."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        radius = np.sqrt(-2.0 * np.log1p(-u[0::2]))  # 1 - u lies in (0, 1]
        angle = 2.0 * np.pi * u[1::2]
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(angle)
        z[1::2] = radius * np.sin(angle)
        return z[:n]


@dataclass(frozen=True, eq=False)
class Potential:
    dim: int
    units: tuple[int, ...]
    cell_values: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        units = tuple(int(n) for n in self.units)
        if self.dim not in (1, 2) or len(units) != self.dim:
            raise ValueError(f"bad dim/units: {self.dim}, {units}")
        vals = np.array(self.cell_values, dtype=float).reshape(units)
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be finite")
        if np.any(vals < 0):
            raise ValueError("potential values must be nonnegative")
        if not np.any(vals > 0):
            raise ValueError("potential must be positive somewhere")
        vals.setflags(write=False)
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "cell_values", vals)

    @property
    def seed(self) -> int | None:
        return self.meta.get("seed")

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "units": list(self.units),
            "cell_values": [float(v) for v in self.cell_values.reshape(-1)],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Potential":
        return cls(int(d["dim"]), tuple(d["units"]), np.asarray(d["cell_values"], dtype=float), dict(d.get("meta", {})))


def _units(units: Sequence[int] | int) -> tuple[int, ...]:
    if isinstance(units, (int, np.integer)):
        units = (units,)
    units = tuple(int(n) for n in units)
    if len(units) not in (1, 2) or any(n < 1 for n in units):
        raise ValueError(f"bad units {units}")
    return units


def gen_uniform(units, lo: float, hi: float, seed: int) -> Potential:
    if lo < 0:
        raise ValueError("lo must be >= 0")
    if hi < lo:
        raise ValueError("hi must be >= lo")
    units = _units(units)
    u = Rng(seed).uniform(int(np.prod(units)))
    vals = lo + (hi - lo) * u
    meta = {"generator": "uniform", "params": {"lo": lo, "hi": hi}, "seed": int(seed)}
    return Potential(len(units), units, vals.reshape(units), meta)


def gen_bernoulli(units, v0: float, v1: float, p1: float, seed: int) -> Potential:
    if v0 < 0 or v1 < 0:
        raise ValueError("values must be >= 0")
    if v0 + v1 <= 0:
        raise ValueError("v0 and v1 cannot both be zero")
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    units = _units(units)
    u = Rng(seed).uniform(int(np.prod(units)))
    vals = np.where(u < p1, float(v1), float(v0))
    meta = {"generator": "bernoulli", "params": {"v0": v0, "v1": v1, "p1": p1}, "seed": int(seed)}
    # Potential rejects the all-zero case (including v0 = v1 = 0)
    return Potential(len(units), units, vals.reshape(units), meta)


# ---------------------------------------------------------------------------
# discrete Fourier transform


def _dft_direct(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    kernel = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    return x @ kernel.T


def _fft_radix2(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((np.arange(n) >> b) & 1) << (bits - 1 - b)
    a = np.array(x[..., rev], dtype=complex)
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        a = a.reshape(a.shape[:-1] + (n // size, size))
        even = a[..., :half].copy()
        odd = a[..., half:] * tw
        a[..., :half] = even + odd
        a[..., half:] = even - odd
        a = a.reshape(a.shape[:-2] + (n,))
        size *= 2
    return a


def _transform(x, sign: int) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("empty input")
    if n & (n - 1) == 0:
        return _fft_radix2(x, sign)
    return _dft_direct(x, sign)


def dft(x) -> np.ndarray:
    """``X_k = sum_j x_j exp(-2 pi i j k / n)`` along the last axis."""
    return _transform(x, -1)


def idft(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return _transform(x, +1) / x.shape[-1]


def dft2(x) -> np.ndarray:
    return np.swapaxes(dft(np.swapaxes(dft(x), -1, -2)), -1, -2)


def idft2(x) -> np.ndarray:
    return np.swapaxes(idft(np.swapaxes(idft(x), -1, -2)), -1, -2)


# ---------------------------------------------------------------------------
# correlated Gaussian-squared potentials


def _check_correlated(n: int, sigma: float, d: float) -> None:
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and >= 4, got {n}")
    if sigma <= 0 or d <= 0:
        raise ValueError("sigma and d must be positive")


def _real_part_checked(y: np.ndarray) -> np.ndarray:
    scale = max(float(np.abs(y.real).max()), 1e-300)
    if float(np.abs(y.imag).max()) > 1e-10 * scale:
        raise ArithmeticError("filtered field is not real; multiplier lost its symmetry")
    return y.real


def exp_multiplier(n: int, sigma: float, d: float) -> np.ndarray:
    i = np.arange(n)
    return sigma * np.exp(-d * np.minimum(i, n - i))


def aperture_multiplier(shape: tuple[int, int], sigma: float, d: float) -> np.ndarray:
    t = [np.minimum(np.arange(n), n - np.arange(n)) for n in shape]
    mag = np.hypot(t[0][:, None], t[1][None, :])
    return np.where(d * mag <= 1.0, float(sigma), 0.0)


def gen_correlated_1d(n: int, sigma: float, d: float, seed: int) -> Potential:
    _check_correlated(n, sigma, d)
    z = Rng(seed).normal(n)
    q = exp_multiplier(n, sigma, d)
    vals = _real_part_checked(idft(q * dft(z))) ** 2
    meta = {"generator": "correlated_1d", "params": {"n": n, "sigma": sigma, "d": d}, "seed": int(seed)}
    return Potential(1, (n,), vals, meta)


def gen_correlated_2d(n, sigma: float, d: float, seed: int) -> Potential:
    shape = _units(n if not isinstance(n, (int, np.integer)) else (n, n))
    if len(shape) != 2:
        raise ValueError("2D generator needs two axis lengths")
    for m in shape:
        _check_correlated(m, sigma, d)
    z = Rng(seed).normal(shape[0] * shape[1]).reshape(shape)
    q = aperture_multiplier(shape, sigma, d)
    vals = _real_part_checked(idft2(q * dft2(z))) ** 2
    meta = {"generator": "correlated_2d", "params": {"n": list(shape), "sigma": sigma, "d": d}, "seed": int(seed)}
    return Potential(2, shape, vals, meta)


def sample_on_grid(potential: Potential, grid: Grid) -> ScalarField:
    """Tile each unit cell's value over the ``r**dim`` grid points inside it."""
    if potential.dim != grid.dim or potential.units != grid.units:
        raise ValueError(f"potential units {potential.units} do not match grid units {grid.units}")
    vals = potential.cell_values
    for axis in range(grid.dim):
        vals = np.repeat(vals, grid.points_per_unit, axis=axis)
    return ScalarField(grid, vals)
