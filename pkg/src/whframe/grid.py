"""Uniform-grid model of L^2(R).

Signals are complex samples at ``t_i = i * delta`` for ``i_min <= i <= i_max``
and are treated as zero everywhere else.  Grid steps and shifts are kept as
exact rationals so that lattice translations never need interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple, Union

import numpy as np

Number = Union[int, float, str, Fraction]

WINDOW_KINDS = ("gaussian", "box", "triangle", "power_cusp", "user_samples")


class GridMismatchError(ValueError):
    """Signals defined on different grids were combined."""


class GridCompatibilityError(ValueError):
    """A shift or lattice parameter is not an integer number of grid steps."""


def as_fraction(x: Number) -> Fraction:
    """Exact rational reading of ``x``.

    Floats are read through their shortest decimal repr, so ``0.001`` becomes
    ``1/1000`` rather than the nearest binary fraction.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} has no rational form")
        return Fraction(repr(float(x)))
    return Fraction(str(x).strip())


def csum(values: np.ndarray) -> complex:
    """Exactly rounded sum of a complex (or real) array."""
    values = np.asarray(values)
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real.ravel()), math.fsum(values.imag.ravel()))
    return complex(math.fsum(values.ravel()), 0.0)


@dataclass(frozen=True)
class GridSpec:
    delta: Fraction
    i_min: int
    i_max: int
    oversample: int = 1

    def __post_init__(self):
        object.__setattr__(self, "delta", as_fraction(self.delta))
        object.__setattr__(self, "i_min", int(self.i_min))
        object.__setattr__(self, "i_max", int(self.i_max))
        if self.delta <= 0:
            raise ValueError("grid step must be positive")
        if self.i_min > self.i_max:
            raise ValueError("empty grid: i_min > i_max")
        if self.oversample < 1:
            raise ValueError("oversample must be a positive integer")

    @classmethod
    def from_span(cls, delta: Number, t_min: Number, t_max: Number, oversample: int = 1) -> "GridSpec":
        """Grid covering ``[t_min, t_max]`` (endpoints included when on-grid)."""
        d = as_fraction(delta)
        lo = math.ceil(as_fraction(t_min) / d)
        hi = math.floor(as_fraction(t_max) / d)
        return cls(d, lo, hi, oversample)

    @property
    def size(self) -> int:
        return self.i_max - self.i_min + 1

    @property
    def step(self) -> float:
        return float(self.delta)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.i_min, self.i_max + 1, dtype=np.int64)

    @property
    def t(self) -> np.ndarray:
        return self.indices * self.step

    @property
    def t_min(self) -> float:
        return self.i_min * self.step

    @property
    def t_max(self) -> float:
        return self.i_max * self.step

    def steps(self, length: Number) -> int:
        """Number of grid steps in ``length``; raises unless it is an integer."""
        q = as_fraction(length) / self.delta
        if q.denominator != 1:
            raise GridCompatibilityError(
                f"{as_fraction(length)} is not an integer multiple of the grid step {self.delta}"
            )
        return int(q)


class GridSignal:
    """Complex samples on a :class:`GridSpec`; immutable."""

    __slots__ = ("grid", "samples", "support_hint")

    def __init__(self, grid: GridSpec, samples, support_hint: Optional[Tuple[int, int]] = None):
        arr = np.array(samples, dtype=np.complex128)
        if arr.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} samples, got shape {arr.shape}")
        if support_hint is not None:
            lo, hi = int(support_hint[0]), int(support_hint[1])
            support_hint = (lo, hi)
            inside = np.zeros(grid.size, dtype=bool)
            a, b = max(lo, grid.i_min) - grid.i_min, min(hi, grid.i_max) - grid.i_min
            if a <= b:
                inside[a : b + 1] = True
            if np.any(arr[~inside] != 0):
                raise ValueError("samples outside support_hint are not zero")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "support_hint", support_hint)

    def __setattr__(self, name, value):
        raise AttributeError("GridSignal is immutable")

    def __repr__(self):
        return f"GridSignal(size={self.grid.size}, delta={self.grid.delta}, support={self.support()})"

    @classmethod
    def zeros(cls, grid: GridSpec) -> "GridSignal":
        return cls(grid, np.zeros(grid.size, dtype=np.complex128))

    def support(self) -> Optional[Tuple[int, int]]:
        """Index range of the nonzero samples, or ``None`` for the zero signal."""
        nz = np.flatnonzero(self.samples)
        if nz.size == 0:
            return None
        return (self.grid.i_min + int(nz[0]), self.grid.i_min + int(nz[-1]))

    def with_samples(self, samples) -> "GridSignal":
        return GridSignal(self.grid, samples)

    def _other(self, other):
        if isinstance(other, GridSignal):
            _check_same_grid(self, other)
            return other.samples
        return other

    def __add__(self, other):
        return GridSignal(self.grid, self.samples + self._other(other))

    def __sub__(self, other):
        return GridSignal(self.grid, self.samples - self._other(other))

    def __mul__(self, other):
        return GridSignal(self.grid, self.samples * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return GridSignal(self.grid, self.samples / scalar)

    def __neg__(self):
        return GridSignal(self.grid, -self.samples)

    def conj(self) -> "GridSignal":
        return GridSignal(self.grid, np.conj(self.samples), self.support_hint)


def _check_same_grid(*signals: GridSignal) -> None:
    first = signals[0].grid
    for s in signals[1:]:
        if s.grid != first:
            raise GridMismatchError(f"incompatible grids: {first} vs {s.grid}")


def inner_product(f: GridSignal, h: GridSignal) -> complex:
    """Riemann sum ``delta * sum f_i conj(h_i)``, conjugate-linear in ``h``."""
    _check_same_grid(f, h)
    return f.grid.step * csum(f.samples * np.conj(h.samples))


def norm_sq(f: GridSignal) -> float:
    a = np.abs(f.samples)
    return f.grid.step * math.fsum(a * a)


def norm(f: GridSignal) -> float:
    return math.sqrt(norm_sq(f))


def shift_samples(x: np.ndarray, k: int) -> np.ndarray:
    """``out[i] = x[i - k]`` with zero fill; samples pushed past either end are lost."""
    out = np.zeros_like(x)
    n = x.shape[0]
    if k >= n or -k >= n:
        return out
    if k >= 0:
        out[k:] = x[: n - k]
    else:
        out[: n + k] = x[-k:]
    return out


def translate(f: GridSignal, shift: Number) -> GridSignal:
    """``(T_shift f)(t) = f(t - shift)``; the shift must be a whole number of steps."""
    k = f.grid.steps(shift)
    if k == 0:
        return f
    hint = None
    if f.support_hint is not None:
        lo = max(f.support_hint[0] + k, f.grid.i_min)
        hi = min(f.support_hint[1] + k, f.grid.i_max)
        hint = (lo, hi) if lo <= hi else None
    return GridSignal(f.grid, shift_samples(f.samples, k), hint)


def phase_table(grid: GridSpec, freq: Number) -> np.ndarray:
    """``exp(2 pi i freq t_i)`` on the grid, with the phase reduced exactly mod 1."""
    r = as_fraction(freq) * grid.delta
    p, q = r.numerator, r.denominator
    if p == 0:
        return np.ones(grid.size, dtype=np.complex128)
    idx = grid.indices
    if abs(p) * max(abs(grid.i_min), abs(grid.i_max)) < 2**62 and q < 2**62:
        frac = ((p * idx) % q) / q
    else:
        # huge numerators/denominators: stay in Python integers
        frac = np.array([float(Fraction((p * int(i)) % q, q)) for i in idx])
    return np.exp(2j * np.pi * frac)


def modulate(f: GridSignal, freq: Number) -> GridSignal:
    """``(E_freq f)(t) = exp(2 pi i freq t) f(t)``."""
    if as_fraction(freq) == 0:
        return f
    return GridSignal(f.grid, f.samples * phase_table(f.grid, freq), f.support_hint)


def make_window(kind: str, params: Sequence[Number] = (), grid: Optional[GridSpec] = None,
                require_l2: bool = True) -> GridSignal:
    """Sample one of the standard windows on ``grid``.

    ``gaussian(sigma)`` is ``exp(-pi t^2 / sigma^2)``; ``box(c, d)`` the
    indicator of ``[c, d)`` (infinite endpoints allowed); ``triangle(c, d)``
    the hat peaking at the midpoint; ``power_cusp(alpha, c, d)`` the function
    ``(t - c)^(-alpha)`` on ``(c, d]``, never sampled at the singular point;
    ``user_samples(x)`` takes the samples verbatim.
    """
    if grid is None:
        raise ValueError("make_window needs a grid")
    t = grid.t
    params = list(params)
    if kind == "gaussian":
        (sigma,) = _nparams(kind, params, 1)
        sigma = float(sigma)
        if sigma <= 0:
            raise ValueError("gaussian width must be positive")
        x = np.exp(-np.pi * (t / sigma) ** 2)
    elif kind == "box":
        c, d = (float(v) for v in _nparams(kind, params, 2))
        x = ((t >= c) & (t < d)).astype(float)
    elif kind == "triangle":
        c, d = (float(v) for v in _nparams(kind, params, 2))
        if not d > c:
            raise ValueError("triangle needs c < d")
        mid, half = 0.5 * (c + d), 0.5 * (d - c)
        x = np.clip(1.0 - np.abs(t - mid) / half, 0.0, None)
    elif kind == "power_cusp":
        alpha, c, d = (float(v) for v in _nparams(kind, params, 3))
        if require_l2 and alpha >= 0.5:
            raise ValueError("power_cusp with alpha >= 1/2 is not square integrable")
        x = np.zeros(grid.size)
        inside = (t > c) & (t <= d)
        x[inside] = (t[inside] - c) ** (-alpha)
    elif kind == "user_samples":
        (vals,) = _nparams(kind, params, 1)
        return GridSignal(grid, np.asarray(vals, dtype=np.complex128))
    else:
        raise ValueError(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")
    return GridSignal(grid, x.astype(np.complex128))


def _nparams(kind, params, n):
    if len(params) != n:
        raise ValueError(f"{kind} takes {n} parameter(s), got {len(params)}")
    return params


def random_signal(grid: GridSpec, rng: np.random.Generator, support: Tuple[float, float],
                  smooth: bool = False) -> GridSignal:
    """Seeded random probe vanishing outside ``support`` (closed interval in t).

    The rough kind is i.i.d. complex gaussian samples; the smooth kind is a
    random trigonometric polynomial times a C^1 bump.
    """
    t = grid.t
    c, d = support
    inside = (t >= c) & (t <= d)
    if not smooth:
        x = np.zeros(grid.size, dtype=np.complex128)
        m = int(inside.sum())
        x[inside] = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        return GridSignal(grid, x)
    u = np.zeros_like(t)
    u[inside] = (t[inside] - c) / (d - c)
    bump = np.where(inside, (np.sin(np.pi * u)) ** 2, 0.0)
    coef = rng.standard_normal((4, 2))
    poly = sum((coef[j, 0] + 1j * coef[j, 1]) * np.exp(2j * np.pi * j * u) for j in range(4))
    return GridSignal(grid, bump * poly)
