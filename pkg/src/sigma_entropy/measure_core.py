"""Finite atomic probability spaces, densities and survival integrals.

A :class:`FiniteSpace` is a finite set of atoms with strictly positive masses
summing to one.  Functions on a space are plain numpy vectors indexed like the
atoms; a :class:`Density` is such a vector that is nonnegative and integrates
to one.

The survival integral of a nonnegative ``f`` is

    alpha_f(t) = int_t^inf xi({f >= tau}) dtau = E[(f - t)^+],

which is convex, nonincreasing and piecewise linear with kinks at the values
taken by ``f``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .config import EQ_TOL
from .errors import (
    DuplicateAtom,
    InvalidDensity,
    MassSumMismatch,
    NegativeThreshold,
    NonPositiveMass,
    SpaceMismatch,
)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def _to_float(x) -> float:
    # Rational strings such as "1/3" are converted exactly once.
    if isinstance(x, str):
        return float(Fraction(x))
    return float(x)


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Atomic probability space.  Build through :func:`make_space`."""

    atom_ids: tuple
    masses: np.ndarray

    def __len__(self) -> int:
        return len(self.atom_ids)

    @property
    def size(self) -> int:
        return len(self.atom_ids)

    def index(self, atom_id) -> int:
        return self._index[atom_id]

    def integral(self, values) -> float:
        return float(np.dot(self.masses, values))

    def l1_norm(self, values) -> float:
        return float(np.dot(self.masses, np.abs(values)))

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, FiniteSpace):
            return NotImplemented
        return self.atom_ids == other.atom_ids and np.array_equal(self.masses, other.masses)

    def __hash__(self) -> int:
        return hash((self.atom_ids, self.masses.tobytes()))

    def __repr__(self) -> str:
        return f"FiniteSpace(n={self.size})"


def make_space(atom_ids: Sequence, masses: Sequence, normalize: bool = False,
               tol: float = EQ_TOL) -> FiniteSpace:
    """Validate atoms and masses and return a :class:`FiniteSpace`.

    Masses may be numbers or rational strings (``"1/3"``).  With
    ``normalize=True`` the masses are rescaled to sum to one; otherwise a sum
    further than ``tol`` from one raises :class:`MassSumMismatch`.
    """
    atom_ids = tuple(atom_ids)
    if len(atom_ids) != len(masses):
        raise MassSumMismatch(
            f"{len(atom_ids)} atoms but {len(masses)} masses")
    if len(atom_ids) == 0:
        raise MassSumMismatch("a probability space needs at least one atom")
    if len(set(atom_ids)) != len(atom_ids):
        seen = set()
        dup = next(a for a in atom_ids if a in seen or seen.add(a))
        raise DuplicateAtom(f"atom {dup!r} appears more than once")
    m = np.array([_to_float(x) for x in masses], dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        bad = int(np.argmax(~np.isfinite(m) | (m <= 0)))
        raise NonPositiveMass(f"atom {atom_ids[bad]!r} has mass {m[bad]!r}")
    total = float(m.sum())
    if normalize:
        m = m / total
    elif abs(total - 1.0) > tol:
        raise MassSumMismatch(f"masses sum to {total!r}, expected 1")
    space = FiniteSpace(atom_ids, _frozen(m))
    object.__setattr__(space, "_index", {a: i for i, a in enumerate(atom_ids)})
    return space


def uniform_space(n: int, prefix: str = "x") -> FiniteSpace:
    return make_space([f"{prefix}{i + 1}" for i in range(n)], [1.0 / n] * n,
                      normalize=True)


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative function on the atoms of ``space`` with integral one."""

    space: FiniteSpace
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.space.size,):
            raise InvalidDensity(
                f"expected {self.space.size} values, got shape {vals.shape}")
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def max(self) -> float:
        return float(self.values.max())

    @property
    def min(self) -> float:
        return float(self.values.min())

    def __repr__(self) -> str:
        return f"Density({np.array2string(self.values, precision=6)})"


def make_density(space: FiniteSpace, values, tol: float = EQ_TOL,
                 normalize: bool = False) -> Density:
    """Validate ``values`` as a probability density on ``space``."""
    vals = np.array([_to_float(v) for v in values], dtype=float)
    if vals.shape != (space.size,):
        raise InvalidDensity(f"expected {space.size} values, got {vals.size}")
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise InvalidDensity("density values must be finite and nonnegative")
    total = space.integral(vals)
    if normalize:
        vals = vals / total
    elif abs(total - 1.0) > tol:
        raise InvalidDensity(f"density integrates to {total!r}, expected 1")
    return Density(space, vals)


def _check_same_space(a: FiniteSpace, b: FiniteSpace) -> None:
    if a is not b and a != b:
        raise SpaceMismatch("objects live on different spaces")


def alpha(f: Density, t: float) -> float:
    """Survival integral ``alpha_f(t) = sum_x xi(x) max(f(x) - t, 0)``."""
    if t < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {t!r}")
    return float(np.dot(f.space.masses, np.maximum(f.values - t, 0.0)))


def alpha_many(f: Density, ts) -> np.ndarray:
    """Vectorized :func:`alpha` over an array of thresholds."""
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise NegativeThreshold("thresholds must be >= 0")
    excess = np.maximum(f.values[None, :] - ts.reshape(-1, 1), 0.0)
    return (excess @ f.space.masses).reshape(ts.shape)


@dataclass(frozen=True)
class SurvivalProfile:
    """Exact piecewise-linear representation of ``t -> alpha_f(t)``.

    ``breakpoints`` are the distinct values of ``f`` and ``tail_masses[i]`` is
    ``xi({f >= breakpoints[i]})``.  ``knots``/``knot_values`` include ``t = 0``
    so that linear interpolation reproduces alpha on ``[0, inf)``.
    """

    breakpoints: np.ndarray
    tail_masses: np.ndarray
    knots: np.ndarray
    knot_values: np.ndarray

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0):
            raise NegativeThreshold("thresholds must be >= 0")
        out = np.interp(t_arr, self.knots, self.knot_values, right=0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def kinks(self) -> np.ndarray:
        return self.breakpoints

    def slopes(self) -> np.ndarray:
        """Slope on each interval between consecutive knots."""
        return np.diff(self.knot_values) / np.diff(self.knots)


def survival_profile(f: Density) -> SurvivalProfile:
    values = f.values
    masses = f.space.masses
    breakpoints = np.unique(values)
    order = np.argsort(values, kind="stable")
    # xi({f >= v}) for each distinct v, via a reversed cumulative sum
    sorted_vals = values[order]
    rev_cum = np.cumsum(masses[order][::-1])[::-1]
    first = np.searchsorted(sorted_vals, breakpoints, side="left")
    tail = rev_cum[first]
    knots = breakpoints if breakpoints[0] == 0.0 else np.concatenate(([0.0], breakpoints))
    knot_values = alpha_many(f, knots)
    return SurvivalProfile(_frozen(breakpoints), _frozen(tail), _frozen(knots),
                           _frozen(knot_values))


def abs_moment(f: Density, t: float) -> float:
    """``int |f - t| dxi``, computed directly from the atoms."""
    if t < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {t!r}")
    return float(np.dot(f.space.masses, np.abs(f.values - t)))


def dominates_second_order(f1: Density, f2: Density, tol: float = EQ_TOL) -> bool:
    """True iff ``alpha_{f1}(t) <= alpha_{f2}(t)`` for every ``t >= 0``.

    Both profiles are piecewise linear, so comparing them at ``t = 0`` and at
    the union of their kinks decides the inequality exactly.
    """
    _check_same_space(f1.space, f2.space)
    ts = np.union1d(np.union1d(f1.values, f2.values), [0.0])
    return bool(np.all(alpha_many(f1, ts) <= alpha_many(f2, ts) + tol))


def random_space(rng: np.random.Generator, n: int, prefix: str = "x") -> FiniteSpace:
    """Random space with ``n`` atoms; masses bounded away from zero."""
    w = rng.uniform(0.05, 1.0, size=n)
    return make_space([f"{prefix}{i + 1}" for i in range(n)], w, normalize=True)


def random_density(rng: np.random.Generator, space: FiniteSpace,
                   zero_prob: float = 0.0, spread: float = 3.0) -> Density:
    """Random density; each value is zero with probability ``zero_prob``."""
    while True:
        v = rng.uniform(0.0, spread, size=space.size) ** 2
        if zero_prob:
            v[rng.random(space.size) < zero_prob] = 0.0
        total = space.integral(v)
        if total > 0:
            return Density(space, v / total)


def random_bounded_density(rng: np.random.Generator, space: FiniteSpace,
                           lam: float = 4.0) -> Density:
    """Random density with values in ``[1/lam, lam]``.

    Raw values are drawn from ``[lam**-0.5, lam**0.5]``; normalizing by their
    mean (which lies in the same range) keeps the result inside the box.
    """
    r = np.sqrt(lam)
    v = rng.uniform(1.0 / r, r, size=space.size)
    return Density(space, v / space.integral(v))
