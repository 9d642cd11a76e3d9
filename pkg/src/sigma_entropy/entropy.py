"""Phi-entropy functionals on finite spaces.

``Ent^Phi(f) = sum_x xi(x) Phi(f(x))`` for a convex generator ``Phi`` with
``Phi(0) = Phi(1) = 0`` that decreases on ``(0, t_o)`` and increases after.
Alongside the direct sum this module provides the layer-cake form
``int_0^inf xi({f >= u}) Phi'(u) du``, the truncated second-derivative form
used in the sandwich estimate, the partition entropy ``H^Phi_rho(A)`` and the
Pinsker-Csiszar-Kullback comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import EQ_TOL
from .errors import (
    BadExponent,
    DeltaOutOfRange,
    InvalidPhi,
    NotUpperLimit,
    UnboundedDensity,
    UnknownPhi,
)
from .measure_core import Density, _check_same_space, alpha_many, survival_profile
from .partitions import Partition, cond_exp

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PhiFunction:
    """Convex entropy generator with its first two derivatives.

    ``beta_min`` records the integrability threshold: the tail integral
    ``int_1^inf t^-beta Phi''(t) dt`` is finite for every ``beta > beta_min``.
    It is ``None`` for user generators unless the caller asserts a value.
    """

    name: str
    phi: ArrayFn
    dphi: ArrayFn
    d2phi: ArrayFn
    t_o: float
    beta_min: float | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.phi(t)


def _xlogx(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
    return out if out.ndim else float(out)


def _standard() -> PhiFunction:
    return PhiFunction(
        name="standard",
        phi=_xlogx,
        dphi=lambda t: 1.0 + np.log(t),
        d2phi=lambda t: 1.0 / np.asarray(t, dtype=float),
        t_o=math.exp(-1.0),
        beta_min=0.0,
        kind="standard",
    )


def _power(p: float) -> PhiFunction:
    p = float(p)
    if not p > 1 or not math.isfinite(p):
        raise BadExponent(f"power(p) needs p > 1, got {p!r}")
    return PhiFunction(
        name=f"power({p:g})",
        phi=lambda t: np.asarray(t, dtype=float) ** p - np.asarray(t, dtype=float),
        dphi=lambda t: p * np.asarray(t, dtype=float) ** (p - 1) - 1.0,
        d2phi=lambda t: p * (p - 1) * np.asarray(t, dtype=float) ** (p - 2),
        t_o=p ** (-1.0 / (p - 1)),
        beta_min=p - 1,
        kind="power",
        params={"p": p},
    )


def builtin_phi(name: str, p: float | None = None) -> PhiFunction:
    """``"standard"`` (t log t) or ``"power"`` (t^p - t); ``"power(3)"`` also parses."""
    name = name.strip()
    if name == "standard":
        return _standard()
    if name.startswith("power"):
        arg = name[len("power"):].strip()
        if arg:
            if not (arg.startswith("(") and arg.endswith(")")):
                raise UnknownPhi(f"cannot parse {name!r}")
            try:
                p = float(arg[1:-1])
            except ValueError:
                raise BadExponent(f"bad exponent in {name!r}") from None
        if p is None:
            raise BadExponent("power needs an exponent")
        return _power(p)
    raise UnknownPhi(f"unknown entropy generator {name!r}")


def check_phi(phi: PhiFunction, n_grid: int = 1000) -> None:
    """Sampled validation of the generator assumptions.

    This is a semi-decision: it can reject a bad generator but passing only
    means no violation showed up on a log-spaced grid over ``[1e-6, 1e3]``.
    """
    grid = np.logspace(-6, 3, n_grid)
    if abs(float(phi.phi(np.array([1.0]))[0])) > 1e-12:
        raise InvalidPhi("Phi(1) must be 0")
    if abs(float(np.asarray(phi.phi(np.array([0.0])))[0])) > 1e-12:
        raise InvalidPhi("Phi(0) must be 0")
    if not 0 < phi.t_o < 1:
        raise InvalidPhi(f"t_o must lie in (0, 1), got {phi.t_o!r}")
    if np.any(phi.d2phi(grid) < 0):
        raise InvalidPhi("Phi'' is negative somewhere on the grid")
    d1 = phi.dphi(grid)
    below = grid < phi.t_o * (1 - 1e-9)
    above = grid > phi.t_o * (1 + 1e-9)
    if np.any(d1[below] >= 0) or np.any(d1[above] <= 0):
        raise InvalidPhi("Phi' must be negative before t_o and positive after")
    small = np.array([1e-4, 1e-6, 1e-8])
    mags = np.abs(small * phi.dphi(small))
    if not (mags[0] > mags[1] > mags[2]):
        raise InvalidPhi("t Phi'(t) does not decrease to 0 as t -> 0+")


def make_phi(name: str, phi: ArrayFn, dphi: ArrayFn, d2phi: ArrayFn, t_o: float,
             beta_min: float | None = None) -> PhiFunction:
    """Wrap and validate a user generator.  ``beta_min`` is taken on trust."""
    out = PhiFunction(name, phi, dphi, d2phi, float(t_o), beta_min)
    check_phi(out)
    return out


def ent(phi: PhiFunction, f: Density) -> float:
    """``sum_x xi(x) Phi(f(x))``; atoms with ``f = 0`` contribute ``Phi(0) = 0``."""
    v = f.values
    pos = v > 0
    return float(np.dot(f.space.masses[pos], phi.phi(v[pos])))


def ent_layer_cake(phi: PhiFunction, f: Density) -> float:
    """Exact layer-cake integral ``int_0^inf xi({f >= u}) Phi'(u) du``.

    ``xi({f >= u})`` is constant on each interval ``(v_{i-1}, v_i]`` between
    consecutive distinct values (with ``v_0 = 0``), so the integral is
    ``sum_i xi({f >= v_i}) (Phi(v_i) - Phi(v_{i-1}))``.
    """
    prof = survival_profile(f)
    v, tail = prof.breakpoints, prof.tail_masses
    keep = v > 0
    v, tail = v[keep], tail[keep]
    if v.size == 0:
        return 0.0
    phis = np.asarray(phi.phi(v), dtype=float)
    increments = np.diff(np.concatenate(([0.0], phis)))
    return float(np.dot(tail, increments))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gauss_legendre(fn: ArrayFn, a: float, b: float) -> float:
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.dot(_GL_WEIGHTS, fn(mid + half * _GL_NODES)))


def adaptive_gauss_legendre(fn: ArrayFn, a: float, b: float, rtol: float = 1e-10,
                            max_depth: int = 40) -> float:
    """16-node Gauss-Legendre with bisection until halves agree to ``rtol``."""
    whole = _gauss_legendre(fn, a, b)

    def rec(a, b, whole, depth):
        m = 0.5 * (a + b)
        left, right = _gauss_legendre(fn, a, m), _gauss_legendre(fn, m, b)
        if depth >= max_depth or abs(left + right - whole) <= rtol * max(abs(left + right), 1e-300):
            return left + right
        return rec(a, m, left, depth + 1) + rec(m, b, right, depth + 1)

    if a == b:
        return 0.0
    return rec(a, b, whole, 0)


def alpha_phi2_integral(phi: PhiFunction, f: Density, delta: float) -> float:
    """``int_delta^inf alpha_f(t) Phi''(t) dt``, integrated segment by segment.

    ``alpha_f`` is linear between consecutive values of ``f`` and vanishes past
    ``max f``.  The standard generator (``Phi'' = 1/t``) is integrated in
    closed form; others go through adaptive Gauss-Legendre.
    """
    top = f.max
    if top <= delta:
        return 0.0
    pts = np.unique(np.concatenate(([delta, top], f.values[(f.values > delta) & (f.values < top)])))
    vals = alpha_many(f, pts)
    total = 0.0
    for a, b, va, vb in zip(pts[:-1], pts[1:], vals[:-1], vals[1:]):
        slope = (vb - va) / (b - a)
        intercept = va - slope * a
        if phi.kind == "standard":
            total += intercept * math.log(b / a) + slope * (b - a)
        else:
            total += adaptive_gauss_legendre(
                lambda t: (intercept + slope * t) * phi.d2phi(t), a, b)
    return total


@dataclass(frozen=True)
class EntropyReport:
    """``ok`` compares against :func:`sandwich_bound`; ``sharp_ok`` against
    :func:`sharp_sandwich_bound`."""

    ent: float
    layer_cake: float
    delta: float
    middle: float
    bound: float
    ok: bool
    sharp_bound: float
    sharp_ok: bool

    def as_dict(self) -> dict:
        return {
            "ent": self.ent,
            "layer_cake": self.layer_cake,
            "sandwich": {"delta": self.delta, "middle": self.middle,
                         "bound": self.bound, "ok": self.ok,
                         "sharp_bound": self.sharp_bound, "sharp_ok": self.sharp_ok},
        }


def _at(fn, x: float) -> float:
    return float(np.asarray(fn(np.array([x])))[0])


def sandwich_bound(phi: PhiFunction, delta: float) -> float:
    """``-2 max(Phi(delta), delta Phi'(delta))``, positive on ``(0, t_o)``.

    Only valid for small enough ``delta``: with ``f = 1`` and the standard
    generator the gap equals ``delta``, which exceeds this bound once
    ``delta > e^-1.5``.  :func:`sharp_sandwich_bound` holds on all of
    ``(0, t_o)``.
    """
    return -2.0 * max(_at(phi.phi, delta), delta * _at(phi.dphi, delta))


def sharp_sandwich_bound(phi: PhiFunction, delta: float) -> float:
    """``delta Phi'(delta) - Phi(delta)``.

    The gap equals ``int_0^delta xi({f >= u}) (Phi'(u) - Phi'(delta)) du``,
    whose integrand lies between ``Phi'(u) - Phi'(delta)`` and 0, so the gap
    lies in ``[Phi(delta) - delta Phi'(delta), 0]``; ``f = 1`` attains the
    lower end.
    """
    return delta * _at(phi.dphi, delta) - _at(phi.phi, delta)


def sandwich_check(phi: PhiFunction, f: Density, delta: float,
                   slack: float = 1e-9) -> EntropyReport:
    """Compare ``Ent(f)`` with ``int_delta^inf alpha_f Phi'' + Phi'(delta)``."""
    if not 0 < delta < phi.t_o:
        raise DeltaOutOfRange(f"delta must lie in (0, {phi.t_o}), got {delta!r}")
    e = ent(phi, f)
    middle = alpha_phi2_integral(phi, f, delta) + _at(phi.dphi, delta)
    bound = sandwich_bound(phi, delta)
    sharp = sharp_sandwich_bound(phi, delta)
    gap = abs(e - middle)
    return EntropyReport(e, ent_layer_cake(phi, f), delta, middle, bound,
                         bool(gap <= bound + slack), sharp, bool(gap <= sharp + slack))


def h_phi(phi: PhiFunction, rho: Density, A: Partition) -> float:
    """Entropy of the partition: ``Ent^Phi(E_A(rho))``."""
    _check_same_space(A.space, rho.space)
    return ent(phi, cond_exp(A, rho))


def pck_gap(f: Density, tol: float = EQ_TOL) -> tuple[float, float]:
    """``(||1 - f||_1, sqrt(2 Ent(f)))`` for the standard entropy.

    Raises AssertionError if the Pinsker-Csiszar-Kullback inequality fails,
    which would indicate a numerical defect.
    """
    lhs = f.space.l1_norm(1.0 - f.values)
    e = max(ent(_standard(), f), 0.0)
    rhs = math.sqrt(2.0 * e)
    if lhs > rhs + tol:
        raise AssertionError(f"PCK violated: {lhs!r} > {rhs!r}")
    return lhs, rhs


@dataclass(frozen=True)
class QuantBoundReport:
    lam: float
    max_gap: float
    h_plus: float
    h_min: float
    bound: float
    ok: bool

    def as_dict(self) -> dict:
        return {"lambda": self.lam, "max_gap": self.max_gap, "h_plus": self.h_plus,
                "h_min": self.h_min, "bound": self.bound, "ok": self.ok}


def quant_bound_check(rho: Density, A_plus: Partition, tail: Sequence[Partition],
                      slack: float = 1e-9, family: str = "all_events",
                      rng: np.random.Generator | None = None) -> QuantBoundReport:
    """Quantitative strong-convergence bound along a periodic tail.

    Checks ``max_n ||E_{A+} rho - E_{A_n} rho||_1 <=
    sqrt(2 (H(A+) - min_n H(A_n)))`` with the standard entropy, after
    certifying that ``A_plus`` is an upper Kudo-limit of the tail.
    """
    from .kudo import PartitionSequence, verify_sigma_membership

    if rho.min <= 0:
        raise UnboundedDensity("rho must be bounded away from zero")
    lam = max(rho.max, 1.0 / rho.min)
    seq = PartitionSequence(A_plus.space, (), tuple(tail))
    if not verify_sigma_membership(seq, A_plus, "upper", family=family, rng=rng):
        raise NotUpperLimit("A_plus is not an upper Kudo-limit of the tail")
    std = _standard()
    e_plus = cond_exp(A_plus, rho)
    gaps = [rho.space.l1_norm(e_plus.values - cond_exp(A, rho).values) for A in tail]
    h_plus = ent(std, e_plus)
    h_min = min(h_phi(std, rho, A) for A in tail)
    bound = math.sqrt(2.0 * max(h_plus - h_min, 0.0))
    max_gap = max(gaps)
    return QuantBoundReport(lam, max_gap, h_plus, h_min, bound, max_gap <= bound + slack)
