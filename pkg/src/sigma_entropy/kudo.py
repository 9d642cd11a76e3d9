"""Kudo upper/lower limits of eventually periodic partition sequences.

A sequence is stored as a finite preperiod followed by a period repeated
forever.  Every limit notion here is a tail property, so the preperiod is
ignored and ``limsup``/``liminf`` over the tail become ``max``/``min`` over the
period.

On a finite space with no null atoms the minimal upper Kudo-limit is the join
of the recurrent partitions and the maximal lower Kudo-limit is their meet:

* ``xi(B Δ B_n) -> 0`` forces ``B ∈ sigma(A_n)`` eventually (atom masses are
  bounded below), so the lower limit is the meet of the recurrent partitions;
* ``A`` is an upper limit iff ``max_n ||E_{A_n} f||_1 <= ||E_A f||_1`` for all
  ``f``, which by the norm characterization of containment means
  ``sigma(A_n) ⊆ sigma(A)`` for every recurrent ``A_n``; the least such ``A``
  is the join.

These formulas are not taken on faith: :func:`verify_sigma_membership` checks
the defining norm inequalities directly, and the test suite runs a brute-force
search over the whole partition lattice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import EQ_TOL
from .entropy import PhiFunction, h_phi
from .errors import EmptyPeriod, SpaceMismatch
from .measure_core import Density, FiniteSpace, _check_same_space, alpha_many
from .partitions import (
    Partition,
    cond_exp,
    cond_exp_norm,
    join_all,
    meet_all,
    norm_test_family,
    refines,
    trivial_partition,
)


@dataclass(frozen=True)
class PartitionSequence:
    space: FiniteSpace
    preperiod: tuple
    period: tuple

    def __post_init__(self):
        object.__setattr__(self, "preperiod", tuple(self.preperiod))
        object.__setattr__(self, "period", tuple(self.period))
        if not self.period:
            raise EmptyPeriod("the period of a sequence must be nonempty")
        for p in self.preperiod + self.period:
            _check_same_space(self.space, p.space)

    def __getitem__(self, n: int) -> Partition:
        if n < len(self.preperiod):
            return self.preperiod[n]
        return self.period[(n - len(self.preperiod)) % len(self.period)]

    @property
    def recurrent(self) -> tuple:
        """Distinct partitions occurring infinitely often, in period order."""
        seen, out = set(), []
        for p in self.period:
            if p not in seen:
                seen.add(p)
                out.append(p)
        return tuple(out)


@dataclass(frozen=True)
class KudoLimits:
    A_plus: Partition
    A_minus: Partition
    converges: bool


def kudo_limits(seq: PartitionSequence) -> KudoLimits:
    rec = seq.recurrent
    plus, minus = join_all(rec), meet_all(rec)
    return KudoLimits(plus, minus, plus == minus)


def _family(seq, A, family, rng, k):
    return norm_test_family(seq.space, family, list(seq.recurrent) + [A], rng, k)


def verify_sigma_membership(seq: PartitionSequence, A: Partition, side: str,
                            family: str = "all_events",
                            rng: np.random.Generator | None = None, k: int = 64,
                            tol: float = EQ_TOL) -> bool:
    """Check the defining norm inequality of an upper or lower Kudo-limit.

    ``side="upper"``: ``max_n ||E_{A_n} f||_1 <= ||E_A f||_1``;
    ``side="lower"``: ``||E_A f||_1 <= min_n ||E_{A_n} f||_1``, for every f in
    the test family (all signed event indicators by default).
    """
    _check_same_space(seq.space, A.space)
    fam = _family(seq, A, family, rng, k)
    seq_norms = np.array([cond_exp_norm(P, fam) for P in seq.recurrent])
    own = cond_exp_norm(A, fam)
    if side == "upper":
        return bool(np.all(seq_norms.max(axis=0) <= own + tol))
    if side == "lower":
        return bool(np.all(own <= seq_norms.min(axis=0) + tol))
    raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")


def _kink_grid(f: Density, period: Sequence[Density]) -> np.ndarray:
    vals = [f.values] + [g.values for g in period]
    return np.unique(np.concatenate(vals + [np.zeros(1)]))


def _check_densities(f: Density, period: Sequence[Density]) -> None:
    for g in period:
        if g.space is not f.space and g.space != f.space:
            raise SpaceMismatch("all densities must share one space")


def is_upper_limit_density(f: Density, period: Sequence[Density], preperiod=(),
                           tol: float = EQ_TOL) -> bool:
    """``limsup_n alpha_{f_n}(t) <= alpha_f(t)`` for all ``t >= 0``.

    All profiles are piecewise linear, so the comparison at ``t = 0`` and at
    every kink of every profile is exact.
    """
    _check_densities(f, list(preperiod) + list(period))
    ts = _kink_grid(f, period)
    upper = np.max([alpha_many(g, ts) for g in period], axis=0)
    return bool(np.all(upper <= alpha_many(f, ts) + tol))


def is_lower_limit_density(f: Density, period: Sequence[Density], preperiod=(),
                           tol: float = EQ_TOL) -> bool:
    """``alpha_f(t) <= liminf_n alpha_{f_n}(t)`` for all ``t >= 0``."""
    _check_densities(f, list(preperiod) + list(period))
    ts = _kink_grid(f, period)
    lower = np.min([alpha_many(g, ts) for g in period], axis=0)
    return bool(np.all(alpha_many(f, ts) <= lower + tol))


def _abs_moments(f: Density, ts: np.ndarray) -> np.ndarray:
    return np.abs(f.values[None, :] - ts[:, None]) @ f.space.masses


def is_upper_limit_moments(f: Density, period: Sequence[Density],
                           tol: float = EQ_TOL) -> bool:
    """Same question as :func:`is_upper_limit_density`, phrased through the
    absolute moments ``int |f - t| dxi`` (valid when all means agree)."""
    ts = _kink_grid(f, period)
    upper = np.max([_abs_moments(g, ts) for g in period], axis=0)
    return bool(np.all(upper <= _abs_moments(f, ts) + 2 * tol))


def is_lower_limit_moments(f: Density, period: Sequence[Density],
                           tol: float = EQ_TOL) -> bool:
    ts = _kink_grid(f, period)
    lower = np.min([_abs_moments(g, ts) for g in period], axis=0)
    return bool(np.all(_abs_moments(f, ts) <= lower + 2 * tol))


def image_sequence(seq: PartitionSequence, rho: Density) -> tuple[list, list]:
    """``(E_{A_n} rho)`` split into preperiod and period."""
    return ([cond_exp(A, rho) for A in seq.preperiod],
            [cond_exp(A, rho) for A in seq.period])


@dataclass(frozen=True)
class SemicontinuityReport:
    h_minus: float
    h_period_min: float
    h_period_max: float
    h_plus: float
    lower_ok: bool
    upper_ok: bool

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok

    def as_dict(self) -> dict:
        return {"h_minus": self.h_minus, "h_period_min": self.h_period_min,
                "h_period_max": self.h_period_max, "h_plus": self.h_plus,
                "lower_ok": self.lower_ok, "upper_ok": self.upper_ok}


def semicontinuity_experiment(phi: PhiFunction, rho: Density, seq: PartitionSequence,
                              slack: float = 1e-10) -> SemicontinuityReport:
    """``H(A-) <= min_n H(A_n)`` and ``max_n H(A_n) <= H(A+)`` along the period."""
    lim = kudo_limits(seq)
    hs = [h_phi(phi, rho, A) for A in seq.period]
    h_minus = h_phi(phi, rho, lim.A_minus)
    h_plus = h_phi(phi, rho, lim.A_plus)
    lo, hi = min(hs), max(hs)
    return SemicontinuityReport(h_minus, lo, hi, h_plus,
                                h_minus <= lo + slack, hi <= h_plus + slack)


def strong_convergence_gap(seq: PartitionSequence, f) -> float:
    """``max_n ||E_{A+} f - E_{A_n} f||_1`` over the period."""
    values = f.values if isinstance(f, Density) else np.asarray(f, dtype=float)
    lim = kudo_limits(seq)
    top = cond_exp(lim.A_plus, values)
    return max(seq.space.l1_norm(top - cond_exp(A, values)) for A in seq.period)


def projection_defect(seq: PartitionSequence, phi_values, A: Partition | None = None) -> float:
    """``max_n ||E_{A_n} phi - E_{A_n} E_A phi||_1``; vanishes when A is an
    upper Kudo-limit (``A`` defaults to the minimal one)."""
    A = A or kudo_limits(seq).A_plus
    phi_values = np.asarray(phi_values, dtype=float)
    proj = cond_exp(A, phi_values)
    return max(seq.space.l1_norm(cond_exp(B, phi_values) - cond_exp(B, proj))
               for B in seq.period)


def separating_density(seq: PartitionSequence, C: Partition, side: str,
                       eps: float = 0.5) -> Density | None:
    """A bounded density witnessing that ``C`` is *not* an upper (lower) limit.

    For ``side="upper"``: if some recurrent ``B`` has an event ``S`` outside
    ``sigma(C)``, take ``rho = 1 + eps (1_S - xi(S))``.  Then
    ``alpha_{E_B rho}(1) > alpha_{E_C rho}(1)`` by strict Jensen on a C-block
    that ``S`` splits, so ``E_C rho`` is not an upper limit.  The lower case
    swaps the roles of ``B`` and ``C``.  Returns ``None`` when ``C`` is a
    genuine limit of that side.
    """
    space = seq.space
    for B in seq.recurrent:
        if side == "upper":
            fine, coarse = B, C
        elif side == "lower":
            fine, coarse = C, B
        else:
            raise ValueError(f"side must be 'upper' or 'lower', got {side!r}")
        if refines(coarse, fine):
            continue
        # a block of `fine` that is split by `coarse` is an event outside sigma(coarse)
        for blk in range(fine.n_blocks):
            S = fine.block_of == blk
            labels = coarse.block_of
            if any(np.any(S[labels == c]) and np.any(~S[labels == c])
                   for c in np.unique(labels[S])):
                g = S.astype(float) - space.integral(S.astype(float))
                return Density(space, 1.0 + eps * g)
    return None


def random_sequence(rng: np.random.Generator, space: FiniteSpace,
                    max_preperiod: int = 2, max_period: int = 4) -> PartitionSequence:
    from .partitions import random_partition

    pre = [random_partition(rng, space) for _ in range(int(rng.integers(0, max_preperiod + 1)))]
    per = [random_partition(rng, space) for _ in range(int(rng.integers(1, max_period + 1)))]
    return PartitionSequence(space, pre, per)


def constant_sequence(P: Partition) -> PartitionSequence:
    return PartitionSequence(P.space, (), (P,))


def trivial_sequence(space: FiniteSpace) -> PartitionSequence:
    return constant_sequence(trivial_partition(space))
