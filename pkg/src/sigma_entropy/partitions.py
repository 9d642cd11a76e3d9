"""Sub-sigma-algebras of a finite space, represented as set partitions.

On an atomic space with no null atoms every sub-sigma-algebra is generated by a
unique partition of the atoms, so lattice operations on sigma-algebras become
partition operations:

* ``join(P, Q)`` is the common refinement, generating ``sigma(P) v sigma(Q)``;
* ``meet(P, Q)`` is the finest partition generating ``sigma(P) ^ sigma(Q)``,
  i.e. the connected components of the "blocks overlap" relation.

Direction convention used throughout: ``refines(P, Q)`` means
``sigma(Q) ⊆ sigma(P)`` -- every block of ``Q`` is a union of blocks of ``P``.
The discrete partition refines everything; everything refines the trivial one.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .config import EQ_TOL
from .errors import InvalidPartition, SpaceMismatch, TooLargeForExhaustive
from .measure_core import Density, FiniteSpace, _check_same_space

MAX_EXHAUSTIVE_ATOMS = 20


def _canonical_labels(labels) -> np.ndarray:
    """Relabel so blocks are numbered by their smallest atom index."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.intp)
    rank[np.argsort(first)] = np.arange(len(first))
    out = rank[inverse.ravel()]
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Partition:
    """Partition of the atoms of ``space``; ``block_of[i]`` is atom i's block.

    Labels are canonical, so two partitions are equal exactly when they
    generate the same sigma-algebra.
    """

    space: FiniteSpace
    block_of: np.ndarray

    @property
    def n_blocks(self) -> int:
        return int(self.block_of.max()) + 1

    @property
    def blocks(self) -> tuple:
        return tuple(tuple(int(i) for i in np.flatnonzero(self.block_of == b))
                     for b in range(self.n_blocks))

    def block_ids(self) -> list:
        """Blocks as lists of atom labels (the JSON representation)."""
        ids = self.space.atom_ids
        return [[ids[i] for i in blk] for blk in self.blocks]

    def block_masses(self) -> np.ndarray:
        return np.bincount(self.block_of, weights=self.space.masses,
                           minlength=self.n_blocks)

    def key(self) -> bytes:
        return self.block_of.astype(np.int16).tobytes()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return self.space == other.space and np.array_equal(self.block_of, other.block_of)

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        return "Partition(" + "|".join(
            ",".join(str(i + 1) for i in blk) for blk in self.blocks) + ")"


def from_labels(space: FiniteSpace, labels) -> Partition:
    labels = np.asarray(labels)
    if labels.shape != (space.size,):
        raise InvalidPartition(f"expected {space.size} labels, got shape {labels.shape}")
    return Partition(space, _canonical_labels(labels))


def from_blocks(space: FiniteSpace, blocks: Iterable[Iterable]) -> Partition:
    """Build a partition from blocks of atom indices or atom labels."""
    labels = np.full(space.size, -1, dtype=np.intp)
    for b, block in enumerate(blocks):
        block = list(block)
        if not block:
            raise InvalidPartition("blocks must be nonempty")
        for atom in block:
            if isinstance(atom, (int, np.integer)):
                i = int(atom)
            else:
                try:
                    i = space.index(atom)
                except KeyError:
                    raise InvalidPartition(f"unknown atom {atom!r}") from None
            if not 0 <= i < space.size:
                raise InvalidPartition(f"atom index {i} out of range")
            if labels[i] != -1:
                raise InvalidPartition(f"atom {atom!r} appears in two blocks")
            labels[i] = b
    if np.any(labels == -1):
        missing = [space.atom_ids[i] for i in np.flatnonzero(labels == -1)]
        raise InvalidPartition(f"atoms not covered: {missing}")
    return from_labels(space, labels)


def trivial_partition(space: FiniteSpace) -> Partition:
    return from_labels(space, np.zeros(space.size, dtype=np.intp))


def discrete_partition(space: FiniteSpace) -> Partition:
    return from_labels(space, np.arange(space.size))


def _check(P: Partition, Q: Partition) -> None:
    _check_same_space(P.space, Q.space)


def join(P: Partition, Q: Partition) -> Partition:
    _check(P, Q)
    pair = P.block_of * Q.n_blocks + Q.block_of
    return from_labels(P.space, pair)


def meet(P: Partition, Q: Partition) -> Partition:
    _check(P, Q)
    # union-find over atoms; atoms sharing a P-block or a Q-block are linked
    parent = list(range(P.space.size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for labels in (P.block_of, Q.block_of):
        first = {}
        for i, b in enumerate(labels):
            b = int(b)
            if b in first:
                ri, rj = find(i), find(first[b])
                if ri != rj:
                    parent[ri] = rj
            else:
                first[b] = i
    return from_labels(P.space, [find(i) for i in range(P.space.size)])


def join_all(parts: Iterable[Partition]) -> Partition:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = join(out, p)
    return out


def meet_all(parts: Iterable[Partition]) -> Partition:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = meet(out, p)
    return out


def refines(P: Partition, Q: Partition) -> bool:
    """True iff ``sigma(Q) ⊆ sigma(P)``: each P-block sits inside one Q-block."""
    _check(P, Q)
    # Q-label must be constant on every P-block
    q_of_block = np.full(P.n_blocks, -1, dtype=np.intp)
    q_of_block[P.block_of] = Q.block_of
    return bool(np.array_equal(q_of_block[P.block_of], Q.block_of))


def cond_exp(A: Partition, f):
    """Conditional expectation ``E_A(f)`` as block averages.

    ``f`` is a :class:`Density` (a Density is returned) or any array of values
    on the atoms (an array is returned).
    """
    if isinstance(f, Density):
        _check_same_space(A.space, f.space)
        return Density(A.space, _cond_exp_values(A, f.values))
    values = np.asarray(f, dtype=float)
    if values.shape[-1] != A.space.size:
        raise SpaceMismatch(f"function has {values.shape[-1]} values, space has {A.space.size} atoms")
    return _cond_exp_values(A, values)


def _cond_exp_values(A: Partition, values: np.ndarray) -> np.ndarray:
    masses = A.space.masses
    nb = A.n_blocks
    if values.ndim == 1:
        sums = np.bincount(A.block_of, weights=masses * values, minlength=nb)
        return (sums / A.block_masses())[A.block_of]
    # batch: rows are functions
    onehot = np.zeros((A.space.size, nb))
    onehot[np.arange(A.space.size), A.block_of] = 1.0
    sums = (values * masses) @ onehot
    return (sums / A.block_masses())[:, A.block_of]


def cond_exp_norm(A: Partition, values: np.ndarray) -> np.ndarray:
    """``||E_A(f)||_1`` for each row ``f`` of ``values`` (or a single f)."""
    values = np.asarray(values, dtype=float)
    onehot = np.zeros((A.space.size, A.n_blocks))
    onehot[np.arange(A.space.size), A.block_of] = 1.0
    # ||E_A f||_1 = sum over blocks of |sum_{x in B} xi(x) f(x)|
    return np.abs((values * A.space.masses) @ onehot).sum(axis=-1)


def sign_family(n: int) -> np.ndarray:
    """All +-1 vectors on ``n`` atoms with the first entry fixed to +1.

    Row ``s`` is the signed indicator ``1_E - 1_{E^c}`` of an event ``E``
    containing atom 0; flipping the global sign does not change any norm, so
    this covers every event.
    """
    if n > MAX_EXHAUSTIVE_ATOMS:
        raise TooLargeForExhaustive(
            f"exhaustive event sweep needs n <= {MAX_EXHAUSTIVE_ATOMS}, got {n}")
    if n == 1:
        return np.ones((1, 1))
    codes = np.arange(2 ** (n - 1), dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n - 1)) & 1
    return np.hstack([np.ones((len(codes), 1)), 1.0 - 2.0 * bits])


def sampled_family(parts: Iterable[Partition], rng: np.random.Generator,
                   k: int = 64) -> np.ndarray:
    """Signed indicators of the blocks of ``join(parts)`` plus ``k`` random
    signed functions.  Incomplete: a pass is evidence, not a certificate."""
    J = join_all(parts)
    rows = [np.where(J.block_of == b, 1.0, -1.0) for b in range(J.n_blocks)]
    rows.extend(rng.normal(size=(k, J.space.size)))
    return np.array(rows)


def norm_test_family(space: FiniteSpace, mode: str = "all_events", parts=(),
                rng: np.random.Generator | None = None, k: int = 64) -> np.ndarray:
    if mode == "all_events":
        return sign_family(space.size)
    if mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs a seeded rng")
        parts = list(parts) or [discrete_partition(space)]
        return sampled_family(parts, rng, k)
    raise ValueError(f"unknown test family {mode!r}")


def norm_dominates(A: Partition, B: Partition, family: str = "all_events",
                   rng: np.random.Generator | None = None, k: int = 64,
                   tol: float = EQ_TOL) -> bool:
    """True iff ``||E_A f||_1 <= ||E_B f||_1`` for every f in the test family.

    With ``"all_events"`` the family is every signed event indicator, which
    certifies ``sigma(A) ⊆ sigma(B)``: if containment fails, some
    A-measurable event splits a B-block and its signed indicator loses norm
    under ``E_B`` but not under ``E_A``.
    """
    _check(A, B)
    fam = norm_test_family(A.space, family, (A, B), rng, k)
    return bool(np.all(cond_exp_norm(A, fam) <= cond_exp_norm(B, fam) + tol))


def random_partition(rng: np.random.Generator, space: FiniteSpace,
                     max_blocks: int | None = None) -> Partition:
    n = space.size
    nb = int(rng.integers(1, (max_blocks or n) + 1))
    return from_labels(space, rng.integers(0, nb, size=n))


@lru_cache(maxsize=None)
def _restricted_growth_strings(n: int) -> np.ndarray:
    out = []

    def rec(prefix, m):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for b in range(m + 2):
            rec(prefix + [b], max(m, b))

    if n == 0:
        return np.zeros((1, 0), dtype=np.intp)
    rec([0], 0)
    arr = np.array(out, dtype=np.intp)
    arr.setflags(write=False)
    return arr


def all_partition_labels(n: int) -> np.ndarray:
    """Canonical label vectors of every partition of ``n`` atoms (Bell(n) rows)."""
    return _restricted_growth_strings(n)


def all_partitions(space: FiniteSpace) -> Iterator[Partition]:
    for labels in all_partition_labels(space.size):
        yield Partition(space, labels)
