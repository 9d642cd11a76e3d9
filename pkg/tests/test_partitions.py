import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sigma_entropy.errors import InvalidPartition, SpaceMismatch, TooLargeForExhaustive
from sigma_entropy.measure_core import make_density, random_density, random_space, uniform_space
from sigma_entropy.partitions import (
    all_partition_labels,
    all_partitions,
    cond_exp,
    cond_exp_norm,
    discrete_partition,
    from_blocks,
    from_labels,
    join,
    join_all,
    meet,
    meet_all,
    norm_dominates,
    random_partition,
    refines,
    sign_family,
    trivial_partition,
)

BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


@pytest.fixture
def four():
    return uniform_space(4)


def test_blocks_by_id_and_index(four):
    P = from_blocks(four, [["x1", "x2"], ["x3", "x4"]])
    Q = from_blocks(four, [[2, 3], [0, 1]])
    assert P == Q
    assert P.block_ids() == [["x1", "x2"], ["x3", "x4"]]


@pytest.mark.parametrize("blocks", [[[0, 1], [1, 2, 3]], [[0, 1], [2]], [[0, 1, 2, 3], []], [[0, 9]], [["x1", "nope"], [1, 2, 3]]])
def test_bad_blocks(four, blocks):
    with pytest.raises(InvalidPartition):
        from_blocks(four, blocks)


def test_lattice_examples(four):
    P = from_blocks(four, [[0, 1], [2, 3]])
    Q = from_blocks(four, [[0, 2], [1, 3]])
    assert join(P, Q) == discrete_partition(four)
    assert meet(P, Q) == trivial_partition(four)
    R = from_blocks(four, [[0, 1], [2], [3]])
    assert meet(P, R) == P and join(P, R) == R
    assert refines(R, P) and not refines(P, R)


def test_meet_is_transitive_closure():
    sp = uniform_space(5)
    P = from_blocks(sp, [[0, 1], [2, 3], [4]])
    Q = from_blocks(sp, [[1, 2], [0], [3], [4]])
    assert meet(P, Q) == from_blocks(sp, [[0, 1, 2, 3], [4]])


def test_lattice_laws_random():
    rng = np.random.default_rng(11)
    for _ in range(300):
        sp = random_space(rng, int(rng.integers(1, 9)))
        P, Q, R = (random_partition(rng, sp) for _ in range(3))
        assert join(P, Q) == join(Q, P) and meet(P, Q) == meet(Q, P)
        assert join(P, join(Q, R)) == join(join(P, Q), R)
        assert meet(P, meet(Q, R)) == meet(meet(P, Q), R)
        assert join(P, meet(P, Q)) == P and meet(P, join(P, Q)) == P
        assert refines(join(P, Q), P) and refines(P, meet(P, Q))
        assert join_all([P, Q, R]) == join(join(P, Q), R)
        assert meet_all([P, Q, R]) == meet(meet(P, Q), R)


def test_cond_exp_example(four):
    P = from_blocks(four, [[0, 1], [2, 3]])
    f = make_density(four, [1.5, 0.5, 1.25, 0.75])
    np.testing.assert_allclose(cond_exp(P, f).values, [1, 1, 1, 1])
    np.testing.assert_allclose(cond_exp(trivial_partition(four), [4.0, 0, 0, 0]), [1, 1, 1, 1])


def test_cond_exp_properties():
    rng = np.random.default_rng(3)
    for _ in range(300):
        sp = random_space(rng, int(rng.integers(1, 10)))
        A = random_partition(rng, sp)
        B = join(A, random_partition(rng, sp))  # sigma(A) in sigma(B)
        f = rng.normal(size=sp.size)
        e = cond_exp(A, f)
        np.testing.assert_allclose(cond_exp(A, e), e, atol=1e-13)
        assert sp.integral(e) == pytest.approx(sp.integral(f), abs=1e-12)
        assert sp.l1_norm(e) <= sp.l1_norm(f) + 1e-12
        np.testing.assert_allclose(cond_exp(A, cond_exp(B, f)), e, atol=1e-12)
        np.testing.assert_allclose(cond_exp(B, cond_exp(A, f)), e, atol=1e-12)
        batch = np.vstack([f, 2 * f])
        np.testing.assert_allclose(cond_exp(A, batch)[1], 2 * e, atol=1e-12)
        assert cond_exp_norm(A, f) == pytest.approx(sp.l1_norm(e), abs=1e-12)


def test_cond_exp_space_mismatch(four):
    with pytest.raises(SpaceMismatch):
        cond_exp(trivial_partition(four), [1.0, 1.0])


@pytest.mark.parametrize("n", range(0, 9))
def test_bell_numbers(n):
    assert len(all_partition_labels(n)) == BELL[n]


def test_all_partitions_distinct():
    sp = uniform_space(5)
    parts = list(all_partitions(sp))
    assert len(set(parts)) == 52


def test_sign_family_shape_and_cap():
    fam = sign_family(4)
    assert fam.shape == (8, 4) and np.all(fam[:, 0] == 1)
    assert len({tuple(r) for r in fam}) == 8
    with pytest.raises(TooLargeForExhaustive):
        sign_family(21)


def test_norm_test_equivalent_to_containment():
    # exhaustive over random pairs on up to 12 atoms
    rng = np.random.default_rng(17)
    for _ in range(300):
        sp = random_space(rng, int(rng.integers(1, 13)))
        A, B = random_partition(rng, sp), random_partition(rng, sp)
        if rng.random() < 0.3:
            B = join(A, B)
        assert norm_dominates(A, B) == refines(B, A)


def test_plain_indicators_would_not_separate(four):
    # every partition preserves the norm of a nonnegative function
    P = from_blocks(four, [[0, 1], [2, 3]])
    f = np.array([1.0, 0.0, 1.0, 0.0])
    assert cond_exp_norm(P, f) == pytest.approx(cond_exp_norm(discrete_partition(four), f))


def test_sampled_family_needs_rng(four):
    with pytest.raises(ValueError):
        norm_dominates(trivial_partition(four), discrete_partition(four), family="sampled")
    rng = np.random.default_rng(0)
    assert norm_dominates(trivial_partition(four), discrete_partition(four), family="sampled", rng=rng)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_labels_canonical(labels):
    sp = uniform_space(len(labels))
    P = from_labels(sp, labels)
    first = {}
    for i, lab in enumerate(labels):
        first.setdefault(lab, len(first))
    assert P.block_of.tolist() == [first[lab] for lab in labels]
