import numpy as np
import pytest

from sigma_entropy.entropy import builtin_phi, ent, h_phi
from sigma_entropy.errors import EmptyPeriod
from sigma_entropy.kudo import (
    PartitionSequence,
    constant_sequence,
    image_sequence,
    is_lower_limit_density,
    is_lower_limit_moments,
    is_upper_limit_density,
    is_upper_limit_moments,
    kudo_limits,
    projection_defect,
    random_sequence,
    semicontinuity_experiment,
    separating_density,
    strong_convergence_gap,
    verify_sigma_membership,
)
from sigma_entropy.measure_core import Density, make_density, random_bounded_density, random_density, random_space, uniform_space
from sigma_entropy.partitions import cond_exp, discrete_partition, from_blocks, join, meet, refines, trivial_partition
from sigma_entropy.verify import lattice_oracle


@pytest.fixture
def pq():
    sp = uniform_space(4)
    P = from_blocks(sp, [[0, 1], [2, 3]])
    Q = from_blocks(sp, [[0, 2], [1, 3]])
    return sp, P, Q


@pytest.fixture
def rho(pq):
    return make_density(pq[0], [1.5, 0.5, 1.25, 0.75])


def test_constant_sequence(pq):
    _, P, _ = pq
    lim = kudo_limits(constant_sequence(P))
    assert lim.A_plus == P and lim.A_minus == P and lim.converges


def test_alternating(pq):
    sp, P, Q = pq
    lim = kudo_limits(PartitionSequence(sp, (), (P, Q)))
    assert lim.A_plus == discrete_partition(sp)
    assert lim.A_minus == trivial_partition(sp)
    assert not lim.converges


def test_preperiod_ignored(pq):
    sp, _, _ = pq
    seq = PartitionSequence(sp, (discrete_partition(sp),), (trivial_partition(sp),))
    lim = kudo_limits(seq)
    assert lim.A_plus == lim.A_minus == trivial_partition(sp)
    assert seq[0] == discrete_partition(sp) and seq[5] == trivial_partition(sp)


def test_empty_period(pq):
    with pytest.raises(EmptyPeriod):
        PartitionSequence(pq[0], (pq[1],), ())


def test_membership_examples(pq):
    sp, P, Q = pq
    seq = PartitionSequence(sp, (), (P, Q))
    assert verify_sigma_membership(seq, join(P, Q), "upper")
    assert not verify_sigma_membership(seq, P, "upper")
    assert verify_sigma_membership(seq, trivial_partition(sp), "lower")
    assert not verify_sigma_membership(seq, P, "lower")


def test_membership_random_up_to_12_atoms():
    rng = np.random.default_rng(31)
    for _ in range(200):
        sp = random_space(rng, int(rng.integers(1, 13)))
        seq = random_sequence(rng, sp)
        lim = kudo_limits(seq)
        assert refines(lim.A_plus, lim.A_minus)
        assert verify_sigma_membership(seq, lim.A_plus, "upper")
        assert verify_sigma_membership(seq, lim.A_minus, "lower")


def test_lattice_oracle_small():
    rng = np.random.default_rng(41)
    for _ in range(25):
        sp = random_space(rng, int(rng.integers(1, 7)))
        seq = random_sequence(rng, sp)
        out = lattice_oracle(seq)
        lim = kudo_limits(seq)
        assert out["upper_min"] == lim.A_plus and out["lower_max"] == lim.A_minus


def test_density_limits_examples(pq, rho):
    sp, P, Q = pq
    period = [cond_exp(P, rho), cond_exp(Q, rho)]
    assert is_upper_limit_density(cond_exp(join(P, Q), rho), period)
    one = cond_exp(meet(P, Q), rho)
    np.testing.assert_allclose(one.values, 1.0)
    assert is_lower_limit_density(one, period)
    assert not is_upper_limit_density(one, period)
    assert is_upper_limit_density(rho, [rho]) and is_lower_limit_density(rho, [rho])


def test_moment_form_agrees():
    rng = np.random.default_rng(5)
    for _ in range(300):
        sp = random_space(rng, int(rng.integers(1, 8)))
        period = [random_density(rng, sp, zero_prob=0.2) for _ in range(int(rng.integers(1, 4)))]
        f = random_density(rng, sp, zero_prob=0.2)
        assert is_upper_limit_density(f, period) == is_upper_limit_moments(f, period)
        assert is_lower_limit_density(f, period) == is_lower_limit_moments(f, period)


def test_semicontinuity_example(pq, rho):
    sp, P, Q = pq
    std = builtin_phi("standard")
    rep = semicontinuity_experiment(std, rho, PartitionSequence(sp, (), (P, Q)))
    assert rep.h_minus == pytest.approx(0, abs=1e-15)
    assert rep.h_plus == pytest.approx(ent(std, rho), abs=1e-15)
    assert rep.h_minus <= rep.h_period_min <= rep.h_period_max <= rep.h_plus
    assert rep.ok


def test_semicontinuity_tight(pq, rho):
    sp, P, Q = pq
    J = join(P, Q)
    seq = PartitionSequence(sp, (), (P, J))
    assert kudo_limits(seq).A_plus == J
    rep = semicontinuity_experiment(builtin_phi("power(2)"), rho, seq)
    assert rep.h_period_max == rep.h_plus


def test_constant_semicontinuity(pq, rho):
    rep = semicontinuity_experiment(builtin_phi("standard"), rho, constant_sequence(pq[1]))
    assert rep.h_minus == rep.h_period_min == rep.h_period_max == rep.h_plus


def test_strong_convergence_gap(pq):
    sp, P, Q = pq
    f = np.array([1.0, 0.0, 0.0, 0.0])
    assert strong_convergence_gap(constant_sequence(P), f) == 0
    assert strong_convergence_gap(PartitionSequence(sp, (), (P, Q)), f) > 0
    assert strong_convergence_gap(constant_sequence(join(P, Q)), f) == 0


def test_projection_defect_random():
    rng = np.random.default_rng(2)
    for _ in range(100):
        sp = random_space(rng, int(rng.integers(1, 9)))
        seq = random_sequence(rng, sp)
        assert projection_defect(seq, rng.normal(size=sp.size)) <= 1e-10


def test_separating_density(pq):
    sp, P, Q = pq
    seq = PartitionSequence(sp, (), (P, Q))
    rho = separating_density(seq, P, "upper")
    assert rho is not None
    period = [cond_exp(A, rho) for A in seq.period]
    assert not is_upper_limit_density(cond_exp(P, rho), period)
    assert separating_density(seq, discrete_partition(sp), "upper") is None
    assert separating_density(seq, trivial_partition(sp), "lower") is None


def test_image_sequence_split(pq, rho):
    sp, P, Q = pq
    pre, per = image_sequence(PartitionSequence(sp, (P,), (Q,)), rho)
    assert len(pre) == 1 and len(per) == 1


def test_h_monotone_along_dictionary():
    rng = np.random.default_rng(6)
    std = builtin_phi("standard")
    for _ in range(50):
        sp = random_space(rng, int(rng.integers(2, 8)))
        seq = random_sequence(rng, sp)
        lim = kudo_limits(seq)
        r = random_bounded_density(rng, sp, 3.0)
        for A in seq.period:
            assert h_phi(std, r, lim.A_minus) <= h_phi(std, r, A) + 1e-12 <= h_phi(std, r, lim.A_plus) + 2e-12
