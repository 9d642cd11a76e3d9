import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from sigma_entropy.errors import (
    DuplicateAtom,
    InvalidDensity,
    MassSumMismatch,
    NegativeThreshold,
    NonPositiveMass,
    SpaceMismatch,
)
from sigma_entropy.measure_core import (
    Density,
    abs_moment,
    alpha,
    alpha_many,
    dominates_second_order,
    make_density,
    make_space,
    random_bounded_density,
    random_density,
    random_space,
    survival_profile,
    uniform_space,
)


@pytest.fixture
def two():
    return make_space(["a", "b"], ["1/2", "1/2"])


def test_fraction_masses_are_exact(two):
    assert two.masses.tolist() == [0.5, 0.5]


@pytest.mark.parametrize("atoms,masses,err", [
    (["a", "a"], [0.5, 0.5], DuplicateAtom),
    (["a", "b"], [1.0, 0.0], NonPositiveMass),
    (["a", "b"], [0.6, 0.6], MassSumMismatch),
    ([], [], MassSumMismatch),
])
def test_make_space_rejects(atoms, masses, err):
    with pytest.raises(err):
        make_space(atoms, masses)


def test_normalize_flag():
    sp = make_space(["a", "b"], [1, 3], normalize=True)
    assert sp.masses.tolist() == [0.25, 0.75]


def test_density_validation(two):
    with pytest.raises(InvalidDensity):
        make_density(two, [1.5, 0.6])
    with pytest.raises(InvalidDensity):
        make_density(two, [2.5, -0.5])
    with pytest.raises(InvalidDensity):
        make_density(two, [1.0])


def test_density_is_read_only(two):
    f = make_density(two, [1.5, 0.5])
    with pytest.raises(ValueError):
        f.values[0] = 3.0


@pytest.mark.parametrize("t,expected", [(0.0, 1.0), (0.5, 0.5), (1.0, 0.25), (1.5, 0.0), (7.0, 0.0)])
def test_alpha_examples(two, t, expected):
    f = make_density(two, [1.5, 0.5])
    assert alpha(f, t) == pytest.approx(expected, abs=1e-15)


def test_alpha_negative_threshold(two):
    with pytest.raises(NegativeThreshold):
        alpha(make_density(two, [1.5, 0.5]), -0.1)


def test_alpha_matches_quadrature_oracle():
    # alpha_f(t) = int_t^inf xi(f >= u) du, integrated numerically
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        sp = random_space(rng, int(rng.integers(1, 12)))
        f = random_density(rng, sp, zero_prob=0.2)
        t = float(rng.uniform(0, f.max * 1.1))
        pts = sorted(set(f.values.tolist()) | {t})
        pts = [p for p in pts if p >= t]
        tail = lambda u: float(sp.masses[f.values >= u].sum())
        oracle = sum(quad(tail, a, b)[0] for a, b in zip(pts[:-1], pts[1:]))
        assert alpha(f, t) == pytest.approx(oracle, abs=1e-8)


def test_profile_is_piecewise_linear():
    rng = np.random.default_rng(5)
    sp = random_space(rng, 9)
    f = random_density(rng, sp)
    prof = survival_profile(f)
    ts = np.linspace(0, f.max * 1.2, 401)
    np.testing.assert_allclose(prof(ts), alpha_many(f, ts), atol=1e-14)
    assert prof.knots[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=20),
       st.lists(st.floats(0.0, 5.0), min_size=20, max_size=20),
       st.floats(0.0, 6.0))
def test_abs_moment_identity(masses, raw, t):
    sp = make_space([str(i) for i in range(len(masses))], masses, normalize=True)
    v = np.array(raw[: sp.size])
    if sp.integral(v) <= 0:
        return
    f = Density(sp, v / sp.integral(v))
    lhs = abs_moment(f, t)
    assert lhs == pytest.approx(2 * alpha(f, t) - 1 + t, abs=1e-10)


def test_dominance_examples(two):
    flat = make_density(two, [1.0, 1.0])
    spread = make_density(two, [1.5, 0.5])
    # argument order: alpha of the first never exceeds alpha of the second
    assert dominates_second_order(flat, spread)
    assert not dominates_second_order(spread, flat)
    assert dominates_second_order(spread, spread)


def test_dominance_needs_same_space(two):
    other = uniform_space(2)
    with pytest.raises(SpaceMismatch):
        dominates_second_order(make_density(two, [1, 1]), make_density(other, [1, 1]))


def test_bounded_density_box():
    rng = np.random.default_rng(0)
    for lam in (1.5, 2.0, 4.0):
        for _ in range(200):
            f = random_bounded_density(rng, random_space(rng, 6), lam)
            assert f.min >= 1 / lam - 1e-12 and f.max <= lam + 1e-12
            assert f.space.integral(f.values) == pytest.approx(1.0, abs=1e-12)


def test_uniform_space_mass():
    sp = uniform_space(7)
    assert math.isclose(sp.masses.sum(), 1.0)
