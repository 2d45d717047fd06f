import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aisets.aligned import (InstanceTooLargeError, MalformedMappingError, PairTable,
                            alignment_slope, analytic_expected_size_bound,
                            build_kuser_mapping, exact_pairwise_alignment_probability,
                            expected_set_size, harmonic, kuser_alignment_test,
                            log2_analytic_expected_size_bound, min_max_images,
                            pairwise_alignment_probability_bound, partition_into_aligned_sets,
                            toy_distinct_images)
from aisets.channel import CanonicalChannel, ChannelDensity
from aisets.deterministic import IntegerCodebook, deterministic_output, images
from aisets.piecewise import breakpoints, cells, floor_difference_distribution

U = ChannelDensity.uniform(0.5, 1.5)


# -- partition --------------------------------------------------------------
def test_singleton_partition():
    cb = IntegerCodebook.scalar([4], [1], P=100)
    sets = partition_into_aligned_sets(cb, CanonicalChannel.two_user([1.3]))
    assert len(sets) == 1 and len(sets[0]) == 1


def test_partition_examples():
    cb = IntegerCodebook.scalar([0, 1, 2], [2, 1, 0], P=4)
    sets = partition_into_aligned_sets(cb, CanonicalChannel.two_user([1.0]))
    assert [(s.members, s.image) for s in sets] == [((0, 1, 2), (2,))]
    sets = partition_into_aligned_sets(cb, CanonicalChannel.two_user([2.0]))
    assert sorted(s.image for s in sets) == [(2,), (3,), (4,)]
    assert all(len(s) == 1 for s in sets)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31), n=st.integers(1, 3))
def test_partition_property(seed, n):
    rng = np.random.default_rng(seed)
    P = 49
    flat = rng.choice(8 ** n, size=min(12, 8 ** n), replace=False)
    x1 = np.stack(np.unravel_index(flat, (8,) * n), axis=1)
    cb = IntegerCodebook.two_user(x1, rng.integers(0, 8, size=x1.shape), P)
    g = CanonicalChannel.two_user(rng.uniform(0.25, 4, size=n))
    sets = partition_into_aligned_sets(cb, g)
    members = sorted(m for s in sets for m in s.members)
    assert members == list(range(cb.N))
    img = images(cb, g, users=[1])[:, 0, :]
    for s in sets:
        assert all(tuple(img[m]) == s.image for m in s.members)
    assert len({s.image for s in sets}) == len(sets)


# -- pairwise bound ---------------------------------------------------------
def test_pairwise_bound_examples():
    d = ChannelDensity.uniform(0.5, 1.5)           # f_max = 1
    assert pairwise_alignment_probability_bound([4], [0], [0], [0], d).bound == 0.5
    b = pairwise_alignment_probability_bound([4, 10], [0, 0], [0, 0], [0, 0], d)
    assert math.isclose(b.bound, 0.1)
    assert len(b.intervals) == 2
    same = pairwise_alignment_probability_bound([3, 3], [3, 3], [1, 2], [1, 2], d)
    assert same.bound == 1.0 and same.intervals == []


def test_exact_pair_example():
    p = exact_pairwise_alignment_probability([2], [0], [0], [1], U)
    assert math.isclose(p, 0.5)
    assert math.isclose(U.interval_probability(0.5, 1.0), p)
    assert p <= pairwise_alignment_probability_bound([2], [0], [0], [1], U).bound


def test_intervals_contain_every_aligning_gain():
    rng = np.random.default_rng(5)
    for _ in range(300):
        x, nu = rng.integers(0, 11, size=2)
        if x == nu:
            continue
        c1, c2 = rng.integers(0, 11, size=2)
        (t, lo, hi), = pairwise_alignment_probability_bound([x], [nu], [c1], [c2], U).intervals
        assert math.isclose(hi - lo, 2 / abs(x - nu))
        for G in rng.uniform(0.25, 4, size=200):
            if math.trunc(G * x) + c1 == math.trunc(G * nu) + c2:
                assert lo < G < hi


@settings(max_examples=150, deadline=None)
@given(xa=st.integers(0, 100), xb=st.integers(0, 100), c=st.integers(-50, 50),
       lo=st.floats(0.25, 3.0), w=st.floats(0.05, 1.0), fam=st.sampled_from(["u", "tg"]))
def test_exact_never_exceeds_bound(xa, xb, c, lo, w, fam):
    hi = min(4.0, lo + w)
    d = (ChannelDensity.uniform(lo, hi) if fam == "u"
         else ChannelDensity.truncated_gaussian((lo + hi) / 2, w / 3, lo, hi))
    p = exact_pairwise_alignment_probability([xa], [xb], [0], [c], d)
    b = pairwise_alignment_probability_bound([xa], [xb], [0], [c], d).bound
    assert p <= b * (1 + 1e-12) + 1e-15


def test_floor_difference_law_matches_sampling():
    rng = np.random.default_rng(9)
    law = floor_difference_distribution(7, 3, U)
    assert math.isclose(sum(law.values()), 1.0)
    g = U.sample(rng, 400_000)
    emp = np.trunc(7 * g) - np.trunc(3 * g)
    for k, p in law.items():
        assert abs(np.mean(emp == k) - p) < 4 * math.sqrt(p * (1 - p) / g.size) + 1e-12


def test_cells_are_constancy_intervals():
    xs = np.array([0, 3, 7, 10])
    edges, w, mids = cells(xs, U)
    assert math.isclose(w.sum(), 1.0)
    rng = np.random.default_rng(0)
    for a, b in zip(edges[:-1], edges[1:]):
        g = rng.uniform(a, b, size=50)
        f = np.trunc(np.outer(g, xs))
        assert np.all(f == f[0])
    assert np.all(np.diff(breakpoints(xs, 0.5, 1.5)) > 0)


# -- expected size ----------------------------------------------------------
def test_harmonic_bound_example():
    assert math.isclose(harmonic(10), 7381 / 2520)
    assert abs(analytic_expected_size_bound(1, 100, 1.0) - 14.7159) < 1e-4
    for n in (1, 3, 50):
        assert math.isclose(log2_analytic_expected_size_bound(n, 1e4, 2.0),
                            math.log2(analytic_expected_size_bound(n, 1e4, 2.0)))


def test_singleton_expected_size():
    cb = IntegerCodebook.scalar([3], [0], P=100)
    rep = expected_set_size(cb, U, 100, np.random.default_rng(0))
    assert rep.empirical_expected_size == 1.0 and rep.exact_expected_size == 1.0
    assert not rep.falsified


def test_expected_size_exact_vs_monte_carlo():
    cb = IntegerCodebook.scalar(range(11), [0] * 11, P=100)
    rep = expected_set_size(cb, U, 100_000, np.random.default_rng(1))
    assert abs(rep.empirical_expected_size - rep.exact_expected_size) < 3 * rep.empirical_stderr
    assert rep.empirical_expected_size <= rep.analytic_bound
    assert not rep.falsified


def test_expected_size_budget():
    cb = IntegerCodebook.scalar(range(11), [0] * 11, P=100)
    with pytest.raises(InstanceTooLargeError):
        expected_set_size(cb, U, 10 ** 6, np.random.default_rng(0), budget=10 ** 5)


def test_pair_table_matches_direct():
    rng = np.random.default_rng(4)
    x1 = np.array([[0, 1], [3, 2], [5, 5], [7, 1]])
    x2 = rng.integers(0, 8, size=x1.shape)
    t = PairTable(x1, U)
    for a, b in itertools.combinations(range(4), 2):
        assert math.isclose(t.probability(a, b, x2),
                            exact_pairwise_alignment_probability(x1[a], x1[b], x2[a], x2[b], U),
                            abs_tol=1e-15)


# -- K users ----------------------------------------------------------------
def test_kuser_example_jstar_and_width():
    g = CanonicalChannel.from_lower(3, {(1, 0): [1.2], (2, 0): [0.7], (2, 1): [1.3]})
    x = np.array([[1], [0], [2]])
    xp = np.array([[3], [5], [1]])
    y = tuple(images(IntegerCodebook(25, x[None]), g, users=[1])[0, 0])
    yp = tuple(images(IntegerCodebook(25, xp[None]), g, users=[1])[0, 0])
    res = kuser_alignment_test(y, yp, {y: x, yp: xp}, g, 2)
    assert res.j_star[0] == 1                  # second user, 0-based
    assert math.isclose(res.widths[0], 2 / 5)


def test_kuser_two_users_specializes():
    rng = np.random.default_rng(8)
    for _ in range(100):
        cb = IntegerCodebook.two_user(rng.choice(11, size=(6, 1), replace=False),
                                      rng.integers(0, 11, size=(6, 1)), 100)
        g = CanonicalChannel.two_user([rng.uniform(0.5, 2)])
        mapping = build_kuser_mapping(cb, g, 1)
        img = images(cb, g)
        for a, b in itertools.combinations(range(cb.N), 2):
            res = kuser_alignment_test(img[a, 0], img[b, 0], mapping, g, 1)
            assert res.aligned == bool(np.all(img[a, 1] == img[b, 1]))
            assert res.j_star[0] == 0
            assert math.isclose(res.widths[0], 2 / abs(int(cb.inputs[a, 0, 0]) - int(cb.inputs[b, 0, 0])))


def test_kuser_three_users_matches_outputs():
    rng = np.random.default_rng(12)
    d = ChannelDensity.uniform(0.5, 2)
    for _ in range(50):
        n = int(rng.integers(1, 3))
        inputs = rng.integers(0, 8, size=(8, 3, n))
        flat = rng.choice(8 ** n, 8, replace=False)
        inputs[:, 0, :] = np.stack(np.unravel_index(flat, (8,) * n), axis=1)
        cb = IntegerCodebook(49, inputs)
        g = CanonicalChannel.sample(3, n, [None, d, d], rng)
        mapping = build_kuser_mapping(cb, g, 2)
        reps = {}
        for m in range(cb.N):
            y = tuple(deterministic_output(cb, m, g).values[1])
            reps.setdefault(y, m)
        keys = list(reps)
        for a, b in itertools.combinations(keys, 2):
            res = kuser_alignment_test(a, b, mapping, g, 2)
            ya = deterministic_output(cb, reps[a], g).values[2]
            yb = deterministic_output(cb, reps[b], g).values[2]
            assert res.aligned == bool(np.all(ya == yb))


def test_kuser_malformed_mapping():
    g = CanonicalChannel.from_lower(3, {(1, 0): [1.2], (2, 0): [0.7], (2, 1): [1.3]})
    with pytest.raises(MalformedMappingError):
        kuser_alignment_test((1,), (2,), {(1,): np.array([[1], [0], [0]])}, g, 2)


# -- toy --------------------------------------------------------------------
def test_toy_example():
    rep = toy_distinct_images([(0, 2), (1, 1), (2, 0)], [1, 2])
    assert rep.counts == {1: 1, 2: 3}
    assert rep.separated and rep.pigeonhole_ok


def test_single_slope():
    assert alignment_slope((0, 2), (1, 1)) == Fraction(1)
    assert alignment_slope((1, 3), (1, 5)) is None
    rng = np.random.default_rng(6)
    for _ in range(200):
        a, b = tuple(rng.integers(0, 9, 2)), tuple(rng.integers(0, 9, 2))
        s = alignment_slope(a, b)
        if s is None:
            continue
        for G in (s, s + Fraction(1, 7), s - Fraction(3, 11)):
            assert (G * a[0] + a[1] == G * b[0] + b[1]) == (G == s)


def test_min_max_small_instance():
    # four codewords, two channels: some channel always sees at least two images
    res = min_max_images(range(4), range(4), [1, 2])
    assert res.value >= 2
    rep = toy_distinct_images(list(zip(range(4), res.witness)), [1, 2])
    assert rep.max_images == res.value
