import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from aisets.channel import CanonicalChannel, ChannelDensity
from aisets.deterministic import (IntegerCodebook, ceil_sqrt, deterministic_output,
                                  expected_user2_gap, floor_products, images, integerize,
                                  mod_reduce, offset_entropies, offset_entropy_bound,
                                  offset_entropy_bound_total, offset_slack, paper_floor,
                                  write_outputs_csv)
from aisets.fitting import slope_fit


def rational_outputs(inputs, coeffs):
    """Independent oracle: exact rationals, truncated toward zero."""
    K, n = inputs.shape
    y = np.zeros((K, n), dtype=np.int64)
    for k in range(K):
        for t in range(n):
            acc = int(inputs[k, t])
            for i in range(k):
                acc += int(Fraction(float(coeffs[t, k, i])) * int(inputs[i, t]))
            y[k, t] = acc
    return y


# -- floor ------------------------------------------------------------------
def test_paper_floor_examples():
    assert paper_floor(2.7) == 2
    assert paper_floor(-0.3) == 0
    assert paper_floor(-3) == -3
    assert paper_floor(Fraction(-7, 2)) == -3
    np.testing.assert_array_equal(paper_floor([2.7, -0.3, -3.0, -4.5]), [2, 0, -3, -4])


@given(st.floats(-1e9, 1e9, allow_nan=False))
def test_paper_floor_is_truncation(x):
    f = paper_floor(x)
    assert abs(f) <= abs(x) and abs(x - f) < 1
    assert f == (math.floor(x) if x >= 0 else math.ceil(x))


def test_ceil_sqrt_exact():
    assert [ceil_sqrt(P) for P in (1, 2, 4, 99, 100, 101, 10 ** 8, 10 ** 16 + 1)] == \
        [1, 2, 2, 10, 10, 11, 10 ** 4, 10 ** 8 + 1]


# -- outputs ----------------------------------------------------------------
def test_output_examples():
    cb = IntegerCodebook.scalar([3, 0], [5, 4], P=36)
    g = CanonicalChannel.two_user([0.7])
    assert deterministic_output(cb, 0, g).values[1, 0] == 7
    assert deterministic_output(cb, 1, g).values[1, 0] == 4
    assert deterministic_output(cb, 0, g).values[0, 0] == 3


def test_kuser_matches_rational_oracle():
    rng = np.random.default_rng(11)
    P = 100
    for _ in range(200):
        inputs = rng.integers(0, ceil_sqrt(P) + 1, size=(5, 3, 2))
        inputs[:, 0, :] = np.arange(10).reshape(5, 2)          # distinct user-1 rows
        coeffs = np.zeros((2, 3, 3))
        low = np.tril_indices(3, -1)
        for t in range(2):
            # mix in rationals that put G x exactly on integers
            v = rng.uniform(0.25, 4, size=3)
            mask = rng.random(3) < 0.4
            v[mask] = rng.integers(1, 16, size=mask.sum()) / 4
            coeffs[t][low] = v
        cb = IntegerCodebook(P, inputs)
        ch = CanonicalChannel(coeffs, check=False)
        for m in range(cb.N):
            np.testing.assert_array_equal(deterministic_output(cb, m, ch).values,
                                          rational_outputs(inputs[m], coeffs))


def test_floor_boundary_stress():
    # products that are integers in exact arithmetic but not always in floats
    g = np.array([0.1, 0.3, 0.7, 1.1, 2.3, 0.35]) * 10
    x = np.arange(1, 2000)
    for gi in g / 10:
        got = floor_products(gi, x)
        want = [int(Fraction(float(gi)) * int(v)) for v in x]
        np.testing.assert_array_equal(got, want)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 31), P=st.sampled_from([4, 100, 1000]))
def test_image_cardinality_bound(seed, P):
    rng = np.random.default_rng(seed)
    Q = ceil_sqrt(P)
    x1 = np.arange(Q + 1)[:, None]
    cb = IntegerCodebook.two_user(x1, rng.integers(0, Q + 1, size=x1.shape), P)
    G = rng.uniform(0.25, 4)
    y2 = images(cb, CanonicalChannel.two_user([G]), users=[1])[:, 0, 0]
    assert y2.min() >= 0 and y2.max() <= (1 + 4) * (1 + Q)
    assert np.unique(y2).size <= (1 + G) * (1 + Q)


def test_codebook_validation_and_json():
    with pytest.raises(ValueError):
        IntegerCodebook.scalar([0, 11], [0, 0], P=100)
    with pytest.raises(ValueError):
        IntegerCodebook.scalar([1, 1], [0, 2], P=100)
    cb = IntegerCodebook.two_user([[0, 1], [2, 3]], [[4, 5], [6, 7]], P=49)
    back = IntegerCodebook.from_json(cb.to_json())
    np.testing.assert_array_equal(back.inputs, cb.inputs)
    assert set(cb.to_dict()) >= {"K", "n", "P", "rows", "mapping"}


def test_outputs_csv():
    cb = IntegerCodebook.scalar([3], [5], P=36)
    buf = io.StringIO()
    write_outputs_csv([deterministic_output(cb, 0, CanonicalChannel.two_user([0.7]))], buf)
    assert buf.getvalue().splitlines() == ["msg,t,k,value", "0,1,1,3", "0,1,2,7"]


# -- integerization ---------------------------------------------------------
def test_gap_examples():
    _, rep = integerize(np.zeros((2, 4)), 1.0)
    assert rep.user1_gap_bits == 2.0
    _, rep = integerize(np.zeros((2, 1)), 1.0)
    assert math.isclose(rep.user2_gap_bits, 0.5 * math.log2(5))
    assert abs(rep.user2_gap_bits - 1.1610) < 1e-4


def test_gap_quadrature():
    d = ChannelDensity.uniform(0.5, 1.5)
    _, rep = integerize(np.zeros((2, 1)), d)
    # closed form of int (1/2) log2((g+1)^2+1) dg via the antiderivative of log(u^2+1)
    F = lambda u: u * math.log(u * u + 1) - 2 * u + 2 * math.atan(u)
    exact = 0.5 * (F(2.5) - F(1.5)) / math.log(2)
    assert abs(rep.user2_gap_bits - exact) < 1e-10


def test_integerize_rejects_overpowered():
    with pytest.raises(ValueError):
        integerize(np.full((2, 2), 10.0), 1.0, P=10)


# -- modulo decomposition ---------------------------------------------------
def test_mod_examples():
    r = mod_reduce(-3, 100)
    assert (int(r.quotient), int(r.per_symbol), int(r.offset)) == (0, 7, -10)
    assert 0 * 10 - 10 * 1 + 7 == -3
    r = mod_reduce(23, 100)
    assert (int(r.per_symbol), int(r.offset)) == (3, 20)


@pytest.mark.parametrize("Q", [3, 7, 10])
def test_mod_exhaustive_small(Q):
    x = np.arange(-100, 101)
    r = mod_reduce(x, Q * Q)
    assert r.Q == Q and r.identity_ok
    np.testing.assert_array_equal(r.per_symbol + r.offset, x)
    assert r.per_symbol.min() >= 0 and r.per_symbol.max() <= Q - 1
    np.testing.assert_array_equal(r.offset % Q, 0)
    # the unconditional negative indicator only fails on negative multiples of Q
    literal = Q * r.quotient - Q * (x < 0) + r.per_symbol
    np.testing.assert_array_equal(literal != x, r.literal_sign_exceptions)


def test_offset_slack_range():
    rng = np.random.default_rng(2)
    P = 100
    x1 = rng.integers(-200, 200, size=5000)
    x2 = rng.integers(-200, 200, size=5000)
    g = rng.uniform(0.25, 4, size=5000)
    delta = offset_slack(x1, x2, g, P)
    # logged rather than assumed; the observed range is small and integer
    assert delta.dtype.kind == "i" and np.abs(delta).max() <= 2


def test_offset_bound_examples():
    assert abs(offset_entropy_bound(0.0, 1) - 9 / (math.e * math.log(2))) < 1e-12
    assert abs(offset_entropy_bound(0.0, 1) - 4.7767) < 1e-4
    assert abs(offset_entropy_bound_total(10) - 138.99) < 1e-2
    with pytest.raises(ValueError):
        offset_entropy_bound(1.5, 1)


def gaussian_integer_pmf(var, half_width):
    support = np.arange(-half_width, half_width + 1)
    w = stats.norm.pdf(support, scale=math.sqrt(var))
    return support, w / w.sum()


@pytest.mark.parametrize("n,p_t", [(1, 0.5), (4, 0.25), (8, 1.0)])
def test_offset_entropy_below_bound(n, p_t):
    for P in (1e2, 1e4, 1e6):
        var = n * P * p_t
        s, pmf = gaussian_integer_pmf(var, int(8 * math.sqrt(var)) + 1)
        H, _, m2 = offset_entropies(s, pmf, P)
        assert H <= offset_entropy_bound(min(1.0, m2 / (n * P)), n)


def test_offset_entropy_gap_is_sublogarithmic():
    Ps = [10.0 ** k for k in range(2, 9)]
    H = []
    for P in Ps:
        s, pmf = gaussian_integer_pmf(P, int(8 * math.sqrt(P)) + 1)
        H.append(offset_entropies(s, pmf, P)[0])
    assert slope_fit(Ps, H).slope < 0.02


def test_user2_gap_helper_matches_quad():
    d = ChannelDensity.truncated_gaussian(1.0, 0.2, 0.5, 1.5)
    q, _ = integrate.quad(lambda g: 0.5 * np.log2((g + 1) ** 2 + 1) * d.pdf(g), 0.5, 1.5)
    assert abs(expected_user2_gap(d) - q) < 1e-10
