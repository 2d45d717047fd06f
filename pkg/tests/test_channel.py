import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from aisets.channel import (CanonicalChannel, ChannelBoundError, ChannelDensity, CsitState,
                            DegenerateChannelError, DegenerateDensityError, GeneralChannel2x2,
                            PrecisionExhaustedError, UserCsit, build_quantized_posterior,
                            canonical_power, feedback_bits, interval_probability,
                            reduce_to_canonical)


def admissible_general(rng, M, n=1):
    """Rejection-sample channels whose entries and determinant lie in [1/M, M]."""
    out = []
    while len(out) < n:
        G = rng.uniform(1 / M, M, size=(2, 2)) * rng.choice([-1, 1], size=(2, 2))
        det = abs(np.linalg.det(G))
        if 1 / M <= det <= M:
            out.append(G)
    return np.stack(out)


# -- reduction --------------------------------------------------------------
def test_identity_channel_rejected():
    with pytest.raises(ChannelBoundError):
        reduce_to_canonical(GeneralChannel2x2(np.array([[1.0, 0.0], [0.0, 1.0]]), M=2, P_tilde=1))


def test_unit_det_example():
    can, tr = reduce_to_canonical(GeneralChannel2x2(np.array([[1.0, 1.0], [1.0, 2.0]]), 2, 1))
    assert can.gain(1, 0)[0] == 1.0
    assert can.P == 24.0
    assert can.M == 4.0


def test_degenerate_determinant():
    # every entry admissible but the rows are nearly parallel
    G = np.array([[1.0, 1.0], [1.0, 1.01]])
    with pytest.raises(DegenerateChannelError):
        reduce_to_canonical(GeneralChannel2x2(G, M=2))


def test_round_trip_and_power_chain():
    rng = np.random.default_rng(7)
    M, Pt = 2.0, 3.0
    for _ in range(1000):
        G = admissible_general(rng, M)
        can, tr = reduce_to_canonical(GeneralChannel2x2(G, M, Pt))
        g = abs(can.gain(1, 0)[0])
        assert 1 / M ** 2 < g < M ** 2
        xt = rng.normal(size=(2, 1))
        xt *= math.sqrt(Pt) * rng.random() / np.linalg.norm(xt)
        x = tr.forward(xt)
        np.testing.assert_allclose(tr.inverse(x), xt, rtol=0, atol=1e-12)
        assert np.sum(x ** 2) <= (2 * M ** 2 + M ** 4) * np.sum(xt ** 2) * (1 + 1e-12)
        # noise-free outputs are preserved: user 1 sees X1, user 2 sees G X1 + X2
        y = G[0] @ xt
        np.testing.assert_allclose(y[0], x[0], atol=1e-12)
        np.testing.assert_allclose(y[1], can.gain(1, 0) * x[0] + x[1], atol=1e-12)


def test_canonical_power():
    assert canonical_power(1.0, 2.0) == 24.0


def test_canonical_rejects_upper_entries():
    c = np.zeros((1, 2, 2))
    c[0, 0, 1] = 1.0
    with pytest.raises(ValueError):
        CanonicalChannel(c)


def test_canonical_bound():
    with pytest.raises(ChannelBoundError):
        CanonicalChannel.two_user([5.0], M=4)
    assert CanonicalChannel.two_user([5.0], M=4, check=False).gain(1, 1)[0] == 1.0


def test_kuser_matrix_is_unit_lower():
    rng = np.random.default_rng(0)
    d = ChannelDensity.uniform(0.5, 2)
    ch = CanonicalChannel.sample(3, 4, [None, d, d], rng)
    m = ch.matrix(2)
    assert np.all(np.diag(m) == 1) and np.all(np.triu(m, 1) == 0)


# -- densities --------------------------------------------------------------
def test_uniform_interval_examples():
    d = ChannelDensity.uniform(0.5, 1.5)
    assert interval_probability(d, 0.5, 1.0) == 0.5
    assert interval_probability(d, 2, 3) == 0.0


def test_truncated_gaussian_interval_vs_quadrature_and_mc():
    d = ChannelDensity.truncated_gaussian(1.0, 0.2, 0.5, 1.5)
    p = interval_probability(d, 0.9, 1.1)
    q, _ = integrate.quad(d.pdf, 0.9, 1.1, epsabs=1e-14)
    assert abs(p - q) < 1e-12
    rng = np.random.default_rng(3)
    n = 10_000_000
    hits = np.count_nonzero(np.abs(d.sample(rng, n) - 1.0) <= 0.1)
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)


@pytest.mark.parametrize("d", [
    ChannelDensity.uniform(0.5, 1.5),
    ChannelDensity.truncated_gaussian(1.0, 0.2, 0.5, 1.5),
    ChannelDensity.truncated_gaussian(0.3, 0.05, 0.25, 4.0),
])
def test_density_integrates_to_one(d):
    q, _ = integrate.quad(d.pdf, d.lo, d.hi, points=[d.mean] if d.mean else None,
                          epsabs=1e-14, epsrel=1e-12, limit=200)
    assert abs(q - 1) < 1e-9
    grid = np.linspace(d.lo, d.hi, 20001)
    assert d.pdf(grid).max() <= d.f_max * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(lo=st.floats(0, 2), w=st.floats(0, 2),
       mean=st.floats(0.3, 3.5), std=st.floats(0.01, 2))
def test_interval_probability_below_fmax_times_length(lo, w, mean, std):
    for d in (ChannelDensity.uniform(0.25, 4), ChannelDensity.uniform(0.9, 1.1),
              ChannelDensity.truncated_gaussian(mean, std, 0.25, 4)):
        p = interval_probability(d, lo, lo + w)
        assert 0 <= p <= 1
        assert p <= d.peak * w * (1 + 1e-9) + 1e-15


def test_atomic_laws_rejected():
    with pytest.raises(DegenerateDensityError):
        ChannelDensity("finite_state", 1.0, 2.0)
    with pytest.raises(DegenerateDensityError):
        ChannelDensity.uniform(1.0, 1.0)
    with pytest.raises(DegenerateDensityError):
        ChannelDensity.from_spec({"family": "finite_state", "states": [0.5, 2.0]})


def test_fmax_witness_checked():
    ChannelDensity.uniform(1.0, 1.5, alpha=0.5, P=100, C=2.0)
    with pytest.raises(ValueError):
        ChannelDensity.uniform(1.0, 1.01, alpha=0.5, P=100, C=2.0)


def test_scaled_uniform_peak():
    for P in (1e2, 1e4, 1e8):
        d = ChannelDensity.scaled_uniform(1.0, 0.5, P)
        assert math.isclose(d.f_max, P ** 0.25)


def test_correlated_sequence_keeps_marginal():
    d = ChannelDensity.uniform(0.5, 1.5)
    g = d.sample_sequence(np.random.default_rng(1), 3, size=200_000, rho=0.9)
    assert g.min() >= 0.5 and g.max() <= 1.5
    assert abs(g[:, 2].mean() - 1.0) < 0.01
    assert np.corrcoef(g[:, 0], g[:, 1])[0, 1] > 0.8


# -- quantized feedback -----------------------------------------------------
def test_posterior_examples():
    d = ChannelDensity.uniform(0.5, 1.5)
    assert build_quantized_posterior(d, 0.7, 0) == d
    p1 = build_quantized_posterior(d, 0.7, 1)
    assert (p1.lo, p1.hi, p1.f_max) == (0.5, 1.0, 2.0)
    p4 = build_quantized_posterior(d, 0.7, 4)
    assert math.isclose(p4.width, 1 / 16) and math.isclose(p4.f_max, 16)
    assert p4.lo <= 0.7 <= p4.hi


def test_posterior_precision_exhausted():
    with pytest.raises(PrecisionExhaustedError):
        build_quantized_posterior(ChannelDensity.uniform(0.5, 1.5), 0.7, 60)


def test_truncated_gaussian_posterior_stays_gaussian():
    d = ChannelDensity.truncated_gaussian(1.0, 0.2, 0.5, 1.5)
    p = build_quantized_posterior(d, 1.03, 3)
    assert p.family == "truncated_gaussian" and p.lo <= 1.03 <= p.hi
    assert abs(interval_probability(p, p.lo, p.hi) - 1) < 1e-12


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_posterior_fmax_tracks_power_scaling(alpha):
    d = ChannelDensity.uniform(0.5, 1.5)
    for k in range(2, 9):
        P = 10.0 ** k
        post = build_quantized_posterior(d, 0.77, feedback_bits(alpha, P))
        ratio = post.f_max / P ** (alpha / 2)
        assert 0.5 <= ratio <= 2.0


def test_csit_pn_setting():
    d = ChannelDensity.uniform(0.5, 1.5)
    s = CsitState.pn(d, bits=3)
    assert s.users[0].kind == "perfect" and s.density(0) is None and s.density(1) is d
    with pytest.raises(ValueError):
        UserCsit("perfect", d)
