"""
Aligned image sets: codewords that cast the same image at the unintended
receiver for a given channel realization, the probability that two
codewords align, and bounds on the average size of an aligned set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .channel import CanonicalChannel, ChannelDensity
from .deterministic import IntegerCodebook, ceil_sqrt, floor_products, images
from .piecewise import floor_difference_distribution


class InstanceTooLargeError(ValueError):
    """Exhaustive evaluation would exceed the configured budget."""


class MalformedMappingError(KeyError):
    """A K-user mapping is not defined on (or inconsistent with) an input image."""


@dataclass(frozen=True)
class AlignedImageSet:
    representative: int                 # message index of the first member
    members: tuple
    image: tuple                        # image at the unintended receiver, per t
    channel: CanonicalChannel = field(repr=False)

    def __len__(self):
        return len(self.members)


def partition_into_aligned_sets(cb: IntegerCodebook, g: CanonicalChannel, user=None):
    """
    Group messages by their exact integer image at ``user`` (0-based,
    default the last user).
    """
    user = cb.K - 1 if user is None else user
    img = images(cb, g, users=[user])[:, 0, :]
    groups = {}
    for m, row in enumerate(map(tuple, img.tolist())):
        groups.setdefault(row, []).append(m)
    return [AlignedImageSet(ms[0], tuple(ms), key, g) for key, ms in groups.items()]


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Pairwise alignment xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class PairwiseBound:
    bound: float
    intervals: list          # (t, lo, hi): G(t) must fall in the open interval


def alignment_intervals(x, nu, x2_x, x2_nu):
    """
    Open G-intervals forced on each differing time slot if ``x`` and ``nu``
    share an image: ``G (x - nu)`` must be within 1 of ``X2(nu) - X2(x)``.
    """
    out = []
    for t, (a, b, ca, cb_) in enumerate(zip(x, nu, x2_x, x2_nu)):
        d = int(a) - int(b)
        if d == 0:
            continue
        c = int(cb_) - int(ca)
        lo, hi = sorted(((c - 1) / d, (c + 1) / d))
        out.append((t, lo, hi))
    return out


def pairwise_alignment_probability_bound(x, nu, x2_x, x2_nu, density: ChannelDensity, n=None):
    """
    ``min(1, f_max^n * prod_{t: x(t) != nu(t)} 2 / |x(t) - nu(t)|)``.

    Identical codewords align with certainty: bound 1, no intervals.
    """
    x, nu = np.atleast_1d(x), np.atleast_1d(nu)
    n = len(x) if n is None else n
    diff = np.abs(x.astype(np.int64) - nu.astype(np.int64))
    if not diff.any():
        return PairwiseBound(1.0, [])
    log_b = n * math.log(density.f_max) + float(np.sum(np.log(2.0 / diff[diff > 0])))
    return PairwiseBound(min(1.0, math.exp(log_b)), alignment_intervals(x, nu, x2_x, x2_nu))


def exact_pairwise_alignment_probability(x, nu, x2_x, x2_nu, density: ChannelDensity):
    """Exact probability of a shared image under i.i.d. G(t) ~ density."""
    p = 1.0
    for a, b, ca, cb_ in zip(np.atleast_1d(x), np.atleast_1d(nu),
                             np.atleast_1d(x2_x), np.atleast_1d(x2_nu)):
        dist = floor_difference_distribution(int(a), int(b), density)
        p *= dist.get(int(cb_) - int(ca), 0.0)
        if p == 0.0:
            break
    return p


class PairTable:
    """
    Per-slot laws of ``floor(G x_a) - floor(G x_b)`` for every pair of
    user-1 rows, so alignment probabilities of any mapping are lookups.
    """

    def __init__(self, x1_rows, density: ChannelDensity):
        self.x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
        N, n = self.x1.shape
        self.dists = {}
        cache = {}
        for a in range(N):
            for b in range(a + 1, N):
                for t in range(n):
                    key = (int(self.x1[a, t]), int(self.x1[b, t]))
                    if key not in cache:
                        cache[key] = floor_difference_distribution(*key, density)
                    self.dists[a, b, t] = cache[key]

    def probability(self, a, b, x2):
        """P(rows a and b align) when user 2 sends ``x2[row, t]``."""
        if a == b:
            return 1.0
        if a > b:
            a, b = b, a
        p = 1.0
        for t in range(self.x1.shape[1]):
            p *= self.dists[a, b, t].get(int(x2[b, t]) - int(x2[a, t]), 0.0)
            if p == 0.0:
                return 0.0
        return p

    def matrix(self, x2):
        N = self.x1.shape[0]
        m = np.eye(N)
        for a in range(N):
            for b in range(a + 1, N):
                m[a, b] = m[b, a] = self.probability(a, b, x2)
        return m

    def alignment_mass(self, x2):
        """Sum of alignment probabilities over unordered distinct pairs."""
        N = self.x1.shape[0]
        return sum(self.probability(a, b, x2) for a in range(N) for b in range(a + 1, N))


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Expected set size xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def harmonic(m):
    return math.fsum(1.0 / k for k in range(1, m + 1))


def analytic_expected_size_bound(n, P, f_max):
    """``1 + (2 f_max)^n prod_t (1 + sum_{d=1}^{ceil(sqrt P)} 2/d)``, exact harmonic sum."""
    per_t = 1.0 + 2.0 * harmonic(ceil_sqrt(P))
    return 1.0 + (2.0 * f_max) ** n * per_t ** n


def log2_analytic_expected_size_bound(n, P, f_max):
    """Base-2 log of the bound, computed without overflow."""
    per_t = 1.0 + 2.0 * harmonic(ceil_sqrt(P))
    a = n * (math.log2(2.0 * f_max) + math.log2(per_t))
    return a + math.log2(1.0 + 2.0 ** (-a))


@dataclass
class AlignmentBoundReport:
    P: float
    n: int
    f_max: float
    pairwise_bounds: np.ndarray
    pairwise_exact: Optional[np.ndarray]
    empirical_expected_size: float
    empirical_stderr: float
    exact_expected_size: Optional[float]
    analytic_bound: float
    interval_widths: list
    samples: int

    @property
    def falsified(self):
        """True when any computed size or pair probability beats its bound."""
        bad = self.empirical_expected_size > self.analytic_bound
        if self.exact_expected_size is not None:
            bad |= self.exact_expected_size > self.analytic_bound * (1 + 1e-12)
        if self.pairwise_exact is not None:
            bad |= bool(np.any(self.pairwise_exact > self.pairwise_bounds * (1 + 1e-12) + 1e-15))
        return bool(bad)

    def to_dict(self):
        return {
            "P": self.P, "n": self.n, "f_max": self.f_max,
            "empirical_E_S": self.empirical_expected_size,
            "empirical_stderr": self.empirical_stderr,
            "exact_E_S": self.exact_expected_size,
            "analytic_bound": self.analytic_bound,
            "pairwise_bounds": self.pairwise_bounds.tolist(),
            "pairwise_exact": None if self.pairwise_exact is None else self.pairwise_exact.tolist(),
            "interval_widths": self.interval_widths,
            "samples": self.samples,
            "falsified": self.falsified,
        }


def set_sizes(keys, pmf=None):
    """
    Expected aligned-set size per row of image keys ``(S, N)``:
    ``sum_x p(x) |S_x|``.
    """
    keys = np.atleast_2d(keys)
    S, N = keys.shape
    p = np.full(N, 1.0 / N) if pmf is None else np.asarray(pmf, dtype=float)
    eq = keys[:, :, None] == keys[:, None, :]
    return (eq.sum(axis=2) * p[None, :]).sum(axis=1)


def encode_rows(img):
    """Collapse the trailing time axis of integer images into one int64 key."""
    img = np.asarray(img, dtype=np.int64)
    if img.shape[-1] == 1:
        return img[..., 0]
    lo = img.min()
    base = int(img.max() - lo) + 1
    if base ** img.shape[-1] >= 2 ** 62:
        _, inv = np.unique(img.reshape(-1, img.shape[-1]), axis=0, return_inverse=True)
        return inv.reshape(img.shape[:-1])
    key = np.zeros(img.shape[:-1], dtype=np.int64)
    for t in range(img.shape[-1]):
        key = key * base + (img[..., t] - lo)
    return key


def sample_images(cb: IntegerCodebook, density: ChannelDensity, samples, rng, rho=0.0):
    """User-2 images for ``samples`` i.i.d. (or AR(1)) channel draws: ``(S, N, n)``."""
    G = density.sample_sequence(rng, cb.n, size=samples, rho=rho)         # (S, n)
    return floor_products(G[:, None, :], cb.x(0)[None]) + cb.x(1)[None]


def expected_set_size(cb: IntegerCodebook, density: ChannelDensity, samples, rng,
                      budget=5_000_000, rho=0.0, pmf=None, exact=True):
    """
    Monte Carlo and (for i.i.d. channels) exact average aligned-set size,
    alongside the pairwise and analytic bounds.
    """
    if cb.K != 2:
        raise ValueError("expected_set_size is defined for two-user codebooks")
    if cb.N * samples > budget:
        raise InstanceTooLargeError(
            f"{cb.N} codewords x {samples} samples exceeds budget {budget}")
    x1, x2 = cb.x(0), cb.x(1)
    N = cb.N
    bounds = np.ones((N, N))
    widths = []
    for a in range(N):
        for b in range(a + 1, N):
            pb = pairwise_alignment_probability_bound(x1[a], x1[b], x2[a], x2[b], density)
            bounds[a, b] = bounds[b, a] = pb.bound
            widths.extend(hi - lo for _, lo, hi in pb.intervals)

    sizes = []
    chunk = max(1, min(samples, 2_000_000 // max(N * N, 1)))
    done = 0
    while done < samples:
        s = min(chunk, samples - done)
        keys = encode_rows(sample_images(cb, density, s, rng, rho))
        sizes.append(set_sizes(keys, pmf))
        done += s
    sizes = np.concatenate(sizes)
    emp = float(sizes.mean())
    se = float(sizes.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0

    exact_m, exact_es = None, None
    if exact and rho == 0.0:
        exact_m = PairTable(x1, density).matrix(x2)
        p = np.full(N, 1.0 / N) if pmf is None else np.asarray(pmf, dtype=float)
        exact_es = float(exact_m.sum(axis=1) @ p)
    return AlignmentBoundReport(
        P=cb.P, n=cb.n, f_max=density.f_max, pairwise_bounds=bounds,
        pairwise_exact=exact_m, empirical_expected_size=emp, empirical_stderr=se,
        exact_expected_size=exact_es,
        analytic_bound=analytic_expected_size_bound(cb.n, cb.P, density.f_max),
        interval_widths=widths, samples=samples)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx K users xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class KUserAlignment:
    aligned: bool
    violated_t: Optional[int]
    j_star: np.ndarray            # per t, 0-based user index of the largest input gap
    widths: np.ndarray            # per t, 2/|gap|, inf where the gap is zero
    width_bound: float            # f_max^n prod of finite widths
    gbar: float
    relaxed_bound: float          # bound stated through the user-(k-1) images


def user_image(x, g: CanonicalChannel, k):
    """Image at user ``k`` (0-based) of inputs ``x`` of shape ``(>=k+1, n)``."""
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[1]
    y = x[k].copy()
    for j in range(k):
        y += floor_products(g.gain(k, j)[:n], x[j])
    return y


def build_kuser_mapping(cb: IntegerCodebook, g: CanonicalChannel, k):
    """Deterministic map from each user-(k-1) image to the first codeword casting it."""
    mapping = {}
    y = images(cb, g, users=[k - 1])[:, 0, :]
    for m, row in enumerate(map(tuple, y.tolist())):
        mapping.setdefault(row, cb.inputs[m])
    return mapping


def kuser_alignment_test(y, y_prime, mapping, g: CanonicalChannel, k, f_max=1.0):
    """
    Do the two user-(k-1) images ``y`` and ``y_prime`` cast the same image
    at user ``k`` (0-based, k >= 1) under ``mapping``?
    """
    y, y_prime = tuple(int(v) for v in y), tuple(int(v) for v in y_prime)
    K = g.K
    try:
        x, xp = np.asarray(mapping[y]), np.asarray(mapping[y_prime])
    except KeyError as exc:
        raise MalformedMappingError(f"mapping undefined on image {exc.args[0]}") from None
    for img, xx in ((y, x), (y_prime, xp)):
        if tuple(user_image(xx, g, k - 1).tolist()) != img:
            raise MalformedMappingError(f"mapping of {img} does not reproduce that image")
    n = x.shape[1]
    a, b = user_image(x, g, k), user_image(xp, g, k)
    neq = np.nonzero(a != b)[0]
    gaps = np.abs(xp[:k].astype(np.int64) - x[:k].astype(np.int64))       # (k, n)
    j_star = np.argmax(gaps, axis=0)
    top = gaps[j_star, np.arange(n)]
    widths = np.where(top > 0, 2.0 / np.maximum(top, 1), np.inf)
    active = top > 0
    width_bound = min(1.0, f_max ** n * float(np.prod(widths[active])))
    gain_sum = np.sum([np.abs(g.gain(k - 1, j)[:n]) for j in range(k)], axis=0)
    gbar = max(1.0, float(np.prod(2.0 * gain_sum[active])))
    dy = np.abs(np.asarray(y_prime) - np.asarray(y))
    far = dy > K
    relaxed = gbar * f_max ** n * float(np.prod(1.0 / (dy[far] - K)))
    return KUserAlignment(aligned=neq.size == 0,
                          violated_t=None if neq.size == 0 else int(neq[0]),
                          j_star=j_star, widths=widths, width_bound=width_bound,
                          gbar=gbar, relaxed_bound=min(1.0, relaxed))


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Noise-free toy setting xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def _frac(v):
    return v if isinstance(v, Fraction) else Fraction(v)


def alignment_slope(c, c_prime):
    """The unique G with ``G x1 + x2 = G x1' + x2'``, or None when ``x1 == x1'``."""
    (x1, x2), (y1, y2) = c, c_prime
    if x1 == y1:
        return None
    return -Fraction(y2 - x2, y1 - x1)


@dataclass
class ToyReport:
    counts: dict              # G -> number of distinct images
    classes: dict             # G -> list of codeword-index tuples sharing an image
    separated: bool           # classes under one G never share two members under another
    max_images: int
    sqrt_codebook: float

    @property
    def pigeonhole_ok(self):
        return self.max_images >= self.sqrt_codebook - 1e-12


def toy_distinct_images(codebook, channels):
    """
    Count distinct images ``G x1 + x2`` per channel value in exact arithmetic
    and check that aligned classes split under every other channel value.
    """
    codebook = [(int(a), int(b)) for a, b in codebook]
    chans = [_frac(G) for G in channels]
    counts, classes = {}, {}
    for G in chans:
        groups = {}
        for i, (a, b) in enumerate(codebook):
            groups.setdefault(G * a + b, []).append(i)
        counts[G] = len(groups)
        classes[G] = [tuple(v) for v in groups.values()]
    separated = True
    for G in chans:
        for cls in classes[G]:
            if len(cls) < 2:
                continue
            for G2 in chans:
                if G2 == G:
                    continue
                imgs = [G2 * codebook[i][0] + codebook[i][1] for i in cls]
                if len(set(imgs)) != len(imgs):
                    separated = False
    return ToyReport(counts, classes, separated, max(counts.values()),
                     math.sqrt(len(codebook)))


@dataclass
class MinMaxResult:
    value: int                # min over mappings of max over channels of #images
    witness: tuple            # a mapping attaining it
    nodes: int


def min_max_images(x1_values, x2_values, channels):
    """
    Exhaustive branch-and-bound over every mapping ``x2(x1)``: the smallest
    achievable worst-channel image count. A partial mapping is dropped only
    once its image count already reaches the best complete one, so every
    mapping is either evaluated or provably no better.
    """
    xs = [int(v) for v in x1_values]
    vals = [int(v) for v in x2_values]
    chans = [_frac(G) for G in channels]
    best = [len(xs) + 1, None]
    nodes = 0
    counters = [dict() for _ in chans]
    assign = []

    def rec(i, cur):
        nonlocal nodes
        nodes += 1
        if cur >= best[0]:
            return
        if i == len(xs):
            best[0], best[1] = cur, tuple(assign)
            return
        for v in vals:
            new = cur
            for c, G in zip(counters, chans):
                key = G * xs[i] + v
                c[key] = c.get(key, 0) + 1
                if c[key] == 1:
                    new = max(new, len(c))
            assign.append(v)
            rec(i + 1, new)
            assign.pop()
            for c, G in zip(counters, chans):
                key = G * xs[i] + v
                c[key] -= 1
                if c[key] == 0:
                    del c[key]

    rec(0, 0)
    return MinMaxResult(best[0], best[1], nodes)
