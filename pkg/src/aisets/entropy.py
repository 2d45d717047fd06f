"""
Exact entropy bookkeeping for the deterministic two-user channel.

Conditioning on a continuous channel coefficient is made exact by cell
decomposition: within a cell the images of every codeword are fixed, so
only the partition of the codebook into aligned sets (and the cell mass)
matters.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .aligned import PairTable, encode_rows, log2_analytic_expected_size_bound, sample_images
from .channel import ChannelDensity
from .deterministic import IntegerCodebook, ceil_sqrt, floor_products
from .fitting import extrapolate_limit, normalizer
from .piecewise import cells


def entropy_bits(pmf):
    """Shannon entropy in bits; zero cells contribute nothing."""
    p = np.asarray(pmf, dtype=float).ravel()
    if np.any(p < 0):
        raise ValueError("pmf has negative mass")
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def exact_conditional_entropy(joint):
    """
    ``H(V | C)`` in bits from a joint pmf ``joint[c, v]``.

    A 1-D input is treated as a single conditioning cell, i.e. plain entropy.
    """
    j = np.asarray(joint, dtype=float)
    if np.any(j < 0):
        raise ValueError("pmf has negative mass")
    if abs(j.sum() - 1.0) > 1e-12:
        raise ValueError(f"pmf sums to {j.sum()!r}, not 1")
    if j.ndim == 1:
        return entropy_bits(j)
    pc = j.sum(axis=1)
    return entropy_bits(j) - entropy_bits(pc)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Partition statistics xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def canonical_labels(keys):
    """Relabel each row of ``keys`` by first occurrence so equal partitions compare equal."""
    keys = np.atleast_2d(keys)
    S, N = keys.shape
    order = np.argsort(keys, axis=1, kind="stable")
    sk = np.take_along_axis(keys, order, axis=1)
    start = np.ones_like(sk, dtype=bool)
    start[:, 1:] = sk[:, 1:] != sk[:, :-1]
    pos = np.where(start, np.arange(N)[None, :], 0)
    pos = np.maximum.accumulate(pos, axis=1)
    first = np.take_along_axis(order, pos, axis=1)
    out = np.empty_like(first)
    np.put_along_axis(out, order, first, axis=1)
    return out


def partition_stats(keys, pmf):
    """
    Per-row statistics of the partition induced by image keys ``(S, N)``.

    Returns a dict of arrays: ``H2`` (entropy of the image), ``H12``
    (codeword entropy given the image), ``Elog`` (``E log2 |S|``) and
    ``ES`` (``E |S|``), with codewords drawn from ``pmf``.
    """
    keys = np.atleast_2d(keys)
    S, N = keys.shape
    p = np.asarray(pmf, dtype=float)
    order = np.argsort(keys, axis=1, kind="stable")
    sk = np.take_along_axis(keys, order, axis=1)
    sp = p[order]
    start = np.ones_like(sk, dtype=bool)
    start[:, 1:] = sk[:, 1:] != sk[:, :-1]
    gid = np.cumsum(start, axis=1) - 1 + (np.arange(S) * N)[:, None]
    mass = np.bincount(gid.ravel(), weights=sp.ravel(), minlength=S * N).reshape(S, N)
    mass = np.minimum(mass, 1.0)        # a lone group must give exactly zero entropy
    size = np.bincount(gid.ravel(), minlength=S * N).reshape(S, N).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h2 = -np.where(mass > 0, mass * np.log2(np.where(mass > 0, mass, 1.0)), 0.0).sum(1)
        elog = np.where(size > 0, mass * np.log2(np.where(size > 0, size, 1.0)), 0.0).sum(1)
    es = (mass * size).sum(axis=1)
    # conditional entropy summed codeword by codeword: p(x) log2(m(g(x)) / p(x))
    gm = np.take_along_axis(mass, gid - (np.arange(S) * N)[:, None], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h12 = np.where(sp > 0, sp * np.log2(np.where(sp > 0, gm / sp, 1.0)), 0.0).sum(1)
    return {"H2": h2 + 0.0, "H12": h12, "Elog": elog, "ES": es}


def _slot_partitions(x1_col, x2_col, density):
    """Distinct codebook partitions at one slot with their probabilities."""
    _, w, mids = cells(x1_col, density)
    keys = floor_products(mids[:, None], x1_col[None, :]) + x2_col[None, :]
    lab = canonical_labels(keys)
    uniq, inv = np.unique(lab, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=w)


def joint_partitions(cb: IntegerCodebook, density: ChannelDensity, budget=2_000_000):
    """
    All partitions of the codebook into aligned sets with their exact
    probabilities, for i.i.d. G(t). Returns None when the product of
    per-slot partition counts exceeds ``budget``.
    """
    x1, x2 = cb.x(0), cb.x(1)
    N = cb.N
    slots = [_slot_partitions(x1[:, t], x2[:, t], density) for t in range(cb.n)]
    if math.prod(len(w) for _, w in slots) > budget:
        return None
    lab, w = slots[0]
    for nxt, wn in slots[1:]:
        comb = (lab[:, None, :] * N + nxt[None, :, :]).reshape(-1, N)
        ww = (w[:, None] * wn[None, :]).ravel()
        comb = canonical_labels(comb)
        lab, inv = np.unique(comb, axis=0, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=ww)
    return lab, w


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Ledger xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class EntropyLedger:
    """Entropy terms (bits) of one instance plus the normalized difference."""
    P: float
    n: int
    alpha: float
    H_Y1: float
    H_Y2: float
    H_Y1_given_Y2: float
    E_log_S: float
    log_E_S: float
    E_S: float
    log2_analytic_bound: float
    method: str = "exact"
    ci_halfwidth: dict = field(default_factory=dict)

    @property
    def normalizer(self):
        return normalizer(self.n, self.P)

    @property
    def difference(self):
        return self.H_Y1 - self.H_Y2

    @property
    def D_hat(self):
        return self.difference / self.normalizer

    @property
    def normalized_log_E_S(self):
        return self.log_E_S / self.normalizer

    @property
    def normalized_analytic(self):
        return self.log2_analytic_bound / self.normalizer

    def chain_residual(self):
        return self.H_Y1 - (self.H_Y2 + self.H_Y1_given_Y2)

    def check(self, tol=1e-9):
        """Names of violated invariants (empty when all hold)."""
        bad = []
        slack = tol if self.method == "exact" else 4 * max(self.ci_halfwidth.values(), default=0)
        if abs(self.chain_residual()) > max(tol, slack):
            bad.append("chain")
        if self.H_Y1_given_Y2 > self.E_log_S + tol:
            bad.append("uniform")
        if self.E_log_S > self.log_E_S + tol:
            bad.append("jensen")
        if self.D_hat > self.normalized_analytic + tol:
            bad.append("analytic")
        return bad

    def to_dict(self):
        d = asdict(self)
        d.update(normalizer=self.normalizer, difference=self.difference, D_hat=self.D_hat)
        return d


def _ledger_from_stats(cb, density, pmf, h2, h12, elog, es, method, ci=None):
    return EntropyLedger(
        P=cb.P, n=cb.n, alpha=density.alpha if density is not None else 1.0,
        H_Y1=entropy_bits(pmf), H_Y2=h2, H_Y1_given_Y2=h12, E_log_S=elog,
        log_E_S=math.log2(es), E_S=es,
        log2_analytic_bound=log2_analytic_expected_size_bound(
            cb.n, cb.P, density.f_max if density is not None else 1.0),
        method=method, ci_halfwidth=ci or {})


def difference_of_entropies(cb: IntegerCodebook, density: ChannelDensity, pmf=None,
                            budget=2_000_000, mc_samples=200_000, rng=None, rho=0.0,
                            force_monte_carlo=False):
    """
    ``H(Y1|G) - H(Y2|G)`` and its aligned-set companions for a two-user
    codebook whose second row is a function of the first.

    Exact by cell decomposition when the channel is i.i.d. over time and the
    joint partition count fits in ``budget``; Monte Carlo with 95% interval
    half-widths otherwise.
    """
    if cb.K != 2:
        raise ValueError("difference_of_entropies expects a two-user codebook")
    N = cb.N
    p = np.full(N, 1.0 / N) if pmf is None else np.asarray(pmf, dtype=float)
    if abs(p.sum() - 1) > 1e-12 or np.any(p < 0):
        raise ValueError("input pmf must be a probability vector")
    jp = None
    if rho == 0.0 and not force_monte_carlo:
        jp = joint_partitions(cb, density, budget)
    if jp is not None:
        lab, w = jp
        st = partition_stats(lab, p)
        return _ledger_from_stats(cb, density, p, float(w @ st["H2"]), float(w @ st["H12"]),
                                  float(w @ st["Elog"]),
                                  float(w @ st["ES"]), "exact")
    rng = np.random.default_rng() if rng is None else rng
    acc = {"H2": [], "H12": [], "Elog": [], "ES": []}
    chunk = max(1, 2_000_000 // max(N, 1))
    done = 0
    while done < mc_samples:
        s = min(chunk, mc_samples - done)
        st = partition_stats(encode_rows(sample_images(cb, density, s, rng, rho)), p)
        for k in acc:
            acc[k].append(st[k])
        done += s
    acc = {k: np.concatenate(v) for k, v in acc.items()}
    ci = {k: float(1.96 * v.std(ddof=1) / math.sqrt(v.size)) for k, v in acc.items()}
    return _ledger_from_stats(cb, density, p, float(acc["H2"].mean()),
                              float(acc["H12"].mean()), float(acc["Elog"].mean()),
                              float(acc["ES"].mean()), "monte_carlo", ci)


def zero_forcing_mapping(x1_rows, g, P):
    """
    ``X2 = c - floor(G X1)`` per slot, shifted into ``{0, ..., ceil(sqrt P)}``
    and clipped where the spread does not fit.
    """
    x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
    g = np.broadcast_to(np.asarray(g, dtype=float), (x1.shape[1],))
    f = floor_products(g[None, :], x1)
    x2 = f.max(axis=0, keepdims=True) - f
    return np.clip(x2, 0, ceil_sqrt(P))


def known_channel_difference(x1_rows, g, P, pmf=None):
    """
    Entropy ledger when the transmitter knows G exactly and zero-forces it.
    The channel is a point mass, so there is no density and the image
    entropy is taken at that single realization.
    """
    x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
    cb = IntegerCodebook.two_user(x1, zero_forcing_mapping(x1, g, P), P)
    p = np.full(cb.N, 1.0 / cb.N) if pmf is None else np.asarray(pmf, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), (cb.n,))
    keys = encode_rows(floor_products(g[None, :], cb.x(0)) + cb.x(1))
    st = partition_stats(keys[None, :], p)
    return _ledger_from_stats(cb, None, p, float(st["H2"][0]), float(st["H12"][0]),
                              float(st["Elog"][0]),
                              float(st["ES"][0]), "known_channel")


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Mapping search xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass
class MappingSearchResult:
    mapping: np.ndarray           # (N, n) user-2 table
    H_Y2: float
    exhaustive: bool
    evaluated: int
    method: str                   # "exhaustive" | "annealing"
    alignment_mass: Optional[float] = None


def _h2_exact(x1, x2, density, P, pmf, budget):
    cb = IntegerCodebook.two_user(x1, x2, P)
    jp = joint_partitions(cb, density, budget)
    if jp is None:
        return None
    lab, w = jp
    return float(w @ partition_stats(lab, pmf)["H2"])


def anneal_mapping(table: PairTable, x2_values, rng, steps=4000, t0=0.5, t1=1e-3, init=None):
    """
    Simulated annealing over user-2 tables maximizing the alignment mass
    (sum of pairwise alignment probabilities).
    """
    x1 = table.x1
    N, n = x1.shape
    vals = np.asarray(x2_values, dtype=np.int64)
    cur = (rng.integers(0, vals.size, size=(N, n)) if init is None
           else np.searchsorted(vals, init))
    x2 = vals[cur]
    row_mass = lambda r, m: sum(table.probability(r, b, m) for b in range(N) if b != r)
    f = table.alignment_mass(x2)
    best, best_f = x2.copy(), f
    for i in range(steps):
        T = t0 * (t1 / t0) ** (i / max(steps - 1, 1))
        r, t = int(rng.integers(N)), int(rng.integers(n))
        old = x2[r, t]
        before = row_mass(r, x2)
        x2[r, t] = vals[rng.integers(vals.size)]
        delta = row_mass(r, x2) - before
        if delta >= 0 or rng.random() < math.exp(delta / T):
            f += delta
            if f > best_f:
                best, best_f = x2.copy(), f
        else:
            x2[r, t] = old
    return best, best_f


def minimize_over_mappings(x1_rows, density: ChannelDensity, x2_values, P, pmf=None,
                           budget=20_000, partition_budget=2_000_000, rng=None,
                           anneal_steps=4000):
    """
    The user-2 table minimizing ``H(Y2|G)``.

    Exhaustive (and certified as such) when the number of tables
    ``(|x2_values|^n)^N`` is within ``budget``; otherwise simulated
    annealing on the alignment mass, labelled heuristic.
    """
    x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
    N, n = x1.shape
    if len(np.unique(x1, axis=0)) != N:
        raise ValueError("user-1 rows must be distinct")
    p = np.full(N, 1.0 / N) if pmf is None else np.asarray(pmf, dtype=float)
    vals = np.asarray(sorted(set(int(v) for v in x2_values)), dtype=np.int64)
    count = (vals.size ** n) ** N
    if count <= budget:
        best, best_h, k = None, math.inf, 0
        # cache per-slot cells; every table shares them
        slot = [cells(x1[:, t], density) for t in range(n)]
        base = [floor_products(m[:, None], x1[None, :, t]) for (_, _, m), t in zip(slot, range(n))]
        for flat in itertools.product(range(vals.size), repeat=N * n):
            x2 = vals[np.asarray(flat)].reshape(N, n)
            parts = []
            for t in range(n):
                lab = canonical_labels(base[t] + x2[None, :, t])
                uq, inv = np.unique(lab, axis=0, return_inverse=True)
                parts.append((uq, np.bincount(inv.ravel(), weights=slot[t][1])))
            lab, w = parts[0]
            for nxt, wn in parts[1:]:
                comb = canonical_labels((lab[:, None, :] * N + nxt[None]).reshape(-1, N))
                lab, inv = np.unique(comb, axis=0, return_inverse=True)
                w = np.bincount(inv.ravel(), weights=(w[:, None] * wn[None]).ravel())
            h = float(w @ partition_stats(lab, p)["H2"])
            k += 1
            if h < best_h - 1e-15:
                best, best_h = x2, h
        return MappingSearchResult(best, best_h, True, k, "exhaustive",
                                   PairTable(x1, density).alignment_mass(best))
    rng = np.random.default_rng() if rng is None else rng
    table = PairTable(x1, density)
    x2, mass = anneal_mapping(table, vals, rng, steps=anneal_steps)
    h = _h2_exact(x1, x2, density, P, p, partition_budget)
    if h is None:
        cb = IntegerCodebook.two_user(x1, x2, P)
        h = difference_of_entropies(cb, density, p, budget=0, rng=rng).H_Y2
    return MappingSearchResult(x2, h, False, anneal_steps, "annealing", mass)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Sum-DoF assembly xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
def theorem_value(alphas):
    """Sum-GDoF ceiling ``1 + alpha_2 + ... + alpha_K``."""
    return 1.0 + float(np.sum(alphas))


@dataclass
class SumDofReport:
    theorem_value: float
    fitted_limit_log_E_S: float
    fitted_limit_analytic: float
    rows: list
    falsified: list               # ledgers whose difference beats the finite-P bound
    above_alpha: list             # ledgers above alpha + tol at finite P (informational)


def assemble_sum_dof_bound(ledgers: Sequence[EntropyLedger], alphas, tol=0.05):
    """
    Fit the P -> inf limit of ``log E|S| / ((n/2) log P)`` across ledgers
    and set it beside ``1 + sum(alphas)``.
    """
    Ps = np.array([l.P for l in ledgers], dtype=float)
    if np.unique(Ps).size < 3:
        raise ValueError("need ledgers at three or more distinct P values")
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    rows, falsified, above = [], [], []
    for i, l in enumerate(ledgers):
        rows.append({"P": l.P, "n": l.n, "alpha": l.alpha, "H1": l.H_Y1, "H2": l.H_Y2,
                     "diff": l.difference, "normalized_diff": l.D_hat,
                     "theorem_value": theorem_value(alphas)})
        if l.check():
            falsified.append(i)
        if l.D_hat > l.alpha + tol:
            above.append(i)
    return SumDofReport(
        theorem_value=theorem_value(alphas),
        fitted_limit_log_E_S=extrapolate_limit(Ps, [l.normalized_log_E_S for l in ledgers]),
        fitted_limit_analytic=extrapolate_limit(Ps, [l.normalized_analytic for l in ledgers]),
        rows=rows, falsified=falsified, above_alpha=above)
