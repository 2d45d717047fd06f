"""
Noise-free integer channel and the two reductions that justify it:
real codewords to integer codewords, and per-codeword power to
per-symbol power through a modulo decomposition.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .channel import CanonicalChannel, ChannelDensity

E_LN2 = math.e * math.log(2)


def ceil_sqrt(P):
    """Exact ``ceil(sqrt(P))`` for integer-valued P, float route otherwise."""
    if isinstance(P, (int, np.integer)) or float(P).is_integer():
        P = int(P)
        q = math.isqrt(P)
        return q if q * q == P else q + 1
    return int(math.ceil(math.sqrt(P)))


def paper_floor(x):
    """
    Integer part, rounded toward zero.

    Positive values round down, negative values round up, integers are
    returned unchanged. Works on scalars and arrays.
    """
    if np.ndim(x) == 0:
        if isinstance(x, Fraction):
            return int(x)
        x = float(x)
        if not math.isfinite(x):
            raise ValueError("paper_floor needs a finite value")
        return int(math.trunc(x))
    return np.trunc(np.asarray(x, dtype=float)).astype(np.int64)


def floor_products(g, x):
    """
    ``paper_floor(g * x)`` elementwise, exact at integer boundaries.

    ``g`` is float, ``x`` integer. Products that land within rounding
    distance of an integer are recomputed with rational arithmetic on the
    exact binary value of ``g``.
    """
    g, x = np.broadcast_arrays(np.asarray(g, dtype=float), np.asarray(x, dtype=np.int64))
    prod = g * x
    out = np.trunc(prod).astype(np.int64)
    near = np.abs(prod - np.rint(prod)) <= 1e-9 * np.maximum(1.0, np.abs(prod))
    if np.any(near):
        idx = np.nonzero(near)
        out[idx] = [int(Fraction(float(gi)) * int(xi)) for gi, xi in zip(g[idx], x[idx])]
    return out


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Codebooks xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class IntegerCodebook:
    """
    Message-indexed integer inputs under a per-symbol power constraint.

    ``inputs`` has shape ``(N, K, n)``: ``inputs[m, k, t]`` is the symbol
    user ``k``'s antenna sends at time ``t`` for message ``m``. For two
    users the second row is the mapping table ``X2 = L(X1)``, so user-1
    rows must be distinct.
    """
    P: float
    inputs: np.ndarray

    def __post_init__(self):
        a = np.array(self.inputs, dtype=np.int64)
        if a.ndim != 3:
            raise ValueError("inputs must have shape (N, K, n)")
        a.setflags(write=False)
        object.__setattr__(self, "inputs", a)
        Q = ceil_sqrt(self.P)
        if a.size and (a.min() < 0 or a.max() > Q):
            raise ValueError(f"symbols must lie in {{0, ..., {Q}}} for P={self.P:g}")
        key = a[:, 0, :] if self.K == 2 else a.reshape(self.N, -1)
        if len(np.unique(key, axis=0)) != self.N:
            raise ValueError("mapping table is not deterministic: repeated rows")

    @classmethod
    def two_user(cls, x1_rows, x2_rows, P):
        x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
        x2 = np.atleast_2d(np.asarray(x2_rows, dtype=np.int64))
        if x1.shape != x2.shape:
            raise ValueError("x1 and x2 tables must have the same shape")
        return cls(P, np.stack([x1, x2], axis=1))

    @classmethod
    def from_mapping(cls, x1_rows, mapping: Callable, P):
        x1 = np.atleast_2d(np.asarray(x1_rows, dtype=np.int64))
        x2 = np.array([np.asarray(mapping(r), dtype=np.int64) for r in x1]).reshape(x1.shape)
        return cls.two_user(x1, x2, P)

    @classmethod
    def scalar(cls, x1_values, x2_values, P):
        """Blocklength-1 two-user codebook from two value lists."""
        return cls.two_user(np.asarray(x1_values)[:, None], np.asarray(x2_values)[:, None], P)

    @property
    def N(self):
        return self.inputs.shape[0]

    @property
    def K(self):
        return self.inputs.shape[1]

    @property
    def n(self):
        return self.inputs.shape[2]

    @property
    def Q(self):
        return ceil_sqrt(self.P)

    def x(self, k):
        return self.inputs[:, k, :]

    def with_mapping(self, x2_rows):
        return IntegerCodebook.two_user(self.x(0), x2_rows, self.P)

    # -- serialization -----------------------------------------------------
    def to_dict(self):
        mapping = (self.x(1).tolist() if self.K == 2
                   else self.inputs[:, 1:, :].tolist())
        return {"K": self.K, "n": self.n, "P": self.P,
                "rows": self.x(0).tolist(), "mapping": mapping}

    @classmethod
    def from_dict(cls, d):
        rows = np.asarray(d["rows"], dtype=np.int64).reshape(-1, d["n"])
        mapping = np.asarray(d["mapping"], dtype=np.int64)
        if d["K"] == 2:
            cb = cls.two_user(rows, mapping.reshape(rows.shape), d["P"])
        else:
            rest = mapping.reshape(rows.shape[0], d["K"] - 1, d["n"])
            cb = cls(d["P"], np.concatenate([rows[:, None, :], rest], axis=1))
        return cb

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class DeterministicOutput:
    msg: int
    values: np.ndarray          # (K, n) integer outputs
    channel: CanonicalChannel


def images(cb: IntegerCodebook, g: CanonicalChannel, users=None):
    """
    Outputs of every message: array ``(N, K, n)`` (or ``(N, len(users), n)``).

    ``Y_k(t) = sum_{i<k} floor(G_ki(t) X_i(t)) + X_k(t)``.
    """
    if g.n < cb.n:
        raise ValueError("channel realization shorter than the blocklength")
    users = range(cb.K) if users is None else users
    out = []
    for k in users:
        y = cb.inputs[:, k, :].copy()
        for i in range(k):
            y += floor_products(g.coeffs[None, :cb.n, k, i], cb.inputs[:, i, :])
        out.append(y)
    return np.stack(out, axis=1)


def deterministic_output(cb: IntegerCodebook, msg, g: CanonicalChannel):
    if not 0 <= msg < cb.N:
        raise IndexError(f"message {msg} out of range")
    one = IntegerCodebook(cb.P, cb.inputs[msg:msg + 1])
    return DeterministicOutput(int(msg), images(one, g)[0], g)


def write_outputs_csv(outputs, fh):
    """Rows ``msg, t, k, value`` with 1-based t and k."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["msg", "t", "k", "value"])
    for o in outputs:
        K, n = o.values.shape
        for t in range(n):
            for k in range(K):
                w.writerow([o.msg, t + 1, k + 1, int(o.values[k, t])])


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Integer inputs and outputs xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class GapReport:
    """Upper bounds (bits) on the mutual-information loss from flooring."""
    user1_gap_bits: float
    user2_gap_bits: float
    per_time_user2: np.ndarray


def _user2_gap_term(g):
    return 0.5 * np.log2((g + 1.0) ** 2 + 1.0)


def expected_user2_gap(d: ChannelDensity):
    """``E[(1/2) log2((G+1)^2 + 1)]`` by quadrature over the density."""
    val, _ = integrate.quad(lambda g: _user2_gap_term(g) * d.pdf(g), d.lo, d.hi,
                            epsabs=1e-13, epsrel=1e-12, limit=200)
    return float(val)


def integerize(x, channel, P=None):
    """
    Floor a real codeword and bound the resulting rate loss.

    Parameters
    ----------
    x : array_like, shape (2, n)
        Real codeword for the two canonical antennas.
    channel : float, array_like or ChannelDensity
        Cross gain per time (deterministic) or its density (i.i.d. over time).
        Unit-variance Gaussian noise is assumed at both receivers.
    P : float, optional
        Per-codeword power budget to check.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = x.shape[1]
    if P is not None and np.sum(x ** 2) / n > P * (1 + 1e-12):
        raise ValueError("codeword violates the per-codeword power constraint")
    if isinstance(channel, ChannelDensity):
        per_t = np.full(n, expected_user2_gap(channel))
    else:
        g = np.broadcast_to(np.asarray(channel, dtype=float), (n,))
        per_t = _user2_gap_term(g)
    report = GapReport(user1_gap_bits=n / 2 * math.log2(2),
                       user2_gap_bits=float(per_t.sum()), per_time_user2=per_t)
    return paper_floor(x), report


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Per-symbol power xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class ModReduction:
    """
    ``X = per_symbol + offset`` with ``per_symbol = X mod Q``.

    ``offset = Q * (quotient - negative)`` where ``quotient`` is the
    toward-zero integer part of ``X / Q`` and ``negative`` flags negative X
    that are not multiples of Q.
    """
    Q: int
    per_symbol: np.ndarray
    offset: np.ndarray
    quotient: np.ndarray
    negative: np.ndarray
    identity_ok: bool
    literal_sign_exceptions: np.ndarray   # X < 0 with Q | X


def mod_reduce(x, P):
    x = np.asarray(x, dtype=np.int64)
    Q = ceil_sqrt(P)
    per_symbol = np.mod(x, Q)
    offset = x - per_symbol
    quotient = np.sign(x) * (np.abs(x) // Q)
    negative = (x < 0) & (per_symbol != 0)
    identity_ok = bool(np.all(Q * quotient - Q * negative + per_symbol == x))
    exceptions = (x < 0) & (per_symbol == 0)
    return ModReduction(Q, per_symbol, offset, quotient, negative.astype(np.int64),
                        identity_ok, exceptions)


def offset_slack(x1, x2, g, P):
    """
    Slack ``Delta(t)`` left when splitting the user-2 output of the
    per-codeword channel into its per-symbol part and its offset part.
    """
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    r1, r2 = mod_reduce(x1, P), mod_reduce(x2, P)
    full = floor_products(g, x1) + x2
    per_symbol = floor_products(g, r1.per_symbol) + r2.per_symbol
    offset = floor_products(g, r1.offset) + r2.offset
    return full - per_symbol - offset


def offset_entropy_bound(p_t, n):
    """
    Bound (bits) on the entropy of the toward-zero quotient ``X // Q`` at one
    time slot, given the per-time power fraction ``p_t = E[X^2] / (nP)``.
    """
    if not 0.0 <= p_t <= 1.0:
        raise ValueError("p_t must lie in [0, 1]")
    npt = n * p_t
    return (3 + 4 * max(1.0, npt)) / E_LN2 + 6 * npt + 2 / E_LN2


def offset_entropy_bound_total(n):
    """Bound on ``sum_t H(offset(t))`` when the power fractions sum to at most 1."""
    return n * (1 + 13 / E_LN2 + 6)


def offset_entropies(support, pmf, P):
    """
    Exact entropies (bits) of the offset and of the quotient for an integer
    input with the given pmf.

    Returns ``(H_offset, H_quotient, second_moment)``.
    """
    from .entropy import entropy_bits

    support = np.asarray(support, dtype=np.int64)
    pmf = np.asarray(pmf, dtype=float)
    r = mod_reduce(support, P)

    def _h(labels):
        _, inv = np.unique(labels, return_inverse=True)
        return entropy_bits(np.bincount(inv.ravel(), weights=pmf))

    return _h(r.offset), _h(r.quotient), float(np.sum(pmf * support.astype(float) ** 2))
