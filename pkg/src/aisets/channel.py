"""
General and canonical MISO broadcast channel models, bounded channel
densities, CSIT descriptions and the reduction from a general 2x2 channel
to the unit-diagonal canonical form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import ndtr

FAMILIES = ("uniform", "truncated_gaussian", "quantized_posterior")
DEFAULT_M = 4.0


class ChannelBoundError(ValueError):
    """A channel coefficient falls outside the admissible [1/M, M] range."""


class DegenerateChannelError(ChannelBoundError):
    """The channel matrix determinant violates its bound."""


class DegenerateDensityError(ValueError):
    """The channel law puts mass on a zero-measure set, so no finite peak exists."""


class PrecisionExhaustedError(ValueError):
    """A quantization cell is narrower than floating point can resolve."""


def _in_bounds(values, M):
    a = np.abs(np.asarray(values, dtype=float))
    return bool(np.all((a >= 1.0 / M) & (a <= M)))


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Densities xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class ChannelDensity:
    """
    Bounded density of one unknown channel coefficient.

    Parameters
    ----------
    family : str
        One of ``uniform``, ``truncated_gaussian`` or ``quantized_posterior``.
        A quantized posterior is uniform over its quantization cell.
    lo, hi : float
        Support interval, ``lo < hi``.
    mean, std : float, optional
        Location and scale of the untruncated Gaussian (truncated family only).
    alpha : float
        CSIT scaling exponent in [0, 1].
    P : float, optional
        Power at which the density was instantiated.
    C : float, optional
        Constant of the peak-scaling witness ``f_max <= C * P**(alpha/2)``.
        Checked only when both ``C`` and ``P`` are given.
    bits : int, optional
        Feedback bits that produced a quantized posterior.
    parent : tuple, optional
        Support of the prior a quantized posterior was cut from.
    """
    family: str
    lo: float
    hi: float
    mean: Optional[float] = None
    std: Optional[float] = None
    alpha: float = 0.0
    P: Optional[float] = None
    C: Optional[float] = None
    bits: Optional[int] = None
    parent: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            if self.family in ("atomic", "finite_state", "point_mass"):
                raise DegenerateDensityError(
                    f"'{self.family}' channel law is atomic: a zero-measure set "
                    "carries non-zero probability, so no bounded f_max exists")
            raise ValueError(f"unknown density family {self.family!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("density support must be finite")
        if not self.lo < self.hi:
            raise DegenerateDensityError(
                f"support [{self.lo}, {self.hi}] has zero length; the law is atomic")
        if self.family == "truncated_gaussian":
            if self.mean is None or self.std is None or not self.std > 0:
                raise ValueError("truncated_gaussian needs mean and std > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.C is not None and self.P is not None:
            if self.f_max > self.C * self.P ** (self.alpha / 2) * (1 + 1e-12):
                raise ValueError(
                    f"f_max={self.f_max:g} exceeds C*P^(alpha/2)="
                    f"{self.C * self.P ** (self.alpha / 2):g}")

    # ---------------------------------------------------------------------
    @classmethod
    def uniform(cls, lo, hi, **kw):
        return cls("uniform", float(lo), float(hi), **kw)

    @classmethod
    def truncated_gaussian(cls, mean, std, lo, hi, **kw):
        return cls("truncated_gaussian", float(lo), float(hi), mean=float(mean),
                   std=float(std), **kw)

    @classmethod
    def scaled_uniform(cls, center, alpha, P, C=1.0):
        """Uniform density with peak exactly ``C * P**(alpha/2)`` (at least 1)."""
        peak = max(1.0, C * P ** (alpha / 2))
        w = 1.0 / peak
        return cls("uniform", center - w / 2, center + w / 2, alpha=alpha, P=P, C=C)

    @classmethod
    def from_spec(cls, spec: dict, P=None):
        """Build from a config mapping (``family`` plus family parameters)."""
        spec = dict(spec)
        family = spec.pop("family").replace("-", "_")
        if family in ("atomic", "finite_state", "point_mass"):
            states = spec.get("states", [])
            raise DegenerateDensityError(
                f"finite-state channel law with {len(states)} atoms has no density; "
                "a zero-measure set carries non-zero probability")
        lo, hi = spec.pop("support", (spec.pop("lo", None), spec.pop("hi", None)))
        return cls(family, float(lo), float(hi), P=spec.pop("P", P), **spec)

    # ---------------------------------------------------------------------
    @property
    def width(self):
        return self.hi - self.lo

    def _tn(self):
        a = (self.lo - self.mean) / self.std
        b = (self.hi - self.mean) / self.std
        return stats.truncnorm(a, b, loc=self.mean, scale=self.std)

    @property
    def peak(self):
        """Supremum of the density over its support."""
        if self.family == "truncated_gaussian":
            return float(self._tn().pdf(min(max(self.mean, self.lo), self.hi)))
        return 1.0 / self.width

    @property
    def f_max(self):
        return max(1.0, self.peak)

    def pdf(self, g):
        g = np.asarray(g, dtype=float)
        if self.family == "truncated_gaussian":
            return self._tn().pdf(g)
        return np.where((g >= self.lo) & (g <= self.hi), 1.0 / self.width, 0.0)

    def cdf(self, g):
        g = np.asarray(g, dtype=float)
        if self.family == "truncated_gaussian":
            return self._tn().cdf(g)
        return np.clip((g - self.lo) / self.width, 0.0, 1.0)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "truncated_gaussian":
            return self._tn().ppf(u)
        return self.lo + u * self.width

    def interval_probability(self, lo, hi):
        """Probability mass of ``[lo, hi]`` intersected with the support."""
        if lo > hi:
            raise ValueError("interval_probability needs lo <= hi")
        lo, hi = max(lo, self.lo), min(hi, self.hi)
        if lo >= hi:
            return 0.0
        if self.family == "truncated_gaussian":
            tn = self._tn()
            # sf difference is more accurate in the upper tail
            if lo > self.mean:
                return float(max(tn.sf(lo) - tn.sf(hi), 0.0))
            return float(max(tn.cdf(hi) - tn.cdf(lo), 0.0))
        return (hi - lo) / self.width

    def sample(self, rng, size=None):
        return self.ppf(rng.random(size))

    def sample_sequence(self, rng, n, size=(), rho=0.0):
        """
        Draw ``size`` sequences of ``n`` coefficients.

        ``rho = 0`` gives i.i.d. draws. Otherwise the sequence is an AR(1)
        Gaussian process pushed through this density's quantile function,
        which keeps the marginal law unchanged.
        """
        size = (size,) if np.isscalar(size) else tuple(size)
        if rho == 0.0:
            return self.sample(rng, size + (n,))
        if not -1.0 < rho < 1.0:
            raise ValueError("rho must lie in (-1, 1)")
        z = np.empty(size + (n,))
        z[..., 0] = rng.standard_normal(size)
        s = math.sqrt(1.0 - rho * rho)
        for t in range(1, n):
            z[..., t] = rho * z[..., t - 1] + s * rng.standard_normal(size)
        return self.ppf(ndtr(z))

    def check_support(self, M):
        if not (self.lo >= 1.0 / M - 1e-15 and self.hi <= M + 1e-15):
            raise ChannelBoundError(
                f"support [{self.lo}, {self.hi}] not inside [1/M, M] for M={M}")


def build_quantized_posterior(d: ChannelDensity, true_g, bits):
    """
    Posterior of ``d`` after ``bits`` of uniform quantized feedback.

    The support is split into ``2**bits`` equal cells; the posterior is the
    prior restricted to the cell holding ``true_g`` and renormalized.
    """
    bits = int(bits)
    if bits < 0:
        raise ValueError("bits must be >= 0")
    if not d.lo <= true_g <= d.hi:
        raise ValueError(f"true_g={true_g} outside support [{d.lo}, {d.hi}]")
    if bits == 0:
        return d
    ncell = 2 ** bits
    w = d.width / ncell
    scale = max(abs(d.lo), abs(d.hi))
    if bits >= 1023 or w <= 4 * np.finfo(float).eps * scale:
        raise PrecisionExhaustedError(
            f"{bits} bits gives cell width {w:g}, below float resolution at {scale:g}")
    idx = min(int((true_g - d.lo) / w), ncell - 1)
    lo, hi = d.lo + idx * w, d.lo + (idx + 1) * w
    if not lo < hi:
        raise PrecisionExhaustedError("quantization cell collapsed to a point")
    if d.family == "truncated_gaussian":
        return ChannelDensity("truncated_gaussian", lo, hi, mean=d.mean, std=d.std,
                              alpha=d.alpha, P=d.P, C=d.C, bits=bits,
                              parent=(d.lo, d.hi))
    parent = d.parent if d.family == "quantized_posterior" else (d.lo, d.hi)
    total = bits + (d.bits or 0) if d.family == "quantized_posterior" else bits
    return ChannelDensity("quantized_posterior", lo, hi, alpha=d.alpha, P=d.P, C=d.C,
                          bits=total, parent=parent)


def feedback_bits(alpha, P):
    """Feedback bits per coefficient, ``ceil((alpha/2) log2 P)``."""
    return max(0, math.ceil(alpha / 2 * math.log2(P) - 1e-12))


def interval_probability(d: ChannelDensity, lo, hi):
    return d.interval_probability(lo, hi)


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx CSIT xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class UserCsit:
    kind: str                       # "perfect" | "density"
    density: Optional[ChannelDensity] = None
    bits: Optional[int] = None      # quantizer budget per coefficient per symbol

    def __post_init__(self):
        if self.kind == "perfect":
            if self.density is not None:
                raise ValueError("a perfectly known user carries no density")
        elif self.kind == "density":
            if self.density is None:
                raise ValueError("density CSIT needs a ChannelDensity")
        else:
            raise ValueError(f"unknown CSIT kind {self.kind!r}")


@dataclass(frozen=True)
class CsitState:
    users: tuple

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))

    @property
    def K(self):
        return len(self.users)

    @classmethod
    def pn(cls, density: ChannelDensity, bits=None):
        """Perfect CSIT for user 1, finite precision for user 2."""
        return cls((UserCsit("perfect"), UserCsit("density", density, bits)))

    def density(self, k):
        return self.users[k].density


# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxx Channels xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
# xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx
@dataclass(frozen=True)
class GeneralChannel2x2:
    """Per-time real 2x2 channel ``G[t]`` with bound ``M`` and power ``P_tilde``."""
    G: np.ndarray
    M: float = DEFAULT_M
    P_tilde: float = 1.0

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        if G.ndim == 2:
            G = G[None]
        if G.shape[1:] != (2, 2):
            raise ValueError("G must have shape (n, 2, 2)")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)
        if not self.M > 1:
            raise ValueError("M must exceed 1")

    @property
    def n(self):
        return self.G.shape[0]

    @property
    def det(self):
        return np.linalg.det(self.G)

    def validate(self):
        if not _in_bounds(self.G, self.M):
            raise ChannelBoundError(
                f"|G_ij(t)| must lie in [1/M, M] = [{1 / self.M:g}, {self.M:g}]")
        det = self.G[:, 0, 0] * self.G[:, 1, 1] - self.G[:, 0, 1] * self.G[:, 1, 0]
        if not _in_bounds(det, self.M):
            raise DegenerateChannelError(
                f"|det G(t)| must lie in [1/M, M]; got min {np.abs(det).min():g}")
        return self


@dataclass(frozen=True)
class CanonicalChannel:
    """
    Canonical K-user channel: row k sees ``sum_{j<k} G[t,k,j] X_j + X_k``.

    Only the strictly lower triangle of ``coeffs`` (shape ``(n, K, K)``) is
    used; the unit diagonal is implicit and the upper part must be zero.
    """
    coeffs: np.ndarray
    M: float = DEFAULT_M
    P: float = 1.0
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError("coeffs must have shape (n, K, K)")
        K = c.shape[1]
        low = np.tril(np.ones((K, K), bool), -1)
        if np.any(c[:, ~low] != 0):
            raise ValueError("diagonal and upper entries are implicit and must be zero")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.check and K > 1 and not _in_bounds(c[:, low], self.M):
            raise ChannelBoundError(
                f"canonical |G_kj(t)| must lie in [1/M, M] for M={self.M:g}")

    @classmethod
    def two_user(cls, g, M=DEFAULT_M, P=1.0, check=True):
        g = np.atleast_1d(np.asarray(g, dtype=float))
        c = np.zeros((g.size, 2, 2))
        c[:, 1, 0] = g
        return cls(c, M, P, check)

    @classmethod
    def from_lower(cls, K, entries, M=DEFAULT_M, P=1.0, check=True):
        """``entries`` maps ``(k, j)`` (0-based, j<k) to a length-n sequence."""
        entries = {kj: np.atleast_1d(np.asarray(v, float)) for kj, v in entries.items()}
        n = len(next(iter(entries.values()))) if entries else 1
        c = np.zeros((n, K, K))
        for (k, j), v in entries.items():
            if not j < k:
                raise ValueError("only j < k entries are stored")
            c[:, k, j] = v
        return cls(c, M, P, check)

    @classmethod
    def sample(cls, K, n, densities: Sequence, rng, M=DEFAULT_M, P=1.0, rho=0.0):
        """
        Draw one realization. ``densities[k]`` is the law of every unknown
        coefficient of user ``k`` (entries for k=0 are ignored).
        """
        c = np.zeros((n, K, K))
        for k in range(1, K):
            for j in range(k):
                c[:, k, j] = densities[k].sample_sequence(rng, n, rho=rho)
        return cls(c, M, P, check=False)

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def K(self):
        return self.coeffs.shape[1]

    def gain(self, k, j):
        """Coefficient sequence from input j to user k, with ``G_kk = 1``."""
        if j == k:
            return np.ones(self.n)
        return self.coeffs[:, k, j]

    def matrix(self, t):
        return self.coeffs[t] + np.eye(self.K)


@dataclass(frozen=True)
class InputTransform:
    """Per-time invertible map between general and canonical inputs."""
    G: np.ndarray

    @property
    def det(self):
        G = self.G
        return G[:, 0, 0] * G[:, 1, 1] - G[:, 0, 1] * G[:, 1, 0]

    def forward(self, x_tilde):
        """General inputs ``(2, n)`` to canonical inputs ``(2, n)``."""
        xt = np.asarray(x_tilde, dtype=float)
        G = self.G
        x1 = G[:, 0, 0] * xt[0] + G[:, 0, 1] * xt[1]
        x2 = (self.det / G[:, 0, 0]) * xt[1]
        return np.stack([x1, x2])

    def inverse(self, x):
        x = np.asarray(x, dtype=float)
        G, det = self.G, self.det
        xt1 = x[0] / G[:, 0, 0] - (G[:, 0, 1] / det) * x[1]
        xt2 = (G[:, 0, 0] / det) * x[1]
        return np.stack([xt1, xt2])

    def power_gain(self):
        """Per-time bound ``G11^2 + G12^2 + (det/G11)^2`` on the power ratio."""
        G = self.G
        return G[:, 0, 0] ** 2 + G[:, 0, 1] ** 2 + (self.det / G[:, 0, 0]) ** 2


def canonical_power(P_tilde, M):
    return (2 * M ** 2 + M ** 4) * P_tilde


def reduce_to_canonical(g: GeneralChannel2x2):
    """
    Reduce a general 2x2 channel to the canonical form.

    The transmitter is assumed to know user 1's channel and the determinant,
    so the canonical cross gain is ``G21/G11``, bounded by ``M**2``, and the
    canonical power budget is ``(2M^2 + M^4) P_tilde``.

    Returns
    -------
    (CanonicalChannel, InputTransform)
    """
    g.validate()
    G = g.G
    cross = G[:, 1, 0] / G[:, 0, 0]
    canon = CanonicalChannel.two_user(cross, M=g.M ** 2, P=canonical_power(g.P_tilde, g.M))
    return canon, InputTransform(G)
