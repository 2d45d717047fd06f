"""Slope and limit fits on log-power axes."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class DofEstimate:
    slope: float
    stderr: float
    intercept: float
    ci95: tuple


def slope_fit(P, R, min_points=4, min_decades=4.0):
    """
    Least-squares slope of rate ``R`` (bits) against ``(1/2) log2 P``.

    Refuses curves with fewer than ``min_points`` points or spanning fewer
    than ``min_decades`` decades of P.
    """
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    if P.size < min_points:
        raise ValueError(f"slope_fit needs at least {min_points} points, got {P.size}")
    if np.log10(P.max() / P.min()) < min_decades - 1e-9:
        raise ValueError(f"slope_fit needs P to span {min_decades} decades")
    x = 0.5 * np.log2(P)
    res = stats.linregress(x, R)
    se = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    q = stats.t.ppf(0.975, P.size - 2) if P.size > 2 else float("inf")
    return DofEstimate(float(res.slope), se, float(res.intercept),
                       (float(res.slope - q * se), float(res.slope + q * se)))


def exponent_fit(P, power):
    """Slope of ``log power`` against ``log P``."""
    res = stats.linregress(np.log(np.asarray(P, float)), np.log(np.asarray(power, float)))
    return float(res.slope)


def extrapolate_limit(P, ratios):
    """
    Limit as P -> inf of a normalized log quantity.

    Fits ``a + b log2(ln P)/log2 P + c / log2 P``, the shape of a
    ``log(f_max^n (log P)^n)`` numerator over a ``log P`` normalizer, and
    returns ``a``. Needs at least three distinct P values.
    """
    P = np.asarray(P, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if np.unique(P).size < 3:
        raise ValueError("need at least three distinct P values to fit a limit")
    L = np.log2(P)
    A = np.column_stack([np.ones_like(L), np.log2(np.log(P)) / L, 1.0 / L])
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    return float(coef[0])


def normalizer(n, P):
    """``(n/2) log2 P``: bits carried by n real symbols at one DoF."""
    return n / 2 * math.log2(P)
