"""
Exact integration over a channel coefficient for functions of
``floor(G * x)``.

For a fixed set of integer multipliers the map ``G -> floor(G * x)`` is
constant between consecutive points ``k / x``; enumerating those
breakpoints turns expectations over G into finite sums.
"""

import numpy as np

from .deterministic import floor_products


def breakpoints(xs, lo, hi):
    """Sorted points ``k / x`` strictly inside ``(lo, hi)`` for nonzero ``x`` in ``xs``."""
    pts = []
    for x in np.unique(np.abs(np.asarray(xs, dtype=np.int64))):
        if x == 0:
            continue
        k = np.arange(int(np.floor(lo * x)), int(np.ceil(hi * x)) + 1)
        p = k / x
        pts.append(p[(p > lo) & (p < hi)])
    if not pts:
        return np.empty(0)
    return np.unique(np.concatenate(pts))


def cells(xs, density):
    """
    Cells of constancy over the density's support.

    Returns ``(edges, weights, midpoints)``; ``weights`` are the exact
    probability masses of the cells.
    """
    edges = np.concatenate([[density.lo], breakpoints(xs, density.lo, density.hi),
                            [density.hi]])
    cdf = np.asarray(density.cdf(edges), dtype=float)
    weights = np.maximum(np.diff(cdf), 0.0)
    weights = weights / weights.sum()
    mids = 0.5 * (edges[:-1] + edges[1:])
    return edges, weights, mids


def floor_difference_distribution(xa, xb, density):
    """Law of ``floor(G xa) - floor(G xb)`` as ``{value: probability}``."""
    _, w, mids = cells([xa, xb], density)
    diff = floor_products(mids, xa) - floor_products(mids, xb)
    out = {}
    for c, p in zip(diff.tolist(), w.tolist()):
        if p > 0:
            out[c] = out.get(c, 0.0) + p
    return out
