"""Composite Gauss-Legendre panels with geometric grading toward endpoints."""

from functools import lru_cache

import numpy as np

GAUSS_ORDER = 16


@lru_cache(maxsize=8)
def gauss_rule(n=GAUSS_ORDER):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def geometric_offsets(length, ratio=0.2, floor=1e-15):
    """Offsets ``length * ratio**k`` down to ``floor * length``, decreasing."""
    n = int(np.ceil(np.log(floor) / np.log(ratio)))
    return length * ratio ** np.arange(n + 1)


def graded_edges(a, b, grade_left=True, grade_right=True, ratio=0.2, floor=1e-15,
                 interior=4):
    """Panel edges on [a, b], geometrically refined toward graded endpoints.

    The central part is split into ``interior`` equal panels; each graded end
    gets panels [e*r^(k+1), e*r^k] relative to the endpoint, where e is a
    quarter of the interval.
    """
    length = b - a
    if length <= 0:
        return np.array([a, b], dtype=float)
    quarter = 0.25 * length
    lo = a + quarter if grade_left else a
    hi = b - quarter if grade_right else b
    parts = [np.linspace(lo, hi, interior + 1)]
    if grade_left:
        parts.append(a + geometric_offsets(quarter, ratio, floor))
        parts.append([a])
    if grade_right:
        parts.append(b - geometric_offsets(quarter, ratio, floor))
        parts.append([b])
    return np.unique(np.concatenate([np.atleast_1d(p) for p in parts]))


def refine_edges(edges, max_width):
    """Split every panel wider than ``max_width`` into equal sub-panels."""
    edges = np.asarray(edges, dtype=float)
    widths = np.diff(edges)
    counts = np.maximum(1, np.ceil(widths / max_width).astype(np.int64))
    if np.all(counts == 1):
        return edges
    starts = np.repeat(edges[:-1], counts)
    step = np.repeat(widths / counts, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.append(starts + offs * step, edges[-1])


def split_by_counts(edges, counts):
    """Split panel i into ``counts[i]`` equal pieces."""
    edges = np.asarray(edges, dtype=float)
    counts = np.maximum(1, np.asarray(counts, dtype=np.int64))
    widths = np.diff(edges)
    starts = np.repeat(edges[:-1], counts)
    step = np.repeat(widths / counts, counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return np.append(starts + offs * step, edges[-1])


def panel_nodes(edges, order=GAUSS_ORDER):
    """Return flattened (nodes, weights) for composite Gauss on ``edges``."""
    x, w = gauss_rule(order)
    edges = np.asarray(edges, dtype=float)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def integrate(f, edges, order=GAUSS_ORDER):
    nodes, weights = panel_nodes(edges, order)
    return np.dot(f(nodes), weights)
