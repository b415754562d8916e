"""Fourier transforms of indicator functions and decay diagnostics.

Two evaluation paths:

* ``chi_hat_slice`` integrates the slice function S(t) against e^(-2 pi i s t),
  which is the transform on the vertical axis.
* ``chi_hat_2d`` uses the divergence theorem,
  chi_hat(zeta) = -(2 pi i |zeta|^2)^-1 * boundary integral of
  (zeta . nu) e^(-2 pi i zeta . z), with the boundary parametrised by the
  polar angle (the body must contain the origin).

Both use composite Gauss panels.  The slice path is graded toward the poles,
where S(t) behaves like (t - t_pole)^(1/gamma); the boundary path is graded
toward the flat points.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _quadrature as quad
from .bodies import RotatedBody

MAX_NODES = 10**8


@dataclass(frozen=True)
class FourierSample:
    zeta: tuple
    value: complex


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    intercept: float
    r2: float
    window: tuple
    n: int


def _graded(body, ratio=0.15):
    t0, t1 = body.t_range
    edges = quad.graded_edges(t0, t1, ratio=ratio, floor=1e-16, interior=8)
    return quad.refine_edges(edges, (t1 - t0) / 32)


def chi_hat_slice(body, s):
    """int S(t) e^(-2 pi i s t) dt with panels no wider than 1/(8|s|)."""
    s = float(s)
    edges = _graded(body)
    if s != 0:
        n_est = (body.t_range[1] - body.t_range[0]) * 8 * abs(s) * quad.GAUSS_ORDER
        if n_est > MAX_NODES:
            raise ValueError(f"frequency {s} needs more than {MAX_NODES} nodes")
        edges = quad.refine_edges(edges, 1.0 / (8 * abs(s)))
    t, w = quad.panel_nodes(edges)
    S = body.width(t)
    if s == 0:
        return complex(np.dot(S, w))
    return complex(np.dot(S * np.exp(-2j * math.pi * s * t), w))


# ---------------------------------------------------------------------------
# Boundary integral
# ---------------------------------------------------------------------------

def _radius(body, phi):
    """Boundary distance from the origin along the rays at angles ``phi``."""
    u, v = np.cos(phi), np.sin(phi)
    inside = np.zeros_like(phi)
    outside = np.full_like(phi, body.radius * (1 + 1e-12) + 1e-12)
    for _ in range(50):
        mid = 0.5 * (inside + outside)
        hit = body.level(mid * u, mid * v) <= 0
        inside = np.where(hit, mid, inside)
        outside = np.where(hit, outside, mid)
    return 0.5 * (inside + outside)


def _boundary_points(body, phi):
    """Boundary points z(phi) and their phi-derivatives."""
    u, v = np.cos(phi), np.sin(phi)
    r = _radius(body, phi)
    x, y = r * u, r * v
    gx, gy = body.grad_level(x, y)
    # d/dphi level(r u) = 0  =>  r' = -r (grad . u_perp) / (grad . u)
    dr = -r * (-gx * v + gy * u) / (gx * u + gy * v)
    return x, y, dr * u - r * v, dr * v + r * u


@lru_cache(maxsize=64)
def _boundary_mesh(body, level):
    """Polar boundary mesh resolving frequencies |zeta| <= 2^level.

    Panels in the angle are split until each boundary chord is at most
    2^-level long, so no panel sees more than one oscillation; they are also
    graded toward the flat points, where the boundary is least smooth.
    """
    scale = 2.0 ** level
    edges = [np.linspace(0.0, 2 * math.pi, 65)]
    for fp in body.flat_points:
        psi = math.atan2(fp.location[1], fp.location[0]) % (2 * math.pi)
        off = quad.geometric_offsets(2 * math.pi / 64, ratio=0.15, floor=1e-12)
        edges.append(np.clip(np.concatenate([psi - off, [psi], psi + off]), 0.0, 2 * math.pi))
    edges = np.unique(np.concatenate(edges))
    for _ in range(3):
        x, y, _, _ = _boundary_points(body, edges)
        chord = np.hypot(np.diff(x), np.diff(y))
        counts = np.ceil(chord * scale).astype(np.int64)
        if np.all(counts <= 1):
            break
        edges = quad.split_by_counts(edges, counts)
    if edges.size * quad.GAUSS_ORDER > MAX_NODES:
        raise ValueError("frequency too large for the quadrature budget")
    phi, w = quad.panel_nodes(edges)
    x, y, dx, dy = _boundary_points(body, phi)
    for arr in (x, y, dx, dy, w):
        arr.setflags(write=False)
    return x, y, dx, dy, w


def _level(norm):
    return max(3, int(math.ceil(math.log2(norm))))


def chi_hat_2d(body, zeta):
    """Fourier transform of the indicator of ``body`` at a nonzero frequency.

    Boundary integral over z(phi) = r(phi)(cos phi, sin phi), where the
    outward normal line element is nu dsigma = (y', -x') dphi.
    """
    zeta = np.asarray(zeta, dtype=float)
    if isinstance(body, RotatedBody):
        # chi_{sigma B}(zeta) = chi_B(sigma^-1 zeta)
        c, s = math.cos(body.theta), math.sin(body.theta)
        inner = np.array([c * zeta[0] + s * zeta[1], -s * zeta[0] + c * zeta[1]])
        return chi_hat_2d(body.inner, inner)
    z1, z2 = float(zeta[0]), float(zeta[1])
    norm2 = z1 * z1 + z2 * z2
    if norm2 == 0:
        raise ValueError("zeta = 0: use the area instead")
    x, y, dx, dy, w = _boundary_mesh(body, _level(math.sqrt(norm2)))
    integrand = (z1 * dy - z2 * dx) * np.exp(-2j * math.pi * (z1 * x + z2 * y))
    return complex(-np.dot(integrand, w) / (2j * math.pi * norm2))


def fourier_samples(body, zetas):
    return [FourierSample(tuple(map(float, z)), chi_hat_2d(body, z)) for z in zetas]


# ---------------------------------------------------------------------------
# Two-term expansion at a pair of flat points
# ---------------------------------------------------------------------------

def sezioni_expansion(flatP, flatQ, s, direction=None):
    """Leading contributions of the two poles to the axis transform at s.

    ``direction`` is the axis Theta (default: outward normal at Q).
    """
    s = float(s)
    if s == 0:
        raise ValueError("s must be nonzero")
    theta = np.asarray(flatQ.normal if direction is None else direction, dtype=float)
    sg = math.copysign(1.0, s)
    out = 0j
    for fp, sign in ((flatP, -1.0), (flatQ, 1.0)):
        a = 1.0 / fp.order
        mag = fp.g0 * math.gamma(a + 1) * (2 * math.pi) ** (-a - 1) * abs(s) ** (-1 - a)
        phase = -2 * math.pi * s * float(theta @ np.asarray(fp.location)) \
            + sign * 0.5 * math.pi * (a + 1) * sg
        out += mag * np.exp(1j * phase)
    return complex(out)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------

def decay_fit(samples, window=None):
    """Least squares line through (log x, log y).

    ``samples`` is a sequence of (x, y) pairs or a pair of arrays; ``window``
    restricts x to [lo, hi].
    """
    x, y = _unpack(samples)
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
    if x.size < 8:
        raise ValueError(f"need at least 8 samples in the window, got {x.size}")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + icpt)
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - float(np.sum(resid ** 2)) / sst)
    return ScalingFit(float(slope), float(icpt), r2, (float(x.min()), float(x.max())), int(x.size))


def _unpack(samples):
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1:
        x, y = samples
    else:
        arr = np.asarray(samples, dtype=float)
        x, y = arr[:, 0], arr[:, 1]
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def envelope(x, y, windows=8, min_per_window=4):
    """Largest y in each of ``windows`` equal log-x windows, with its x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    edges = np.exp(np.linspace(np.log(x.min()), np.log(x.max()), windows + 1))
    ex, ey = [], []
    for i in range(windows):
        upper = x <= edges[i + 1] if i == windows - 1 else x < edges[i + 1]
        sel = (x >= edges[i]) & upper
        if sel.sum() < min_per_window:
            raise ValueError(f"window {i} has {sel.sum()} samples (< {min_per_window})")
        j = np.argmax(np.where(sel, y, -np.inf))
        ex.append(x[j])
        ey.append(y[j])
    return np.array(ex), np.array(ey)


def envelope_fit(x, y, windows=8):
    ex, ey = envelope(x, y, windows)
    return decay_fit((ex, ey))


# ---------------------------------------------------------------------------
# Decay regimes
# ---------------------------------------------------------------------------

@dataclass
class RegimeResult:
    regime: str
    fit: ScalingFit
    bound: float
    passed: bool
    directions: list
    samples: list = field(repr=False, default_factory=list)


def regime_bounds(gamma, d=2):
    """Decay exponents in |zeta| of the three upper bounds.

    The intermediate bound |xi|^(-(d-1)(g-2)/(2(g-1))) |s|^(-(d-1)/(2(g-1))-1)
    is read along a direction with fixed |xi|/|s|.
    """
    g = float(gamma)
    normal = -1 - (d - 1) / g
    inter = -(d - 1) * (g - 2) / (2 * (g - 1)) - (d - 1) / (2 * (g - 1)) - 1
    return {"normal": normal, "intermediate": inter, "tangential": -(d + 1) / 2}


def default_directions(body, ratio=1.0):
    """Normal, intermediate (|xi|/|s| = ratio) and tangential unit directions."""
    if body.flat_points:
        fp = max(body.flat_points, key=lambda f: f.normal[1])
        theta = np.asarray(fp.normal, dtype=float)
    else:
        theta = np.array([0.0, 1.0])
    perp = np.array([-theta[1], theta[0]])
    mix = [(theta + ratio * perp), (theta - ratio * perp)]
    return {
        "normal": [theta],
        "intermediate": [m / np.linalg.norm(m) for m in mix],
        "tangential": [perp],
    }


def default_s_grid(lo=16.0, hi=1024.0, n=160):
    return np.exp(np.linspace(np.log(lo), np.log(hi), n))


def regime_report(body, gamma, s_grid=None, direction_set=None, windows=8, slack=0.15):
    """Envelope decay exponents per regime, checked against the upper bounds."""
    s_grid = default_s_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if s_grid.size < 4 * windows:
        raise ValueError(f"need at least {4 * windows} samples, got {s_grid.size}")
    direction_set = default_directions(body) if direction_set is None else direction_set
    bounds = regime_bounds(gamma)
    out = {}
    for regime, dirs in direction_set.items():
        xs, ys, samples = [], [], []
        for u in dirs:
            u = np.asarray(u, dtype=float) / np.linalg.norm(u)
            for s in s_grid:
                v = chi_hat_2d(body, s * u)
                samples.append(FourierSample(tuple(s * u), v))
                xs.append(s)
                ys.append(abs(v))
        # one envelope per direction set: windows over |zeta|, max across directions
        fit = envelope_fit(np.array(xs), np.array(ys), windows)
        b = bounds[regime]
        out[regime] = RegimeResult(regime, fit, b, fit.exponent <= b + slack,
                                   [tuple(map(float, u)) for u in dirs], samples)
    return out


# ---------------------------------------------------------------------------
# Parseval
# ---------------------------------------------------------------------------

@dataclass
class ParsevalResult:
    value: float
    tail: float
    K: int
    terms: int


def parseval_l2(body, R, K=64, decay=-1.5):
    """R^4 sum_{0 < |m| <= K} |chi_hat(R m)|^2, the squared torus L^2 norm.

    Only half of the frequencies are evaluated (chi_hat(-zeta) is the
    conjugate of chi_hat(zeta)).  The tail beyond K is estimated by fitting
    c |zeta|^decay to the outer half shell and integrating c^2 |zeta|^(2 decay)
    over |m| > K.
    """
    if K < 16:
        raise ValueError("K must be at least 16")
    m1, m2 = np.meshgrid(np.arange(-K, K + 1), np.arange(0, K + 1), indexing="ij")
    r2 = m1 ** 2 + m2 ** 2
    half = (r2 > 0) & (r2 <= K * K) & ((m2 > 0) | (m1 > 0))
    ms = np.column_stack([m1[half], m2[half]])
    # evaluate by increasing |m| so meshes are built once per octave
    order = np.argsort(r2[half], kind="stable")
    ms = ms[order]
    vals = np.array([abs(chi_hat_2d(body, R * m)) ** 2 for m in ms])
    total = 2 * math.fsum(vals) * R ** 4
    rad = np.sqrt((ms ** 2).sum(axis=1))
    shell = rad > K / 2
    c2 = float(np.mean(vals[shell] / (R * rad[shell]) ** (2 * decay)))
    p = 2 * decay + 2
    tail = R ** 4 * c2 * R ** (2 * decay) * 2 * math.pi * K ** p / (-p) if p < 0 else math.inf
    return ParsevalResult(total, tail, K, int(2 * ms.shape[0]))


def disk_chi_hat(zeta_norm):
    """Closed form J1(2 pi r)/r for the unit disk."""
    from scipy.special import j1

    r = np.asarray(zeta_norm, dtype=float)
    return np.where(r == 0, math.pi, j1(2 * math.pi * r) / np.where(r == 0, 1.0, r))
