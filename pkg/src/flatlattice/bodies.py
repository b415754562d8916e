"""Convex planar bodies described by their horizontal chords.

Every body is stored through its slice extents along the lattice row axis:
for a height ``t`` the body meets the line ``{(x, t)}`` in the closed interval
``[x_lo(t), x_hi(t)]``.  Counting and sweeping only ever need these chords.

Built-in kinds
--------------
disk            unit disk
gen_ellipse     {|x|^g + t^2 <= 1}, flat points (0, -1) and (0, 1) of order g
superellipse    {|x|^g + |t|^g <= 1}, four flat points for g > 2
rotated         a rotation of another body; chords found by bisection
profile         {Phi(x) + t^2 <= 1} for a user supplied convex Phi
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from . import _quadrature as quad

BISECTION_TOL = 1e-13
_SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Flat point metadata
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatPoint:
    """A boundary point where the boundary is a graph comparable to |x|^order.

    ``normal`` is the outward unit normal.  ``m0`` is the shortest nonzero
    integer vector on the line spanned by ``normal`` (``None`` when that
    direction is irrational); both points of an opposite pair share it, so
    ``m0`` points along the outward normal of the upper/right member.
    """

    location: tuple
    normal: tuple
    order: float
    g0: float
    m0: Optional[tuple] = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.hypot(*n) - 1.0) > 1e-12:
            raise ValueError(f"normal must be a unit vector, got {self.normal}")
        if not self.order > 1:
            raise ValueError(f"flat point order must exceed 1, got {self.order}")
        if not self.g0 > 0:
            raise ValueError(f"g0 must be positive, got {self.g0}")
        if self.m0 is not None:
            m = np.asarray(self.m0, dtype=float)
            if not np.any(m):
                raise ValueError("m0 must be nonzero")
            if gcd(int(self.m0[0]), int(self.m0[1])) != 1:
                raise ValueError(f"m0 {self.m0} is not primitive")
            u = m / np.hypot(*m)
            if min(np.abs(u - n).max(), np.abs(u + n).max()) > 1e-12:
                raise ValueError(f"m0 {self.m0} is not parallel to normal {self.normal}")

    @property
    def exponent(self):
        """(d - 1) / order with d = 2."""
        return 1.0 / self.order


@dataclass(frozen=True)
class ProfileSpec:
    """Evaluators for a convex profile Phi with Phi(0) = 0, vectorised."""

    phi: Callable
    dphi: Callable
    d2phi: Callable
    gamma: float
    name: str = "profile"


@dataclass
class ClassReport:
    gamma: float
    min_hessian_ratio: float  # min |x|^(2-g) Phi''
    max_ratios: dict          # |alpha| -> max |x|^(|alpha|-g) |d^alpha Phi|
    passed: bool
    reason: str = ""
    lower_decade_min: float = float("nan")
    upper_decade_min: float = float("nan")


# ---------------------------------------------------------------------------
# Body classes
# ---------------------------------------------------------------------------

def _bisection_steps(width):
    return int(np.ceil(np.log2(max(width, BISECTION_TOL) / BISECTION_TOL)))


def _as_array(t):
    return np.asarray(t, dtype=float)


def _abs_pow(x, g):
    """|x|**g with a multiplication fast path for small integer g."""
    ax = np.abs(x)
    if g == 2:
        return ax * ax
    if g == 3:
        return ax * ax * ax
    if g == 4:
        y = ax * ax
        return y * y
    return ax ** g


class Body2D:
    """Base class.  Subclasses provide ``_extents`` and ``level``."""

    kind = "body"
    symmetric = False  # centrally symmetric with exactly mirrored chords
    radius = _SQRT2    # every point of the body lies within this distance of 0

    def __init__(self, t_range, flat_points=()):
        self.t_range = (float(t_range[0]), float(t_range[1]))
        self.flat_points = tuple(flat_points)
        self.area = self._quadrature_area()

    # -- geometry ----------------------------------------------------------
    def _extents(self, t):
        """Vectorised chord endpoints; NaN where the chord is empty."""
        raise NotImplementedError

    def level(self, x, t):
        """Convex function of the point, <= 0 exactly on the body."""
        raise NotImplementedError

    def contains(self, x, t):
        return self.level(_as_array(x), _as_array(t)) <= 0

    def extents(self, t):
        t = _as_array(t)
        lo, hi = self._extents(np.atleast_1d(t))
        if t.ndim == 0:
            return lo[0], hi[0]
        return lo, hi

    def width(self, t):
        lo, hi = self.extents(t)
        return np.where(np.isnan(lo), 0.0, hi - lo)

    def support_point(self, direction):
        """Point of the body maximising ``direction . z``.

        Generic version: the map t -> max over the chord of the linear form is
        concave, so a bounded scalar search over t finds it.
        """
        n = np.asarray(direction, dtype=float)
        t0, t1 = self.t_range

        def neg(t):
            lo, hi = self.extents(t)
            if np.isnan(lo):
                return np.inf
            return -(n[1] * t + max(n[0] * lo, n[0] * hi))

        res = optimize.minimize_scalar(neg, bounds=(t0, t1), method="bounded",
                                       options={"xatol": 1e-13})
        t = res.x
        for cand in (t0, t1):
            if neg(cand) < neg(t):
                t = cand
        lo, hi = self.extents(t)
        x = hi if n[0] * hi >= n[0] * lo else lo
        return np.array([x, t])

    def _quadrature_area(self):
        t0, t1 = self.t_range
        edges = quad.graded_edges(t0, t1, ratio=0.15, floor=1e-16, interior=8)
        edges = quad.refine_edges(edges, (t1 - t0) / 32)
        return float(quad.integrate(self.width, edges))

    def describe(self):
        return self.kind

    def __repr__(self):
        return f"<{self.describe()} area={self.area:.10g}>"


class Disk(Body2D):
    kind = "disk"
    symmetric = True
    radius = 1.0

    def __init__(self):
        super().__init__((-1.0, 1.0), ())

    def _extents(self, t):
        c = (1.0 - t) * (1.0 + t)
        x = np.sqrt(np.where(c >= 0, c, np.nan))
        return -x, x

    def level(self, x, t):
        return x * x + t * t - 1.0

    def grad_level(self, x, t):
        return 2 * x, 2 * t

    def support_point(self, direction):
        n = np.asarray(direction, dtype=float)
        return n / np.hypot(*n)


class GenEllipse(Body2D):
    kind = "gen_ellipse"
    symmetric = True

    def __init__(self, gamma):
        gamma = float(gamma)
        if not gamma > 1:
            raise ValueError(f"gen_ellipse needs gamma > 1, got {gamma}")
        self.gamma = gamma
        g0 = 2.0 ** (1.0 + 1.0 / gamma)
        flats = (
            FlatPoint((0.0, -1.0), (0.0, -1.0), gamma, g0, (0, 1)),
            FlatPoint((0.0, 1.0), (0.0, 1.0), gamma, g0, (0, 1)),
        )
        super().__init__((-1.0, 1.0), flats)

    def _extents(self, t):
        c = (1.0 - t) * (1.0 + t)
        x = np.where(c >= 0, np.abs(c), np.nan) ** (1.0 / self.gamma)
        return -x, x

    def level(self, x, t):
        return _abs_pow(x, self.gamma) + t * t - 1.0

    def grad_level(self, x, t):
        g = self.gamma
        return g * np.sign(x) * np.abs(x) ** (g - 1), 2 * t

    def support_point(self, direction):
        n1, n2 = np.asarray(direction, dtype=float) / np.hypot(*direction)
        g = self.gamma
        if n1 == 0:
            return np.array([0.0, np.sign(n2)])
        if n2 == 0:
            return np.array([np.sign(n1), 0.0])

        def h(mu):
            return (mu * abs(n1) / g) ** (g / (g - 1)) + (mu * n2 / 2) ** 2 - 1.0

        hi = 1.0
        while h(hi) < 0:
            hi *= 2.0
        mu = optimize.brentq(h, 0.0, hi, xtol=1e-16, rtol=1e-15, maxiter=500)
        u = np.sign(n1) * (mu * abs(n1) / g) ** (1.0 / (g - 1))
        return np.array([u, mu * n2 / 2])

    def describe(self):
        return f"gen_ellipse({self.gamma:g})"


class Superellipse(Body2D):
    kind = "superellipse"
    symmetric = True

    def __init__(self, gamma, flat=True):
        gamma = float(gamma)
        if not gamma > 1:
            raise ValueError(f"superellipse needs gamma > 1, got {gamma}")
        if flat and gamma <= 2:
            raise ValueError(
                f"superellipse({gamma:g}) has no flat points; pass flat=False")
        self.gamma = gamma
        flats = ()
        if flat:
            g0 = 2.0 * gamma ** (1.0 / gamma)
            flats = (
                FlatPoint((-1.0, 0.0), (-1.0, 0.0), gamma, g0, (1, 0)),
                FlatPoint((1.0, 0.0), (1.0, 0.0), gamma, g0, (1, 0)),
                FlatPoint((0.0, -1.0), (0.0, -1.0), gamma, g0, (0, 1)),
                FlatPoint((0.0, 1.0), (0.0, 1.0), gamma, g0, (0, 1)),
            )
        super().__init__((-1.0, 1.0), flats)

    def _extents(self, t):
        c = 1.0 - _abs_pow(t, self.gamma)
        x = np.where(c >= 0, np.abs(c), np.nan) ** (1.0 / self.gamma)
        return -x, x

    def level(self, x, t):
        return _abs_pow(x, self.gamma) + _abs_pow(t, self.gamma) - 1.0

    def grad_level(self, x, t):
        g = self.gamma
        return g * np.sign(x) * np.abs(x) ** (g - 1), g * np.sign(t) * np.abs(t) ** (g - 1)

    def support_point(self, direction):
        n = np.asarray(direction, dtype=float)
        n = n / np.hypot(*n)
        g = self.gamma
        q = g / (g - 1)
        norm = (np.abs(n[0]) ** q + np.abs(n[1]) ** q) ** (1.0 / g)
        return np.sign(n) * np.abs(n) ** (1.0 / (g - 1)) / norm

    def describe(self):
        return f"superellipse({self.gamma:g})"


class ProfileBody(Body2D):
    """{(x, t): Phi(x) + t^2 <= 1} for a convex profile with Phi(0) = 0.

    ``bounds`` = (b_left, b_right) must satisfy Phi(-b_left) >= 1 and
    Phi(b_right) >= 1 (the closure data); found by doubling when omitted.
    """

    kind = "profile"

    def __init__(self, spec, bounds=None, g0=None):
        self.spec = spec
        if bounds is None:
            bounds = (self._reach(-1.0), self._reach(1.0))
        self.bounds = (float(bounds[0]), float(bounds[1]))
        phi_l = float(spec.phi(np.array([-self.bounds[0]]))[0])
        phi_r = float(spec.phi(np.array([self.bounds[1]]))[0])
        if phi_l < 1 or phi_r < 1:
            raise ValueError("closure bounds must reach the level Phi = 1")
        self.radius = float(np.hypot(max(self.bounds), 1.0))
        # metadata needs chords, which only need spec and bounds
        self.t_range = (-1.0, 1.0)
        if g0 is None:
            u = 1e-10
            g0 = float(self.width(1.0 - u) / u ** (1.0 / spec.gamma))
        flats = (
            FlatPoint((0.0, -1.0), (0.0, -1.0), spec.gamma, g0, (0, 1)),
            FlatPoint((0.0, 1.0), (0.0, 1.0), spec.gamma, g0, (0, 1)),
        )
        super().__init__((-1.0, 1.0), flats)

    def _reach(self, sign):
        b = 1.0
        for _ in range(60):
            if float(self.spec.phi(np.array([sign * b]))[0]) >= 1:
                return b
            b *= 2.0
        raise ValueError("profile never reaches the level Phi = 1")

    def _solve(self, c, sign):
        # Phi is monotone on each side of 0; bisection on [0, b]
        b = self.bounds[1] if sign > 0 else self.bounds[0]
        lo = np.zeros_like(c)
        hi = np.full_like(c, b)
        for _ in range(_bisection_steps(b)):
            mid = 0.5 * (lo + hi)
            inside = self.spec.phi(sign * mid) <= c
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        return sign * 0.5 * (lo + hi)

    def _extents(self, t):
        c = (1.0 - t) * (1.0 + t)
        ok = c >= 0
        cc = np.where(ok, c, 0.0)
        lo = self._solve(cc, -1.0)
        hi = self._solve(cc, 1.0)
        return np.where(ok, lo, np.nan), np.where(ok, hi, np.nan)

    def level(self, x, t):
        return self.spec.phi(x) + t * t - 1.0

    def grad_level(self, x, t):
        return self.spec.dphi(x), 2 * t

    def describe(self):
        return f"profile({self.spec.name}, gamma={self.spec.gamma:g})"


class RotatedBody(Body2D):
    """The image of ``inner`` under the counterclockwise rotation by ``theta``.

    Chords are found by bisection on the inner body's level function along
    the row, bracketed by a point known to lie inside (on the segment joining
    the lowest and highest points) and the bounding radius.
    """

    kind = "rotated"

    def __init__(self, inner, theta, tan_ratio=None):
        self.inner = inner
        self.theta = float(theta)
        self.tan_ratio = tan_ratio
        self._c = np.cos(self.theta)
        self._s = np.sin(self.theta)
        self.radius = inner.radius
        self.symmetric = False
        self._bottom = self.support_point((0.0, -1.0))
        self._top = self.support_point((0.0, 1.0))
        flats = tuple(self._rotate_flat(fp) for fp in inner.flat_points)
        super().__init__((self._bottom[1], self._top[1]), flats)

    def _rot(self, v, sign=1.0):
        c, s = self._c, sign * self._s
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])

    def _rotate_flat(self, fp):
        loc = self._rot(fp.location)
        nrm = self._rot(fp.normal)
        nrm = nrm / np.hypot(*nrm)
        m0 = None
        if fp.m0 is not None and self.tan_ratio is not None:
            p, q = self.tan_ratio
            mx, my = fp.m0
            v = (q * mx - p * my, p * mx + q * my)
            g = gcd(int(v[0]), int(v[1]))
            v = (v[0] // g, v[1] // g)
            if np.dot(v, self._rot(fp.m0)) < 0:
                v = (-v[0], -v[1])
            m0 = (int(v[0]), int(v[1]))
            # snap the normal onto the exact rational direction
            u = np.asarray(m0, dtype=float) / np.hypot(*m0)
            nrm = u if np.dot(u, nrm) > 0 else -u
        return FlatPoint(tuple(loc), tuple(nrm), fp.order, fp.g0, m0)

    def level(self, x, t):
        c, s = self._c, self._s
        return self.inner.level(c * x + s * t, -s * x + c * t)

    def grad_level(self, x, t):
        c, s = self._c, self._s
        gu, gv = self.inner.grad_level(c * x + s * t, -s * x + c * t)
        return c * gu - s * gv, s * gu + c * gv

    def support_point(self, direction):
        return self._rot(self.inner.support_point(self._rot(direction, -1.0)))

    def _extents(self, t):
        t0, t1 = self.t_range
        span = t1 - t0
        frac = np.clip((t - t0) / span, 0.0, 1.0)
        x_in = self._bottom[0] + frac * (self._top[0] - self._bottom[0])
        ok = (t >= t0) & (t <= t1) & (self.level(x_in, t) <= 0)
        n = t.size
        tt = np.concatenate([t, t])
        inside = np.concatenate([x_in, x_in])
        r = self.radius * (1 + 1e-12) + 1e-12
        outside = np.concatenate([np.full(n, -r), np.full(n, r)])
        # fixed step count keeps every chord independent of the batch it is in
        for _ in range(_bisection_steps(2 * r)):
            mid = 0.5 * (inside + outside)
            hit = self.level(mid, tt) <= 0
            inside = np.where(hit, mid, inside)
            outside = np.where(hit, outside, mid)
        x = 0.5 * (inside + outside)
        lo = np.where(ok, x[:n], np.nan)
        hi = np.where(ok, x[n:], np.nan)
        return lo, hi

    def describe(self):
        return f"rotated({self.inner.describe()}, {self.theta:.12g})"


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def make_body(kind, params=None, **kwargs):
    """Build a body from a kind name and numeric parameters.

    >>> make_body("gen_ellipse", gamma=4).area  # doctest: +ELLIPSIS
    3.496...
    """
    p = dict(params or {})
    p.update(kwargs)
    if kind == "disk":
        return Disk()
    if kind == "gen_ellipse":
        return GenEllipse(_need(p, "gamma", kind))
    if kind == "superellipse":
        return Superellipse(_need(p, "gamma", kind), flat=p.get("flat", True))
    if kind == "profile":
        return ProfileBody(_need(p, "spec", kind), p.get("bounds"),
                           p.get("g0"))
    if kind == "rotated":
        inner = p.get("inner")
        if inner is None:
            inner = make_body(_need(p, "inner_kind", kind),
                              {k: v for k, v in p.items()
                               if k not in ("inner_kind", "theta", "tan_ratio")})
        return rotate_body(inner, _need(p, "theta", kind), p.get("tan_ratio"))
    raise ValueError(f"unknown body kind {kind!r}")


def _need(p, key, kind):
    if key not in p:
        raise ValueError(f"body kind {kind!r} needs parameter {key!r}")
    return p[key]


def rotate_body(body, theta, tan_ratio=None):
    """Rotate counterclockwise by ``theta``.

    ``tan_ratio=(p, q)`` declares tan(theta) = p/q exactly (q may be 0); only
    then are the rational normal generators m0 carried over.  A float angle on
    its own is treated as irrational.
    """
    if tan_ratio is not None:
        p, q = (int(v) for v in tan_ratio)
        if p == 0 and q == 0:
            raise ValueError("tan_ratio must be nonzero")
        ang = np.arctan2(p, q)
        diff = (theta - ang) % np.pi
        if min(diff, np.pi - diff) > 1e-12:
            raise ValueError(f"tan({theta}) is not {p}/{q}")
        tan_ratio = (p, q)
    return RotatedBody(body, theta, tan_ratio)


def slice_extents(body, t):
    """Closed chord {x : (x, t) in B} as (lo, hi), or None when empty."""
    lo, hi = body.extents(float(t))
    if np.isnan(lo):
        return None
    return float(lo), float(hi)


def slice_width(body, t):
    """Chord length S(t); zero outside the support."""
    w = body.width(t)
    return float(w) if np.ndim(w) == 0 else w


def area(body):
    return body.area


def flat_points(body):
    return list(body.flat_points)


def rational_tan(value, max_den=10**6):
    """Helper: (p, q) for a Fraction-like tangent."""
    f = Fraction(value).limit_denominator(max_den)
    return f.numerator, f.denominator


def verify_flat_class(profile, gamma=None, grid=None, b=0.5):
    """Check the two defining bounds of the class S_gamma on a punctured grid.

    Evaluates |x|^(2-g) Phi'' (must stay above 1e-6) and
    |x|^(k-g) |Phi^(k)| for k = 0, 1, 2 (must stay below 1e6) on both sides
    of the origin.
    """
    gamma = profile.gamma if gamma is None else float(gamma)
    if grid is None:
        grid = np.logspace(-16, np.log10(b), 400)
    grid = np.asarray(grid, dtype=float)
    if grid.size < 100 or np.any(grid <= 0):
        raise ValueError("grid must hold at least 100 positive |x| values")
    x = np.concatenate([-grid[::-1], grid])
    ax = np.abs(x)
    try:
        with np.errstate(all="ignore"):
            vals = [np.asarray(f(x), dtype=float)
                    for f in (profile.phi, profile.dphi, profile.d2phi)]
    except Exception as exc:  # evaluator failure is a diagnostic
        return ClassReport(gamma, float("nan"), {}, False, f"evaluator failed: {exc}")
    if not all(np.all(np.isfinite(v)) for v in vals):
        return ClassReport(gamma, float("nan"), {}, False,
                           "evaluator returned non-finite values")
    hess = ax ** (2 - gamma) * vals[2]
    ratios = {k: float(np.max(ax ** (k - gamma) * np.abs(vals[k]))) for k in range(3)}
    mn = float(np.min(hess))
    # trend diagnostic: smallest decade against largest decade
    order = np.argsort(ax)
    tenth = max(1, ax.size // 10)
    low = float(np.min(hess[order[:tenth]]))
    high = float(np.min(hess[order[-tenth:]]))
    reasons = []
    if not mn > 1e-6:
        reasons.append(f"min |x|^(2-g) Phi'' = {mn:.3g} <= 1e-6")
    big = {k: v for k, v in ratios.items() if not v < 1e6}
    if big:
        reasons.append("derivative bound exceeded for orders " + ", ".join(map(str, big)))
    return ClassReport(gamma, mn, ratios, not reasons, "; ".join(reasons), low, high)


def oscillating_profile():
    """Phi with Phi'' = 2 + sin(log|x|), an S_2 profile that is not C^2 at 0."""

    def d2phi(x):
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            return np.where(ax > 0, 2 + np.sin(np.log(np.where(ax > 0, ax, 1.0))), 2.0)

    def dphi(x):
        ax = np.abs(x)
        L = np.log(np.where(ax > 0, ax, 1.0))
        v = 2 * ax + ax * (np.sin(L) - np.cos(L)) / 2
        return np.sign(x) * np.where(ax > 0, v, 0.0)

    def phi(x):
        ax = np.abs(x)
        L = np.log(np.where(ax > 0, ax, 1.0))
        return np.where(ax > 0, ax * ax * (1 + (np.sin(L) - 3 * np.cos(L)) / 10), 0.0)

    return ProfileSpec(phi, dphi, d2phi, 2.0, "2+sin(log|x|)")


def power_profile(p, gamma=None):
    """Phi(x) = |x|^p, optionally claimed to be of a different order."""
    return ProfileSpec(
        lambda x: np.abs(x) ** p,
        lambda x: p * np.sign(x) * np.abs(x) ** (p - 1),
        lambda x: p * (p - 1) * np.abs(x) ** (p - 2),
        float(p if gamma is None else gamma),
        f"|x|^{p:g}",
    )
