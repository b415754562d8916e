"""Series, closed forms and number-theoretic helpers for flat-point asymptotics.

The trigonometric series behind the main term,

    S_-(a, x) = sum_{k>=1} k^(-1-a) sin(2 pi k x - pi a / 2),

has the closed form (2 pi)^(1+a) / (2 Gamma(1+a)) * zeta(-a, {x}) where
zeta(s, q) is the Hurwitz zeta function and {x} is the fractional part taken
in (0, 1].  The "+" variant follows from S_+(a, x) = -S_-(a, -x).  Summing the
series directly needs about (a tol)^(-1/a) terms, which is hopeless for
a = 1/4, so evaluations go through the closed form and the partial sums are
kept as an independent check.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy.special import bernoulli

from . import _quadrature as quad

PARTIAL_SUM_BUDGET = 10**7


# ---------------------------------------------------------------------------
# Hurwitz zeta for real s < 1 (scipy only covers s > 1)
# ---------------------------------------------------------------------------

_EM_TERMS = 16
_EM_ORDER = 12
_B2 = bernoulli(2 * _EM_ORDER)[2::2]
_B2_OVER_FACT = np.array([_B2[j - 1] / math.factorial(2 * j) for j in range(1, _EM_ORDER + 1)])


def hurwitz_zeta(s, q):
    """zeta(s, q) = sum_{k>=0} (k + q)^(-s) continued analytically, q > 0.

    Euler-Maclaurin summation with 16 explicit terms and 12 Bernoulli
    corrections; vectorised in q.  Accurate to ~1e-14 relative for
    -4 <= s < 1 (and s > 1).
    """
    s = float(s)
    if s == 1.0:
        raise ValueError("pole at s = 1")
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("q must be positive")
    k = np.arange(_EM_TERMS, dtype=float)
    head = np.sum((q[..., None] + k) ** (-s), axis=-1)
    w = q + _EM_TERMS
    out = head + w ** (1 - s) / (s - 1) + 0.5 * w ** (-s)
    poch = s  # rising factorial s (s+1) ... (s+2j-2)
    for j in range(1, _EM_ORDER + 1):
        out = out + _B2_OVER_FACT[j - 1] * poch * w ** (-s - 2 * j + 1)
        poch *= (s + 2 * j - 1) * (s + 2 * j)
    return out if out.ndim else float(out)


def _frac_right(x):
    """Fractional part in (0, 1]."""
    f = x - np.floor(x)
    return np.where(f == 0, 1.0, f)


# ---------------------------------------------------------------------------
# The A-series
# ---------------------------------------------------------------------------

def series_constant(a):
    """(2 pi)^(1+a) / (2 Gamma(1+a))."""
    return (2 * math.pi) ** (1 + a) / (2 * math.gamma(1 + a))


def a_series(a, x, tol=1e-12, phase=-1, method="closed"):
    """sum_{k>=1} k^(-1-a) sin(2 pi k x + phase * pi a / 2), phase = -1 or +1.

    ``method="closed"`` uses the Hurwitz zeta form (tolerance met for any a).
    ``method="partial"`` sums K = ceil((a tol)^(-1/a)) terms, the count for
    which the tail sum_{k>K} k^(-1-a) <= K^(-a)/a is below ``tol``; it
    refuses when K exceeds ten million.

    >>> round(a_series(1.0, 0.0), 7)
    -1.6449341
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if phase not in (-1, 1):
        raise ValueError("phase must be -1 or +1")
    x = np.asarray(x, dtype=float)
    if method == "partial":
        return partial_a_series(a, x, truncation_index(a, tol), phase)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    arg = x if phase == -1 else -x
    val = series_constant(a) * hurwitz_zeta(-a, _frac_right(arg))
    val = val if phase == -1 else -val
    return float(val) if np.ndim(val) == 0 else val


def truncation_index(a, tol):
    if not tol > 0:
        raise ValueError("tol must be positive")
    K = math.ceil((a * tol) ** (-1.0 / a))
    if K > PARTIAL_SUM_BUDGET:
        raise ValueError(f"partial sum needs {K:.3g} terms; use method='closed'")
    return K


def partial_a_series(a, x, K, phase=-1):
    """Plain partial sum over k = 1..K (vectorised in x, blocked in k)."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    total = np.zeros(flat.shape)
    shift = phase * math.pi * a / 2
    for start in range(1, K + 1, 4096):
        k = np.arange(start, min(K, start + 4095) + 1, dtype=float)
        total += np.sin(2 * math.pi * np.outer(flat, k) + shift) @ (k ** (-1 - a))
    total = total.reshape(x.shape)
    return float(total) if total.ndim == 0 else total


@dataclass(frozen=True)
class SeriesParams:
    """Data of one A-function: a = (d-1)/gamma, g0 = G(0), m0, phase sign.

    phase_sign = -1 gives the lower-point variant A_P (positive prefactor,
    phase -pi a / 2); +1 gives A_Q (negative prefactor, phase +pi a / 2).
    """

    a: float
    g0: float
    m0: tuple
    phase_sign: int = -1

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.phase_sign not in (-1, 1):
            raise ValueError("phase_sign must be -1 or +1")
        if not self.g0 > 0:
            raise ValueError("g0 must be positive")

    @property
    def m0_norm(self):
        return float(np.linalg.norm(np.asarray(self.m0, dtype=float)))

    @property
    def prefactor(self):
        a = self.a
        return 2 * self.g0 * math.gamma(a + 1) / (2 * math.pi * self.m0_norm) ** (a + 1)

    def __call__(self, z):
        """A(z) for points z (last axis = coordinates)."""
        x = np.asarray(z, dtype=float) @ np.asarray(self.m0, dtype=float)
        sign = 1.0 if self.phase_sign == -1 else -1.0
        return sign * self.prefactor * a_series(self.a, x, phase=self.phase_sign)


def flat_pairs(body):
    """Group flat points into (P, Q) pairs sharing m0.

    P is the member whose outward normal points against m0.  Points without
    m0 are skipped.
    """
    groups = {}
    for fp in body.flat_points:
        if fp.m0 is None:
            continue
        groups.setdefault(tuple(fp.m0), []).append(fp)
    pairs = []
    for m0, pts in groups.items():
        lower = [p for p in pts if np.dot(p.normal, m0) < 0]
        upper = [p for p in pts if np.dot(p.normal, m0) > 0]
        if len(lower) != 1 or len(upper) != 1:
            raise ValueError(f"flat points with m0={m0} do not form one pair")
        pairs.append((m0, lower[0], upper[0]))
    return pairs


def _pair_params(m0, P, Q, d=2):
    return (SeriesParams((d - 1) / P.order, P.g0, m0, -1),
            SeriesParams((d - 1) / Q.order, Q.g0, m0, +1))


def main_term_Y(body, R, z):
    """Y(z, R) = sum over flat pairs of R^(1-a_P) A_P(z - RP) + R^(1-a_Q) A_Q(z - RQ).

    With several pairs (superellipse) the contributions are added pair by
    pair.  Raises when the body has no rational flat normal.
    """
    pairs = flat_pairs(body)
    if not pairs:
        raise ValueError("main term needs a flat point with a rational normal")
    z = np.asarray(z, dtype=float)
    total = 0.0
    for m0, P, Q in pairs:
        AP, AQ = _pair_params(m0, P, Q)
        total = total + R ** (1 - AP.a) * AP(z - R * np.asarray(P.location))
        total = total + R ** (1 - AQ.a) * AQ(z - R * np.asarray(Q.location))
    return total


def main_term_shift(body, R):
    """Y as a function of z2 alone, for bodies whose flat normals are vertical.

    Raises when some pair's m0 has a horizontal component, because then Y
    varies along the lattice rows and cannot be subtracted row-profile-wise.
    """
    for m0, _, _ in flat_pairs(body):
        if m0[0] != 0:
            raise ValueError(f"main term depends on z1 (m0={m0}); not supported")

    def shift(z2):
        return main_term_Y(body, R, np.stack([np.zeros_like(np.asarray(z2, float)),
                                              np.asarray(z2, float)], axis=-1))

    main_term_Y(body, R, (0.0, 0.0))  # raise early if undefined
    return shift


def main_term_l2(body, R=1):
    """||Y(., R)||_{L^2(T)} / R^(1-a) for a body with vertical flat normals.

    One-dimensional composite Gauss quadrature in z2, graded toward the
    points where an A-function has its Holder cusp.
    """
    shift = main_term_shift(body, R)
    kinks = [0.0, 1.0]
    a = None
    for m0, P, Q in flat_pairs(body):
        a = (1.0 / P.order) if a is None else min(a, 1.0 / P.order, 1.0 / Q.order)
        m = abs(m0[1])
        for loc in (P.location, Q.location):
            c = -R * m0[1] * loc[1]
            kinks.extend(((j - c) / m0[1]) % 1.0 for j in range(m + 1))
    kinks = np.unique(np.clip(kinks, 0.0, 1.0))
    edges = np.concatenate([quad.graded_edges(lo, hi, ratio=0.1, floor=1e-14, interior=16)
                            for lo, hi in zip(kinks[:-1], kinks[1:]) if hi - lo > 1e-15])
    edges = np.unique(edges)
    val = quad.integrate(lambda t: shift(t) ** 2, edges)
    return math.sqrt(val) / R ** (1 - a)


def pair_l2_closed_form(a, g0, m0_norm=1.0):
    """L^2(T) norm of A_P + A_Q when both act at the same argument.

    The two series combine to -2 C sin(pi a / 2) sum k^(-1-a) cos(2 pi k x),
    whose squared norm is 2 C^2 sin^2(pi a / 2) zeta(2 + 2a) by Parseval.
    """
    C = SeriesParams(a, g0, (m0_norm, 0.0)).prefactor
    return math.sqrt(2) * C * abs(math.sin(math.pi * a / 2)) * math.sqrt(float(mpmath.zeta(2 + 2 * a)))


# ---------------------------------------------------------------------------
# Interference identity
# ---------------------------------------------------------------------------

def corollary_interference(params_P, params_Q, P, Q, R, z):
    """Direct sum A_P(z - RP) + A_Q(z - RQ) and its product-form rewriting.

    With N = m0.R(Q - P) and y = m0.(z - R(P + Q)/2) the sum equals
    2 C sum_k k^(-1-a) sin(pi k N - pi a / 2) cos(2 pi k y).  The product
    series is evaluated by splitting 2 sin(u) cos(v) = sin(u + v) + sin(u - v)
    and summing each half in closed form at the arguments N/2 +- y.
    """
    if abs(params_P.a - params_Q.a) > 0 or abs(params_P.g0 - params_Q.g0) > 0:
        raise ValueError("interference form needs equal a and g0 at P and Q")
    if tuple(params_P.m0) != tuple(params_Q.m0):
        raise ValueError("P and Q must share m0")
    if params_P.phase_sign != -1 or params_Q.phase_sign != 1:
        raise ValueError("expected the P variant first and the Q variant second")
    m0 = np.asarray(params_P.m0, dtype=float)
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    z = np.asarray(z, dtype=float)
    sum_form = params_P(z - R * P) + params_Q(z - R * Q)
    N = R * float(m0 @ (Q - P))
    y = (z - R * (P + Q) / 2) @ m0
    a = params_P.a
    C = params_P.prefactor
    product_form = C * (a_series(a, N / 2 + y) + a_series(a, N / 2 - y))
    return sum_form, product_form


def product_form_partial(params, N, y, K):
    """Term-by-term partial sum of the product series (independent check)."""
    a = params.a
    k = np.arange(1, K + 1, dtype=float)
    terms = k ** (-1 - a) * np.sin(math.pi * k * N - math.pi * a / 2) * np.cos(2 * math.pi * k * y)
    return 2 * params.prefactor * math.fsum(terms)


# ---------------------------------------------------------------------------
# Oscillatory t^alpha integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EtaSpec:
    """Smooth cutoff: 1 on [0, eps], 0 beyond 2 eps.

    Between the two it is h((2 eps - t)/eps) with h(u) = f(u)/(f(u)+f(1-u))
    and f(u) = exp(-1/u) for u > 0, f = 0 otherwise.
    """

    eps: float = 4.0

    def __call__(self, t):
        u = np.clip((2 * self.eps - np.asarray(t, dtype=float)) / self.eps, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            f1 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
            f2 = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
        return f1 / (f1 + f2)


def lemma_alpha_closed(alpha, s):
    return (math.gamma(alpha + 1) * (2 * math.pi * abs(s)) ** (-alpha - 1)
            * np.exp(-0.5j * math.pi * (alpha + 1) * np.sign(s)))


def lemma_alpha_pair(alpha, s, eta=None):
    """Quadrature of int_0^inf t^alpha e^(-2 pi i s t) eta(t) dt and its leading term.

    The quadrature grades geometrically toward t = 0 and keeps every panel
    shorter than 1/(8|s|).
    """
    if not alpha > -1:
        raise ValueError(f"alpha must exceed -1, got {alpha}")
    if s == 0:
        raise ValueError("s must be nonzero")
    eta = EtaSpec() if eta is None else eta
    top = 2 * eta.eps
    edges = quad.graded_edges(0.0, top, grade_right=False, ratio=0.15, floor=1e-16, interior=4)
    edges = quad.refine_edges(edges, 1.0 / (8 * abs(s)))
    t, w = quad.panel_nodes(edges)
    f = t ** alpha * np.exp(-2j * math.pi * s * t) * eta(t)
    return complex(np.dot(f, w)), complex(lemma_alpha_closed(alpha, s))


# ---------------------------------------------------------------------------
# Mollifier coefficients
# ---------------------------------------------------------------------------

@dataclass
class MollifierCoeffs:
    M: int
    c: list
    exact: list = field(repr=False, default_factory=list)
    residual: float = 0.0


def mollifier_coeffs(M):
    """c_0..c_M with sum_k c_k 2^(-k m) = [m == 0] for m = 0..M.

    The coefficients are those of p(y) = prod_{m=1}^M (y - 2^-m)/(1 - 2^-m),
    which vanishes at y = 2^-m and equals 1 at y = 1; computed exactly.
    """
    if int(M) != M or not 0 <= M <= 30:
        raise ValueError(f"M must be an integer in [0, 30], got {M}")
    M = int(M)
    poly = [Fraction(1)]  # coefficients, lowest degree first
    for m in range(1, M + 1):
        r = Fraction(1, 2**m)
        scale = 1 / (1 - r)
        new = [Fraction(0)] * (len(poly) + 1)
        for k, c in enumerate(poly):
            new[k + 1] += c * scale
            new[k] -= c * r * scale
        poly = new
    c = [float(v) for v in poly]
    residual = max(abs(math.fsum(ck * 2.0 ** (-k * m) for k, ck in enumerate(c)) - (m == 0))
                   for m in range(M + 1))
    return MollifierCoeffs(M, c, poly, residual)


# ---------------------------------------------------------------------------
# Slice coefficient from the Hessian
# ---------------------------------------------------------------------------

def unit_ball_volume(n):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def g0_from_hessian(A, d):
    """Volume of {x : x^T A x / 2 <= 1} in dimension d - 1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (d - 1, d - 1):
        raise ValueError(f"A must be {(d - 1)}x{(d - 1)}, got {A.shape}")
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise ValueError("A must be symmetric")
    try:
        L = np.linalg.cholesky(A / 2)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A must be positive definite") from exc
    return unit_ball_volume(d - 1) / float(np.prod(np.diag(L)))


# ---------------------------------------------------------------------------
# Diophantine quality
# ---------------------------------------------------------------------------

def _exact_value(omega, dps):
    """Return (kind, value) with value a Fraction or an mpmath number."""
    if isinstance(omega, (int, Fraction)):
        return "exact", Fraction(omega)
    if isinstance(omega, float):
        return "exact", Fraction(omega)  # the binary value of the float
    if hasattr(omega, "evalf"):  # symbolic (sympy) input
        return "mp", mpmath.mpf(str(omega.evalf(dps + 10)))
    if isinstance(omega, mpmath.mpf):
        return "mp", omega
    return "exact", Fraction(omega)


def convergent_denominators(omega, N, dps=60):
    """Continued-fraction convergent denominators q_k <= N, with omega's value."""
    qs = []
    q_prev, q = 0, 1
    with mpmath.workdps(dps):
        kind, val = _exact_value(omega, dps)
        x = val
        floor = (lambda v: v.numerator // v.denominator) if kind == "exact" else (lambda v: int(mpmath.floor(v)))
        frac = x - floor(x)
        qs.append(1)
        while frac != 0:
            x = 1 / frac
            ak = floor(x)
            q_prev, q = q, ak * q + q_prev
            if q > N:
                break
            qs.append(q)
            frac = x - ak
            if kind == "mp" and abs(frac) < mpmath.mpf(10) ** (-dps + 15):
                break
    return kind, val, qs


def _distance(kind, val, q):
    prod = val * q
    if kind == "exact":
        r = prod - (prod.numerator // prod.denominator)
    else:
        r = prod - mpmath.floor(prod)
    return float(min(r, 1 - r))


def badly_approximable_check(omega, N, delta=0.0, dps=60, n_min=1):
    """min over n_min <= n <= N of n^(1+delta) ||n omega|| and a minimiser.

    For n between consecutive convergent denominators q_k <= n < q_{k+1} one
    has ||n omega|| >= ||q_k omega||, so with delta >= 0 the minimum is
    attained at a convergent denominator.  When ``n_min`` > 1 the stretch from
    n_min up to the first convergent denominator beyond it is scanned
    directly.  Floats are used at their exact binary value; symbolic inputs
    (anything with ``evalf``) are expanded to ``dps`` digits.
    """
    if not delta >= 0:
        raise ValueError("delta must be nonnegative")
    if N < 1 or n_min < 1 or n_min > N:
        raise ValueError("need 1 <= n_min <= N")
    best, arg = math.inf, n_min
    with mpmath.workdps(dps):
        kind, val, qs = convergent_denominators(omega, int(N), dps)
        candidates = [q for q in qs if q >= n_min]
        gap_end = min(candidates[0] if candidates else int(N) + 1, int(N) + 1)
        if gap_end - n_min > 10**6:
            raise ValueError("gap below the first convergent beyond n_min is too long to scan")
        candidates = list(range(n_min, gap_end)) + candidates
        for q in candidates:
            score = q ** (1 + delta) * _distance(kind, val, q)
            if score < best:
                best, arg = score, q
    return best, arg


# ---------------------------------------------------------------------------
# Exponent table
# ---------------------------------------------------------------------------

def predicted_exponent(d, gamma, p):
    """Growth exponent of ||D_R||_p for flat points of order at most gamma."""
    if int(d) != d or d < 2:
        raise ValueError("d must be an integer >= 2")
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not p >= 1:
        raise ValueError("p must be >= 1")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    if gamma <= 2:
        if p <= 2 * d / (d - 1):
            return (d - 1) / 2
        return d * (d - 1) / (d + 1) * (1 - inv_p)
    if gamma <= d + 1:
        if gamma == d + 1 or p <= 2 * d / (d + 1 - gamma):
            return (d - 1) * (1 - 1 / gamma)
        return d * (d - 1) / (d + 1) * (1 - 2 * inv_p / gamma)
    return (d - 1) * (1 - 1 / gamma)
