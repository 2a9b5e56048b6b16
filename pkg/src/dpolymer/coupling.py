"""Inverse-CDF coupling for the kernel families.

F(a, x) is the CDF of the density rho(x) = M(a)^{-1} x^{a-1} f(x) and
H(a, .) its inverse on (0, 1).  Replacing a boundary weight by H(a', eta)
with the retained uniform eta couples environments across parameter values;
the derivative of that coupling is governed by

    d/da log H(a, eta) = L(a, H(a, eta)),
    L(a, x) = T(h_1)(a, x),           h_1(a, x) = psi_0(a) - log x,
    T(h)(a, x) = (x^a f(x))^{-1} int_0^x h(a, y) y^{a-1} f(y) dy.

Repeated coupled derivatives use the first-order operator
dtilde G = dG/da + x L dG/dx together with the recursion

    dtilde T(h_n) = T(h_{n+1}) - [(a + r(x)) L + log x] T(h_n) + h_n L,

where r(x) = x f'(x)/f(x) and h_{n+1} = S(h_n) = d/da h_n + h_n log x.
Everything here is evaluated along two independent routes (closed-form /
recursion vs quadrature / finite differences) by the test-suite.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy import special as sp
from scipy.interpolate import CubicSpline

from . import mellin, numdiff
from .errors import CapabilityError, NumericsError, SupportError
from .mellin import FamilyKind
from .psialg import h_log_poly, psi_values

_LDIFF_CUT = 170.0
_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-11, limit=200)


# ---------------------------------------------------------------------------
# Closed-form CDFs and inverses (scipy regularized incomplete functions).
# ---------------------------------------------------------------------------

def cdf(family, a, x):
    """F(a, x) for the density of m_f(a); clamps to 0/1 off support."""
    family.require_domain(a)
    x = np.asarray(x, dtype=float)
    b = family.b
    kind = family.kind
    lo, hi = family.support()
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if kind == FamilyKind.EXP_DECAY:
            v = sp.gammainc(a, b * x)
        elif kind == FamilyKind.EXP_DECAY_INV:
            v = sp.gammaincc(-a, b / x)
        elif kind == FamilyKind.BETA:
            v = sp.betainc(a, b, np.clip(x, 0.0, 1.0))
        elif kind == FamilyKind.BETA_INV:
            v = sp.betainc(b, -a, 1.0 - 1.0 / np.maximum(x, 1.0))
        else:
            v = sp.betainc(a + b, -a, x / (1.0 + x))
    v = np.where(x <= lo, 0.0, v)
    if np.isfinite(hi):
        v = np.where(x >= hi, 1.0, v)
    return v if v.ndim else float(v)


def _open_uniform(rng, size):
    return np.maximum(rng.random(size), 2.0 ** -53)


def _check_prob(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)):
        raise SupportError("probability argument must lie strictly inside (0, 1)")
    return p


def inverse(family, a, p):
    """H(a, p): the unique x with F(a, x) = p, via the closed-form inverses."""
    family.require_domain(a)
    p = _check_prob(p)
    b = family.b
    kind = family.kind
    if kind == FamilyKind.EXP_DECAY:
        out = sp.gammaincinv(a, p) / b
    elif kind == FamilyKind.EXP_DECAY_INV:
        out = b / sp.gammainccinv(-a, p)
    elif kind == FamilyKind.BETA:
        out = sp.betaincinv(a, b, p)
    elif kind == FamilyKind.BETA_INV:
        out = 1.0 / sp.betaincinv(-a, b, 1.0 - p)
    else:
        w = sp.betaincinv(-a, a + b, 1.0 - p)
        out = 1.0 / w - 1.0
    return out if np.ndim(out) else float(out)


def _stable_log_pair(alpha, beta, p):
    """(log W, log(1-W)) for W ~ Beta(alpha, beta) at quantile p, each computed
    from whichever tail of the incomplete-beta inverse is small."""
    w = sp.betaincinv(alpha, beta, p)
    c = sp.betaincinv(beta, alpha, 1.0 - p)   # = 1 - W, accurately when small
    with np.errstate(divide="ignore"):
        log_w = np.where(w <= 0.5, np.log(np.maximum(w, 1e-320)), np.log1p(-c))
        log_c = np.where(c <= 0.5, np.log(np.maximum(c, 1e-320)), np.log1p(-w))
    return log_w, log_c


def inverse_log(family, a, p):
    """log H(a, p), stable in both tails."""
    family.require_domain(a)
    p = _check_prob(p)
    b = family.b
    kind = family.kind
    with np.errstate(divide="ignore"):
        if kind == FamilyKind.EXP_DECAY:
            out = np.log(sp.gammaincinv(a, p)) - math.log(b)
        elif kind == FamilyKind.EXP_DECAY_INV:
            out = math.log(b) - np.log(sp.gammainccinv(-a, p))
        elif kind == FamilyKind.BETA:
            log_w, _ = _stable_log_pair(a, b, p)
            out = log_w
        elif kind == FamilyKind.BETA_INV:
            log_w, _ = _stable_log_pair(-a, b, 1.0 - p)
            out = -log_w
        else:
            log_w, log_c = _stable_log_pair(-a, a + b, 1.0 - p)
            out = log_c - log_w
    return out if np.ndim(out) else float(out)


def inverse_log_complement(family, a, p):
    """log(1 - H) for the beta kernel, log(H - 1) for the inverse-beta kernel.

    These are the stable forms needed for bulk weight pairs (X, 1-X) and
    (X, X-1).
    """
    family.require_domain(a)
    p = _check_prob(p)
    b = family.b
    if family.kind == FamilyKind.BETA:
        _, log_c = _stable_log_pair(a, b, p)
        return log_c if np.ndim(log_c) else float(log_c)
    if family.kind == FamilyKind.BETA_INV:
        log_w, log_c = _stable_log_pair(-a, b, 1.0 - p)
        out = log_c - log_w
        return out if np.ndim(out) else float(out)
    raise CapabilityError("complement form defined for the beta/inverse-beta kernels only")


@dataclass(frozen=True)
class CoupledSampler:
    """Immutable (family, a) pair exposing F, H and sampling through H."""

    family: mellin.MellinFamily
    a: float

    def __post_init__(self):
        self.family.require_domain(self.a)

    def cdf(self, x):
        return cdf(self.family, self.a, x)

    def inverse(self, p):
        return inverse(self.family, self.a, p)

    def inverse_log(self, p):
        return inverse_log(self.family, self.a, p)

    def density(self, x):
        return mellin.density(self.family, self.a, x)

    def sample_log(self, rng, size):
        return inverse_log(self.family, self.a, _open_uniform(rng, size))

    def sample(self, rng, size):
        return inverse(self.family, self.a, _open_uniform(rng, size))


class InverseMode:
    CDF = "cdf"
    INVERSE = "inverse"


def cdf_and_inverse(sampler, mode, v):
    """Contract surface: CDF evaluation, or inversion by bracketed bisection
    to 1e-12 in probability followed by Newton refinement with the density."""
    family, a = sampler.family, sampler.a
    if mode == InverseMode.CDF:
        lo, hi = family.support()
        if not (lo < v < hi):
            raise SupportError(f"x={v} outside the open support ({lo}, {hi})")
        return float(cdf(family, a, v))
    if mode != InverseMode.INVERSE:
        raise ValueError(f"unknown mode {mode!r}")
    if not (0.0 < v < 1.0):
        raise SupportError(f"probability {v} outside (0, 1)")

    lo, hi = family.support()
    # expanding bracket from a unit-scale interior window
    x_lo = lo + 0.5 if np.isfinite(lo) else 0.5
    x_hi = hi - 0.25 * (hi - lo) if np.isfinite(hi) else 2.0
    while cdf(family, a, x_lo) >= v:
        x_lo = lo + (x_lo - lo) / 2 if np.isfinite(lo) else x_lo / 2
        if x_lo - lo < 1e-300:
            break
    while cdf(family, a, x_hi) <= v:
        x_hi = hi - (hi - x_hi) / 2 if np.isfinite(hi) else x_hi * 2
        if np.isfinite(hi) and hi - x_hi < 1e-300:
            break
    for _ in range(240):
        mid = 0.5 * (x_lo + x_hi)
        if cdf(family, a, mid) < v:
            x_lo = mid
        else:
            x_hi = mid
        if abs(cdf(family, a, mid) - v) <= 1e-12 or (x_hi - x_lo) <= 1e-15 * max(1.0, x_hi):
            break
    x = 0.5 * (x_lo + x_hi)
    for _ in range(3):
        dens = float(mellin.density(family, a, x))
        if dens <= 0:
            break
        step = (float(cdf(family, a, x)) - v) / dens
        x_new = x - step
        if not (x_lo <= x_new <= x_hi):
            x_new = min(max(x_new, x_lo), x_hi)
        x = x_new
    return float(x)


# ---------------------------------------------------------------------------
# Ratio-normalized integrals  T(h)(a, x).
# ---------------------------------------------------------------------------

def _ldiff(family, a, u, ux):
    """log[ y^a f(y) ] - log[ x^a f(x) ] at y = e^u, x = e^ux, overflow-free."""
    b = family.b
    d = u - ux
    kind = family.kind
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if kind == FamilyKind.EXP_DECAY:
            return a * d - b * np.exp(ux) * np.expm1(d)
        if kind == FamilyKind.EXP_DECAY_INV:
            return a * d - b * np.exp(-ux) * np.expm1(-d)
        if kind == FamilyKind.BETA:
            return a * d + (b - 1.0) * (np.log(-np.expm1(u)) - np.log(-np.expm1(ux)))
        if kind == FamilyKind.BETA_INV:
            return a * d + (b - 1.0) * (np.log(-np.expm1(-u)) - np.log(-np.expm1(-ux)))
        return a * d - b * (np.log1p(np.exp(-u)) - np.log1p(np.exp(-ux)))


def _weight_mode_u(family, a):
    """Peak location (in u = log y) of the weight y^a f(y); support edge if
    the weight is monotone."""
    b = family.b
    kind = family.kind
    if kind == FamilyKind.EXP_DECAY:
        return math.log(a / b)
    if kind == FamilyKind.EXP_DECAY_INV:
        return -math.log(-a / b)
    if kind == FamilyKind.BETA:
        if b <= 1.0:
            return 0.0
        s = a / (b - 1.0)
        return math.log(s / (1.0 + s))
    if kind == FamilyKind.BETA_INV:
        if b <= 1.0:
            return 0.0
        t = -a / (b - 1.0)
        return math.log(1.0 + 1.0 / t)
    return math.log((a + b) / (-a))  # beta-prime: a + b/(1+x) = 0 at x = (a+b)/(-a)


def _support_u(family):
    lo, hi = family.support()
    ulo = -math.inf if lo == 0.0 else math.log(lo)
    uhi = math.inf if np.isinf(hi) else math.log(hi)
    return ulo, uhi


def _march_breakpoints(family, a, ux, direction):
    """Geometric breakpoints from ux outwards until the weight ratio has
    dropped by e^-CUT or the support edge is reached."""
    ulo, uhi = _support_u(family)
    d0 = abs(a + float(family.r(math.exp(ux)))) if math.isfinite(ux) else 1.0
    w = min(1.0, 40.0 / max(d0, 1e-3))
    w = max(w, 1e-9)
    pts = [ux]
    u = ux
    for _ in range(400):
        u_next = u + direction * w
        clipped = False
        if direction < 0 and u_next <= ulo:
            u_next, clipped = ulo, True
        if direction > 0 and u_next >= uhi:
            u_next, clipped = uhi, True
        pts.append(u_next)
        if clipped:
            break
        if _ldiff(family, a, u_next, ux) <= -_LDIFF_CUT:
            break
        u = u_next
        w *= 2.0
    return pts


def _integrate_side(family, a, ux, hfun, direction, err_budget=None):
    """int h(u) e^{ldiff(u)} du over the side of ux given by direction."""
    pts = _march_breakpoints(family, a, ux, direction)
    total = 0.0
    total_err = 0.0
    tiny_streak = 0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        for u0, u1 in zip(pts[:-1], pts[1:]):
            lo, hi = (u1, u0) if direction < 0 else (u0, u1)
            if hi <= lo:
                continue
            val, err = integrate.quad(
                lambda u: hfun(u) * np.exp(_ldiff(family, a, u, ux)), lo, hi, **_QUAD_OPTS
            )
            total += val
            total_err += abs(err)
            if abs(val) < 1e-16 * (abs(total) + 1e-300):
                tiny_streak += 1
                if tiny_streak >= 2:
                    break
            else:
                tiny_streak = 0
    if not math.isfinite(total):
        raise NumericsError(
            f"T integral non-finite for {family.label()} at a={a}, x={math.exp(ux):g}"
        )
    if err_budget is not None and total_err > max(err_budget * abs(total), 1e-11):
        raise NumericsError(
            f"T integral error {total_err:g} exceeds budget for {family.label()} "
            f"at a={a}, x={math.exp(ux):g} (value {total:g})"
        )
    return total


@lru_cache(maxsize=64)
def _h_poly_cached(n):
    return h_log_poly(n)


def t_h_n(family, n, a, x):
    """T(h_n)(a, x), switching to the complementary tail via the zero-integral
    identity of h_n once F(a, x) > 1/2 (avoids catastrophic cancellation)."""
    family.require_domain(a)
    if not bool(family.in_support(x)):
        raise SupportError(f"x={x} outside the open support of {family.label()}")
    hp = _h_poly_cached(n)
    pv = psi_values(family, a, hp.max_psi_index())
    hfun = lambda u: hp.eval(pv, u)
    ux = math.log(x)
    if cdf(family, a, x) <= 0.5:
        return _integrate_side(family, a, ux, hfun, direction=-1)
    return -_integrate_side(family, a, ux, hfun, direction=+1)


def t_operator(family, h, a, x, err_budget=1e-8):
    """Generic T(h)(a, x) for a caller-supplied h(a, y), by adaptive quadrature.

    Valid wherever the lower integral carries no catastrophic cancellation
    (x not far beyond the bulk of the weight); raises NumericsError with
    diagnostics otherwise.
    """
    family.require_domain(a)
    if not bool(family.in_support(x)):
        raise SupportError(f"x={x} outside the open support of {family.label()}")
    ux = math.log(x)
    mode_u = _weight_mode_u(family, a)
    if math.isfinite(mode_u) and mode_u < ux:
        peak = _ldiff(family, a, mode_u, ux)
        if peak > 600.0:
            raise NumericsError(
                f"T(h) ratio spans e^{peak:.0f} for {family.label()} at a={a}, x={x:g}; "
                "x lies too deep in the upper tail for the generic route"
            )
    hfun = lambda u: h(a, math.exp(u))
    return _integrate_side(family, a, ux, hfun, direction=-1, err_budget=err_budget)


def l_func(family, a, x):
    """L(a, x) = T(h_1)(a, x): the coupling velocity, strictly positive."""
    return t_h_n(family, 1, a, x)


@dataclass(frozen=True)
class HPoly:
    """h_n as an n-th degree polynomial in log x with psi-ladder coefficients."""

    family: mellin.MellinFamily
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= 8:
            raise CapabilityError(f"h_n supported for 1 <= n <= 8, got {self.n}")

    def __call__(self, a, x):
        hp = _h_poly_cached(self.n)
        pv = psi_values(self.family, a, hp.max_psi_index())
        return hp.eval(pv, np.log(x))

    def integral_against_weight(self, a):
        """int h_n(a, y) y^{a-1} f(y) dy via quadrature; identically zero."""
        hp = _h_poly_cached(self.n)
        pv = psi_values(self.family, a, hp.max_psi_index())
        raw = mellin._mellin_pieces(self.family, lambda u: hp.eval(pv, u))(a)
        return raw / mellin.mellin_transform(self.family, a)


def h_poly(family, n, a, x):
    """Evaluate h_n(a, x); n <= 8."""
    return HPoly(family, n)(a, x)


# ---------------------------------------------------------------------------
# dtilde derivatives of L via a small expression graph.
# ---------------------------------------------------------------------------

class _Expr:
    def dtilde(self):
        raise NotImplementedError

    def ev(self, ctx):
        raise NotImplementedError


class _Num(_Expr):
    def __init__(self, v):
        self.v = float(v)

    def dtilde(self):
        return _Num(0.0)

    def ev(self, ctx):
        return self.v


class _Psi(_Expr):
    def __init__(self, j):
        self.j = j

    def dtilde(self):
        return _Psi(self.j + 1)

    def ev(self, ctx):
        return ctx["psi"](self.j)


class _AVar(_Expr):
    def dtilde(self):
        return _Num(1.0)

    def ev(self, ctx):
        return ctx["a"]


class _LogX(_Expr):
    def dtilde(self):
        return _Th(1)

    def ev(self, ctx):
        return ctx["u"]


class _Rho(_Expr):
    """rho_0 = r(x); rho_q = (x d/dx)^q r.  dtilde rho_q = rho_{q+1} * L."""

    def __init__(self, q):
        self.q = q

    def dtilde(self):
        return _Mul([_Rho(self.q + 1), _Th(1)])

    def ev(self, ctx):
        return ctx["rho"](self.q)


class _Th(_Expr):
    def __init__(self, n):
        self.n = n

    def dtilde(self):
        return _Add([
            _Th(self.n + 1),
            _Mul([_Num(-1.0), _Add([_AVar(), _Rho(0)]), _Th(1), _Th(self.n)]),
            _Mul([_Num(-1.0), _LogX(), _Th(self.n)]),
            _Mul([_h_expr(self.n), _Th(1)]),
        ])

    def ev(self, ctx):
        return ctx["th"](self.n)


class _Add(_Expr):
    def __init__(self, terms):
        flat = []
        for t in terms:
            if isinstance(t, _Add):
                flat.extend(t.terms)
            elif not (isinstance(t, _Num) and t.v == 0.0):
                flat.append(t)
        self.terms = flat

    def dtilde(self):
        return _Add([t.dtilde() for t in self.terms])

    def ev(self, ctx):
        return sum(t.ev(ctx) for t in self.terms)


class _Mul(_Expr):
    def __init__(self, factors):
        flat = []
        coeff = 1.0
        for f in factors:
            if isinstance(f, _Mul):
                flat.extend(f.factors)
            elif isinstance(f, _Num):
                coeff *= f.v
            else:
                flat.append(f)
        self.coeff = coeff
        self.factors = flat

    def dtilde(self):
        if self.coeff == 0.0:
            return _Num(0.0)
        terms = []
        for i, f in enumerate(self.factors):
            terms.append(_Mul([_Num(self.coeff), *self.factors[:i], f.dtilde(), *self.factors[i + 1:]]))
        return _Add(terms)

    def ev(self, ctx):
        v = self.coeff
        for f in self.factors:
            v *= f.ev(ctx)
        return v


def _h_expr(n):
    hp = _h_poly_cached(n)
    terms = []
    for q, c in enumerate(hp.coeffs):
        for mono, coef in c.terms.items():
            terms.append(_Mul([_Num(coef)] + [_Psi(j) for j in mono] + [_LogX()] * q))
    return _Add(terms)


_DTILDE_ASTS = {0: _Th(1)}


def _dtilde_ast(k):
    while k not in _DTILDE_ASTS:
        top = max(_DTILDE_ASTS)
        _DTILDE_ASTS[top + 1] = _DTILDE_ASTS[top].dtilde()
    return _DTILDE_ASTS[k]


class _EvalContext:
    def __init__(self, family, a, x, th_cache=None):
        self.family = family
        self.a = a
        self.x = float(x)
        self._psi = {}
        self._th = th_cache if th_cache is not None else {}
        self._rho = {}

    def as_dict(self):
        return {
            "a": self.a,
            "u": math.log(self.x),
            "psi": self.psi,
            "th": self.th,
            "rho": self.rho,
        }

    def psi(self, j):
        if j not in self._psi:
            self._psi[j] = mellin.psi(self.family, j, self.a)
        return self._psi[j]

    def th(self, n):
        key = (n, self.x)
        if key not in self._th:
            self._th[key] = t_h_n(self.family, n, self.a, self.x)
        return self._th[key]

    def rho(self, q):
        if q not in self._rho:
            self._rho[q] = float(self.family.r(self.x)) if q == 0 else float(
                self.family.x_dr(self.x, q)
            )
        return self._rho[q]


TILDE_MAX_ORDER = 4


def tilde_deriv_L(family, k, a, x, route="recursion", th_cache=None):
    """dtilde^k L(a, x), k <= 4.

    route="recursion": the exact operator recursion (T, S, h_n, r).
    route="fd": nested central differences of a' -> L(a', H(a', p)) at the
    probability level p = F(a, x); the two routes are independent.
    """
    if not 0 <= k <= TILDE_MAX_ORDER:
        raise CapabilityError(f"tilde_deriv_L supports 0 <= k <= {TILDE_MAX_ORDER}, got {k}")
    family.require_domain(a)
    if route == "recursion":
        ctx = _EvalContext(family, a, x, th_cache=th_cache)
        return _dtilde_ast(k).ev(ctx.as_dict())
    if route != "fd":
        raise ValueError(f"unknown route {route!r}")
    if k == 0:
        return l_func(family, a, x)
    p = float(cdf(family, a, x))

    def phi(aa):
        return l_func(family, aa, float(inverse(family, aa, p)))

    h = numdiff.default_step(k, scale=a) * (10.0 if k >= 3 else 1.0)
    lo, hi = family.domain()
    room = min(a - lo if math.isfinite(lo) else math.inf, hi - a if math.isfinite(hi) else math.inf)
    h = min(h, room / 8.0)
    return numdiff.central_derivative(phi, a, k, h)


# ---------------------------------------------------------------------------
# Hypothesis-style growth-bound reports.
# ---------------------------------------------------------------------------

@dataclass
class BoundCheckReport:
    family_label: str
    k: int
    max_ratio: float
    argmax: tuple
    decade_max: dict
    max_excl_outer: float

    @property
    def finite(self):
        return math.isfinite(self.max_ratio)

    @property
    def outer_stability(self):
        """Largest ratio over the full grid relative to the grid with the
        outermost decade removed at each end; ~1 when the bound has settled."""
        if self.max_excl_outer == 0.0:
            return math.inf
        return self.max_ratio / self.max_excl_outer


def _grid_labels(family, x_values):
    """Decade labels for grid points plus an 'outermost decade' mask.

    On (0, inf) and (1, inf) decades run across the support in t = x or
    x - 1; on (0, 1) the grid folds at 1/2 and the upper branch gets mirrored
    positive labels, so the outermost decades always hug the support edges.
    """
    x_values = np.asarray(x_values, dtype=float)
    lo, hi = family.support()
    if hi == 1.0:
        t = np.minimum(x_values, 1.0 - x_values)
        labels = np.floor(np.log10(t)).astype(int)
        labels = np.where(x_values > 0.5, -labels, labels)
    else:
        t = x_values if lo == 0.0 else x_values - 1.0
        labels = np.floor(np.log10(t)).astype(int)
    outer = (labels == labels.min()) | (labels == labels.max())
    return labels, outer


def _default_x_grid(family, points_per_decade, decades=(-6, 6)):
    lo, hi = family.support()
    if hi == 1.0:
        npts = int(points_per_decade * (-decades[0] - 0.3)) + 1
        t = np.geomspace(10.0 ** decades[0], 0.5, npts)
        xs = np.concatenate([t, 1.0 - t])
    else:
        npts = int(points_per_decade * (decades[1] - decades[0])) + 1
        t = np.geomspace(10.0 ** decades[0], 10.0 ** decades[1], npts)
        xs = t if lo == 0.0 else 1.0 + t
    return xs


def _default_a_grid(family, n_a=11):
    lo, hi = family.domain()
    if np.isinf(lo) and np.isinf(hi):
        return np.linspace(-4.0, -0.4, n_a)
    if np.isinf(hi):
        return np.linspace(lo + 0.4, lo + 4.0, n_a)
    if np.isinf(lo):
        return np.linspace(hi - 4.0, hi - 0.4, n_a)
    pad = 0.12 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, n_a)


def bound_check_multi(family, ks, a_values=None, x_values=None, points_per_decade=61, n_a=11):
    """bound_check for several derivative orders sharing the T(h_n) quadratures.

    Returns {k: BoundCheckReport}.
    """
    ks = sorted(set(int(k) for k in ks))
    if a_values is None:
        a_values = _default_a_grid(family, n_a)
    if x_values is None:
        x_values = _default_x_grid(family, points_per_decade)
    decades, outer = _grid_labels(family, x_values)

    max_ratio = {k: 0.0 for k in ks}
    argmax = {k: (None, None) for k in ks}
    decade_max = {k: {} for k in ks}
    max_excl = {k: 0.0 for k in ks}
    for a in np.asarray(a_values, dtype=float):
        th_cache = {}
        for x, dec, is_outer in zip(x_values, decades, outer):
            for k in ks:
                val = tilde_deriv_L(family, k, float(a), float(x), th_cache=th_cache)
                ratio = abs(val) / (1.0 + abs(math.log(x)) ** (k + 1))
                if not math.isfinite(ratio):
                    ratio = math.inf
                if ratio > max_ratio[k]:
                    max_ratio[k], argmax[k] = ratio, (float(a), float(x))
                d = int(dec)
                decade_max[k][d] = max(decade_max[k].get(d, 0.0), ratio)
                if not is_outer:
                    max_excl[k] = max(max_excl[k], ratio)
    return {
        k: BoundCheckReport(
            family.label(), k, max_ratio[k], argmax[k], dict(sorted(decade_max[k].items())), max_excl[k]
        )
        for k in ks
    }


def bound_check(family, k, a_values=None, x_values=None, points_per_decade=61, n_a=11):
    """Max over an (a, x) grid of |dtilde^k L| / (1 + |log x|^{k+1}).

    A finite, outer-decade-stable maximum is the empirical form of the
    moment-growth hypothesis for the kernel.
    """
    return bound_check_multi(
        family, [k], a_values=a_values, x_values=x_values,
        points_per_decade=points_per_decade, n_a=n_a,
    )[k]


# ---------------------------------------------------------------------------
# Tabulated site evaluators for the quenched-statistics layer.
# ---------------------------------------------------------------------------

@dataclass
class DtildeLTable:
    """Cubic-spline tables of dtilde^l L(a, .) in u = log x for l <= max_order.

    Built from the recursion route on a quantile-graded grid; evaluations
    outside the tabulated range fall back to the direct recursion.
    """

    family: mellin.MellinFamily
    a: float
    max_order: int = 1
    p_tail: float = 1e-7
    n_core: int = 901
    _splines: list = field(default_factory=list, repr=False)
    _u_range: tuple = field(default=None, repr=False)

    def __post_init__(self):
        ps = np.concatenate([
            np.geomspace(self.p_tail, 0.05, 140),
            np.linspace(0.05, 0.95, self.n_core),
            1.0 - np.geomspace(0.05, self.p_tail, 140),
        ])
        us = np.unique(inverse_log(self.family, self.a, ps))
        vals = np.empty((self.max_order + 1, us.size))
        for i, u in enumerate(us):
            th_cache = {}
            for l in range(self.max_order + 1):
                vals[l, i] = tilde_deriv_L(self.family, l, self.a, math.exp(u), th_cache=th_cache)
        self._splines = [CubicSpline(us, vals[l]) for l in range(self.max_order + 1)]
        self._u_range = (us[0], us[-1])

    def values_log(self, log_x, order):
        """dtilde^order L at sites given by their logs (vectorized)."""
        if order > self.max_order:
            raise CapabilityError(f"table built for orders <= {self.max_order}")
        u = np.asarray(log_x, dtype=float)
        out = np.empty_like(u)
        lo, hi = self._u_range
        inside = (u >= lo) & (u <= hi)
        if inside.any():
            out[inside] = self._splines[order](u[inside])
        for idx in np.nonzero(~inside)[0]:
            out[idx] = tilde_deriv_L(self.family, order, self.a, math.exp(u[idx]))
        return out
