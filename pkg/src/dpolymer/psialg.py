"""Small exact algebra over monomials in the cumulant functions psi_j(a).

A PsiPoly is a finite sum  sum_m  c_m * prod_{j in m} psi_j(a), keyed by the
sorted tuple of psi indices m.  Differentiation in a uses the ladder
d/da psi_j = psi_{j+1}, which keeps everything exact; coefficients stay small
integers for the polynomial families built here (orders <= 10).
"""

import math

from . import mellin


class PsiPoly:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms) if terms else {}

    @classmethod
    def const(cls, c):
        return cls({(): float(c)} if c else {})

    @classmethod
    def psi(cls, j, c=1.0):
        return cls({(int(j),): float(c)})

    def copy(self):
        return PsiPoly(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def add(self, other):
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0.0) + c
            if out[m] == 0.0:
                del out[m]
        return PsiPoly(out)

    def scale(self, c):
        if c == 0:
            return PsiPoly()
        return PsiPoly({m: v * c for m, v in self.terms.items()})

    def mul(self, other):
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(sorted(m1 + m2))
                out[m] = out.get(m, 0.0) + c1 * c2
        return PsiPoly({m: c for m, c in out.items() if c != 0.0})

    def deriv(self):
        """d/da, via psi_j -> psi_{j+1} applied to each factor in turn."""
        out = PsiPoly()
        for m, c in self.terms.items():
            for i in range(len(m)):
                bumped = tuple(sorted(m[:i] + (m[i] + 1,) + m[i + 1:]))
                out = out.add(PsiPoly({bumped: c}))
        return out

    def max_index(self):
        return max((max(m) for m in self.terms if m), default=-1)

    def eval(self, psi_values):
        """Evaluate with psi_values[j] = psi_j(a)."""
        total = 0.0
        for m, c in self.terms.items():
            v = c
            for j in m:
                v *= psi_values[j]
            total += v
        return total

    def __repr__(self):
        if not self.terms:
            return "PsiPoly(0)"
        bits = []
        for m, c in sorted(self.terms.items()):
            mono = "*".join(f"psi{j}" for j in m) or "1"
            bits.append(f"{c:g}*{mono}")
        return "PsiPoly(" + " + ".join(bits) + ")"


def psi_values(family, a, max_index):
    """[psi_0(a), ..., psi_max(a)] for the family, as plain floats."""
    return [mellin.psi(family, j, a) for j in range(max_index + 1)]


class LogPoly:
    """Polynomial in w = log x with PsiPoly coefficients (index = power of w)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = list(coeffs)
        while len(self.coeffs) > 1 and not self.coeffs[-1]:
            self.coeffs.pop()

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def apply_s(self):
        """S(h) = d/da h + h * log x."""
        n = len(self.coeffs)
        out = [PsiPoly() for _ in range(n + 1)]
        for q, c in enumerate(self.coeffs):
            out[q] = out[q].add(c.deriv())
            out[q + 1] = out[q + 1].add(c)
        return LogPoly(out)

    def deriv_a(self):
        return LogPoly([c.deriv() for c in self.coeffs])

    def deriv_w(self):
        """d/d(log x)."""
        if len(self.coeffs) == 1:
            return LogPoly([PsiPoly()])
        return LogPoly([c.scale(q + 1) for q, c in enumerate(self.coeffs[1:], start=0)])

    def max_psi_index(self):
        return max((c.max_index() for c in self.coeffs), default=-1)

    def eval(self, psi_vals, w):
        total = 0.0
        for c in reversed(self.coeffs):
            total = total * w + c.eval(psi_vals)
        return total


def h_log_poly(n):
    """h_n as a LogPoly: h_1 = psi_0 - log x, h_{k+1} = S(h_k)."""
    if n < 1:
        raise ValueError("h_n is defined for n >= 1")
    h = LogPoly([PsiPoly.psi(0), PsiPoly.const(-1.0)])
    for _ in range(n - 1):
        h = h.apply_s()
    return h


def moments_from_cumulants(kappas):
    """Raw moments m_0..m_n from cumulants kappa_1..kappa_n."""
    n = len(kappas)
    m = [1.0]
    for q in range(1, n + 1):
        m.append(sum(math.comb(q - 1, i - 1) * kappas[i - 1] * m[q - i] for i in range(1, q + 1)))
    return m
