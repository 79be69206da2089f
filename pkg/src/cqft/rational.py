"""Sparse multivariate polynomials with exact rational coefficients.

The interpolation identities in this package are exact statements; testing
them in floating point would hide combinatorial bugs behind roundoff.  All
coefficients here are `fractions.Fraction` and every operation (derivative,
substitution, simplex integration) is closed over the rationals.
"""

from fractions import Fraction


class RationalPoly:
    """Polynomial in `nvars` variables, stored as {exponent tuple: Fraction}."""

    __slots__ = ("nvars", "coeffs")

    def __init__(self, nvars, coeffs=None):
        self.nvars = nvars
        self.coeffs = {}
        if coeffs:
            for expo, c in coeffs.items():
                c = Fraction(c)
                if c != 0:
                    self.coeffs[tuple(expo)] = self.coeffs.get(tuple(expo), Fraction(0)) + c
            self.coeffs = {e: c for e, c in self.coeffs.items() if c != 0}

    @classmethod
    def constant(cls, nvars, value):
        return cls(nvars, {(0,) * nvars: Fraction(value)})

    @classmethod
    def variable(cls, nvars, index):
        expo = [0] * nvars
        expo[index] = 1
        return cls(nvars, {tuple(expo): Fraction(1)})

    def copy(self):
        p = RationalPoly(self.nvars)
        p.coeffs = dict(self.coeffs)
        return p

    def is_zero(self):
        return not self.coeffs

    def __add__(self, other):
        if not isinstance(other, RationalPoly):
            other = RationalPoly.constant(self.nvars, other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, Fraction(0)) + c
        p = RationalPoly(self.nvars)
        p.coeffs = {e: c for e, c in out.items() if c != 0}
        return p

    __radd__ = __add__

    def __neg__(self):
        p = RationalPoly(self.nvars)
        p.coeffs = {e: -c for e, c in self.coeffs.items()}
        return p

    def __sub__(self, other):
        if not isinstance(other, RationalPoly):
            other = RationalPoly.constant(self.nvars, other)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, RationalPoly):
            scalar = Fraction(other)
            p = RationalPoly(self.nvars)
            if scalar != 0:
                p.coeffs = {e: c * scalar for e, c in self.coeffs.items()}
            return p
        out = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        p = RationalPoly(self.nvars)
        p.coeffs = {e: c for e, c in out.items() if c != 0}
        return p

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, RationalPoly):
            return self.nvars == other.nvars and self.coeffs == other.coeffs
        return self.coeffs == RationalPoly.constant(self.nvars, other).coeffs

    def __hash__(self):
        return hash((self.nvars, frozenset(self.coeffs.items())))

    def derivative(self, index):
        out = {}
        for e, c in self.coeffs.items():
            k = e[index]
            if k == 0:
                continue
            e2 = list(e)
            e2[index] = k - 1
            e2 = tuple(e2)
            out[e2] = out.get(e2, Fraction(0)) + c * k
        p = RationalPoly(self.nvars)
        p.coeffs = {e: c for e, c in out.items() if c != 0}
        return p

    def evaluate(self, values):
        """Evaluate at a full assignment (exact if values are Fractions)."""
        total = Fraction(0)
        for e, c in self.coeffs.items():
            term = c
            for k, v in zip(e, values):
                if k:
                    term *= Fraction(v) ** k
            total += term
        return total

    def eval_at_one(self):
        return sum(self.coeffs.values(), Fraction(0))

    def substitute_constants(self, assignment):
        """Fix some variables to constants; assignment maps index -> value.

        The result still formally has `nvars` variables.
        """
        out = {}
        for e, c in self.coeffs.items():
            term = c
            e2 = list(e)
            dead = False
            for idx, val in assignment.items():
                k = e[idx]
                if k == 0:
                    continue
                val = Fraction(val)
                if val == 0:
                    dead = True
                    break
                term *= val ** k
                e2[idx] = 0
            if dead or term == 0:
                continue
            e2 = tuple(e2)
            out[e2] = out.get(e2, Fraction(0)) + term
        p = RationalPoly(self.nvars)
        p.coeffs = {e: c for e, c in out.items() if c != 0}
        return p

    def max_degree(self, index):
        return max((e[index] for e in self.coeffs), default=0)

    def variables_present(self):
        present = set()
        for e in self.coeffs:
            for i, k in enumerate(e):
                if k:
                    present.add(i)
        return present

    def taylor_coefficient_at_zero(self, index, order):
        """Coefficient polynomial of x_index**order (other variables kept)."""
        out = {}
        for e, c in self.coeffs.items():
            if e[index] != order:
                continue
            e2 = list(e)
            e2[index] = 0
            out[tuple(e2)] = out.get(tuple(e2), Fraction(0)) + c
        p = RationalPoly(self.nvars)
        p.coeffs = out
        return p

    def integrate_unit_interval(self, index):
        """Exact integral over x_index in [0, 1]; result has x_index removed."""
        out = {}
        for e, c in self.coeffs.items():
            e2 = list(e)
            k = e2[index]
            e2[index] = 0
            e2 = tuple(e2)
            out[e2] = out.get(e2, Fraction(0)) + c / (k + 1)
        p = RationalPoly(self.nvars)
        p.coeffs = {e: c for e, c in out.items() if c != 0}
        return p

    def __repr__(self):
        if not self.coeffs:
            return "RationalPoly(0)"
        parts = []
        for e, c in sorted(self.coeffs.items()):
            mono = "*".join(f"x{i}^{k}" for i, k in enumerate(e) if k)
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return "RationalPoly(" + " + ".join(parts) + ")"


def ordered_simplex_monomial_integral(exponents):
    """Integral of prod_i w_i^a_i over the simplex 0 < w_1 < ... < w_m < 1.

    Iterated integration gives prod_i 1/(a_1 + ... + a_i + i), exact.
    """
    total = Fraction(1)
    running = 0
    for i, a in enumerate(exponents, start=1):
        running += a
        total /= running + i
    return total


def random_sparse_poly(nvars, rng, n_terms=12, max_degree=2, allowed=None):
    """Random sparse polynomial with Fraction coefficients, for identity tests.

    `allowed` restricts which variables may appear (indices); per-variable
    degree is capped at `max_degree`.
    """
    if allowed is None:
        allowed = list(range(nvars))
    coeffs = {}
    for _ in range(n_terms):
        expo = [0] * nvars
        for idx in allowed:
            expo[idx] = int(rng.integers(0, max_degree + 1)) if rng.random() < 0.5 else 0
        num = int(rng.integers(-9, 10))
        den = int(rng.integers(1, 10))
        if num == 0:
            num = 1
        key = tuple(expo)
        coeffs[key] = coeffs.get(key, Fraction(0)) + Fraction(num, den)
    return RationalPoly(nvars, coeffs)
