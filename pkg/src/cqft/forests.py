"""Forest enumeration and the Brydges-Kennedy-Abdesselam-Rivasseau identities.

The interpolation formula rewrites a functional of all pair-links of a finite
object set as a sum over forests of integrated mixed derivatives, evaluated
at min-over-path link values.  For polynomial functionals every step is exact
over the rationals: the w-integrals are done by splitting the cube into
ordering simplices, on which each min-over-path collapses to a single
variable and the integrand is a monomial.
"""

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .rational import RationalPoly, ordered_simplex_monomial_integral, random_sparse_poly

__all__ = [
    "CapExceeded",
    "ObjectSet",
    "Forest",
    "PolyFunctional",
    "enumerate_forests",
    "enumerate_restricted_forests",
    "z_of_w",
    "bkar_evaluate",
    "bkar_forest_terms",
    "mayer_expand_nonoverlap",
    "MayerResult",
    "random_functional",
]

DEFAULT_CAP = 8


class CapExceeded(ValueError):
    """Object count beyond the combinatorial-explosion guard."""


class ObjectSet:
    """Finite abstract object set; objects carry type 1 or 2."""

    def __init__(self, n, types=None):
        if n < 1:
            raise ValueError("need at least one object")
        self.n = n
        self.types = tuple(types) if types is not None else (1,) * n
        if len(self.types) != n or any(t not in (1, 2) for t in self.types):
            raise ValueError("types must assign 1 or 2 to each of the n objects")
        self.links = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self.link_index = {l: k for k, l in enumerate(self.links)}

    def index_of(self, link):
        a, b = min(link), max(link)
        return self.link_index[(a, b)]

    def __repr__(self):
        return f"ObjectSet(n={self.n}, types={self.types})"


class Forest:
    """Acyclic set of links on an object set."""

    def __init__(self, objects, edges):
        self.objects = objects
        self.edges = tuple(sorted((min(e), max(e)) for e in edges))
        self._adj = {i: [] for i in range(objects.n)}
        for a, b in self.edges:
            self._adj[a].append((b, (a, b)))
            self._adj[b].append((a, (a, b)))

    @property
    def components(self):
        seen = set()
        comps = []
        for start in range(self.objects.n):
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            seen.add(start)
            while queue:
                u = queue.popleft()
                for v, _ in self._adj[u]:
                    if v not in seen:
                        seen.add(v)
                        comp.add(v)
                        queue.append(v)
            comps.append(frozenset(comp))
        return tuple(comps)

    def path_edges(self, a, b, merged_roots=False):
        """Edges of the unique path a -> b; [] if they coincide (after any
        root merging), None if disconnected.

        With merged_roots=True all type-2 objects count as one vertex, the
        rooted-forest convention of the restricted formula.
        """
        types = self.objects.types

        def node(v):
            return "root" if merged_roots and types[v] == 2 else v

        if node(a) == node(b):
            return []
        adj = {}
        for u, v_ in ((x, y) for x, y in self.edges):
            nu, nv = node(u), node(v_)
            adj.setdefault(nu, []).append((nv, (u, v_)))
            adj.setdefault(nv, []).append((nu, (u, v_)))
        start, goal = node(a), node(b)
        if start not in adj or goal not in adj:
            return None
        prev = {start: None}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if u == goal:
                break
            for v, edge in adj.get(u, ()):
                if v not in prev:
                    prev[v] = (u, edge)
                    queue.append(v)
        if goal not in prev:
            return None
        path = []
        cur = goal
        while prev[cur] is not None:
            u, edge = prev[cur]
            path.append(edge)
            cur = u
        return path[::-1]

    def is_restricted(self):
        types = self.objects.types
        return all(sum(types[v] == 2 for v in comp) <= 1 for comp in self.components)

    def __repr__(self):
        return f"Forest(edges={self.edges})"


def _iter_acyclic(objects, restrict, cap):
    if objects.n > cap:
        raise CapExceeded(
            f"{objects.n} objects exceeds the enumeration cap {cap}; "
            f"raise cap explicitly if you accept the blow-up"
        )
    links = objects.links
    types = objects.types

    def find(parent, x):
        while parent[x] != x:
            x = parent[x]
        return x

    def rec(i, parent, has_root, chosen):
        if i == len(links):
            yield Forest(objects, tuple(chosen))
            return
        yield from rec(i + 1, parent, has_root, chosen)
        a, b = links[i]
        ra, rb = find(parent, a), find(parent, b)
        if ra == rb:
            return
        if restrict and has_root[ra] and has_root[rb]:
            return
        parent2 = list(parent)
        parent2[rb] = ra
        has_root2 = list(has_root)
        has_root2[ra] = has_root[ra] or has_root[rb]
        chosen.append(links[i])
        yield from rec(i + 1, parent2, has_root2, chosen)
        chosen.pop()

    parent0 = list(range(objects.n))
    roots0 = [types[v] == 2 for v in range(objects.n)]
    yield from rec(0, parent0, roots0, [])


def enumerate_forests(objects, cap=DEFAULT_CAP):
    """All forests on the object set, each acyclic edge subset exactly once."""
    return _iter_acyclic(objects, restrict=False, cap=cap)


def enumerate_restricted_forests(objects, cap=DEFAULT_CAP):
    """Forests whose components hold at most one type-2 object each."""
    return _iter_acyclic(objects, restrict=True, cap=cap)


def z_of_w(forest, link, w, merged_roots=False):
    """Interpolated link value: min of w over the path, 0 across components."""
    path = forest.path_edges(link[0], link[1], merged_roots=merged_roots)
    if path is None:
        return 0.0
    if not path:
        return 1.0
    return min(w[(min(e), max(e))] for e in path)


class PolyFunctional:
    """Polynomial in the link variables of an object set, exact coefficients."""

    def __init__(self, objects, poly=None):
        self.objects = objects
        nvars = len(objects.links)
        self.poly = poly if poly is not None else RationalPoly.constant(nvars, 0)
        if self.poly.nvars != nvars:
            raise ValueError("polynomial variable count does not match the link set")

    @classmethod
    def constant(cls, objects, value):
        return cls(objects, RationalPoly.constant(len(objects.links), value))

    @classmethod
    def link(cls, objects, pair):
        return cls(objects, RationalPoly.variable(len(objects.links), objects.index_of(pair)))

    def __add__(self, other):
        other_poly = other.poly if isinstance(other, PolyFunctional) else other
        return PolyFunctional(self.objects, self.poly + other_poly)

    def __mul__(self, other):
        other_poly = other.poly if isinstance(other, PolyFunctional) else other
        return PolyFunctional(self.objects, self.poly * other_poly)

    def at_one(self):
        return self.poly.eval_at_one()

    def evaluate(self, values):
        return self.poly.evaluate(values)


def random_functional(objects, rng, n_terms=14, max_degree=2, skip_type2_pairs=False):
    """Random sparse link polynomial; optionally constant in type2-type2 links."""
    allowed = []
    for k, (a, b) in enumerate(objects.links):
        if skip_type2_pairs and objects.types[a] == 2 and objects.types[b] == 2:
            continue
        allowed.append(k)
    poly = random_sparse_poly(len(objects.links), rng, n_terms=n_terms,
                              max_degree=max_degree, allowed=allowed)
    return PolyFunctional(objects, poly)


def _forest_term(objects, poly, forest, merged_roots):
    """Exact value of one forest's contribution to the interpolation sum."""
    edges = list(forest.edges)
    m = len(edges)
    work = poly
    for e in edges:
        work = work.derivative(objects.index_of(e))
        if work.is_zero():
            return Fraction(0)

    # Map every surviving link variable to its min-over-path edge subset,
    # or to the constants 0 (disconnected) / 1 (merged endpoints).
    consts = {}
    paths = {}
    for var in work.variables_present():
        pair = objects.links[var]
        path = forest.path_edges(pair[0], pair[1], merged_roots=merged_roots)
        if path is None:
            consts[var] = Fraction(0)
        elif not path:
            consts[var] = Fraction(1)
        else:
            paths[var] = frozenset(edges.index((min(e), max(e))) for e in path)
    if consts:
        work = work.substitute_constants(consts)
        if work.is_zero():
            return Fraction(0)

    if m == 0 or not work.variables_present():
        # Constant integrand: the w-cube has volume one.
        return work.evaluate(())

    total = Fraction(0)
    monomials = list(work.coeffs.items())
    for perm in itertools.permutations(range(m)):
        rank = [0] * m
        for pos, e in enumerate(perm):
            rank[e] = pos
        # On this simplex each path-min equals the edge of smallest rank.
        target = {var: min(S, key=lambda e: rank[e]) for var, S in paths.items()}
        for expo, coeff in monomials:
            a = [0] * m
            for var, k in ((v, expo[v]) for v in paths if expo[v]):
                a[target[var]] += k
            total += coeff * ordered_simplex_monomial_integral([a[e] for e in perm])
    return total


def bkar_forest_terms(functional, variant=1, cap=DEFAULT_CAP):
    """Yield (forest, exact contribution) pairs of the interpolation formula."""
    objects = functional.objects
    if variant == 1:
        forests = enumerate_forests(objects, cap=cap)
        merged = False
    elif variant == 2:
        forests = enumerate_restricted_forests(objects, cap=cap)
        merged = True
    else:
        raise ValueError(f"variant must be 1 or 2, got {variant}")
    for forest in forests:
        yield forest, _forest_term(objects, functional.poly, forest, merged)


def bkar_evaluate(objects, functional, variant=1, cap=DEFAULT_CAP):
    """Forest-sum side of the interpolation identity, an exact rational.

    For variant 1 this equals functional(1,...,1) for every polynomial; for
    variant 2 the same holds whenever the functional is constant in every
    type2-type2 link variable.
    """
    if isinstance(functional, RationalPoly):
        functional = PolyFunctional(objects, functional)
    total = Fraction(0)
    for _, term in bkar_forest_terms(functional, variant=variant, cap=cap):
        total += term
    return total


@dataclass
class MayerResult:
    direct_indicator: int
    forest_sum: Fraction
    n_polymers: int
    n_contributing_forests: int

    @property
    def exact(self):
        return self.forest_sum == self.direct_indicator


def mayer_expand_nonoverlap(polymers, overlap=None, cap=DEFAULT_CAP):
    """Hard-core indicator product, rebuilt as a signed sum over forests.

    Each pair factor (1-S) + S*indicator is affine in its weakening
    parameter, so the forest derivatives are exact and the leftover
    min-over-path integrand integrates in closed form.
    """
    if overlap is None:
        overlap = lambda p, q: bool(set(p) & set(q))
    n = len(polymers)
    objects = ObjectSet(n)
    nvars = len(objects.links)
    functional = RationalPoly.constant(nvars, 1)
    direct = 1
    for k, (i, j) in enumerate(objects.links):
        hit = overlap(polymers[i], polymers[j])
        if hit:
            direct = 0
            # overlapping pair: factor 1 - z
            factor = RationalPoly.constant(nvars, 1) - RationalPoly.variable(nvars, k)
            functional = functional * factor
    total = Fraction(0)
    contributing = 0
    for _, term in bkar_forest_terms(PolyFunctional(objects, functional), variant=1, cap=cap):
        if term != 0:
            contributing += 1
        total += term
    return MayerResult(direct_indicator=direct, forest_sum=total,
                       n_polymers=n, n_contributing_forests=contributing)
