"""Gaussian moments by pairing enumeration, and the telescoped product bound.

Moments are exact sums over perfect matchings; a grouped contraction-table
version keeps the combinatorics polynomial when many indices repeat.  The
bound multiplies, for each variable in turn, one plus the total coupling to
later variables; at K=1 it dominates the moment term by term.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "PAIRING_CAP",
    "enumerate_pairings",
    "double_factorial",
    "wick_moment",
    "contraction_tables",
    "wick_moment_grouped",
    "mc_moment",
    "wick_bound",
    "wick_bound_optimal",
    "GaussianVector",
    "local_factorial_experiment",
    "LocalFactorialReport",
]

PAIRING_CAP = 16


def double_factorial(n):
    """(2N-1)!! with the empty-product convention for n <= 0."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def enumerate_pairings(count, cap=PAIRING_CAP):
    """Yield all perfect matchings of range(count) as tuples of index pairs.

    An odd count yields nothing (odd Gaussian moments vanish).
    """
    if count > cap:
        raise ValueError(f"2N={count} beyond enumeration cap {cap}")
    if count % 2:
        return
    yield from _pairings(tuple(range(count)))


def _pairings(items):
    if not items:
        yield ()
        return
    first = items[0]
    rest = items[1:]
    for i, partner in enumerate(rest):
        head = ((first, partner),)
        for tail in _pairings(rest[:i] + rest[i + 1:]):
            yield head + tail


@dataclass
class GaussianVector:
    """Centered Gaussian vector given by its covariance matrix."""

    cov: object  # square matrix; list-of-lists keeps Fractions exact
    labels: tuple = ()
    psd_tol: float = 1e-10

    def __post_init__(self):
        m = len(self.cov)
        for row in self.cov:
            if len(row) != m:
                raise ValueError("covariance must be square")
        arr = np.array([[float(v) for v in row] for row in self.cov])
        if not np.allclose(arr, arr.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        eig = np.linalg.eigvalsh(arr)
        if eig.min() < -self.psd_tol:
            raise ValueError(f"covariance not PSD: min eigenvalue {eig.min():.3e}")

    @property
    def size(self):
        return len(self.cov)


def _cov_entry(cov, i, j):
    return cov.cov[i][j] if isinstance(cov, GaussianVector) else cov[i][j]


def wick_moment(cov, indices, cap=PAIRING_CAP):
    """Moment E[X_{i1} ... X_{i2N}] as the pairing sum; 0 for odd order.

    Exact when the covariance entries are Fractions.
    """
    indices = list(indices)
    if len(indices) % 2:
        return 0
    total = 0
    for pairing in enumerate_pairings(len(indices), cap=cap):
        term = 1
        for a, b in pairing:
            term *= _cov_entry(cov, indices[a], indices[b])
        total += term
    return total


def contraction_tables(ns, pair_allowed=None):
    """Yield (table, multiplicity) over the pairings of groups of sizes ns.

    A table maps (i, j) with i <= j to the number of contractions between
    groups i and j (i == j counts internal pairs); its multiplicity is
    prod n_i! / (prod m_ii! 2^m_ii prod_{i<j} m_ij!).  `pair_allowed(i, j)`
    prunes tables using a forbidden pair, e.g. pairs of zero covariance.
    """
    k = len(ns)
    numerator = Fraction(1)
    for n in ns:
        numerator *= math.factorial(n)
    remaining = list(ns)
    table = {}

    def assign(i, den):
        # remaining[i] holds the slots of group i not used by earlier groups;
        # distribute them over cross links to j > i, the rest self-pairs.
        if i == k:
            yield dict(table), numerator / den
            return

        def fill(j, left, den):
            if j == k:
                if left % 2 == 0:
                    half = left // 2
                    if half and pair_allowed is not None and not pair_allowed(i, i):
                        return
                    if half:
                        table[(i, i)] = half
                    yield from assign(i + 1, den * math.factorial(half) * (2 ** half))
                    table.pop((i, i), None)
                return
            top = min(left, remaining[j])
            if pair_allowed is not None and not pair_allowed(i, j):
                top = 0
            for m in range(top + 1):
                remaining[j] -= m
                if m:
                    table[(i, j)] = m
                yield from fill(j + 1, left - m, den * math.factorial(m))
                table.pop((i, j), None)
                remaining[j] += m

        yield from fill(i + 1, remaining[i], den)

    if sum(ns) % 2 == 0:
        yield from assign(0, Fraction(1))


def wick_moment_grouped(cov, powers, exact=True):
    """Moment of prod_i X_i^{n_i} via contraction tables instead of pairings.

    Equivalent to the pairing sum (checked in the tests) but polynomial in
    the number of distinct indices.  Exact when `exact`, even for float
    covariances (binary floats are rationals).
    """
    coords = [i for i, p in enumerate(powers) if p > 0]
    ns = [int(powers[i]) for i in coords]
    if sum(ns) % 2:
        return Fraction(0) if exact else 0.0

    def entry(i, j):
        v = _cov_entry(cov, coords[i], coords[j])
        return Fraction(v) if exact else float(v)

    total = Fraction(0) if exact else 0.0
    nonzero = lambda i, j: entry(i, j) != 0
    for table, mult in contraction_tables(ns, pair_allowed=nonzero):
        term = mult if exact else float(mult)
        for (i, j), m in table.items():
            term *= entry(i, j) ** m
        total += term
    return total


def mc_moment(cov, indices, n_samples, seed):
    """Monte-Carlo estimate of the same moment: (mean, stderr)."""
    arr = np.array([[float(v) for v in row] for row in
                    (cov.cov if isinstance(cov, GaussianVector) else cov)])
    # eigh-based root tolerates the semi-definite edge cases
    w, v = np.linalg.eigh(arr)
    root = v @ np.diag(np.sqrt(np.clip(w, 0, None)))
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, arr.shape[0])) @ root.T
    prod = np.ones(n_samples)
    for i in indices:
        prod *= z[:, i]
    mean = float(prod.mean())
    stderr = float(prod.std(ddof=1) / math.sqrt(n_samples))
    return mean, stderr


def wick_bound(cov, indices, K=1.0, exponent="2N"):
    """Telescoped product bound on |E[X_{i1}...X_{i2N}]|.

    K^-n * prod_{i<2N} [1 + K sum_{j>i} |<X_i X_j>|], with n = 2N by default
    (the printed convention; domination then needs K <= 1).  exponent="N"
    selects the rescaling-derived convention, valid for every K > 0.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    indices = list(indices)
    two_n = len(indices)
    n = two_n if exponent == "2N" else (two_n // 2 if exponent == "N" else None)
    if n is None:
        raise ValueError("exponent must be '2N' or 'N'")
    bound = K ** (-n)
    for i in range(two_n - 1):
        coupling = sum(abs(float(_cov_entry(cov, indices[i], indices[j])))
                       for j in range(i + 1, two_n))
        bound *= 1.0 + K * coupling
    return bound


def wick_bound_optimal(cov, indices, k_grid, exponent="2N"):
    """Minimize the bound over a K grid; returns (best_K, best_value)."""
    best = None
    for K in k_grid:
        val = wick_bound(cov, indices, K=K, exponent=exponent)
        if best is None or val < best[1]:
            best = (K, val)
    return best


@dataclass
class LocalFactorialReport:
    weighted_sum: float
    unweighted_sum: float
    bound: float
    holds: bool
    slack: float
    n_fields: int
    weights: dict = field(default_factory=dict)
    mc_stderr: float | None = None


def local_factorial_experiment(cube_positions, fields_per_cube, r,
                               covariance=None, cap=PAIRING_CAP,
                               mc_samples=200_000, seed=0):
    """Pairing sum with per-cube damping weights against the coupling bound.

    Cubes sit at integer positions on a line; fields inside a cube couple to
    fields elsewhere through a polynomially decaying covariance.  The left
    side carries the 1/(1+N(cube)) weights; without them the sum picks up
    local factorials as fields pile into one cube.
    """
    if covariance is None:
        covariance = lambda d: 1.0 / (1.0 + abs(d)) ** r
    cubes = []
    for cube, count in zip(cube_positions, fields_per_cube):
        cubes.extend([cube] * count)
    two_n = len(cubes)
    if two_n % 2:
        raise ValueError("total field count must be even")
    cov = [[covariance(cubes[a] - cubes[b]) for b in range(two_n)] for a in range(two_n)]

    mc_stderr = None
    if two_n <= cap:
        unweighted = 0.0
        for pairing in enumerate_pairings(two_n, cap=cap):
            term = 1.0
            for a, b in pairing:
                term *= abs(cov[a][b])
            unweighted += term
    else:
        # Monte-Carlo over uniform random pairings: mean * (2N-1)!!
        rng = np.random.default_rng(seed)
        samples = np.empty(mc_samples)
        idx = list(range(two_n))
        for s in range(mc_samples):
            rng.shuffle(idx)
            term = 1.0
            for a in range(0, two_n, 2):
                term *= abs(cov[idx[a]][idx[a + 1]])
            samples[s] = term
        count = float(double_factorial(two_n - 1))
        unweighted = float(samples.mean()) * count
        mc_stderr = float(samples.std(ddof=1) / math.sqrt(mc_samples)) * count

    counts = {}
    for cube in cubes:
        counts[cube] = counts.get(cube, 0) + 1
    weight = 1.0
    for c in counts.values():
        weight /= 1.0 + c
    weighted = unweighted * weight

    positions = sorted(set(cube_positions))
    coupling = max(sum(covariance(p - q) for q in positions) for p in positions)
    n_pairs = two_n // 2
    bound = (1.0 + coupling) ** (3 * n_pairs)
    return LocalFactorialReport(
        weighted_sum=weighted,
        unweighted_sum=unweighted,
        bound=bound,
        holds=weighted <= bound,
        slack=weighted / bound if bound else math.inf,
        n_fields=two_n,
        weights={c: 1.0 / (1.0 + n) for c, n in counts.items()},
        mc_stderr=mc_stderr,
    )
