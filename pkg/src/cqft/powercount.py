"""Symbolic multiscale power counting and small numerical scaling checks.

Degrees of divergence, quasi-local classification, peeled scale exponents,
the maximal number of divergent external legs, the high-momentum partial-sum
condition, spring-factor sums, and a quadrature cross-check of the bubble
growth exponent.
"""

import math
from collections import Counter
from configparser import ConfigParser
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy import integrate

__all__ = [
    "FieldSpec",
    "TheorySpec",
    "phi4_theory",
    "rough_path_theory",
    "Line",
    "ExtLine",
    "MultiScaleDiagram",
    "superficial_degree",
    "renormalized_degree",
    "peel",
    "PeeledComponent",
    "classify_quasi_local",
    "QuasiLocalReport",
    "amplitude_exponent",
    "n_ext_max",
    "high_momentum_condition",
    "spring_sum_converges",
    "spring_double_sum",
    "amputated_bubble",
    "numeric_bubble_scaling",
    "BubbleScalingResult",
    "load_theory_file",
    "load_diagram_file",
]


@dataclass(frozen=True)
class FieldSpec:
    """A field species: scale dimension beta and its improved value beta_tilde."""

    name: str
    beta: object
    beta_tilde: object = None
    derived: bool = False

    def __post_init__(self):
        bt = self.beta if self.beta_tilde is None else self.beta_tilde
        object.__setattr__(self, "beta_tilde", bt)
        gap = bt - self.beta
        if gap not in (0, 1, 2):
            raise ValueError(
                f"beta_tilde - beta must be 0, 1 or 2 (field {self.name}: {gap})"
            )


@dataclass(frozen=True)
class TheorySpec:
    """Dimension, field content, interaction vertices and subtraction order.

    `scan` names the fields allowed as external legs of divergent structures
    (with 'even' or 'any' multiplicity), encoding the model's symmetry
    selection rules for the leg scan.
    """

    D: object
    fields: tuple
    vertices: tuple          # (coupling name, tuple of field names)
    tau: int
    scan: tuple = ()         # (field name, 'even'|'any')
    name: str = ""
    strict: bool = True

    def __post_init__(self):
        names = [f.name for f in self.fields]
        if len(set(names)) != len(names):
            raise ValueError("duplicate field names")
        for coupling, members in self.vertices:
            total = sum(self.field(m).beta for m in members)
            gap = total - self.D
            ok = gap == 0 if self.strict else abs(float(gap)) < 1e-9
            if not ok:
                raise ValueError(
                    f"vertex {coupling} is not marginal: sum(beta) - D = {gap}"
                )
        half_d = Fraction(self.D, 2) if isinstance(self.D, int) else self.D / 2
        for f in self.fields:
            if f.beta_tilde != f.beta and not f.beta_tilde > half_d:
                raise ValueError(
                    f"declared averaging subtraction on {f.name} but "
                    f"beta_tilde={f.beta_tilde} <= D/2"
                )

    def field(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(f"unknown field {name!r}")


def phi4_theory():
    """Massless quartic scalar in dimension 4: beta=1, tau=2, even legs."""
    phi = FieldSpec("phi", Fraction(1))
    return TheorySpec(
        D=4,
        fields=(phi,),
        vertices=(("lambda", ("phi", "phi", "phi", "phi")),),
        tau=2,
        scan=(("phi", "even"),),
        name="phi4",
    )


def rough_path_theory(alpha):
    """Two-component path model at Hurst index alpha: fields phi, dphi, sigma.

    The derivative field rides the lower scale in every vertex; only even
    sigma structures enter the divergence scan (the path components have
    negative dimension and are excluded by the model's symmetries).
    """
    alpha = Fraction(alpha) if not isinstance(alpha, float) else alpha
    phi = FieldSpec("phi", -alpha)
    dphi = FieldSpec("dphi", 1 - alpha, derived=True)
    sigma = FieldSpec("sigma", 2 * alpha)
    return TheorySpec(
        D=1,
        fields=(phi, dphi, sigma),
        vertices=(("lambda", ("dphi", "phi", "sigma")),),
        tau=0,
        scan=(("sigma", "even"),),
        name="rough",
        strict=not isinstance(alpha, float),
    )


class Line(NamedTuple):
    u: int
    v: int
    field: str
    scale: int


class ExtLine(NamedTuple):
    v: int
    field: str
    scale: int


@dataclass(frozen=True)
class MultiScaleDiagram:
    """Feynman graph whose every line carries a scale label."""

    internal: tuple
    external: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "internal", tuple(Line(*l) for l in self.internal))
        object.__setattr__(self, "external", tuple(ExtLine(*l) for l in self.external))

    @property
    def vertices(self):
        verts = set()
        for l in self.internal:
            verts.update((l.u, l.v))
        for e in self.external:
            verts.add(e.v)
        return verts

    def is_connected(self):
        verts = self.vertices
        if not verts:
            return True
        adj = {v: set() for v in verts}
        for l in self.internal:
            adj[l.u].add(l.v)
            adj[l.v].add(l.u)
        seen = {next(iter(verts))}
        stack = [next(iter(verts))]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return seen == verts


def superficial_degree(theory, external_fields):
    """omega = D - sum of external scale dimensions.

    `external_fields` is a field-name multiset (mapping or iterable).
    """
    counts = dict(external_fields) if isinstance(external_fields, dict) \
        else Counter(external_fields)
    total = 0
    for name, count in counts.items():
        total += theory.field(name).beta * count
    return theory.D - total


def renormalized_degree(omega, tau):
    """Degree after local-part subtraction at Taylor order tau."""
    return omega - tau - 1


@dataclass
class PeeledComponent:
    vertices: frozenset
    internal: tuple
    external_structure: tuple    # (field, scale) legs

    @property
    def min_internal_scale(self):
        return min(l.scale for l in self.internal)

    @property
    def max_external_scale(self):
        return max((s for _, s in self.external_structure), default=-math.inf)

    def omega(self, theory):
        total = 0
        for name, _ in self.external_structure:
            total += theory.field(name).beta
        return theory.D - total


def peel(diagram, j):
    """Subdiagram of lines at scale >= j, split into connected components.

    Each component carries its external structure: true external lines at its
    vertices plus every sub-j internal line endpoint landing on it.
    """
    high = [l for l in diagram.internal if l.scale >= j]
    low = [l for l in diagram.internal if l.scale < j]
    adj = {}
    for l in high:
        adj.setdefault(l.u, set()).add(l.v)
        adj.setdefault(l.v, set()).add(l.u)
    seen = set()
    comps = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        seen.add(start)
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.add(v)
                    stack.append(v)
        members = frozenset(comp)
        lines = tuple(l for l in high if l.u in members)
        ext = []
        for e in diagram.external:
            if e.v in members:
                ext.append((e.field, e.scale))
        for l in low:
            for endpoint in (l.u, l.v):
                if endpoint in members:
                    ext.append((l.field, l.scale))
        comps.append(PeeledComponent(members, lines, tuple(sorted(ext))))
    return comps


@dataclass
class QuasiLocalReport:
    is_quasi_local: bool
    i_gamma: object
    e_gamma: object
    height: object
    omega: object
    dangerous: bool
    degenerate: bool = False


def classify_quasi_local(diagram, theory):
    """Quasi-local iff every internal scale sits at or above every external one.

    Height >= 0 counts as quasi-local (log-divergent diagrams at equal scale
    are still dangerous); dangerous additionally needs omega >= 0.
    """
    if not diagram.is_connected():
        raise ValueError("diagram must be connected")
    if not diagram.internal:
        return QuasiLocalReport(False, None, None, None, None, False, degenerate=True)
    i_gamma = min(l.scale for l in diagram.internal)
    e_gamma = max((e.scale for e in diagram.external), default=-math.inf)
    height = i_gamma - e_gamma
    omega = superficial_degree(theory, [e.field for e in diagram.external])
    quasi = height >= 0
    return QuasiLocalReport(
        is_quasi_local=quasi,
        i_gamma=i_gamma,
        e_gamma=e_gamma,
        height=height,
        omega=omega,
        dangerous=bool(quasi and omega >= 0),
    )


def amplitude_exponent(diagram, theory, renormalized=False):
    """Predicted log_M order of the multiscale amplitude.

    Sum over the peeling stages of (stage width) x (sum of component
    degrees), with the degree of a dangerous component replaced by its
    renormalized value on the stages strictly above its external scales;
    the stage ladder is anchored at scale 0.
    """
    if not diagram.is_connected():
        raise ValueError("diagram must be connected")
    if not diagram.internal:
        return 0
    levels = sorted({l.scale for l in diagram.internal}
                    | {e.scale for e in diagram.external})
    levels = [s for s in levels if s > 0]
    total = 0
    prev = 0
    for s in levels:
        width = s - prev
        prev = s
        for comp in peel(diagram, s):
            omega = comp.omega(theory)
            if renormalized and omega >= 0 and comp.max_external_scale < s:
                omega = renormalized_degree(omega, theory.tau)
            total += width * omega
    return total


def n_ext_max(theory, leg_cap=12):
    """One plus the largest leg count of a superficially divergent structure.

    Scans multisets of the theory's scan fields (respecting declared parity).
    A scanned field of nonpositive dimension, or a divergent family still
    alive at the cap, is reported as an error instead of silently truncated.
    """
    if not theory.scan:
        raise ValueError("theory declares no scannable external fields")
    names = []
    steps = []
    for name, parity in theory.scan:
        f = theory.field(name)
        if not f.beta > 0:
            raise ValueError(
                f"field {name} has beta={f.beta} <= 0: structures with "
                f"omega >= 0 exist at every leg count, no finite N_ext_max"
            )
        names.append(name)
        steps.append(2 if parity == "even" else 1)

    best = 0
    def walk(i, counts, total):
        nonlocal best
        if i == len(names):
            if 0 < total <= leg_cap:
                multiset = {n: c for n, c in zip(names, counts) if c}
                if superficial_degree(theory, multiset) >= 0:
                    if total > best:
                        best = total
            return
        step = steps[i]
        c = 0
        while total + c <= leg_cap:
            counts.append(c)
            walk(i + 1, counts, total + c)
            counts.pop()
            c += step
    walk(0, [], 0)

    if best >= leg_cap:
        raise ValueError(
            f"divergent structures persist at the scan cap ({leg_cap} legs); "
            f"increase leg_cap or fix the field dimensions"
        )
    return best + 1


@dataclass
class HighMomentumReport:
    passed: bool
    partial_sums: tuple


def high_momentum_condition(theory, vertex_fields):
    """Check the descending-beta partial sums of a vertex stay below D.

    All partial sums of the I-1 largest dimensions must be strictly < D for
    the small-cube resummation to go through.
    """
    betas = sorted((theory.field(n).beta for n in vertex_fields), reverse=True)
    sums = []
    running = 0
    for b in betas[:-1]:
        running += b
        sums.append(running)
    passed = all(s < theory.D for s in sums)
    return HighMomentumReport(passed=passed, partial_sums=tuple(sums))


def spring_sum_converges(beta_tilde_i, beta_tilde_ip, D):
    """Strict convergence criterion of the two-scale spring-factor sum."""
    return beta_tilde_i + beta_tilde_ip > D


def spring_double_sum(beta_tilde_i, beta_tilde_ip, D, M=2.0, depth=60):
    """Partial sums of the nested spring sum, for boundedness checks."""
    partials = np.empty(depth + 1)
    total = 0.0
    for a in range(depth + 1):
        inner = sum(float(M) ** ((float(D) - float(beta_tilde_ip)) * b) for b in range(a))
        total += float(M) ** (-float(beta_tilde_i) * a) * (1.0 + inner)
        partials[a] = total
    return partials


def amputated_bubble(xi, alpha, cutoff):
    """One-dimensional normal-ordered bubble at external frequency xi.

    Integral of |u|^(1-2a) |xi-u|^(-1-2a) over the region where the first
    factor carries the lower frequency, with |u| capped at `cutoff`.
    Rescaling u = xi*v pulls out xi^(1-4a) exactly; the remaining core is a
    fixed quadrature and the far side integrates in log coordinates.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    if cutoff <= 2 * xi:
        raise ValueError("cutoff must sit well above the probe frequency")
    a = float(alpha)

    core, _ = integrate.quad(
        lambda v: abs(v) ** (1 - 2 * a) * abs(1 - v) ** (-1 - 2 * a),
        -1.0, 0.5, points=[0.0], limit=200)
    # v = -exp(t) for the far side, up to |u| = cutoff
    tail, _ = integrate.quad(
        lambda t: math.exp((2 - 2 * a) * t) * (1 + math.exp(t)) ** (-1 - 2 * a),
        0.0, math.log(cutoff / xi), limit=400)
    return xi ** (1 - 4 * a) * (core + tail)


@dataclass
class BubbleScalingResult:
    alpha: float
    rhos: tuple
    values: tuple
    slope: float
    log_values: tuple = field(default_factory=tuple)


def numeric_bubble_scaling(alpha, rhos, xi=1e-6, M=2.0):
    """Fit the log_M growth rate of the bubble against the cutoff scale.

    The probe frequency sits deep in the infrared so the cutoff-independent
    part of the integral cannot bias the fitted exponent.
    """
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    rhos = list(rhos)
    values = [amputated_bubble(xi, alpha, float(M) ** r) for r in rhos]
    logs = [math.log(v) / math.log(float(M)) for v in values]
    slope = float(np.polyfit(rhos, logs, 1)[0])
    return BubbleScalingResult(alpha=float(alpha), rhos=tuple(rhos),
                               values=tuple(values), slope=slope,
                               log_values=tuple(logs))


def _parse_number(text):
    text = text.strip()
    try:
        return Fraction(text)
    except ValueError:
        return float(text)


def load_theory_file(path):
    """Read a theory from an INI file: [theory], [field X], [vertex Y], [scan]."""
    cp = ConfigParser()
    with open(path) as fh:
        cp.read_file(fh)
    d = _parse_number(cp["theory"]["D"])
    tau = int(cp["theory"].get("tau", "0"))
    name = cp["theory"].get("name", "")
    fields = []
    vertices = []
    scan = []
    for section in cp.sections():
        if section.startswith("field "):
            fname = section.split(None, 1)[1]
            beta = _parse_number(cp[section]["beta"])
            bt = cp[section].get("beta_tilde")
            fields.append(FieldSpec(
                fname, beta,
                beta_tilde=_parse_number(bt) if bt else None,
                derived=cp[section].getboolean("derived", fallback=False),
            ))
        elif section.startswith("vertex "):
            vname = section.split(None, 1)[1]
            members = tuple(cp[section]["fields"].split())
            vertices.append((vname, members))
    if cp.has_section("scan"):
        for fname, parity in cp["scan"].items():
            scan.append((fname, parity.strip()))
    strict = all(isinstance(f.beta, Fraction) for f in fields) and isinstance(d, Fraction)
    return TheorySpec(D=d, fields=tuple(fields), vertices=tuple(vertices),
                      tau=tau, scan=tuple(scan), name=name, strict=strict)


def load_diagram_file(path):
    """Read a diagram: lines 'internal u v field scale' / 'external v field scale'."""
    internal = []
    external = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "internal" and len(parts) == 5:
                internal.append(Line(int(parts[1]), int(parts[2]), parts[3], int(parts[4])))
            elif parts[0] == "external" and len(parts) == 4:
                external.append(ExtLine(int(parts[1]), parts[2], int(parts[3])))
            else:
                raise ValueError(f"unparseable diagram line: {raw.rstrip()}")
    return MultiScaleDiagram(internal=tuple(internal), external=tuple(external))
