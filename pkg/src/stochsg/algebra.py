"""Exact symbolic engine for the vertex-generator algebra.

Functionals are finite sums of *generator monomials*: products of charged
exponential vertices ``e^{i c_k a phi(x_k)}`` with smeared weights, linear
field legs, pairwise exponential kernel weights ``e^{-c_i c_j a^2 E(x_i,x_j)}``,
per-vertex coincidence dressings, attached smeared-kernel factors and scalar
pairings.  Exponential (star) products, deformation maps and time-ordered
products act on this class in closed form.

All combinatorial data is exact: coefficients are complex rationals times
integer powers of a, hbar and lambda; kernel labels live in the basis
{Q, H, H0, DeltaR, DeltaA, Delta, Omega, DeltaF, DeltaAF} with per-term
integer hbar powers.  Comparisons rewrite everything over the real kernels
{Q, H, H0, DeltaR, DeltaA}:

    Delta   = DeltaR - DeltaA
    Omega   = H + (i/2) DeltaR - (i/2) DeltaA
    DeltaF  = H + (i/2) DeltaR + (i/2) DeltaA
    DeltaAF = H - (i/2) DeltaR - (i/2) DeltaA

Argument swaps map DeltaR <-> DeltaA and fix Q, H, H0.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import CancellationFailure, NegativeGrade, SingularCoincidence
from .exact import CR_I, CR_ONE, COEFF_ONE, Coeff, CRat

BASIS = ("Q", "H", "H0", "DeltaR", "DeltaA", "Delta", "Omega", "DeltaF", "DeltaAF")
REAL_BASIS = ("Q", "H", "H0", "DeltaR", "DeltaA")

_HALF_I = CRat.of(0, Fraction(1, 2))
_REWRITE = {
    "Delta": (("DeltaR", CR_ONE), ("DeltaA", -CR_ONE)),
    "Omega": (("H", CR_ONE), ("DeltaR", _HALF_I), ("DeltaA", -_HALF_I)),
    "DeltaF": (("H", CR_ONE), ("DeltaR", _HALF_I), ("DeltaA", _HALF_I)),
    "DeltaAF": (("H", CR_ONE), ("DeltaR", -_HALF_I), ("DeltaA", -_HALF_I)),
}
_SWAP = {"DeltaR": "DeltaA", "DeltaA": "DeltaR"}
# kernels with a finite coincidence limit (self-dressing is allowed)
_COINCIDENCE_OK = {"Q", "DeltaR", "DeltaA", "Delta"}


@dataclass(frozen=True)
class KernelExpr:
    """Normalized linear combination of basis kernels with hbar powers."""

    terms: tuple[tuple[str, int, CRat], ...] = ()

    @staticmethod
    def of(*terms) -> "KernelExpr":
        """Build from (basis, hbar_power, coeff) triples; coeff may be int."""
        acc: dict[tuple[str, int], CRat] = {}
        for basis, hbar, coeff in terms:
            if basis not in BASIS:
                raise KeyError(f"unknown kernel basis {basis!r}")
            c = coeff if isinstance(coeff, CRat) else CRat.of(coeff)
            key = (basis, hbar)
            acc[key] = acc.get(key, CRat.of(0)) + c
        kept = tuple(sorted((b, h, c) for (b, h), c in acc.items()
                            if not c.is_zero()))
        return KernelExpr(kept)

    def __add__(self, other: "KernelExpr") -> "KernelExpr":
        return KernelExpr.of(*self.terms, *other.terms)

    def scaled(self, c) -> "KernelExpr":
        c = c if isinstance(c, CRat) else CRat.of(c)
        return KernelExpr.of(*((b, h, cc * c) for b, h, cc in self.terms))

    def is_zero(self) -> bool:
        return not self.terms

    def real_basis(self) -> "KernelExpr":
        out = []
        for b, h, c in self.terms:
            if b in _REWRITE:
                out.extend((nb, h, c * nc) for nb, nc in _REWRITE[b])
            else:
                out.append((b, h, c))
        return KernelExpr.of(*out)

    def transpose(self) -> "KernelExpr":
        """Swap the two kernel arguments (expressed over the real basis)."""
        return KernelExpr.of(*((_SWAP.get(b, b), h, c)
                               for b, h, c in self.real_basis().terms))

    def is_symmetric(self) -> bool:
        return self.real_basis() == self.transpose()

    def hbar_split(self) -> tuple["KernelExpr", "KernelExpr"]:
        lo = KernelExpr.of(*(t for t in self.terms if t[1] == 0))
        hi = KernelExpr.of(*(t for t in self.terms if t[1] > 0))
        return lo, hi

    def min_hbar(self) -> int:
        return min((h for _, h, _ in self.terms), default=0)

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return " + ".join(f"{c}*hbar^{h}*{b}" for b, h, c in self.terms) or "0"


KE_ZERO = KernelExpr()
KE_Q = KernelExpr.of(("Q", 0, 1))
KE_H = KernelExpr.of(("H", 0, 1))
KE_DELTA_H = KernelExpr.of(("Delta", 1, 1))
KE_OMEGA_H = KernelExpr.of(("Omega", 1, 1))
KE_F_H = KernelExpr.of(("DeltaF", 1, 1))
KE_AF_H = KernelExpr.of(("DeltaAF", 1, 1))
KE_Q_F = KE_Q + KE_F_H          # Q + hbar Delta_F
KE_Q_AF = KE_Q + KE_AF_H        # Q + hbar Delta_AF
KE_Q_OMEGA = KE_Q + KE_OMEGA_H  # Q + hbar omega


# ---------------------------------------------------------------------------
# generator monomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Generator:
    """One monomial of the generator algebra.

    vertices: per-vertex integer charge (multiple of the base charge a),
    smearing id, dressing exponent D (weight factor e^{-(c^2 a^2/2) D(x,x)})
    and optional support-order rank.  ``pair_exps[(i, j)]`` with i < j is the
    exponent kernel E in e^{-c_i c_j a^2 E(x_i, x_j)}; the first kernel slot
    is x_i.  ``attached`` entries (v, E, leg, vertex_first) multiply the
    vertex weight by the smeared kernel (E leg)(x_v) (or its transpose);
    the derivative factor i c_v a is already folded into ``coeff``.
    """

    coeff: Coeff = COEFF_ONE
    charges: tuple[int, ...] = ()
    smearings: tuple[str, ...] = ()
    dressings: tuple[KernelExpr, ...] = ()
    ranks: tuple[int | None, ...] = ()
    pair_exps: tuple[tuple[tuple[int, int], KernelExpr], ...] = ()
    attached: tuple[tuple[int, KernelExpr, str, bool], ...] = ()
    scalar_pairs: tuple[tuple[KernelExpr, str, str], ...] = ()
    free_legs: tuple[str, ...] = ()

    @property
    def n_vertices(self) -> int:
        return len(self.charges)

    def with_coeff(self, coeff: Coeff) -> "Generator":
        return replace(self, coeff=coeff)

    def scaled(self, factor) -> "Generator":
        return replace(self, coeff=self.coeff * factor)


def unit() -> Generator:
    return Generator()


def vertex(charge: int, smearing: str = "g", dressing: KernelExpr = KE_ZERO,
           rank: int | None = None, coeff: Coeff = COEFF_ONE) -> Generator:
    return Generator(coeff=coeff, charges=(charge,), smearings=(smearing,),
                     dressings=(dressing,), ranks=(rank,))


def leg(name: str, coeff: Coeff = COEFF_ONE) -> Generator:
    return Generator(coeff=coeff, free_legs=(name,))


def sg_vertex(smearing: str = "g", dressing: KernelExpr = KE_ZERO,
              rank: int | None = None) -> list[Generator]:
    """The sine-Gordon interaction V = (V_{+a} + V_{-a}) / 2."""
    half = Coeff(CRat.of(Fraction(1, 2)))
    return [vertex(+1, smearing, dressing, rank, half),
            vertex(-1, smearing, dressing, rank, half)]


def _as_list(x) -> list[Generator]:
    if isinstance(x, Generator):
        return [x]
    return list(x)


# ---------------------------------------------------------------------------
# pointwise product, star product, deformation map
# ---------------------------------------------------------------------------

def _merge_pair_exps(pairs: dict, key: tuple[int, int], expr: KernelExpr):
    if key in pairs:
        pairs[key] = pairs[key] + expr
    else:
        pairs[key] = expr
    if pairs[key].is_zero():
        del pairs[key]


def _pointwise_two(A: Generator, B: Generator) -> Generator:
    off = A.n_vertices
    pairs = dict(A.pair_exps)
    for (i, j), e in B.pair_exps:
        pairs[(i + off, j + off)] = e
    return Generator(
        coeff=A.coeff * B.coeff,
        charges=A.charges + B.charges,
        smearings=A.smearings + B.smearings,
        dressings=A.dressings + B.dressings,
        ranks=A.ranks + B.ranks,
        pair_exps=tuple(sorted(pairs.items())),
        attached=A.attached + tuple((v + off, e, l, vf) for v, e, l, vf in B.attached),
        scalar_pairs=A.scalar_pairs + B.scalar_pairs,
        free_legs=A.free_legs + B.free_legs)


def pointwise(*factors) -> list[Generator]:
    """Pointwise (classical) product of generator sums."""
    out = [unit()]
    for f in factors:
        out = [_pointwise_two(a, b) for a in out for b in _as_list(f)]
    return out


def _leg_assignments(a_legs, b_legs, nA, nB):
    """All contraction assignments between the legs of two factors.

    Yields (a_att, b_att, pairs, a_free, b_free) where a_att is a list of
    (a_leg_index, b_vertex), b_att of (b_leg_index, a_vertex), pairs of
    (a_leg_index, b_leg_index).
    """
    def rec(ai, used_b_legs, a_att, pairs):
        if ai == len(a_legs):
            rem_b = [q for q in range(len(b_legs)) if q not in used_b_legs]

            def rec_b(bi, b_att):
                if bi == len(rem_b):
                    yield (list(a_att), list(b_att), list(pairs),
                           [], [q for q in rem_b
                                if q not in {x[0] for x in b_att}])
                    return
                q = rem_b[bi]
                yield from rec_b(bi + 1, b_att)          # stays free
                for i in range(nA):                       # contract to A vertex
                    yield from rec_b(bi + 1, b_att + [(q, i)])
            for a_att_, b_att_, pairs_, _, b_free in rec_b(0, []):
                a_free = [p for p in range(len(a_legs))
                          if p not in {x[0] for x in a_att_}
                          and p not in {x[0] for x in pairs_}]
                yield a_att_, b_att_, pairs_, a_free, b_free
            return
        yield from rec(ai + 1, used_b_legs, a_att, pairs)   # leg stays
        for j in range(nB):                                 # attach to B vertex
            yield from rec(ai + 1, used_b_legs, a_att + [(ai, j)], pairs)
        for q in range(len(b_legs)):                        # pair with B leg
            if q not in used_b_legs:
                yield from rec(ai + 1, used_b_legs | {q}, a_att,
                               pairs + [(ai, q)])

    yield from rec(0, frozenset(), [], [])


def _star_two(A: Generator, B: Generator, K: KernelExpr) -> list[Generator]:
    off = A.n_vertices
    base_pairs = dict(A.pair_exps)
    for (i, j), e in B.pair_exps:
        base_pairs[(i + off, j + off)] = e
    for i in range(A.n_vertices):
        for j in range(B.n_vertices):
            if A.charges[i] != 0 and B.charges[j] != 0:
                _merge_pair_exps(base_pairs, (i, j + off), K)
    out = []
    for a_att, b_att, pairs, a_free, b_free in _leg_assignments(
            A.free_legs, B.free_legs, A.n_vertices, B.n_vertices):
        coeff = A.coeff * B.coeff
        attached = list(A.attached) + [(v + off, e, l, vf)
                                       for v, e, l, vf in B.attached]
        scal = list(A.scalar_pairs) + list(B.scalar_pairs)
        ok = True
        for p, j in a_att:  # A-leg into B-vertex: i c_j a (K^T f_p)(x_j)
            cj = B.charges[j]
            if cj == 0:
                ok = False
                break
            coeff = coeff * Coeff(CR_I * cj, a_pow=1)
            attached.append((j + off, K, A.free_legs[p], False))
        if not ok:
            continue
        for q, i in b_att:  # B-leg into A-vertex: i c_i a (K f_q)(x_i)
            ci = A.charges[i]
            if ci == 0:
                ok = False
                break
            coeff = coeff * Coeff(CR_I * ci, a_pow=1)
            attached.append((i, K, B.free_legs[q], True))
        if not ok:
            continue
        for p, q in pairs:  # leg-leg: <f_p, K f_q>
            scal.append((K, A.free_legs[p], B.free_legs[q]))
        out.append(Generator(
            coeff=coeff,
            charges=A.charges + B.charges,
            smearings=A.smearings + B.smearings,
            dressings=A.dressings + B.dressings,
            ranks=A.ranks + B.ranks,
            pair_exps=tuple(sorted(base_pairs.items())),
            attached=tuple(attached),
            scalar_pairs=tuple(scal),
            free_legs=tuple(A.free_legs[p] for p in a_free)
            + tuple(B.free_legs[q] for q in b_free)))
    return out


def star_product(A, B, K: KernelExpr) -> list[Generator]:
    """Exponential product A *_K B, exact on generator sums."""
    out = []
    for a in _as_list(A):
        for b in _as_list(B):
            out.extend(_star_two(a, b, K))
    return out


def time_ordered(factors, K: KernelExpr) -> list[Generator]:
    """Multi-factor exponential product; T_0 = 1, T_1 = id."""
    factors = list(factors)
    if not factors:
        return [unit()]
    out = _as_list(factors[0])
    for f in factors[1:]:
        out = star_product(out, f, K)
    return out


def gamma_deform(A, K: KernelExpr) -> list[Generator]:
    """Deformation map Gamma_K = e^{(1/2) <K, d^2/dphi^2>}.

    Adds self-weights and symmetrized cross exponents on vertices and expands
    over partial leg contractions (leg-leg pairings and leg-vertex
    attachments).  Raises SingularCoincidence if a self-weight would involve
    a kernel that diverges at coincidence.
    """
    K_sym = K if K.is_symmetric() else (K.real_basis() + K.transpose()).scaled(Fraction(1, 2))
    singular_self = any(b not in _COINCIDENCE_OK for b, _, _ in K.terms)
    out = []
    for a in _as_list(A):
        if singular_self and any(c != 0 for c in a.charges):
            raise SingularCoincidence(
                "self-dressing with a coincidence-singular kernel")
        pairs = dict(a.pair_exps)
        for i in range(a.n_vertices):
            for j in range(i + 1, a.n_vertices):
                if a.charges[i] != 0 and a.charges[j] != 0:
                    _merge_pair_exps(pairs, (i, j), K_sym)
        dressings = tuple(d + K_sym if c != 0 else d
                          for d, c in zip(a.dressings, a.charges))
        base = replace(a, pair_exps=tuple(sorted(pairs.items())),
                       dressings=dressings)
        out.extend(_gamma_legs(base, K_sym))
    return out


def _gamma_legs(a: Generator, K_sym: KernelExpr) -> list[Generator]:
    legs = a.free_legs
    out = []

    def rec(idx, used, attached, scal, coeff):
        if idx == len(legs):
            freed = tuple(legs[p] for p in range(len(legs)) if p not in used)
            out.append(replace(a, coeff=coeff, attached=a.attached + tuple(attached),
                               scalar_pairs=a.scalar_pairs + tuple(scal),
                               free_legs=freed))
            return
        if idx in used:
            rec(idx + 1, used, attached, scal, coeff)
            return
        rec(idx + 1, used, attached, scal, coeff)            # untouched
        for v in range(a.n_vertices):                        # leg-vertex
            if a.charges[v] != 0:
                rec(idx + 1, used | {idx},
                    attached + [(v, K_sym, legs[idx], True)], scal,
                    coeff * Coeff(CR_I * a.charges[v], a_pow=1))
        for q in range(idx + 1, len(legs)):                  # leg-leg
            if q not in used:
                rec(idx + 1, used | {idx, q}, attached,
                    scal + [(K_sym, legs[idx], legs[q])], coeff)

    rec(0, frozenset(), [], [], a.coeff)
    return out


def gamma_inverse(A, K: KernelExpr) -> list[Generator]:
    return gamma_deform(A, K.scaled(-1))


def wick_expand(p: int, smearings: list[str]) -> list[Generator]:
    """Gamma_Q applied to a product of p linear legs."""
    if p < 1 or len(smearings) != p:
        raise ValueError("need one smearing per leg")
    prod = pointwise(*[leg(s) for s in smearings])
    return gamma_deform(prod, KE_Q)


def leibniz_expand(A, B, fields: list[str], K: KernelExpr) -> list[Generator]:
    """A *_K (B . Phi_1 ... Phi_m) organized by which legs contract into A."""
    out = []
    for a in _as_list(A):
        for subset_size in range(len(fields) + 1):
            for subset in itertools.combinations(range(len(fields)), subset_size):
                rest = [fields[i] for i in range(len(fields)) if i not in subset]
                lifted = replace(a, free_legs=a.free_legs)
                # attach the chosen legs into A in every way (vertices or A legs)
                pieces = [lifted]
                for i in subset:
                    new_pieces = []
                    for g in pieces:
                        for v in range(g.n_vertices):
                            if g.charges[v] != 0:
                                new_pieces.append(replace(
                                    g,
                                    coeff=g.coeff * Coeff(CR_I * g.charges[v], a_pow=1),
                                    attached=g.attached + ((v, K, fields[i], True),)))
                        for p_idx, aleg in enumerate(g.free_legs):
                            kept = tuple(l for k, l in enumerate(g.free_legs)
                                         if k != p_idx)
                            new_pieces.append(replace(
                                g, free_legs=kept,
                                scalar_pairs=g.scalar_pairs + ((K, aleg, fields[i]),)))
                    pieces = new_pieces
                for g in pieces:
                    for term in star_product(g, B, K):
                        out.append(replace(term,
                                           free_legs=term.free_legs + tuple(rest)))
    return out


# ---------------------------------------------------------------------------
# canonical form and collection
# ---------------------------------------------------------------------------

def _expr_key(expr: KernelExpr, rank_pair=None) -> tuple:
    e = expr.real_basis()
    if rank_pair is not None:
        ra, rb = rank_pair
        if ra is not None and rb is not None and ra != rb:
            drop = "DeltaR" if ra < rb else "DeltaA"
            e = KernelExpr.of(*(t for t in e.terms if t[0] != drop))
    return tuple((b, h, c.re, c.im) for b, h, c in e.terms)


def _rank_dropped(basis: str, ra, rb) -> bool:
    """K(z_a - z_b) with a strictly earlier: Delta^R vanishes (and dually)."""
    if ra is None or rb is None or ra == rb:
        return False
    return basis == ("DeltaR" if ra < rb else "DeltaA")


def _linearize(g: Generator, leg_ranks: dict | None = None,
               rank_reduce: bool = False):
    """Expand the linear kernel factors into single real-basis terms.

    Attached factors and scalar pairs are linear in their kernel, so a
    generator with a multi-term kernel there is a sum of single-term
    generators.  All attached entries are normalized to vertex-first slot
    order.  Yields generators whose attached/scalar kernels are single
    real-basis terms with unit coefficient (coefficients folded into coeff).
    """
    leg_ranks = leg_ranks or {}

    def rank_of_leg(name):
        return leg_ranks.get(name)

    outs = [(g.coeff, [], [])]
    for v, e, l, vf in g.attached:
        ee = (e if vf else e.transpose()).real_basis()
        ra = g.ranks[v] if rank_reduce else None
        rb = rank_of_leg(l) if rank_reduce else None
        new = []
        for b, h, c in ee.terms:
            if rank_reduce and _rank_dropped(b, ra, rb):
                continue
            for coeff, att, scal in outs:
                new.append((coeff * c,
                            att + [(v, KernelExpr.of((b, h, 1)), l, True)],
                            scal))
        outs = new
    for e, p, q in g.scalar_pairs:
        if p <= q:
            ee, pp, qq = e.real_basis(), p, q
        else:
            ee, pp, qq = e.transpose(), q, p
        ra = rank_of_leg(pp) if rank_reduce else None
        rb = rank_of_leg(qq) if rank_reduce else None
        new = []
        for b, h, c in ee.terms:
            if rank_reduce and _rank_dropped(b, ra, rb):
                continue
            for coeff, att, scal in outs:
                new.append((coeff * c,
                            att,
                            scal + [(KernelExpr.of((b, h, 1)), pp, qq)]))
        outs = new
    for coeff, att, scal in outs:
        if coeff.is_zero():
            continue
        yield replace(g, coeff=coeff, attached=tuple(att),
                      scalar_pairs=tuple(scal))


def _vertex_classes(g: Generator, leg_ranks):
    return [(g.charges[i], g.smearings[i], _expr_key(g.dressings[i]),
             g.ranks[i]) for i in range(g.n_vertices)]


def _canonical_key(g: Generator, leg_ranks: dict | None = None,
                   rank_reduce: bool = False) -> tuple:
    """Canonical structural key, minimized over vertex relabelings."""
    leg_ranks = leg_ranks or {}
    n = g.n_vertices
    classes = _vertex_classes(g, leg_ranks)

    def rank_of_leg(name):
        return leg_ranks.get(name) if rank_reduce else None

    def rank_of_vertex(i):
        return g.ranks[i] if rank_reduce else None

    def key_for(perm):
        vkey = tuple(classes[i] for i in perm)
        inv = {old: new for new, old in enumerate(perm)}
        edges = []
        for (i, j), e in g.pair_exps:
            a, b = inv[i], inv[j]
            rp = (rank_of_vertex(i), rank_of_vertex(j))
            if a <= b:
                edges.append((a, b, _expr_key(e, rp if rank_reduce else None)))
            else:
                edges.append((b, a, _expr_key(
                    e.transpose(), (rp[1], rp[0]) if rank_reduce else None)))
        att = []
        for v, e, l, vf in g.attached:
            ee = e if vf else e.transpose()
            rp = (rank_of_vertex(v), rank_of_leg(l))
            att.append((inv[v], l, _expr_key(ee, rp if rank_reduce else None)))
        scal = []
        for e, p, q in g.scalar_pairs:
            rp = (rank_of_leg(p), rank_of_leg(q))
            if p <= q:
                scal.append((p, q, _expr_key(e, rp if rank_reduce else None)))
            else:
                scal.append((q, p, _expr_key(
                    e.transpose(), (rp[1], rp[0]) if rank_reduce else None)))
        return (vkey, tuple(sorted(edges)), tuple(sorted(att)),
                tuple(sorted(scal)), tuple(sorted(g.free_legs)),
                g.coeff.powers_key())

    best = None
    for perm in itertools.permutations(range(n)):
        if [classes[i] for i in perm] != sorted(classes, key=repr):
            continue
        k = key_for(perm)
        if best is None or k < best:
            best = k
    if best is None:  # n == 0
        best = key_for(())
    return best


def collect(gens, leg_ranks=None, rank_reduce=False) -> dict:
    """Group generators by canonical key, summing exact coefficients.

    Linear kernel factors are expanded into single real-basis terms first,
    so combinations that agree only after kernel identities (for example
    Delta_F - omega = i Delta^A) collect exactly.
    """
    acc: dict[tuple, tuple[CRat, Generator]] = {}
    for g0 in _as_list(gens):
        for g in _linearize(g0, leg_ranks, rank_reduce):
            key = _canonical_key(g, leg_ranks, rank_reduce)
            if key in acc:
                c, rep = acc[key]
                acc[key] = (c + g.coeff.crat, rep)
            else:
                acc[key] = (g.coeff.crat, g)
    return {k: (c, rep) for k, (c, rep) in acc.items() if not c.is_zero()}


def collected_list(gens, leg_ranks=None, rank_reduce=False) -> list[Generator]:
    out = []
    for c, rep in collect(gens, leg_ranks, rank_reduce).values():
        out.append(rep.with_coeff(replace(rep.coeff, crat=c)))
    return out


def collected_raw_list(gens) -> list[Generator]:
    """Collect by canonical key keeping composite kernel factors intact.

    Used by the term builders: attached factors like (Q + hbar omega) f stay
    one entry for presentation and finite-hbar evaluation.
    """
    acc: dict[tuple, tuple[CRat, Generator]] = {}
    for g in _as_list(gens):
        key = _canonical_key(g)
        if key in acc:
            c, rep = acc[key]
            acc[key] = (c + g.coeff.crat, rep)
        else:
            acc[key] = (g.coeff.crat, g)
    return [rep.with_coeff(replace(rep.coeff, crat=c))
            for c, rep in acc.values() if not c.is_zero()]


def multisets_equal(gs1, gs2, leg_ranks=None, rank_reduce=False) -> bool:
    c1 = collect(gs1, leg_ranks, rank_reduce)
    c2 = collect(gs2, leg_ranks, rank_reduce)
    if set(c1) != set(c2):
        return False
    return all(c1[k][0] == c2[k][0] for k in c1)


# ---------------------------------------------------------------------------
# Q-deformed S-matrix and Bogoliubov terms
# ---------------------------------------------------------------------------

def qs_term(n: int, deform_q: bool = True, inverse: bool = False) -> list[Generator]:
    """lambda^n coefficient of Gamma_Q(S) (or of its star-inverse).

    Prefactor (+-i/hbar)^n lambda^n / n! is tracked exactly; the kernels are
    Q + hbar Delta_F (Q + hbar Delta_AF for the inverse).
    """
    if n < 0:
        raise ValueError("n >= 0")
    kernel = KE_Q_AF if inverse else KE_Q_F
    if not deform_q:
        kernel = KE_AF_H if inverse else KE_F_H
    dress = KE_Q if deform_q else KE_ZERO
    factors = [sg_vertex("g", dress) for _ in range(n)]
    gens = time_ordered(factors, kernel)
    i_pow = 3 if inverse else 1  # (-i) = i^3
    pref = Coeff(CRat.i_power(i_pow * n) * Fraction(1, _factorial(n)),
                 hbar_pow=-n, lam_pow=n)
    return collected_raw_list([g.scaled(pref) for g in gens])


def inverse_qs_term(n: int, deform_q: bool = True) -> list[Generator]:
    return qs_term(n, deform_q, inverse=True)


def _factorial(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out


def _leg_targets(legs, n, deform_q):
    """Enumerate leg fates: Wick pair (deformed only), vertex, or free."""
    m = len(legs)

    def rec(i, used, pairs, att, free):
        if i == m:
            yield list(pairs), list(att), list(free)
            return
        if i in used:
            yield from rec(i + 1, used, pairs, att, free)
            return
        yield from rec(i + 1, used, pairs, att, free + [i])
        for v in range(n):
            yield from rec(i + 1, used, pairs, att + [(i, v)], free)
        if deform_q:
            for q in range(i + 1, m):
                if q not in used:
                    yield from rec(i + 1, used | {q}, pairs + [(i, q)], att, free)

    yield from rec(0, frozenset(), [], [], [])


def bogoliubov_generators(n: int, legs: list[str], deform_q: bool = True,
                          smearings: list[str] | None = None,
                          ranks: list[int | None] | None = None,
                          leg_ranks: dict | None = None) -> list[Generator]:
    """All generator monomials of the (Q-deformed) retarded product R_{n,m}.

    Left (anti-time-ordered) blocks carry Q + hbar Delta_AF, right blocks
    Q + hbar Delta_F, cross pairs Q + hbar omega with the left vertex in the
    first kernel slot.  The observable legs Wick-pair through Q, attach to
    right-block vertices through Q + hbar Delta_F and to left-block vertices
    through Q + hbar omega.  Coefficient per monomial:
    (i/hbar)^n (-1)^(left size) 2^(-n) (times derivative factors i c a).
    """
    smearings = smearings or ["g"] * n
    ranks = ranks or [None] * n
    k_within_R = KE_Q_F if deform_q else KE_F_H
    k_within_L = KE_Q_AF if deform_q else KE_AF_H
    k_cross = KE_Q_OMEGA if deform_q else KE_OMEGA_H
    dress = KE_Q if deform_q else KE_ZERO
    out = []
    for left in _all_subsets(range(n)):
        left_set = set(left)
        order = sorted(left) + sorted(set(range(n)) - left_set)
        pos = {orig: k for k, orig in enumerate(order)}
        n_left = len(left)
        pair_exps = {}
        for a_orig in range(n):
            for b_orig in range(a_orig + 1, n):
                i, j = pos[a_orig], pos[b_orig]
                if i > j:
                    i, j = j, i
                in_l = a_orig in left_set
                in_l2 = b_orig in left_set
                if in_l and in_l2:
                    pair_exps[(i, j)] = k_within_L
                elif not in_l and not in_l2:
                    pair_exps[(i, j)] = k_within_R
                else:
                    pair_exps[(i, j)] = k_cross  # left vertex has lower pos
        base_coeff = Coeff(CRat.i_power(n) * Fraction((-1) ** n_left,
                                                      2 ** n),
                           hbar_pow=-n)
        for charges_orig in itertools.product((1, -1), repeat=n):
            charges = tuple(charges_orig[order[k]] for k in range(n))
            smear = tuple(smearings[order[k]] for k in range(n))
            rk = tuple(ranks[order[k]] for k in range(n))
            for pairs, att, free in _leg_targets(legs, n, deform_q):
                coeff = base_coeff
                attached = []
                ok = True
                for li, v_orig in att:
                    v = pos[v_orig]
                    kern = k_cross if v_orig in left_set else k_within_R
                    coeff = coeff * Coeff(CR_I * charges[v], a_pow=1)
                    attached.append((v, kern, legs[li], True))
                if not ok:
                    continue
                scal = tuple((KE_Q, legs[p], legs[q]) for p, q in pairs)
                out.append(Generator(
                    coeff=coeff, charges=charges, smearings=smear,
                    dressings=(dress,) * n, ranks=rk,
                    pair_exps=tuple(sorted(pair_exps.items())),
                    attached=tuple(attached), scalar_pairs=scal,
                    free_legs=tuple(legs[i] for i in free)))
    return out


def _all_subsets(it):
    items = list(it)
    for r in range(len(items) + 1):
        yield from (frozenset(c) for c in itertools.combinations(items, r))


def bogoliubov_terms(n: int, m: int, legs: list[str] | None = None,
                     deform_q: bool = True) -> list["TermGraph"]:
    """R_{n,m} applied to a product of m external legs, as term graphs."""
    if m < 1:
        raise ValueError("m >= 1")
    legs = legs or [f"f{k + 1}" for k in range(m)]
    if len(legs) != m:
        raise ValueError("need one leg smearing per external factor")
    gens = collected_raw_list(bogoliubov_generators(n, legs, deform_q))
    return [term_graph_from_generator(g) for g in gens]


@dataclass(frozen=True)
class FormalSeries:
    """Coupling-constant coefficients, order -> term graphs, contiguous
    from 0 up to a stated truncation."""

    orders: tuple[tuple["TermGraph", ...], ...]

    def __post_init__(self):
        if not self.orders:
            raise ValueError("a series needs at least order 0")

    @property
    def truncation(self) -> int:
        return len(self.orders) - 1

    def order(self, n: int) -> tuple["TermGraph", ...]:
        return self.orders[n]

    @staticmethod
    def qs(truncation: int, deform_q: bool = True,
           inverse: bool = False) -> "FormalSeries":
        return FormalSeries(tuple(
            tuple(term_graph_from_generator(g)
                  for g in qs_term(n, deform_q, inverse))
            for n in range(truncation + 1)))

    @staticmethod
    def retarded(truncation: int, m: int, legs: list[str] | None = None,
                 deform_q: bool = True) -> "FormalSeries":
        return FormalSeries(tuple(tuple(bogoliubov_terms(n, m, legs, deform_q))
                                  for n in range(truncation + 1)))


def interacting_field_term_J(n: int, leg_name: str = "f",
                             deform_q: bool = True) -> list["TermGraph"]:
    """Terms of J_n: the observable leg contracted into the left block."""
    gens = [g for g in bogoliubov_generators(n, [leg_name], deform_q)
            if _leg_side(g, leg_name) == "left"]
    return [term_graph_from_generator(g) for g in collected_raw_list(gens)]


def interacting_field_term_M(n: int, leg_name: str = "f",
                             deform_q: bool = True) -> list["TermGraph"]:
    """Terms of M_n: the observable leg contracted into the right block."""
    gens = [g for g in bogoliubov_generators(n, [leg_name], deform_q)
            if _leg_side(g, leg_name) == "right"]
    return [term_graph_from_generator(g) for g in collected_raw_list(gens)]


def _leg_side(g: Generator, leg_name: str) -> str | None:
    for v, e, l, _ in g.attached:
        if l == leg_name:
            lo, _ = e.hbar_split()
            hi = KernelExpr.of(*(t for t in e.terms if t[1] > 0))
            if any(b == "Omega" for b, _, _ in hi.terms):
                return "left"
            if any(b in ("DeltaF", "DeltaAF") for b, _, _ in hi.terms):
                return "right"
    return None


# ---------------------------------------------------------------------------
# uncontracted-vertex cancellation certificate
# ---------------------------------------------------------------------------

def uncontracted_cancellation(n: int, m: int, deform_q: bool = True,
                              max_n: int = 4) -> dict:
    """Exact-zero certificate for the marked-vertex subsum of R_{n,m}.

    Builds R_{n,m} with one distinguished interaction vertex, restricts to
    the subsum where that vertex carries no contractions at all (its pair
    kernels stripped, no legs attached), removes it, and verifies that every
    residual canonical class sums to zero exactly.
    """
    if not 1 <= n <= max_n:
        raise ValueError(f"n must be in [1, {max_n}] (raise max_n to go higher)")
    legs = [f"f{k + 1}" for k in range(m)]
    smearings = ["g*"] + ["g"] * (n - 1)   # vertex 0 is marked
    residual = []
    for g in bogoliubov_generators(n, legs, deform_q, smearings=smearings):
        marked = g.smearings.index("g*")
        if any(v == marked for v, _, _, _ in g.attached):
            continue  # subsum requires the marked vertex leg-free
        stripped = _drop_vertex(g, marked)
        # keep the marked charge as part of the class so the factored
        # functional V_{c,g*} is identical within each class
        stripped = replace(stripped,
                           free_legs=stripped.free_legs
                           + (f"#marked_charge{g.charges[marked]}",))
        residual.append(stripped)
    surviving = collect(residual)
    if surviving:
        _, rep = next(iter(surviving.values()))
        raise CancellationFailure(f"surviving term: {rep}")
    return {"n": n, "m": m, "classes_checked": len(residual), "surviving": 0}


def _drop_vertex(g: Generator, v: int) -> Generator:
    keep = [i for i in range(g.n_vertices) if i != v]
    remap = {old: new for new, old in enumerate(keep)}
    return Generator(
        coeff=g.coeff,
        charges=tuple(g.charges[i] for i in keep),
        smearings=tuple(g.smearings[i] for i in keep),
        dressings=tuple(g.dressings[i] for i in keep),
        ranks=tuple(g.ranks[i] for i in keep),
        pair_exps=tuple(sorted(((remap[i], remap[j]), e)
                               for (i, j), e in g.pair_exps
                               if i != v and j != v)),
        attached=tuple((remap[w], e, l, vf) for w, e, l, vf in g.attached),
        scalar_pairs=g.scalar_pairs,
        free_legs=g.free_legs)


# ---------------------------------------------------------------------------
# hbar strata: expansion, grading, classical limit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpandedTerm:
    """A single hbar-stratum summand with explicit contraction factors.

    The grade-zero pair kernels stay exponential (``q_pairs``); the quantum
    part of each pair kernel is Taylor-expanded into multiplicative ``edges``
    (i, j, basis, hbar, power) with the kernel's first slot at x_i.  Attached
    factors and scalar pairs are split into single basis terms.
    """

    coeff: Coeff = COEFF_ONE
    charges: tuple[int, ...] = ()
    smearings: tuple[str, ...] = ()
    dressings: tuple[KernelExpr, ...] = ()
    ranks: tuple[int | None, ...] = ()
    q_pairs: tuple[tuple[tuple[int, int], KernelExpr], ...] = ()
    edges: tuple[tuple[int, int, str, int, int], ...] = ()
    attached: tuple[tuple[int, str, int, str, bool], ...] = ()
    scalar_pairs: tuple[tuple[str, int, str, str], ...] = ()
    free_legs: tuple[str, ...] = ()

    @property
    def n_vertices(self) -> int:
        return len(self.charges)


def _expr_single_terms(expr: KernelExpr, real_basis: bool):
    """Decompose into single (basis, hbar, coeff) factors, optionally rewritten."""
    e = expr.real_basis() if real_basis else expr
    return list(e.terms)


def _expand_generator(g: Generator, k_max: int, real_basis: bool):
    """Yield (stratum, ExpandedTerm) for quantum hbar-order <= k_max."""
    quantum_pairs = []
    q_pairs = []
    for (i, j), e in g.pair_exps:
        lo, hi = e.hbar_split()
        if not lo.is_zero():
            if any(b != "Q" for b, _, _ in lo.terms):
                raise ValueError("grade-0 pair kernels must be pure Q")
            q_pairs.append(((i, j), lo))
        if not hi.is_zero():
            quantum_pairs.append(((i, j), _expr_single_terms(hi, real_basis)))
    att_options = []
    for v, e, l, vf in g.attached:
        lo, hi = e.hbar_split()
        opts = []
        for b, h, c in lo.terms:
            opts.append((0, (v, b, 0, l, vf), c))
        for b, h, c in _expr_single_terms(hi, real_basis):
            opts.append((h, (v, b, h, l, vf), c))
        att_options.append(opts)
    scal_options = []
    for e, p, q in g.scalar_pairs:
        lo, hi = e.hbar_split()
        opts = []
        for b, h, c in lo.terms:
            opts.append((0, (b, 0, p, q), c))
        for b, h, c in _expr_single_terms(hi, real_basis):
            opts.append((h, (b, h, p, q), c))
        scal_options.append(opts)

    base_coeff = g.coeff

    def rec_pairs(idx, edges, coeff, a_extra, h_extra):
        if idx == len(quantum_pairs):
            yield edges, coeff, a_extra, h_extra
            return
        (i, j), terms = quantum_pairs[idx]
        cc = g.charges[i] * g.charges[j]

        def per_term(ti, edges2, coeff2, a2, h2):
            if ti == len(terms):
                yield from rec_pairs(idx + 1, edges2, coeff2, a2, h2)
                return
            b, h, c = terms[ti]
            p = 0
            cur = coeff2
            while h2 + p * h <= k_max:
                if p == 0:
                    yield from per_term(ti + 1, edges2, coeff2, a2, h2)
                else:
                    cur = cur * (CRat.of(-cc) * c) * Fraction(1, p)
                    yield from per_term(ti + 1, edges2 + [(i, j, b, h, p)],
                                        cur, a2 + 2 * p, h2 + p * h)
                if h == 0:
                    break
                p += 1
        yield from per_term(0, edges, coeff, a_extra, h_extra)

    def rec_att(idx, chosen, coeff, h_extra):
        if idx == len(att_options):
            yield chosen, coeff, h_extra
            return
        for h, entry, c in att_options[idx]:
            if h_extra + h <= k_max:
                yield from rec_att(idx + 1, chosen + [entry], coeff * c,
                                   h_extra + h)

    def rec_scal(idx, chosen, coeff, h_extra):
        if idx == len(scal_options):
            yield chosen, coeff, h_extra
            return
        for h, entry, c in scal_options[idx]:
            if h_extra + h <= k_max:
                yield from rec_scal(idx + 1, chosen + [entry], coeff * c,
                                    h_extra + h)

    for edges, coeff1, a_extra, h_pairs in rec_pairs(0, [], base_coeff, 0, 0):
        for att, coeff2, h_att in rec_att(0, [], coeff1, h_pairs):
            for scal, coeff3, h_tot in rec_scal(0, [], coeff2, h_att):
                coeff = Coeff(coeff3.crat, coeff3.a_pow + a_extra,
                              coeff3.hbar_pow + h_tot, coeff3.lam_pow)
                yield h_tot, ExpandedTerm(
                    coeff=coeff, charges=g.charges, smearings=g.smearings,
                    dressings=g.dressings, ranks=g.ranks,
                    q_pairs=tuple(q_pairs), edges=tuple(sorted(edges)),
                    attached=tuple(sorted(att)),
                    scalar_pairs=tuple(sorted(scal)),
                    free_legs=tuple(sorted(g.free_legs)))


def _null_support(term: ExpandedTerm) -> bool:
    """True if an edge product vanishes pointwise: Delta^R and Delta^A on
    the same vertex pair have disjoint supports."""
    seen: dict[tuple[int, int], set[str]] = {}
    for i, j, b, h, p in term.edges:
        if b in ("DeltaR", "DeltaA"):
            seen.setdefault((i, j), set()).add(b)
    return any(len(s) == 2 for s in seen.values())


def _expanded_key(t: ExpandedTerm) -> tuple:
    n = t.n_vertices
    classes = [(t.charges[i], t.smearings[i], _expr_key(t.dressings[i]),
                t.ranks[i]) for i in range(n)]

    def key_for(perm):
        inv = {old: new for new, old in enumerate(perm)}
        qp = []
        for (i, j), e in t.q_pairs:
            a, b = inv[i], inv[j]
            if a > b:
                a, b = b, a
            qp.append((a, b, _expr_key(e)))
        ed = []
        for i, j, b, h, p in t.edges:
            a, c = inv[i], inv[j]
            bb = b
            if a > c:
                a, c = c, a
                bb = _SWAP.get(b, b)
            ed.append((a, c, bb, h, p))
        att = tuple(sorted((inv[v], b if vf else _SWAP.get(b, b), h, l)
                           for v, b, h, l, vf in t.attached))
        scal = tuple(sorted((b, h, p, q) if p <= q
                            else (_SWAP.get(b, b), h, q, p)
                            for b, h, p, q in t.scalar_pairs))
        return (tuple(classes[i] for i in perm), tuple(sorted(qp)),
                tuple(sorted(ed)), att, scal, t.free_legs,
                t.coeff.powers_key())

    best = None
    target = sorted(classes, key=repr)
    for perm in itertools.permutations(range(n)):
        if [classes[i] for i in perm] != target:
            continue
        k = key_for(perm)
        if best is None or k < best:
            best = k
    if best is None:
        best = key_for(())
    return best


def expand_strata(gens, k_max: int, real_basis: bool = True) -> dict:
    """Collect hbar strata 0..k_max of a generator sum.

    Returns {stratum: {canonical_key: (CRat, ExpandedTerm)}} with exact
    cancellation applied; pointwise-null edge products are dropped when
    working over the real basis.
    """
    strata: dict[int, dict] = {k: {} for k in range(k_max + 1)}
    for g in _as_list(gens):
        for h, term in _expand_generator(g, k_max, real_basis):
            if real_basis and _null_support(term):
                continue
            key = _expanded_key(term)
            bucket = strata[h]
            if key in bucket:
                c, rep = bucket[key]
                bucket[key] = (c + term.coeff.crat, rep)
            else:
                bucket[key] = (term.coeff.crat, term)
    for h in strata:
        strata[h] = {k: (c, rep) for k, (c, rep) in strata[h].items()
                     if not c.is_zero()}
    return strata


def _stratum_terms(stratum: dict) -> list[ExpandedTerm]:
    out = []
    for c, rep in stratum.values():
        out.append(replace(rep, coeff=replace(rep.coeff, crat=c)))
    return out


def classical_term(n: int, m: int, legs: list[str] | None = None,
                   deform_q: bool = True) -> list[ExpandedTerm]:
    """hbar^0 stratum of the (Q-deformed) retarded product R_{n,m}.

    Verifies along the way that every stratum below n cancels exactly;
    NegativeGrade is raised otherwise.  The returned terms carry exactly n
    quantum contraction factors over {H, DeltaR, DeltaA} (H factors cancel
    in the collected sum) against the grade-zero Q background.
    """
    legs = legs or [f"f{k + 1}" for k in range(max(m, 0))]
    gens = bogoliubov_generators(n, legs, deform_q)
    strata = expand_strata(gens, k_max=n, real_basis=True)
    for k in range(n):
        if strata[k]:
            _, rep = next(iter(strata[k].values()))
            raise NegativeGrade(
                f"stratum hbar^{k - n} survives for R_{n},{m}: {rep}")
    return _stratum_terms(strata[n])


def classical_term_labeled(n: int, m: int, legs: list[str] | None = None,
                           deform_q: bool = False) -> list[ExpandedTerm]:
    """Classical stratum in the original kernel labels (for rendering)."""
    legs = legs or [f"f{k + 1}" for k in range(max(m, 0))]
    gens = bogoliubov_generators(n, legs, deform_q)
    strata = expand_strata(gens, k_max=n, real_basis=False)
    return _stratum_terms(strata[n])


def aggregate_charge_sectors(terms) -> list[tuple[ExpandedTerm, int]]:
    """Group expanded terms by contraction structure, charges ignored.

    One graph per (edge kernels, leg attachments) class, the charge
    assignments and derivative factors absorbed into a multiplicity; at
    second order for the field observable this collapses the expansion to
    four graphs.
    """
    groups: dict[tuple, tuple[ExpandedTerm, int]] = {}
    for t in terms:
        masked = replace(t, charges=(0,) * t.n_vertices, coeff=COEFF_ONE)
        key = _expanded_key(masked)
        if key in groups:
            rep, count = groups[key]
            groups[key] = (rep, count + 1)
        else:
            groups[key] = (t, 1)
    return [groups[k] for k in sorted(groups)]


def hbar_floor(n: int, m: int, deform_q: bool = True) -> int:
    """Minimal hbar grade of R_{n,m}; asserts it is exactly 0."""
    terms = classical_term(n, m, deform_q=deform_q)
    if not terms:
        raise NegativeGrade(f"hbar^0 stratum of R_{n},{m} is empty")
    return 0


def hbar_grade(t) -> int:
    """Total hbar power of a term, prefactor included.

    Exponential pair kernels contribute their minimal power (0 for kernels
    with a Q part); explicit expanded edges contribute hbar * power.
    """
    if isinstance(t, ExpandedTerm):
        return t.coeff.hbar_pow
    if isinstance(t, TermGraph):
        if isinstance(t.payload, (Generator, ExpandedTerm)):
            return hbar_grade(t.payload)
        return t.hbar_degree
    g = t
    grade = g.coeff.hbar_pow
    # exponential pair kernels contribute 0 (the constant term of e^x);
    # attached factors and scalar pairs are linear in the kernel
    for _, e, _, _ in g.attached:
        grade += e.min_hbar()
    for e, _, _ in g.scalar_pairs:
        grade += e.min_hbar()
    return grade


# ---------------------------------------------------------------------------
# connected decomposition
# ---------------------------------------------------------------------------

def _partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def connected_product(factors, K: KernelExpr) -> list[Generator]:
    """Moebius-style connected part of a multi-factor star product."""
    factors = [_as_list(f) for f in factors]
    n = len(factors)
    if n == 1:
        return list(factors[0])
    full = time_ordered(factors, K)
    out = list(full)
    for part in _partitions(range(n)):
        if len(part) < 2:
            continue
        blocks = [connected_product([factors[i] for i in sorted(b)], K)
                  for b in part]
        for g in pointwise(*blocks):
            out.append(g.scaled(-1))
    return out


def connected_decomposition(factors, K: KernelExpr) -> dict:
    """Partition-indexed decomposition of the full star product."""
    factors = [_as_list(f) for f in factors]
    out = {}
    for part in _partitions(range(len(factors))):
        blocks = [connected_product([factors[i] for i in sorted(b)], K)
                  for b in part]
        key = tuple(tuple(sorted(b)) for b in sorted(part, key=min))
        out[key] = pointwise(*blocks)
    return out


def min_nonvanishing_stratum(gens, k_max: int) -> int | None:
    """Lowest quantum hbar order with a surviving stratum, or None."""
    strata = expand_strata(gens, k_max=k_max, real_basis=True)
    for k in range(k_max + 1):
        if strata[k]:
            return k
    return None


# ---------------------------------------------------------------------------
# term-graph view: JSON and DOT
# ---------------------------------------------------------------------------

_EDGE_COLORS = {
    "DeltaF": "black", "Omega": "green", "DeltaAF": "red", "Q": "blue",
    "H": "gray", "H0": "lightgray", "DeltaR": "orange", "DeltaA": "brown",
    "Delta": "purple4",
}


@dataclass(frozen=True)
class TermGraph:
    """Presentation view of one expansion summand."""

    vertices: tuple[dict, ...]
    external: tuple[str, ...]
    edges: tuple[dict, ...]
    coeff_num: int
    coeff_den: int
    i_power: int
    a_power: int
    hbar_degree: int
    lam_power: int
    multiplicity: int = 1
    payload: object = field(default=None, compare=False, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "vertices": [dict(v) for v in self.vertices],
            "edges": [dict(e) for e in self.edges],
            "coeff_num": self.coeff_num,
            "coeff_den": self.coeff_den,
            "i_power": self.i_power,
            "hbar_degree": self.hbar_degree,
            "a_power": self.a_power,
            "lam_power": self.lam_power,
            "multiplicity": self.multiplicity,
            "external": list(self.external),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _coeff_view(coeff: Coeff) -> tuple[int, int, int]:
    frac, ipow = coeff.crat.as_fraction_ipow()
    return frac.numerator, frac.denominator, ipow


def _kernel_name(expr_or_basis) -> str:
    if isinstance(expr_or_basis, str):
        return expr_or_basis
    names = sorted({b for b, _, _ in expr_or_basis.terms})
    return "+".join(names) if names else "0"


def term_graph_from_generator(g: Generator) -> TermGraph:
    num, den, ipow = _coeff_view(g.coeff)
    vertices = tuple(
        {"charge": g.charges[i], "smearing": g.smearings[i],
         "dressed": not g.dressings[i].is_zero()}
        for i in range(g.n_vertices))
    edges = []
    for (i, j), e in g.pair_exps:
        edges.append({"a": i, "b": j, "kernel": _kernel_name(e),
                      "kind": "exponential"})
    for v, e, l, vf in g.attached:
        edges.append({"a": v, "b": f"leg:{l}", "kernel": _kernel_name(e),
                      "kind": "attached"})
    for e, p, q in g.scalar_pairs:
        edges.append({"a": f"leg:{p}", "b": f"leg:{q}",
                      "kernel": _kernel_name(e), "kind": "scalar"})
    return TermGraph(vertices, tuple(g.free_legs), tuple(edges),
                     num, den, ipow, g.coeff.a_pow, g.coeff.hbar_pow,
                     g.coeff.lam_pow, payload=g)


def term_graph_from_expanded(t: ExpandedTerm, multiplicity: int = 1) -> TermGraph:
    num, den, ipow = _coeff_view(t.coeff)
    vertices = tuple(
        {"charge": t.charges[i], "smearing": t.smearings[i],
         "dressed": not t.dressings[i].is_zero()}
        for i in range(t.n_vertices))
    edges = []
    for (i, j), e in t.q_pairs:
        edges.append({"a": i, "b": j, "kernel": "Q", "kind": "exponential"})
    for i, j, b, h, p in t.edges:
        edges.append({"a": i, "b": j, "kernel": b, "kind": "contraction",
                      "hbar": h, "power": p})
    for v, b, h, l, vf in t.attached:
        edges.append({"a": v, "b": f"leg:{l}", "kernel": b,
                      "kind": "attached", "hbar": h})
    for b, h, p, q in t.scalar_pairs:
        edges.append({"a": f"leg:{p}", "b": f"leg:{q}", "kernel": b,
                      "kind": "scalar", "hbar": h})
    return TermGraph(vertices, tuple(t.free_legs), tuple(edges),
                     num, den, ipow, t.coeff.a_pow, t.coeff.hbar_pow,
                     t.coeff.lam_pow, multiplicity, payload=t)


def graph_render(t: TermGraph) -> str:
    """Deterministic DOT rendering: vertices as black dots, external legs
    purple; edge colors DeltaF black, omega green, DeltaAF red, Q blue."""
    lines = ["graph term {", "  node [shape=point, width=0.12];"]
    for k, v in enumerate(t.vertices):
        sign = "+" if v["charge"] > 0 else ("-" if v["charge"] < 0 else "0")
        lines.append(
            f'  v{k} [color=black, xlabel="V{sign}:{v["smearing"]}"];')
    legs = sorted({e["b"] for e in t.edges if isinstance(e["b"], str)
                   and e["b"].startswith("leg:")}
                  | {f"leg:{l}" for l in t.external}
                  | {e["a"] for e in t.edges if isinstance(e["a"], str)
                     and e["a"].startswith("leg:")})
    for l in legs:
        lines.append(f'  "{l}" [color=purple, xlabel="{l[4:]}"];')
    body = []
    for e in t.edges:
        a = f"v{e['a']}" if isinstance(e["a"], int) else f'"{e["a"]}"'
        b = f"v{e['b']}" if isinstance(e["b"], int) else f'"{e["b"]}"'
        color = _EDGE_COLORS.get(e["kernel"].split("+")[-1], "black")
        label = e["kernel"]
        if e.get("power", 1) not in (1, None) and e.get("kind") == "contraction":
            label += f"^{e['power']}"
        style = "dashed" if e.get("kind") == "exponential" else "solid"
        body.append(f'  {a} -- {b} [color={color}, label="{label}", style={style}];')
    lines.extend(sorted(body))
    mult = f" x{t.multiplicity}" if t.multiplicity != 1 else ""
    lines.append(f'  label="coeff {t.coeff_num}/{t.coeff_den} i^{t.i_power} '
                 f'a^{t.a_power} hbar^{t.hbar_degree}{mult}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
