"""Numeric perturbative coefficients of expectation values and correlators.

Evaluation happens at the zero field configuration: generator monomials with
free legs drop, the rest become integrals over powers of the spacetime
diamond, summed pointwise inside a single quadrature so that the exact
cancellations of the symbolic layer carry over to the integrand.

Propagator symbols are bound with the "paper" retarded sign, which is the
binding that makes the classical (hbar^0) stratum reproduce the SPDE
hierarchy with source sign s = -1; see the sign note in spde_mc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg
from . import kernels as ker
from . import quad as qd
from .algebra import ExpandedTerm, Generator, KernelExpr
from .errors import ConfigError
from .results import QuadResult

ALGEBRA_CONVENTION = "paper"


@dataclass(frozen=True)
class SeriesCoefficient:
    order: int
    observable: str
    value: QuadResult
    term_count: int
    hbar: float

    def csv_row(self) -> dict:
        v = complex(self.value.value)
        return {
            "order": self.order,
            "observable": self.observable,
            "value_re": v.real,
            "value_im": v.imag,
            "error": self.value.error,
            "samples": self.value.samples,
            "seed": self.value.seed,
            "hbar": self.hbar,
        }


class EvalContext:
    """Binds kernel symbols, the Q table and smearings for evaluation."""

    def __init__(self, params: ker.ModelParams, table: ker.QTable,
                 smearings: dict[str, ker.SmearingFunction],
                 leg_nodes: int = 24, pair_nodes: int = 24):
        self.params = params
        self.table = table
        self.smearings = smearings
        self.leg_nodes = leg_nodes
        self.pair_nodes = pair_nodes
        self._kernel_cache: dict[str, object] = {}
        self._node_cache: dict[tuple[str, int], tuple] = {}

    def kernel(self, basis: str):
        if basis == "Q":
            raise KeyError("Q is evaluated through the table, not as a "
                           "difference kernel")
        fn = self._kernel_cache.get(basis)
        if fn is None:
            fn = ker.difference_kernel(basis, self.params,
                                       convention=ALGEBRA_CONVENTION)
            self._kernel_cache[basis] = fn
        return fn

    def nodes(self, leg_name: str, order: int | None = None):
        order = order or self.leg_nodes
        key = (leg_name, order)
        if key not in self._node_cache:
            f = self.smearings[leg_name]
            self._node_cache[key] = f.weighted_nodes(order)
        return self._node_cache[key]

    # -- pointwise building blocks -----------------------------------------

    def gq(self, t, x, smearing: str = "g"):
        return ker.gq_weight_arrays(t, x, self.params, self.table,
                                    self.smearings[smearing])

    def smeared_kernel(self, basis: str, leg_name: str, t, x,
                       vertex_first: bool = True, order: int | None = None):
        """(K f)(z) for a single basis kernel, with z in the first slot when
        vertex_first (else the transposed pairing)."""
        pts, w = self.nodes(leg_name, order)
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if basis == "Q":
            vals = self.table.interp(t[..., None], x[..., None],
                                     pts[None, :, 0], pts[None, :, 1])
        else:
            fn = self.kernel(basis)
            if vertex_first:
                vals = fn(t[..., None] - pts[None, :, 0],
                          x[..., None] - pts[None, :, 1])
            else:
                vals = fn(pts[None, :, 0] - t[..., None],
                          pts[None, :, 1] - x[..., None])
        return np.sum(w * vals, axis=-1)

    def smeared_expr(self, expr: KernelExpr, leg_name: str, t, x,
                     vertex_first: bool = True):
        """(E f)(z) for a kernel expression, hbar powers included."""
        hbar = self.params.hbar
        total = 0.0 + 0.0j
        for basis, h, c in expr.terms:
            total = total + (c.as_complex() * hbar ** h
                             * self.smeared_kernel(basis, leg_name, t, x,
                                                   vertex_first))
        return total

    def scalar_pair(self, basis: str, p_name: str, q_name: str) -> QuadResult:
        """<f_p, K f_q> by tensor Gauss-Legendre with a two-resolution error."""
        def val(order):
            ppts, pw = self.nodes(p_name, order)
            qpts, qw = self.nodes(q_name, order)
            if basis == "Q":
                mat = self.table.interp(ppts[:, None, 0], ppts[:, None, 1],
                                        qpts[None, :, 0], qpts[None, :, 1])
            else:
                fn = self.kernel(basis)
                mat = fn(ppts[:, None, 0] - qpts[None, :, 0],
                         ppts[:, None, 1] - qpts[None, :, 1])
            return complex(pw @ mat @ qw)
        fine = val(2 * self.pair_nodes)
        coarse = val(self.pair_nodes)
        err = abs(fine - coarse) + 1e-15 * abs(fine)
        return QuadResult(fine, err, (2 * self.pair_nodes) ** 2)

def _scalar_factor(ctx: EvalContext, term: ExpandedTerm) -> tuple[complex, float]:
    """Product of scalar pairings of a term, with a combined error factor."""
    value = 1.0 + 0.0j
    rel_err = 0.0
    for b, h, p, q in term.scalar_pairs:
        r = ctx.scalar_pair(b, p, q)
        value *= complex(r.value)
        rel_err += r.error / max(abs(complex(r.value)), 1e-300)
    return value, rel_err


def _q_dressing_weight(expr: KernelExpr) -> float:
    """Real Q coefficient of a dressing exponent (only Q dressings occur)."""
    total = 0.0
    for b, h, c in expr.terms:
        if b != "Q" or h != 0:
            raise ConfigError("only hbar^0 Q dressings are evaluable")
        total += c.as_complex().real
    return total


class _BatchCache:
    """Memoizes table lookups and smeared fields within one point batch.

    Terms of a summed integrand share vertices, so the diagonal Q values,
    pair Q values and smeared leg fields are computed once per batch.
    """

    def __init__(self, ctx: EvalContext, pts: np.ndarray):
        self.ctx = ctx
        self.t = pts[:, :, 0]
        self.x = pts[:, :, 1]
        self._store: dict = {}

    def diag(self, i: int):
        key = ("diag", i)
        if key not in self._store:
            self._store[key] = self.ctx.table.interp(
                self.t[:, i], self.x[:, i], self.t[:, i], self.x[:, i])
        return self._store[key]

    def q_pair(self, i: int, j: int):
        key = ("qpair", i, j)
        if key not in self._store:
            self._store[key] = self.ctx.table.interp(
                self.t[:, i], self.x[:, i], self.t[:, j], self.x[:, j])
        return self._store[key]

    def edge(self, basis: str, i: int, j: int):
        key = ("edge", basis, i, j)
        if key not in self._store:
            self._store[key] = self.ctx.kernel(basis)(
                self.t[:, i] - self.t[:, j], self.x[:, i] - self.x[:, j])
        return self._store[key]

    def smeared(self, basis: str, leg: str, v: int, vertex_first: bool):
        key = ("smear", basis, leg, v, vertex_first)
        if key not in self._store:
            self._store[key] = self.ctx.smeared_kernel(
                basis, leg, self.t[:, v], self.x[:, v], vertex_first)
        return self._store[key]

    def smearing(self, name: str, i: int):
        key = ("w", name, i)
        if key not in self._store:
            self._store[key] = self.ctx.smearings[name](
                self.t[:, i], self.x[:, i])
        return self._store[key]


def _term_integrand(ctx: EvalContext, term):
    """Vectorized integrand of one classical (expanded) term, scalar pairs
    and the exact coefficient included."""
    p = ctx.params
    a = p.a
    scalar, _ = _scalar_factor(ctx, term)
    coeff = term.coeff.value(p.a, p.hbar, p.lam) * scalar
    n = term.n_vertices

    def fn(cache: _BatchCache):
        out = np.full(cache.t.shape[0], coeff, dtype=complex)
        for i in range(n):
            w = cache.smearing(term.smearings[i], i)
            if not term.dressings[i].is_zero():
                dress = _q_dressing_weight(term.dressings[i])
                w = w * np.exp(-0.5 * (term.charges[i] * a) ** 2 * dress
                               * cache.diag(i))
            out *= w
        for (i, j), e in term.q_pairs:
            cc = term.charges[i] * term.charges[j]
            out *= np.exp(-cc * a ** 2 * cache.q_pair(i, j))
        for i, j, b, h, pw in term.edges:
            out *= cache.edge(b, i, j) ** pw
        for v, b, h, l, vf in term.attached:
            out *= cache.smeared(b, l, v, vf)
        return out

    return fn


def _generator_integrand(ctx: EvalContext, gen: Generator):
    """Vectorized integrand of one full generator monomial (finite hbar)."""
    p = ctx.params
    a = p.a
    hbar = p.hbar
    scalar = 1.0 + 0.0j
    for e, pn, qn in gen.scalar_pairs:
        total = 0.0 + 0.0j
        for b, h, c in e.real_basis().terms:
            total += (c.as_complex() * hbar ** h
                      * complex(ctx.scalar_pair(b, pn, qn).value))
        scalar *= total
    coeff = gen.coeff.value(p.a, p.hbar, p.lam) * scalar
    n = gen.n_vertices

    def fn(cache: _BatchCache):
        out = np.full(cache.t.shape[0], coeff, dtype=complex)
        for i in range(n):
            w = cache.smearing(gen.smearings[i], i)
            if not gen.dressings[i].is_zero():
                dress = _q_dressing_weight(gen.dressings[i])
                w = w * np.exp(-0.5 * (gen.charges[i] * a) ** 2 * dress
                               * cache.diag(i))
            out = out * w
        for (i, j), e in gen.pair_exps:
            ev = np.zeros(cache.t.shape[0], dtype=complex)
            for b, h, c in e.terms:
                base = cache.q_pair(i, j) if b == "Q" else cache.edge(b, i, j)
                ev = ev + c.as_complex() * hbar ** h * base
            cc = gen.charges[i] * gen.charges[j]
            out = out * np.exp(-cc * a ** 2 * ev)
        for v, e, l, vf in gen.attached:
            sm = np.zeros(cache.t.shape[0], dtype=complex)
            for b, h, c in e.real_basis().terms:
                sm = sm + c.as_complex() * hbar ** h * cache.smeared(b, l, v, vf)
            out = out * sm
        return out

    return fn


def _sum_spec(ctx: EvalContext, integrands, n_vertices: int,
              singular: bool) -> qd.IntegrandSpec:
    def fn(pts):
        cache = _BatchCache(ctx, pts)
        total = np.zeros(pts.shape[0], dtype=complex)
        for g in integrands:
            total = total + g(cache)
        return total
    pairs = ()
    if singular and n_vertices >= 2:
        pairs = (qd.SingularPair(0, 1, ctx.params.alpha),)
    return qd.IntegrandSpec(n_vertices, fn, mu=ctx.params.mu,
                            singular_pairs=pairs)


def evaluate_terms(ctx: EvalContext, terms, budget: int, seed: int,
                   singular: bool = False, p_hat: float = 1.5) -> QuadResult:
    """phi = 0 value of a sum of terms: free-leg terms drop, vertex-free
    terms contribute their exact scalar value, the rest are integrated as a
    single summed integrand per vertex count."""
    const_val = 0.0 + 0.0j
    const_err = 0.0
    by_n: dict[int, list] = {}
    for term in terms:
        if term.free_legs:
            continue
        if term.n_vertices == 0:
            if isinstance(term, ExpandedTerm):
                scalar, rel = _scalar_factor(ctx, term)
                coeff = term.coeff.value(ctx.params.a, ctx.params.hbar, ctx.params.lam)
                const_val += coeff * scalar
                const_err += abs(coeff * scalar) * rel
            else:
                cache0 = _BatchCache(ctx, np.zeros((1, 0, 2)))
                const_val += _generator_integrand(ctx, term)(cache0)[0]
            continue
        mk = _term_integrand if isinstance(term, ExpandedTerm) \
            else _generator_integrand
        by_n.setdefault(term.n_vertices, []).append(mk(ctx, term))
    total = QuadResult(const_val, const_err, 0, seed)
    for n, fns in sorted(by_n.items()):
        spec = _sum_spec(ctx, fns, n, singular)
        total = total + qd.integrate(spec, budget, seed, p_hat)
    if abs(complex(total.value).imag) == 0.0:
        total = QuadResult(complex(total.value).real, total.error,
                           total.samples, seed)
    return total


# ---------------------------------------------------------------------------
# public coefficient pipelines
# ---------------------------------------------------------------------------

def expectation_coefficient(n: int, ctx: EvalContext, leg: str,
                            budget: int, seed: int,
                            max_order: int = 3) -> SeriesCoefficient:
    """lambda^n coefficient of E[psi(f)]: Gamma_Q r_{n,1} at phi = 0.

    Every order is consistent with zero by the phi -> -phi symmetry; the
    numeric value with its error quantifies that.  Orders beyond
    ``max_order`` are gated (cost grows with the 2n-dimensional quadrature),
    not forbidden: pass a larger cap to go higher.
    """
    if n > max_order:
        raise ValueError(f"order {n} beyond the configured cap {max_order}")
    if n == 0:
        return SeriesCoefficient(0, f"expect:{leg}",
                                 QuadResult(0.0, 0.0, 0, seed), 1, 0.0)
    terms = alg.classical_term(n, 1, [leg])
    pref = ctx.params.lam ** n / _fact(n)
    res = evaluate_terms(ctx, terms, budget, seed).scaled(pref)
    return SeriesCoefficient(n, f"expect:{leg}", res, len(terms), 0.0)


def correlation_coefficient(n: int, ctx: EvalContext, leg1: str, leg2: str,
                            budget: int, seed: int,
                            max_order: int = 3) -> SeriesCoefficient:
    """lambda^n coefficient of E[psi(f1) psi(f2)] (classical strata)."""
    if n > max_order:
        raise ValueError(f"order {n} beyond the configured cap {max_order}")
    terms = alg.classical_term(n, 2, [leg1, leg2])
    pref = ctx.params.lam ** n / _fact(n)
    res = evaluate_terms(ctx, terms, budget, seed).scaled(pref)
    return SeriesCoefficient(n, f"corr:{leg1}:{leg2}", res, len(terms), 0.0)


def quantum_coefficient(n: int, hbar: float, ctx: EvalContext,
                        legs: list[str], budget: int, seed: int,
                        p_hat: float = 1.5) -> SeriesCoefficient:
    """lambda^n coefficient of Gamma_Q R_{n,m} at phi = 0, all hbar strata.

    hbar = 0 falls back exactly to the classical pipeline.
    """
    obs = ":".join(legs)
    kind = "expect" if len(legs) == 1 else "corr"
    name = f"{kind}:{obs}"
    if n == 0 and len(legs) == 1:
        return SeriesCoefficient(0, name, QuadResult(0.0, 0.0, 0, seed), 1, hbar)
    params_h = ctx.params.with_(hbar=hbar) if hbar > 0 else ctx.params
    ctx_h = EvalContext(params_h, ctx.table, ctx.smearings,
                        ctx.leg_nodes, ctx.pair_nodes)
    if hbar == 0.0:
        terms = alg.classical_term(n, len(legs), legs)
        res = evaluate_terms(ctx_h, terms, budget, seed)
    else:
        if params_h.alpha >= 1.0:
            raise ConfigError(
                f"alpha = {params_h.alpha} >= 1: outside the finite "
                "ultraviolet regime")
        terms = alg.collected_raw_list(alg.bogoliubov_generators(n, legs, True))
        res = evaluate_terms(ctx_h, terms, budget, seed,
                             singular=n >= 2, p_hat=p_hat)
    pref = ctx.params.lam ** n / _fact(n)
    return SeriesCoefficient(n, name, res.scaled(pref), len(terms), hbar)


def order1_correction_oracle(ctx: EvalContext, leg1: str, leg2: str,
                             interaction: str, budget: int,
                             seed: int) -> QuadResult:
    """Independent closed-form check of correlation_coefficient(1).

    Based on the Gaussian identity E[X sin(aY)] = a Cov(X, Y)
    exp(-a^2 Var(Y)/2) for centered jointly Gaussian (X, Y):

        s a^2 [ int f2(x') D^R(x' - y) Q(f1, y) g_Q(y) + (f1 <-> f2) ]

    with D^R the params-convention retarded kernel and the single ledger
    sign s = +1 ("paper") / -1 ("green"); the product s * D^R is convention
    independent.
    """
    p = ctx.params
    s = 1.0 if p.sign_convention == "paper" else -1.0
    g = ctx.smearings[interaction]
    ret = ker.difference_kernel("DeltaR", p)

    def smeared_adv(leg_name, t, x):
        pts, w = ctx.nodes(leg_name)
        vals = ret(pts[None, :, 0] - t[..., None], pts[None, :, 1] - x[..., None])
        return np.sum(w * vals, axis=-1)

    def smeared_q(leg_name, t, x):
        pts, w = ctx.nodes(leg_name)
        vals = ctx.table.interp(t[..., None], x[..., None],
                                pts[None, :, 0], pts[None, :, 1])
        return np.sum(w * vals, axis=-1)

    def fn(pts):
        t, x = pts[:, 0, 0], pts[:, 0, 1]
        gq = g(t, x) * np.exp(-0.5 * p.a ** 2 * ctx.table.diag(t, x))
        live = gq != 0.0
        out = np.zeros(t.shape)
        if np.any(live):
            tt, xx = t[live], x[live]
            term = (smeared_q(leg1, tt, xx) * smeared_adv(leg2, tt, xx)
                    + smeared_q(leg2, tt, xx) * smeared_adv(leg1, tt, xx))
            out[live] = s * p.a ** 2 * gq[live] * term
        return out

    spec = qd.IntegrandSpec(1, fn, mu=p.mu, name="order1-oracle")
    return qd.integrate(spec, budget, seed).scaled(p.lam)


def modified_test_function(ctx: EvalContext, leg_name: str,
                           interaction: str, kind: str = "J"):
    """g~ = g_Q (Q + hbar omega) f (kind J) or g_Q (Q + hbar Delta_F) f (M)."""
    expr = alg.KE_Q_OMEGA if kind == "J" else alg.KE_Q_F
    g = ctx.smearings[interaction]
    p = ctx.params

    def fn(t, x):
        gq = g(t, x) * np.exp(-0.5 * p.a ** 2 * ctx.table.diag(t, x))
        return gq * ctx.smeared_expr(expr, leg_name, t, x, True)

    return fn


def qs_term_magnitude(ctx: EvalContext, n: int, budget: int, seed: int,
                      p_hat: float = 1.5) -> QuadResult:
    """|[Gamma_Q S(lambda V_g)]_n| at phi = 0, coupling and 1/n! included."""
    if n == 0:
        return QuadResult(1.0, 0.0, 0, seed)
    gens = alg.qs_term(n)   # coupling powers carried by the coefficients
    res = evaluate_terms(ctx, gens, budget, seed, singular=n >= 2,
                         p_hat=p_hat)
    return QuadResult(abs(complex(res.value)), res.error, res.samples, seed)


def field_term_magnitude(ctx: EvalContext, n: int, which: str, leg: str,
                         budget: int, seed: int) -> QuadResult:
    """|(i lambda/hbar)^n J_n| (resp. M_n) evaluated at phi = 0."""
    if which == "J":
        graphs = alg.interacting_field_term_J(n, leg)
    elif which == "M":
        graphs = alg.interacting_field_term_M(n, leg)
    else:
        raise ValueError("which must be 'J' or 'M'")
    gens = [t.payload for t in graphs]
    res = evaluate_terms(ctx, gens, budget, seed, singular=n >= 2)
    val = complex(res.value) * ctx.params.lam ** n
    return QuadResult(abs(val), res.error * ctx.params.lam ** n,
                      res.samples, seed)


def norm_lq_on_grid(fn, box, q: float, n: int = 96) -> float:
    """L^q norm of a (possibly complex) function over a rectangle."""
    tmin, tmax, xmin, xmax = box
    gx, gw = np.polynomial.legendre.leggauss(n)
    tt = 0.5 * (tmax + tmin) + 0.5 * (tmax - tmin) * gx
    xx = 0.5 * (xmax + xmin) + 0.5 * (xmax - xmin) * gx
    wt = 0.5 * (tmax - tmin) * gw
    wx = 0.5 * (xmax - xmin) * gw
    T, X = np.meshgrid(tt, xx, indexing="ij")
    vals = np.abs(fn(T, X)) ** q
    return float(np.einsum("i,j,ij->", wt, wx, vals)) ** (1.0 / q)


def _fact(n: int) -> int:
    out = 1
    for k in range(2, n + 1):
        out *= k
    return out
