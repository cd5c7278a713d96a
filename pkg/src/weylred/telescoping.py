"""Telescopers for parametrized integrals by confinement and reduction.

A presentation couples a module W_x(t)^r/S (held as a ReductionContext)
with a derivation a -> da/dt + a.Lambda and an integrand representative f.
Confinement finds a monomial threshold eta and a finite monomial set B such
that the reduced derivative sequence g_0 = [f]_eta,
g_{i+1} = dg_i/dt + [L(g_i)]_eta stays inside Span_{K(t)}(B); the first
linear relation among the g_i is a telescoper for the integral.

Two drivers are provided.  telescope_direct runs the whole computation over
Q(t) and is meant for small instances and as a correctness reference.
telescope_modular evaluates at t = a modulo word-size primes p, replays the
eta-basis construction with a majority-elected tracer, interpolates the
matrix of [L(.)]_eta back into F_p(t), finds the per-prime relation through
a denominator-free recurrence plus pointwise kernels, and lifts the result
to Q(t) by CRT and rational reconstruction, confirming with one extra prime.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .arith import (
    BudgetExhaustedError,
    InconsistencyError,
    ModularImage,
    PrimeField,
    QQ,
    RationalFunctions,
    UnluckyEvaluationError,
    collective_primitive,
    crt_combine,
    adaptive_reconstruct,
    padd,
    pdeg,
    pdivmod,
    peval,
    pgcd,
    plcm,
    pmul,
    pnorm,
    pderiv,
    pscale,
    psub,
    random_prime_31,
    rational_reconstruct,
)
from .weyl import (
    Algebra,
    Monomial,
    WeylOperator,
    coefficientwise_dt,
    evaluate_and_reduce,
    mul,
    op_scale,
)
from .groebner import lrem
from .reduction import (
    ReductionContext,
    compute_eta_basis,
    largest_monomial_of_degree,
    reduce_eta,
    UnluckyTracerError,
)


# ---------------------------------------------------------------------------
# presentation of the integration problem


def _components(a: WeylOperator):
    """Split a rank-r operator into {comp: scalar operator}."""
    A = a.algebra
    scalar = A.with_rank(1)
    out = {}
    for m, c in a.terms.items():
        out.setdefault(m.comp, {})[Monomial(m.alpha, m.beta, 1)] = c
    return {j: WeylOperator(scalar, d) for j, d in out.items()}


def _embed(a: WeylOperator, comp, rank):
    target = a.algebra.with_rank(rank)
    return WeylOperator(
        target, {Monomial(m.alpha, m.beta, comp): c for m, c in a.terms.items()}
    )


def apply_linear(L, a: WeylOperator):
    """a -> a . Lambda with row-vector convention: comp k gets sum_j a_j L[j][k]."""
    A = a.algebra
    r = A.r
    assert len(L) == r and all(len(row) == r for row in L)
    out = A.zero()
    for j, aj in _components(a).items():
        for k in range(r):
            entry = L[j - 1][k]
            if entry.is_zero():
                continue
            out = out + _embed(mul(aj, entry), k + 1, r)
    return out


class DerivedPresentation:
    """A module W_x(t)^r/S with the derivation a -> da/dt + a.Lambda and an f.

    L is an r x r matrix of scalar operators.  On construction the stored
    Groebner basis is spot-checked for stability under the derivation
    (lrem(dg/dt + L(g), G) = 0 for every basis element g), which is what
    makes the derivation well defined on the quotient.
    """

    __slots__ = ("ctx", "L", "f")

    def __init__(self, ctx: ReductionContext, L, f: WeylOperator, validate=True):
        r = ctx.algebra.r
        L = tuple(tuple(row) for row in L)
        assert len(L) == r and all(len(row) == r for row in L)
        self.ctx = ctx
        self.L = L
        self.f = f
        if validate:
            for g in ctx.basis:
                img = coefficientwise_dt(g) + apply_linear(L, g)
                rem, _ = lrem(img, ctx.basis, ctx.order, certificate=False)
                if not rem.is_zero():
                    raise ValueError(
                        "module is not stable under the derivation: "
                        f"basis element with lead {ctx.order.key} fails"
                    )


# ---------------------------------------------------------------------------
# confinement (the eta/B search) and the memoized derivative step


@dataclass(frozen=True)
class Confinement:
    eta: Monomial
    B: tuple  # monomials, ascending under the ambient order
    reduced_L_images: dict  # m in B -> coefficient tuple over B
    rho: int
    f_vector: tuple  # [f]_eta over B
    field: object
    order: object
    row_lms: tuple  # lms of the eta-basis rows (replay reference)
    tracer: frozenset

    @property
    def matrix(self):
        """Rows aligned with B: matrix[i] = [L(B[i])]_eta as a vector over B."""
        return tuple(self.reduced_L_images[m] for m in self.B)


def _vector_over(op: WeylOperator, index, nb):
    F = op.algebra.field
    vec = [F.zero] * nb
    for m, c in op.terms.items():
        pos = index.get(m)
        if pos is None:
            raise UnluckyEvaluationError(f"support escapes the confinement at {m}")
        vec[pos] = c
    return tuple(vec)


def _monomial_op(ctx, m):
    return WeylOperator(ctx.algebra, {m: ctx.algebra.field.one})


def confine(pres_or_ctx, rho=1, L=None, f=None, degree_ceiling=40):
    """Search for an effective confinement (eta, B) for f and L.

    Callable either with a DerivedPresentation or with an explicit
    (ctx, L, f) triple; the latter form serves the modular driver, which
    works over evaluated coefficient fields.
    """
    if isinstance(pres_or_ctx, DerivedPresentation):
        ctx, L, f = pres_or_ctx.ctx, pres_or_ctx.L, pres_or_ctx.f
    else:
        ctx = pres_or_ctx
        assert L is not None and f is not None
    order = ctx.order
    A = ctx.algebra
    F = A.field

    s = rho
    while True:
        if s > degree_ceiling:
            raise BudgetExhaustedError(
                f"confinement degree ceiling {degree_ceiling} exceeded"
            )
        eta = largest_monomial_of_degree(A, order, s)
        basis_e = compute_eta_basis(ctx, eta, certificate=False)
        g0 = reduce_eta(f, ctx, basis_e)
        Q = set(g0.support())
        B = []
        Bset = set()
        images = {}
        restart = False
        while Q - Bset:
            m = min(Q - Bset, key=order.key)
            if m.degree() > s - rho:
                s += 1
                restart = True
                break
            img = reduce_eta(apply_linear(L, _monomial_op(ctx, m)), ctx, basis_e)
            images[m] = img
            Q |= set(img.support())
            B.append(m)
            Bset.add(m)
        if restart:
            continue
        B = tuple(sorted(Bset, key=order.key))
        index = {m: i for i, m in enumerate(B)}
        nb = len(B)
        return Confinement(
            eta=eta,
            B=B,
            reduced_L_images={m: _vector_over(images[m], index, nb) for m in B},
            rho=rho,
            f_vector=_vector_over(g0, index, nb),
            field=F,
            order=order,
            row_lms=tuple(r.lm for r in basis_e.rows),
            tracer=basis_e.tracer,
        )


def derivative_sequence_step(g, conf: Confinement):
    """One step g -> dg/dt + g . M where M memoizes [L(.)]_eta over B."""
    if len(g) != len(conf.B):
        raise ValueError(f"vector has length {len(g)}, confinement has {len(conf.B)}")
    F = conf.field
    out = [F.derivative(c) for c in g]
    for i, c in enumerate(g):
        if F.is_zero(c):
            continue
        row = conf.reduced_L_images[conf.B[i]]
        for j, rc in enumerate(row):
            out[j] = F.add(out[j], F.mul(c, rc))
    return tuple(out)


# ---------------------------------------------------------------------------
# linear relation search over a coefficient field


class _RelationFinder:
    """Incremental echelon form with transform tracking over a field F."""

    def __init__(self, F, dim):
        self.F = F
        self.dim = dim
        self.rows = []  # (vector list, combination list)
        self.count = 0

    def push(self, vec):
        """Insert the next vector; return relation coefficients if dependent."""
        F = self.F
        assert len(vec) == self.dim
        v = list(vec)
        comb = [F.zero] * self.count + [F.one]
        for pivot_col, row, rcomb in self.rows:
            c = v[pivot_col]
            if not F.is_zero(c):
                for j in range(self.dim):
                    v[j] = F.sub(v[j], F.mul(c, row[j]))
                for j in range(len(rcomb)):
                    comb[j] = F.sub(comb[j], F.mul(c, rcomb[j]))
        self.count += 1
        pivot = next((j for j in range(self.dim) if not F.is_zero(v[j])), None)
        if pivot is None:
            return tuple(comb)
        inv = F.inv(v[pivot])
        v = [F.mul(inv, c) for c in v]
        comb = [F.mul(inv, c) for c in comb]
        self.rows.append((pivot, v, comb))
        return None


def relation_search(F, vectors):
    """First linear dependency among the prefix of the vectors, or None.

    Returns coefficients (c_0 .. c_N) in F with c_N != 0 for the minimal N
    such that g_0..g_N are dependent; None when all vectors are independent.
    """
    vectors = list(vectors)
    if not vectors:
        return None
    finder = _RelationFinder(F, len(vectors[0]))
    for vec in vectors:
        rel = finder.push(vec)
        if rel is not None:
            return rel
    return None


# ---------------------------------------------------------------------------
# telescopers and canonical normalization


@dataclass(frozen=True)
class Telescoper:
    """P = c_0 + c_1 d_t + ... + c_N d_t^N with dense polynomial coefficients.

    Over Q the coefficients are integer tuples, collectively primitive with
    the leading coefficient of c_N positive; over F_p (modulus set) they are
    residue tuples, content-free with c_N monic.
    """

    coefficients: tuple
    modulus: int = None

    def __post_init__(self):
        assert self.coefficients and self.coefficients[-1], "c_N must be nonzero"

    @property
    def order(self):
        return len(self.coefficients) - 1

    @property
    def degrees(self):
        return tuple(pdeg(c) for c in self.coefficients)


def _normalize_rational_relation(coeffs):
    """(num, den) pairs over Q(t) -> primitive ZZ[t] tuple, lc(c_N) > 0."""
    polys = []
    # clear each to a QQ[t] polynomial against the common denominator
    den_lcm = (Fraction(1),)
    for _, d in coeffs:
        den_lcm = plcm(QQ, den_lcm, d)
    for n, d in coeffs:
        cof = pdivmod(QQ, den_lcm, d)[0]
        polys.append(pmul(QQ, n, cof))
    zpolys = collective_primitive(polys)
    if zpolys[-1][-1] < 0:
        zpolys = [tuple(-c for c in p) for p in zpolys]
    return tuple(tuple(p) for p in zpolys)


def _normalize_modp_relation(Fp, polys):
    """F_p[t] tuple -> content-free with c_N monic."""
    content = ()
    for p in polys:
        content = pgcd(Fp, content, p) if content else pnorm(Fp, p)
    if pdeg(content) > 0:
        polys = [pdivmod(Fp, p, content)[0] for p in polys]
    assert polys[-1], "leading relation coefficient vanished"
    inv = Fp.inv(polys[-1][-1])
    return tuple(tuple(Fp.mul(c, inv) for c in p) for p in polys)


def telescoper_from_field_relation(F, rel):
    """Normalize a relation over Q(t) or F_p(t) into a canonical Telescoper."""
    if isinstance(F, RationalFunctions) and isinstance(F.base, PrimeField):
        Fp = F.base
        den_lcm = (Fp.one,)
        for _, d in rel:
            den_lcm = plcm(Fp, den_lcm, d)
        polys = [pmul(Fp, n, pdivmod(Fp, den_lcm, d)[0]) for n, d in rel]
        return Telescoper(_normalize_modp_relation(Fp, polys), modulus=Fp.p)
    assert isinstance(F, RationalFunctions)
    return Telescoper(_normalize_rational_relation(rel))


# ---------------------------------------------------------------------------
# direct driver over Q(t)


def telescope_direct(pres: DerivedPresentation, rho=1, verify=True, max_rho=4,
                     degree_ceiling=40):
    """Telescoper over Q(t), computed without modular arithmetic.

    The produced relation is re-expanded through the unreduced derivative
    chain and certified exactly (the residue must reduce to zero with a
    verifying division certificate); failure escalates rho and reruns.
    """
    F = pres.ctx.algebra.field
    last_err = None
    for attempt_rho in range(rho, max_rho + 1):
        conf = confine(pres, rho=attempt_rho, degree_ceiling=degree_ceiling)
        tel = _telescope_from_confinement(pres, conf)
        if not verify:
            return tel
        if _certify_telescoper(pres, conf, tel):
            return tel
        last_err = f"certificate check failed at rho={attempt_rho}"
    raise InconsistencyError(last_err or "telescoper certification failed")


def _telescope_from_confinement(pres, conf):
    F = conf.field
    nb = len(conf.B)
    if nb == 0 or all(F.is_zero(c) for c in conf.f_vector):
        one = (1,)
        return Telescoper((one,))
    finder = _RelationFinder(F, nb)
    g = conf.f_vector
    rel = finder.push(g)
    steps = 0
    while rel is None:
        assert steps <= nb, "relation must appear within dim(B) steps"
        g = derivative_sequence_step(g, conf)
        rel = finder.push(g)
        steps += 1
    return telescoper_from_field_relation(F, rel)


def _certify_telescoper(pres, conf, tel):
    """Exact soundness: sum c_i h_i reduces to zero with a verified witness,
    where h_0 = f and h_{i+1} = dh_i/dt + L(h_i) is the unreduced chain."""
    F = pres.ctx.algebra.field
    h = pres.f
    total = pres.ctx.algebra.zero()
    for i, c in enumerate(tel.coefficients):
        if i > 0:
            h = coefficientwise_dt(h) + apply_linear(pres.L, h)
        if not c:
            continue
        scal = F.from_poly(tuple(Fraction(v) for v in c))
        total = total + op_scale(h, scal)
    basis_e = compute_eta_basis(pres.ctx, conf.eta, certificate=True)
    red, cert = reduce_eta(total, pres.ctx, basis_e, certificate=True)
    return red.is_zero() and cert.verifies(total)


# ---------------------------------------------------------------------------
# modular driver


@dataclass
class ModularConfig:
    seed: int = 0
    workers: int = 4
    min_primes: int = 2
    max_primes: int = 16
    tracer_votes: int = 3
    vote_rounds: int = 3
    max_point_tries: int = 64
    max_points: int = 512
    rank_probes: int = 2
    fault_vote: object = None  # callable(vote_idx, triple) -> triple
    fault_prime: object = None  # callable(prime_idx, coeff tuple) -> coeff tuple


@dataclass(frozen=True)
class ModularRun:
    telescoper: Telescoper
    transcript: tuple
    primes_used: tuple
    primes_discarded: tuple


def _mono_str(m: Monomial):
    parts = [f"x{i + 1}^{e}" for i, e in enumerate(m.alpha) if e]
    parts += [f"d{i + 1}^{e}" for i, e in enumerate(m.beta) if e]
    body = "*".join(parts) if parts else "1"
    return body if m.comp == 1 else f"{body}@e{m.comp}"


def _evaluate_context(pres, img):
    basis_p = tuple(evaluate_and_reduce(g, img) for g in pres.ctx.basis)
    A = pres.ctx.algebra
    ctx = ReductionContext(Algebra(A.n, A.r, PrimeField(img.prime), False),
                           pres.ctx.order, basis_p)
    f_p = evaluate_and_reduce(pres.f, img)
    L_p = tuple(
        tuple(evaluate_and_reduce(e, img) for e in row) for row in pres.L
    )
    return ctx, L_p, f_p


def _point_images(pres, ref, rho, img):
    """Evaluate at (p, a), replay the eta-basis, return numeric (g0, matrix).

    Any disagreement with the reference (row lms, supports outside B) is an
    unlucky-point signal.
    """
    eta, B, tracer, row_lms = ref
    ctx, L_p, f_p = _evaluate_context(pres, img)
    try:
        basis_e = compute_eta_basis(ctx, eta, tracer=tracer, certificate=False)
    except UnluckyTracerError as e:
        raise UnluckyEvaluationError(str(e))
    if tuple(r.lm for r in basis_e.rows) != row_lms:
        raise UnluckyEvaluationError("eta-basis row lms differ from reference")
    index = {m: i for i, m in enumerate(B)}
    nb = len(B)
    g0 = _vector_over(reduce_eta(f_p, ctx, basis_e), index, nb)
    rows = []
    for m in B:
        img_op = reduce_eta(apply_linear(L_p, _monomial_op(ctx, m)), ctx, basis_e)
        rows.append(_vector_over(img_op, index, nb))
    return g0, tuple(rows)


class _PointCache:
    """Shared, lazily extended pool of evaluation points for one prime."""

    def __init__(self, pres, ref, rho, prime, rng, cfg, log):
        self.pres = pres
        self.ref = ref
        self.rho = rho
        self.prime = prime
        self.rng = rng
        self.cfg = cfg
        self.log = log
        self.points = []
        self.data = []
        self.used = set()
        self.tries = 0

    def extend_one(self):
        while True:
            self.tries += 1
            if self.tries > self.cfg.max_point_tries + len(self.points):
                raise UnluckyEvaluationError(
                    f"no usable evaluation points mod {self.prime}",
                    prime_level=True,
                )
            a = self.rng.randrange(1, self.prime)
            if a in self.used:
                continue
            self.used.add(a)
            try:
                g0, rows = _point_images(
                    self.pres, self.ref, self.rho,
                    ModularImage(self.prime, a),
                )
            except UnluckyEvaluationError as e:
                if e.prime_level:
                    raise
                self.log.append(f"  discard point {a}")
                continue
            self.points.append(a)
            self.data.append((g0, rows))
            return

    def stream(self, pick):
        """Yield (a, pick(data)) pairs, growing the pool on demand."""
        i = 0
        while True:
            while i >= len(self.points):
                self.extend_one()
            yield self.points[i], pick(self.data[i])
            i += 1


def _interpolated_system(cache, Fp, nb, cfg):
    """Reconstruct g0 and the [L(.)]_eta matrix as F_p(t) entries."""
    g0 = []
    for j in range(nb):
        g0.append(
            adaptive_reconstruct(
                Fp, cache.stream(lambda d, j=j: d[0][j]), max_points=cfg.max_points
            )
        )
    rows = []
    for i in range(nb):
        row = []
        for j in range(nb):
            row.append(
                adaptive_reconstruct(
                    Fp,
                    cache.stream(lambda d, i=i, j=j: d[1][i][j]),
                    max_points=cfg.max_points,
                )
            )
        rows.append(row)
    return g0, rows


def _kernel_at_point(Fp, vectors):
    """1-dim kernel of the row span at a point: d with sum d_i v_i = 0.

    Returns the kernel vector normalized to d_last = 1, or None when the
    kernel is not one-dimensional or avoids the last coordinate.
    """
    k = len(vectors)
    dim = len(vectors[0]) if vectors else 0
    # columns of the transposed system; eliminate to find nullspace of v -> sum d_i v_i
    mat = [list(col) for col in zip(*vectors)] if dim else []
    pivots = []
    rank = 0
    for col in range(k):
        sel = None
        for r in range(rank, len(mat)):
            if mat[r][col] % Fp.p:
                sel = r
                break
        if sel is None:
            continue
        mat[rank], mat[sel] = mat[sel], mat[rank]
        inv = pow(mat[rank][col], -1, Fp.p)
        mat[rank] = [c * inv % Fp.p for c in mat[rank]]
        for r in range(len(mat)):
            if r != rank and mat[r][col] % Fp.p:
                c = mat[r][col]
                mat[r] = [(a - c * b) % Fp.p for a, b in zip(mat[r], mat[rank])]
        pivots.append(col)
        rank += 1
    free = [c for c in range(k) if c not in pivots]
    if len(free) != 1 or free[0] != k - 1:
        return None
    d = [0] * k
    d[k - 1] = 1
    for r, col in enumerate(pivots):
        d[col] = (-mat[r][k - 1]) % Fp.p
    return tuple(d)


def _prime_relation(pres, ref, rho, prime, idx, cfg):
    """Canonical relation modulo one prime, with its local transcript."""
    log = [f"prime[{idx}] {prime}"]
    rng = random.Random(f"{cfg.seed}/prime/{idx}")
    Fp = PrimeField(prime)
    nb = len(ref[1])
    cache = _PointCache(pres, ref, rho, prime, rng, cfg, log)

    g0_rf, mat_rf = _interpolated_system(cache, Fp, nb, cfg)

    # clear to polynomial data: g0 = v0/Q, matrix = P/D
    Q = (Fp.one,)
    for _, d in g0_rf:
        Q = plcm(Fp, Q, d)
    v0 = tuple(pmul(Fp, n, pdivmod(Fp, Q, d)[0]) for n, d in g0_rf)
    D = (Fp.one,)
    for row in mat_rf:
        for _, d in row:
            D = plcm(Fp, D, d)
    P = [
        [pmul(Fp, n, pdivmod(Fp, D, d)[0]) for n, d in row]
        for row in mat_rf
    ]

    # denominator-free derivative sequence: g_i = w_i / (D^i Q^{i+1})
    DQ = pmul(Fp, D, Q)
    dD, dQ = pderiv(Fp, D), pderiv(Fp, Q)

    def step(w, i):
        out = []
        for j in range(nb):
            acc = pmul(Fp, pderiv(Fp, w[j]), DQ)
            drag = padd(Fp, pscale(Fp, pmul(Fp, dD, Q), Fp.from_int(i)),
                        pscale(Fp, pmul(Fp, D, dQ), Fp.from_int(i + 1)))
            acc = psub(Fp, acc, pmul(Fp, w[j], drag))
            dot = ()
            for l in range(nb):
                if w[l]:
                    dot = padd(Fp, dot, pmul(Fp, w[l], P[l][j]))
            acc = padd(Fp, acc, pmul(Fp, dot, Q))
            out.append(acc)
        return tuple(out)

    ws = [v0]
    probes = []
    while len(probes) < cfg.rank_probes:
        theta = rng.randrange(1, prime)
        if theta not in probes:
            probes.append(theta)

    def rank_at(theta, vectors):
        rows = [[peval(Fp, c, theta) for c in w] for w in vectors]
        rank = 0
        cols = nb
        for col in range(cols):
            sel = next((r for r in range(rank, len(rows)) if rows[r][col] % prime), None)
            if sel is None:
                continue
            rows[rank], rows[sel] = rows[sel], rows[rank]
            inv = pow(rows[rank][col], -1, prime)
            rows[rank] = [c * inv % prime for c in rows[rank]]
            for r in range(len(rows)):
                if r != rank and rows[r][col] % prime:
                    c = rows[r][col]
                    rows[r] = [(a - c * b) % prime for a, b in zip(rows[r], rows[rank])]
            rank += 1
        return rank

    N = None
    while True:
        k = len(ws)
        if all(rank_at(theta, ws) < k for theta in probes):
            N = k - 1
            break
        assert k <= nb, "relation must appear within dim(B) steps"
        ws.append(step(ws[-1], k - 1))

    # pointwise kernels, interpolated coordinate by coordinate
    kern_cache = {"points": [], "values": []}

    def kern_extend():
        fails = 0
        while True:
            psi = rng.randrange(1, prime)
            if psi in kern_cache["points"]:
                continue
            vecs = [[peval(Fp, c, psi) for c in w] for w in ws]
            d = _kernel_at_point(Fp, vecs)
            if d is None:
                fails += 1
                if fails > 64:
                    raise UnluckyEvaluationError(
                        f"kernel never one-dimensional mod {prime}",
                        prime_level=True,
                    )
                continue
            kern_cache["points"].append(psi)
            kern_cache["values"].append(d)
            return

    def kern_stream(i):
        pos = 0
        while True:
            while pos >= len(kern_cache["points"]):
                kern_extend()
            yield kern_cache["points"][pos], kern_cache["values"][pos][i]
            pos += 1

    if N == 0 and all(not w for w in ws[0]):
        polys = [(Fp.one,)]
    else:
        d_rf = []
        for i in range(N):
            d_rf.append(
                adaptive_reconstruct(Fp, kern_stream(i), max_points=cfg.max_points)
            )
        d_rf.append(((Fp.one,), (Fp.one,)))
        # c_i = d_i * D^i Q^{i+1}, cleared to polynomials
        den_lcm = (Fp.one,)
        for _, d in d_rf:
            den_lcm = plcm(Fp, den_lcm, d)
        polys = []
        u = Q
        for i, (n, d) in enumerate(d_rf):
            cof = pdivmod(Fp, den_lcm, d)[0]
            polys.append(pmul(Fp, pmul(Fp, n, cof), u))
            u = pmul(Fp, u, DQ)
    rel = _normalize_modp_relation(Fp, polys)

    # exact check: sum_i c_i w_i (DQ)^(N-i) = 0 coordinate-wise
    for j in range(nb):
        acc = ()
        scale = (Fp.one,)
        for i in range(N, -1, -1):
            acc = padd(Fp, acc, pmul(Fp, pmul(Fp, rel[i], ws[i][j]), scale))
            if i:
                scale = pmul(Fp, scale, DQ)
        if acc:
            raise UnluckyEvaluationError(
                f"per-prime relation fails exact check mod {prime}",
                prime_level=True,
            )

    if cfg.fault_prime is not None:
        rel = cfg.fault_prime(idx, rel)
    log.append(f"  points={len(cache.points)} N={N} degs={tuple(pdeg(c) for c in rel)}")
    return {"idx": idx, "prime": prime, "rel": rel,
            "shape": (len(rel) - 1, tuple(pdeg(c) for c in rel)), "log": log}


def _elect_reference(pres, rho, cfg, prime_iter, log, degree_ceiling):
    """Majority vote on (eta, B, tracer, row_lms) over tracer_votes pairs."""
    for round_no in range(cfg.vote_rounds):
        votes = []
        for v in range(cfg.tracer_votes):
            vote_rng = random.Random(f"{cfg.seed}/vote/{round_no}/{v}")
            prime = next(prime_iter)
            triple = None
            for _ in range(cfg.max_point_tries):
                a = vote_rng.randrange(1, prime)
                try:
                    ctx, L_p, f_p = _evaluate_context(pres, ModularImage(prime, a))
                    conf = confine(ctx, rho=rho, L=L_p, f=f_p,
                                   degree_ceiling=degree_ceiling)
                except UnluckyEvaluationError:
                    continue
                triple = (conf.eta, conf.B, conf.tracer, conf.row_lms)
                log.append(
                    f"vote prime={prime} point={a} eta={_mono_str(conf.eta)} "
                    f"|B|={len(conf.B)} |tracer|={len(conf.tracer)}"
                )
                break
            if triple is None:
                raise BudgetExhaustedError(f"no usable vote points mod {prime}")
            if cfg.fault_vote is not None:
                triple = cfg.fault_vote(v, triple)
            votes.append(triple)
        for t in votes:
            if sum(1 for u in votes if u == t) * 2 > len(votes):
                log.append("votes agree" if votes.count(t) == len(votes)
                           else "votes split, majority kept")
                return t
        log.append("votes inconclusive, new round")
    raise InconsistencyError("tracer votes never reached a majority")


def _reduce_canonical_mod(coeffs, p):
    """Q-canonical integer relation -> the per-prime canonical form mod p."""
    Fp = PrimeField(p)
    polys = [pnorm(Fp, tuple(c % p for c in poly)) for poly in coeffs]
    if not polys[-1]:
        return None  # p divides the leading coefficient: unlucky
    return _normalize_modp_relation(Fp, polys)


def telescope_modular(pres: DerivedPresentation, rho=1, config: ModularConfig = None,
                      degree_ceiling=40):
    """Telescoper over Q by per-prime evaluation/interpolation and CRT lifting.

    Returns a ModularRun carrying the telescoper, a deterministic transcript
    (a fixed seed yields byte-identical transcripts regardless of worker
    count), and the primes kept/discarded.
    """
    cfg = config or ModularConfig()
    log = [f"seed {cfg.seed} rho {rho}"]

    prime_rng = random.Random(f"{cfg.seed}/primes")
    seen_primes = set()

    def prime_stream():
        while True:
            p = random_prime_31(prime_rng)
            if p not in seen_primes:
                seen_primes.add(p)
                yield p

    primes = prime_stream()
    ref = _elect_reference(pres, rho, cfg, primes, log, degree_ceiling)
    if len(ref[1]) == 0:
        log.append("empty confinement: unit telescoper")
        return ModularRun(Telescoper(((1,),)), tuple(log), (), ())

    results = {}
    discarded = []
    next_idx = 0

    def run_wave(count):
        nonlocal next_idx
        wave = []
        for _ in range(count):
            wave.append((next_idx, next(primes)))
            next_idx += 1
        with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
            futs = {
                i: pool.submit(_prime_relation, pres, ref, rho, p, i, cfg)
                for i, p in wave
            }
        for i, p in wave:
            try:
                results[i] = futs[i].result()
            except (UnluckyEvaluationError, BudgetExhaustedError) as e:
                discarded.append(p)
                results[i] = {"idx": i, "prime": p, "rel": None,
                              "log": [f"prime[{i}] {p}", f"  discarded: {e}"]}

    def merged_candidate():
        good = [r for r in sorted(results.values(), key=lambda r: r["idx"])
                if r["rel"] is not None]
        if len(good) < 2:
            return None
        shapes = {}
        for r in good:
            shapes.setdefault(r["shape"], []).append(r)
        best_shape = max(sorted(shapes, key=str), key=lambda s: len(shapes[s]))
        kept = shapes[best_shape]
        if len(kept) < 2:
            return None
        n_order, degs = best_shape
        coeffs = []
        for ci in range(n_order + 1):
            poly = []
            for d in range(degs[ci] + 1):
                residues = [(r["rel"][ci][d] if d < len(r["rel"][ci]) else 0,
                             r["prime"]) for r in kept]
                v, modulus = crt_combine(residues)
                fr = rational_reconstruct(v, modulus)
                if fr is None:
                    return None
                poly.append(fr)
            coeffs.append(pnorm(QQ, tuple(poly)))
        if not coeffs[-1]:
            return None
        zpolys = collective_primitive(coeffs)
        if zpolys[-1][-1] < 0:
            zpolys = [tuple(-c for c in p) for p in zpolys]
        return tuple(tuple(p) for p in zpolys), [r["prime"] for r in kept], \
            [r for r in good if r["shape"] != best_shape]

    run_wave(cfg.min_primes)
    candidate = None
    while True:
        candidate = merged_candidate()
        if candidate is not None:
            break
        if next_idx >= cfg.max_primes:
            for r in sorted(results.values(), key=lambda r: r["idx"]):
                log.extend(r["log"])
            raise BudgetExhaustedError(
                f"no reconstruction after {next_idx} primes",
                best=results,
            )
        run_wave(min(2, cfg.max_primes - next_idx))

    coeffs, kept_primes, shape_rejects = candidate
    for r in sorted(results.values(), key=lambda r: r["idx"]):
        log.extend(r["log"])
    log.append(f"crt primes={len(kept_primes)} "
               f"degs={tuple(pdeg(c) for c in coeffs)}")
    for r in shape_rejects:
        discarded.append(r["prime"])
        log.append(f"shape reject prime {r['prime']}")

    # consistency prime: an independent prime must reproduce the canonical image
    while True:
        check_idx, check_prime = next_idx, next(primes)
        next_idx += 1
        if next_idx > cfg.max_primes + 4:
            raise BudgetExhaustedError("consistency check never completed")
        expected = _reduce_canonical_mod(coeffs, check_prime)
        if expected is None:
            discarded.append(check_prime)
            continue
        try:
            got = _prime_relation(pres, ref, rho, check_prime, check_idx, cfg)
        except UnluckyEvaluationError:
            discarded.append(check_prime)
            continue
        log.extend(got["log"])
        if got["rel"] != expected:
            raise InconsistencyError(
                f"consistency prime {check_prime} disagrees with reconstruction"
            )
        log.append(f"consistency prime {check_prime} ok")
        break

    return ModularRun(
        Telescoper(coeffs),
        tuple(log),
        tuple(kept_primes),
        tuple(discarded),
    )
