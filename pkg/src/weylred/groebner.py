"""Left Groebner bases of submodules of W^r, with certified division.

Division tracks certificates: ``a = remainder + sum_i q_i g_i`` for left
division, ``a = remainder + sum_j d_j w_j`` for right division by the d's.
Certificates compose additively across alternating reduction steps and can be
re-expanded and checked exactly, which is how the test suite establishes
soundness of everything built on top.

S-pairs are driven by the commutative shadows of leading monomials (legal
because the product of two monomials always has the componentwise sum as its
leading monomial).  The classical coprimality skip is adjusted for the Weyl
relations: a pair is skipped only when the shadows are coprime *and* the two
leading monomials commute — coprime shadows alone are not enough, as the pair
(x1, d1) shows: their S-pair is d1 x1 - x1 d1 = 1.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .weyl import (
    Monomial,
    WeylOperator,
    leading_data,
    mul,
    mul_monomial,
    op_scale,
    shadow_divides,
    shadow_product,
    shadow_quotient,
    sorted_terms,
)


@dataclass
class DivisionCertificate:
    """Exact bookkeeping for one or more division passes.

    ``basis`` is the tuple of generators quotients refer to (by index);
    ``dw`` has one rank-matching operator per slot j, meaning sum_j d_j w_j.
    The represented identity is  input = remainder + sum q_i g_i + sum d_j w_j.
    """

    basis: tuple
    quotients: dict
    dw: tuple
    remainder: WeylOperator

    def reexpand(self):
        """The operator remainder + sum q_i g_i + sum d_j w_j."""
        from .weyl import Algebra

        A = self.remainder.algebra
        total = self.remainder
        for i, q in self.quotients.items():
            total = total + mul(q, self.basis[i])
        alg1 = Algebra(A.n, 1, A.field, A.dt)
        for j, w in enumerate(self.dw):
            if w is None or w.is_zero():
                continue
            total = total + mul(alg1.dvar(j), w)
        return total

    def verifies(self, original):
        return self.reexpand() == original


def lrem(a, basis, order, certificate=True):
    """Left division remainder of a by a list of nonzero operators.

    Repeatedly rewrites the largest monomial divisible by some leading
    monomial (first matching generator wins).  Returns (remainder, cert);
    cert is None when certificate=False.  When ``basis`` is a Groebner basis
    the remainder is the canonical normal form, and the map a -> remainder
    is K-linear.
    """
    A = a.algebra
    F = A.field
    lead = []
    for g in basis:
        lm, lc, _ = leading_data(g, order)
        lead.append((lm, lc, g))

    cert = None
    work = dict(a.terms)
    heap = []
    for m in work:
        heapq.heappush(heap, _HeapItem(order.key(m), m))
    quotients = {} if certificate else None

    while heap:
        m = heapq.heappop(heap).mono
        c = work.get(m)
        if c is None:
            continue
        hit = None
        for i, (lm, lc, g) in enumerate(lead):
            if shadow_divides(lm, m):
                hit = (i, lm, lc, g)
                break
        if hit is None:
            continue
        i, lm, lc, g = hit
        cof = shadow_quotient(m, lm)
        coeff = F.div(c, lc)
        if certificate:
            _cert_add_quotient_dict(quotients, i, cof, coeff, F)
        delta = mul_monomial(cof, coeff, g)
        for mm, cc in delta.terms.items():
            old = work.get(mm)
            new = F.sub(old, cc) if old is not None else F.neg(cc)
            if F.is_zero(new):
                work.pop(mm, None)
            else:
                if old is None:
                    heapq.heappush(heap, _HeapItem(order.key(mm), mm))
                work[mm] = new
        assert m not in work, "leading term must cancel exactly"

    remainder = WeylOperator(A, work)
    if certificate:
        cert = DivisionCertificate(
            tuple(basis),
            {
                i: WeylOperator(_scalar_algebra(A), terms)
                for i, terms in quotients.items()
            },
            tuple(None for _ in range(A.n)),
            remainder,
        )
    return remainder, cert


class _HeapItem:
    """Max-heap adapter: larger order key pops first."""

    __slots__ = ("key", "mono")

    def __init__(self, key, mono):
        self.key = key
        self.mono = mono

    def __lt__(self, other):
        return self.key > other.key


def _scalar_algebra(A):
    from .weyl import Algebra

    return Algebra(A.n, 1, A.field, A.dt)


def _cert_add_quotient_dict(quotients, i, mono, coeff, F):
    d = quotients.setdefault(i, {})
    old = d.get(mono)
    new = coeff if old is None else F.add(old, coeff)
    if F.is_zero(new):
        d.pop(mono, None)
    else:
        d[mono] = new


def rrem(a, certificate=True):
    """Right division by (d_1, ..., d_n): strip every d from every monomial.

    Uses x^al d^be e_j = d_i (x^al d^{be-e_i} e_j) - al_i x^{al-e_i} d^{be-e_i} e_j
    repeatedly (each step drops total degree by 2), so the remainder is free
    of d's and unique; the map is K-linear.  Returns (remainder, cert) with
    cert.dw the per-slot w_j in  a = remainder + sum_j d_j w_j.
    """
    A = a.algebra
    assert not A.dt, "right reduction happens in the plain algebra"
    F = A.field
    work = dict(a.terms)
    dw = [dict() for _ in range(A.n)] if certificate else None

    pending = [m for m in work if any(m.beta)]
    while pending:
        m = pending.pop()
        c = work.pop(m, None)
        if c is None:
            continue
        if not any(m.beta):
            work[m] = c
            continue
        i = next(j for j, b in enumerate(m.beta) if b)
        lower_beta = tuple(b - (1 if j == i else 0) for j, b in enumerate(m.beta))
        m1 = Monomial(m.alpha, lower_beta, m.comp)
        if certificate:
            old = dw[i].get(m1)
            new = c if old is None else F.add(old, c)
            if F.is_zero(new):
                dw[i].pop(m1, None)
            else:
                dw[i][m1] = new
        ai = m.alpha[i]
        if ai:
            m2 = Monomial(
                tuple(x - (1 if j == i else 0) for j, x in enumerate(m.alpha)),
                lower_beta,
                m.comp,
            )
            add = F.mul(c, F.from_int(-ai))
            old = work.get(m2)
            new = add if old is None else F.add(old, add)
            if F.is_zero(new):
                work.pop(m2, None)
            else:
                work[m2] = new
                if any(m2.beta):
                    pending.append(m2)

    remainder = WeylOperator(A, work)
    cert = None
    if certificate:
        cert = DivisionCertificate(
            (),
            {},
            tuple(WeylOperator(A, d) for d in dw),
            remainder,
        )
    return remainder, cert


def merge_certificates(first, second):
    """Compose: ``second`` reduces ``first.remainder`` further."""
    assert first is not None and second is not None
    basis = first.basis or second.basis
    if first.basis and second.basis:
        assert first.basis == second.basis
    quotients = dict(first.quotients)
    for i, q in second.quotients.items():
        quotients[i] = q if i not in quotients else quotients[i] + q
    dw = []
    for w1, w2 in zip(first.dw, second.dw):
        if w1 is None or w1.is_zero():
            dw.append(w2)
        elif w2 is None or w2.is_zero():
            dw.append(w1)
        else:
            dw.append(w1 + w2)
    return DivisionCertificate(basis, quotients, tuple(dw), second.remainder)


def certificate_identity_holds(original, cert):
    """Exact re-expansion check: original == remainder + sum q g + sum d w."""
    return cert.verifies(original)


# ---------------------------------------------------------------------------
# Buchberger


def _lms_commute(m1: Monomial, m2: Monomial):
    """No x_i-vs-d_i pairing in the same slot across the two monomials."""
    for a1, b1, a2, b2 in zip(m1.alpha, m1.beta, m2.alpha, m2.beta):
        if (b1 and a2) or (b2 and a1):
            return False
    return True


def _shadows_coprime(m1: Monomial, m2: Monomial):
    return all(min(a, b) == 0 for a, b in zip(m1.shadow(), m2.shadow()))


def buchberger(gens, order):
    """Reduced monic left Groebner basis of the submodule generated by gens.

    Pair selection is the normal strategy (smallest total degree of the
    shadow lcm) with FIFO tie-break.  A pair is skipped when the leading
    shadows are coprime and the leading monomials commute.
    """
    F = None
    G = []
    for g in gens:
        if g.is_zero():
            continue
        F = g.algebra.field
        _, lc, _ = leading_data(g, order)
        G.append(op_scale(g, F.inv(lc)))
    if not G:
        return ()

    pairs = []
    seq = 0

    def push_pairs(j):
        nonlocal seq
        lmj = leading_data(G[j], order)[0]
        for i in range(j):
            lmi = leading_data(G[i], order)[0]
            if lmi.comp != lmj.comp:
                continue
            if _shadows_coprime(lmi, lmj) and _lms_commute(lmi, lmj):
                continue
            lcm_deg = sum(
                max(a, b) for a, b in zip(lmi.shadow(), lmj.shadow())
            )
            heapq.heappush(pairs, (lcm_deg, seq, i, j))
            seq += 1

    for j in range(len(G)):
        push_pairs(j)

    while pairs:
        _, _, i, j = heapq.heappop(pairs)
        lmi, lci, _ = leading_data(G[i], order)
        lmj, lcj, _ = leading_data(G[j], order)
        lcm = Monomial(
            tuple(max(a, b) for a, b in zip(lmi.alpha, lmj.alpha)),
            tuple(max(a, b) for a, b in zip(lmi.beta, lmj.beta)),
            lmi.comp,
        )
        left = mul_monomial(shadow_quotient(lcm, lmi), F.one, G[i])
        right = mul_monomial(shadow_quotient(lcm, lmj), F.one, G[j])
        spair = left - right
        if spair.is_zero():
            continue
        rem, _ = lrem(spair, G, order, certificate=False)
        if rem.is_zero():
            continue
        lc = leading_data(rem, order)[1]
        G.append(op_scale(rem, F.inv(lc)))
        push_pairs(len(G) - 1)

    return _autoreduce(G, order)


def _autoreduce(G, order):
    """Minimalize then tail-reduce to the unique reduced monic basis."""
    F = G[0].algebra.field
    by_lm = sorted(G, key=lambda g: order.key(leading_data(g, order)[0]))
    kept = []
    kept_lms = []
    for g in by_lm:
        lm = leading_data(g, order)[0]
        if any(shadow_divides(l, lm) for l in kept_lms):
            continue
        kept.append(g)
        kept_lms.append(lm)

    changed = True
    while changed:
        changed = False
        for idx in range(len(kept)):
            others = kept[:idx] + kept[idx + 1 :]
            if not others:
                continue
            rem, _ = lrem(kept[idx], others, order, certificate=False)
            assert not rem.is_zero(), "minimal basis element reduced to zero"
            lc = leading_data(rem, order)[1]
            rem = op_scale(rem, F.inv(lc))
            if rem != kept[idx]:
                kept[idx] = rem
                changed = True
    return tuple(kept)


def ideal_membership(a, basis, order):
    """Whether a lies in the left submodule generated by a Groebner basis."""
    if a.is_zero():
        return True
    rem, _ = lrem(a, basis, order, certificate=False)
    return rem.is_zero()
