"""Finite reduction of parametric annihilators to a free-module setting.

A system of operators in the variables ``t, x_1, .., x_n`` that involves
``d_t`` does not directly fit the module machinery in :mod:`.telescoping`,
which wants a finitely generated ``W_x(t)``-module together with an
endomorphism describing how ``d_t`` acts.  This module performs that
conversion:

* start from generators of a left ideal ``J`` in the t-extended algebra
  (``Algebra(..., dt=True)``, where ``t`` lives in the coefficient field
  and slot 0 carries ``d_t``),
* compute a Groebner basis ``G`` under a ``d_t``-elimination order,
* find the smallest level ``ell`` such that every ``d_t^(ell+1) e_i``
  rewrites, modulo ``G``, to something of ``d_t``-degree at most ``ell``,
* flatten the finitely many basis directions ``d_t^h e_i`` (``h <= ell``)
  into a free module of rank ``r = (ell+1)*s`` over ``W_x(t)``: the
  submodule ``S`` of relations and the matrix ``L`` encoding the action
  of ``d_t`` are exactly the inputs :class:`.telescoping.DerivedPresentation`
  consumes.

The flattening sends ``d_t^h e_i`` to the free-module generator with
component index ``h*s + i``.
"""

from dataclasses import dataclass

from .groebner import buchberger, lrem
from .weyl import Algebra, Monomial, WeylOperator, mul, op_add


def dt_degree(a):
    """Largest d_t exponent appearing in `a` (0 for the zero operator)."""
    assert a.algebra.dt
    if a.is_zero():
        return 0
    return max(m.beta[0] for m in a.terms)


def dt_degree_mod(a, basis, order):
    """d_t degree of the left normal form of `a` against `basis`.

    Certificate checking is left to the caller; this is the cheap probe
    used when hunting for the stabilization level.
    """
    rem, _ = lrem(a, basis, order, certificate=False)
    return dt_degree(rem)


def division_respects_dt_degree(a, basis, order):
    """Check that dividing `a` by `basis` only ever uses multiples whose
    d_t degree stays within dt_degree(a).

    With an elimination order this should always hold; the certificate
    quotients make the property observable after the fact.
    """
    bound = dt_degree(a)
    rem, cert = lrem(a, basis, order)
    assert cert.verifies(a)
    if dt_degree(rem) > bound:
        return False
    for i, q in cert.quotients.items():
        if dt_degree(mul(q, basis[i])) > bound:
            return False
    return True


@dataclass(frozen=True)
class ParametricPresentation:
    """Generators of a left ideal in a t-extended operator algebra.

    `algebra` must have ``dt=True`` and `order` must eliminate ``d_t``
    (its kind is checked); `s` is the rank of the ambient free module.
    """

    algebra: Algebra
    generators: tuple
    order: object

    def __post_init__(self):
        assert self.algebra.dt, "expected an algebra with a d_t slot"
        if getattr(self.order, "kind", None) != "dtelim":
            raise ValueError("order must eliminate d_t (use dtelim_order)")
        for g in self.generators:
            assert g.algebra.n == self.algebra.n
            assert not g.is_zero()

    @property
    def s(self):
        return self.algebra.r


@dataclass(frozen=True)
class ExtensionResult:
    """Flattened presentation: rank, relation generators, d_t action.

    `gb` is the elimination Groebner basis in the t-extended algebra;
    `s_generators` live in the flattened algebra of rank `r`; `l_matrix`
    is an r x r matrix of scalar (rank 1) operators, row-vector convention:
    d_t acts on a = (a_1, .., a_r) as da/dt + a . L.
    """

    ell: int
    r: int
    algebra: Algebra
    s_generators: tuple
    l_matrix: tuple
    gb: tuple
    source: ParametricPresentation


def _dt_power(algebra, k):
    scalar = algebra.with_rank(1)
    beta = [0] * algebra.n
    beta[0] = k
    return WeylOperator(
        scalar, {Monomial((0,) * algebra.n, tuple(beta), 1): algebra.field.one}
    )


def _dt_basis_element(algebra, h, comp):
    beta = [0] * algebra.n
    beta[0] = h
    return WeylOperator(
        algebra, {Monomial((0,) * algebra.n, tuple(beta), comp): algebra.field.one}
    )


def flatten_operator(a, ell, target):
    """Rewrite a d_t-bounded operator as an element of the flat module.

    Monomials ``x^alpha d^beta d_t^h e_i`` with ``h <= ell`` map to
    ``x^alpha d^beta e_{h*s+i}`` (slot 0 dropped).  Raises AssertionError
    if some monomial exceeds the level bound.
    """
    src = a.algebra
    s = src.r
    terms = {}
    for m, c in a.terms.items():
        h = m.beta[0]
        assert h <= ell, "operator exceeds the stabilization level"
        flat = Monomial(m.alpha[1:], m.beta[1:], h * s + m.comp)
        terms[flat] = c
    return WeylOperator(target, terms)


def compute_ell(gb, s, order, ceiling=20):
    """Smallest level at which the d_t filtration stabilizes.

    Tests ell = 0, 1, 2, ..: the level is accepted once for every
    component i the normal form of ``d_t^(ell+1) e_i`` has d_t degree
    at most ell.  A non-stabilizing (or too slowly stabilizing) input
    trips the ceiling and raises ValueError.
    """
    assert gb, "empty basis never stabilizes"
    algebra = gb[0].algebra
    for ell in range(ceiling + 1):
        if all(
            dt_degree_mod(_dt_basis_element(algebra, ell + 1, i), gb, order) <= ell
            for i in range(1, s + 1)
        ):
            return ell
    raise ValueError(
        f"d_t filtration did not stabilize below level {ceiling}; "
        "the parametric system is likely not finite over W_x(t)"
    )


def build_extension(pres, ceiling=20):
    """Flatten a parametric ideal into (S, L) over a free W_x(t)-module.

    Returns an :class:`ExtensionResult` whose `s_generators` generate the
    relation submodule and whose `l_matrix` gives the d_t action, both in
    the flattened algebra of rank ``(ell+1)*s``.
    """
    algebra, order, s = pres.algebra, pres.order, pres.s
    gb = buchberger(pres.generators, order)
    ell = compute_ell(gb, s, order, ceiling=ceiling)
    r = (ell + 1) * s
    flat = Algebra(algebra.n - 1, r, algebra.field, dt=False)

    s_gens = []
    for g in gb:
        dg = dt_degree(g)
        for k in range(ell - dg + 1):
            shifted = mul(_dt_power(algebra, k), g) if k else g
            assert dt_degree(shifted) == dg + k
            s_gens.append(flatten_operator(shifted, ell, flat))

    rows = []
    for h in range(ell + 1):
        for i in range(1, s + 1):
            source_elt = _dt_basis_element(algebra, h + 1, i)
            rem, cert = lrem(source_elt, gb, order)
            assert cert.verifies(source_elt)
            assert dt_degree(rem) <= ell, "normal form escaped the level bound"
            flat_rem = flatten_operator(rem, ell, flat)
            row = []
            for k in range(1, r + 1):
                entry_terms = {
                    Monomial(m.alpha, m.beta, 1): c
                    for m, c in flat_rem.terms.items()
                    if m.comp == k
                }
                row.append(WeylOperator(flat.with_rank(1), entry_terms))
            rows.append(tuple(row))

    return ExtensionResult(
        ell=ell,
        r=r,
        algebra=flat,
        s_generators=tuple(s_gens),
        l_matrix=tuple(rows),
        gb=gb,
        source=pres,
    )


def flatten_member(ext, a):
    """Map an operator of the source presentation into the flat module.

    The input is first rewritten to its normal form modulo the elimination
    basis, so any d_t powers are pushed below the level bound.
    """
    rem, cert = lrem(a, ext.gb, ext.source.order)
    assert cert.verifies(a)
    assert dt_degree(rem) <= ext.ell
    return flatten_operator(rem, ext.ell, ext.algebra)


def embedded_unit(ext, h=0, i=1):
    """The flat image of the basis direction d_t^h e_i."""
    assert 0 <= h <= ext.ell and 1 <= i <= ext.source.s
    comp = h * ext.source.s + i
    return WeylOperator(
        ext.algebra,
        {Monomial((0,) * ext.algebra.n, (0,) * ext.algebra.n, comp): ext.algebra.field.one},
    )


def apply_dt_action(ext, a):
    """One application of the d_t action in the flat module: a |-> a.L.

    This is the matrix half of the derivation; the coefficientwise d/dt
    half is handled by the telescoping layer.
    """
    assert a.algebra.n == ext.algebra.n and a.algebra.r == ext.algebra.r
    flat = ext.algebra
    out = flat.zero()
    for j in range(1, ext.r + 1):
        comp_terms = {
            Monomial(m.alpha, m.beta, 1): c for m, c in a.terms.items() if m.comp == j
        }
        if not comp_terms:
            continue
        a_j = WeylOperator(flat.with_rank(1), comp_terms)
        for k in range(1, ext.r + 1):
            entry = ext.l_matrix[j - 1][k - 1]
            if entry.is_zero():
                continue
            prod = mul(a_j, entry)
            shifted = WeylOperator(
                flat,
                {Monomial(m.alpha, m.beta, k): c for m, c in prod.terms.items()},
            )
            out = op_add(out, shifted)
    return out
