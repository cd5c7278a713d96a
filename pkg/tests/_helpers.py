"""Hypothesis strategy builders for monomials and operators."""

from fractions import Fraction

from hypothesis import strategies as st

from weylred.arith import QQ_T
from weylred.weyl import Monomial

T = QQ_T.from_poly((Fraction(0), Fraction(1)))


def fractions(lo=-9, hi=9):
    return st.builds(Fraction, st.integers(lo, hi), st.integers(1, 9))


def nonzero_fractions(lo=-9, hi=9):
    return fractions(lo, hi).filter(bool)


def qqt_elements(max_deg=2, allow_zero=False):
    """Polynomial elements of Q(t) with small integer coefficients."""
    base = st.lists(st.integers(-9, 9), min_size=1, max_size=max_deg + 1).map(
        lambda cs: QQ_T.from_poly(tuple(Fraction(c) for c in cs))
    )
    if allow_zero:
        return base
    return base.filter(lambda c: not QQ_T.is_zero(c))


def monomials(n, r=1, max_exp=3, dt=False):
    def build(alpha, beta, comp):
        if dt:
            alpha = (0,) + tuple(alpha[1:])
        return Monomial(tuple(alpha), tuple(beta), comp)

    exps = st.lists(st.integers(0, max_exp), min_size=n, max_size=n)
    return st.builds(build, exps, exps, st.integers(1, r))


def operators(algebra, coeffs=None, max_terms=4, max_exp=3, min_terms=0):
    """Random operators of the given algebra (zero allowed unless min_terms>0)."""
    if coeffs is None:
        coeffs = qqt_elements() if algebra.field is QQ_T else nonzero_fractions()
    return st.dictionaries(
        monomials(algebra.n, algebra.r, max_exp, dt=algebra.dt),
        coeffs,
        min_size=min_terms,
        max_size=max_terms,
    ).map(algebra.operator)
