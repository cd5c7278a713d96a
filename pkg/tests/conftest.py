"""Shared fixtures: the Airy presentation and the k-regular presentations.

The Airy setup is the workhorse for reduction/telescoping tests: three
exponential-derivative generators over Q(t) whose block-order Groebner basis,
eta-bases, and telescoper are all known in closed form.
"""

import os
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

from weylred.arith import QQ_T
from weylred.groebner import buchberger
from weylred.kregular import regular_presentation
from weylred.reduction import ReductionContext
from weylred.telescoping import DerivedPresentation
from weylred.weyl import Algebra, block_order, op_scale

settings.register_profile(
    "ci",
    max_examples=100,
    deadline=None,
    suppress_health_check=[
        HealthCheck.too_slow,
        HealthCheck.data_too_large,
        HealthCheck.filter_too_much,
    ],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

T = QQ_T.from_poly((Fraction(0), Fraction(1)))


def airy_generators(A):
    """d/dv - dq/dv for q = (x^3 + y^3)/3 - x(t + 2z) - y(t + z)."""
    x, y, z = A.xvar(0), A.xvar(1), A.xvar(2)
    dx, dy, dz = A.dvar(0), A.dvar(1), A.dvar(2)
    tt = A.scalar(T)
    two = A.scalar(QQ_T.from_int(2))
    return (
        dx - x * x + tt + two * z,
        dy - y * y + tt + z,
        dz + two * x + y,
    )


@pytest.fixture(scope="session")
def airy():
    A = Algebra(3, field=QQ_T)
    order = block_order(3)
    gens = airy_generators(A)
    gb = buchberger(list(gens), order)
    ctx = ReductionContext(A, order, gb)
    half = QQ_T.div(QQ_T.one, QQ_T.from_int(2))
    lam = op_scale(A.dvar(2) - A.xvar(1), half)  # (d_z - y)/2, the reduced dq/dt
    pres = DerivedPresentation(ctx, ((lam,),), A.one())
    return SimpleNamespace(
        algebra=A, order=order, generators=gens, gb=gb, ctx=ctx, lam=lam, pres=pres
    )


@pytest.fixture(scope="session")
def k2():
    inp, pres = regular_presentation(2)
    return SimpleNamespace(inp=inp, pres=pres)


@pytest.fixture(scope="session")
def k3():
    inp, pres = regular_presentation(3)
    return SimpleNamespace(inp=inp, pres=pres)
