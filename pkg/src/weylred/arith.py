"""Exact coefficient arithmetic.

Fields are lightweight frozen objects that operate on plain payloads:

* ``Rationals()`` works on :class:`fractions.Fraction`,
* ``PrimeField(p)`` works on ints canonicalized to ``[0, p)``,
* ``RationalFunctions(base)`` works on ``(num, den)`` pairs of dense
  univariate polynomials in ``t`` over the base field.

A dense polynomial is a tuple of payloads, lowest degree first, with no
trailing zeros; the zero polynomial is the empty tuple.  Containers (operators,
matrices, telescopers) carry the field tag; individual payloads do not.

The module also provides the reconstruction primitives used by the modular
telescoping pipeline: Chinese remaindering, rational reconstruction, Cauchy
interpolation, and the adaptive wrapper that doubles degree bounds until a
candidate survives a confirming evaluation.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction


class UnluckyEvaluationError(Exception):
    """A modular evaluation hit a vanishing denominator.

    ``prime_level`` is True when no choice of evaluation point can help
    (the prime divides a rational coefficient's denominator), so the caller
    should discard the prime rather than resample the point.
    """

    def __init__(self, message, prime_level=False):
        super().__init__(message)
        self.prime_level = prime_level


class BudgetExhaustedError(Exception):
    """An evaluation/point/prime budget ran out; carries the best candidate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InconsistencyError(Exception):
    """Cross-prime or cross-point results disagree beyond repair."""


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class Rationals:
    """The field of arbitrary-precision rationals; payloads are Fractions."""

    name = "QQ"
    has_t = False
    char = 0

    @property
    def zero(self):
        return Fraction(0)

    @property
    def one(self):
        return Fraction(1)

    def from_int(self, n):
        return Fraction(n)

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def neg(self, a):
        return -a

    def inv(self, a):
        if not a:
            raise ZeroDivisionError("inverse of zero")
        return 1 / a

    def div(self, a, b):
        if not b:
            raise ZeroDivisionError("division by zero")
        return a / b

    def is_zero(self, a):
        return not a

    def eq(self, a, b):
        return a == b

    def derivative(self, a):
        raise ValueError("field QQ carries no parameter t")

    def random_element(self, rng):
        return Fraction(rng.randint(-9, 9), rng.randint(1, 9))

    def __repr__(self):
        return "QQ"


@dataclass(frozen=True)
class PrimeField:
    """The field with p elements; payloads are ints in [0, p)."""

    p: int

    name = "GF"
    has_t = False

    def __post_init__(self):
        assert self.p >= 2 and is_prime(self.p), f"not a prime: {self.p}"

    @property
    def char(self):
        return self.p

    @property
    def zero(self):
        return 0

    @property
    def one(self):
        return 1

    def from_int(self, n):
        return n % self.p

    def add(self, a, b):
        s = a + b
        return s - self.p if s >= self.p else s

    def sub(self, a, b):
        d = a - b
        return d + self.p if d < 0 else d

    def mul(self, a, b):
        return a * b % self.p

    def neg(self, a):
        return self.p - a if a else 0

    def inv(self, a):
        if not a:
            raise ZeroDivisionError("inverse of zero")
        return pow(a, -1, self.p)

    def div(self, a, b):
        return a * pow(b, -1, self.p) % self.p

    def is_zero(self, a):
        return not a

    def eq(self, a, b):
        return a == b

    def derivative(self, a):
        raise ValueError(f"field GF({self.p}) carries no parameter t")

    def random_element(self, rng):
        return rng.randrange(self.p)

    def __repr__(self):
        return f"GF({self.p})"


@dataclass(frozen=True)
class RationalFunctions:
    """Rational functions in t over a base field.

    Payloads are ``(num, den)`` pairs of dense polynomials, normalized so
    that gcd(num, den) = 1 and den is monic.  Zero is ``((), (one,))``.
    """

    base: object

    name = "RatFunc"
    has_t = True

    @property
    def char(self):
        return self.base.char

    @property
    def zero(self):
        return ((), (self.base.one,))

    @property
    def one(self):
        return ((self.base.one,), (self.base.one,))

    def from_int(self, n):
        c = self.base.from_int(n)
        return (pconst(self.base, c), (self.base.one,))

    def from_poly(self, num):
        return self.normalize(num, (self.base.one,))

    def normalize(self, num, den):
        F = self.base
        num, den = pnorm(F, num), pnorm(F, den)
        if not den:
            raise ZeroDivisionError("zero denominator")
        if not num:
            return self.zero
        g = pgcd(F, num, den)
        if len(g) > 1:
            num = pdivmod(F, num, g)[0]
            den = pdivmod(F, den, g)[0]
        lc = den[-1]
        if not F.eq(lc, F.one):
            inv = F.inv(lc)
            num = tuple(F.mul(c, inv) for c in num)
            den = tuple(F.mul(c, inv) for c in den)
        return (num, den)

    def add(self, a, b):
        F = self.base
        (an, ad), (bn, bd) = a, b
        num = padd(F, pmul(F, an, bd), pmul(F, bn, ad))
        return self.normalize(num, pmul(F, ad, bd))

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        F = self.base
        (an, ad), (bn, bd) = a, b
        return self.normalize(pmul(F, an, bn), pmul(F, ad, bd))

    def neg(self, a):
        F = self.base
        return (tuple(F.neg(c) for c in a[0]), a[1])

    def inv(self, a):
        if not a[0]:
            raise ZeroDivisionError("inverse of zero")
        return self.normalize(a[1], a[0])

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def is_zero(self, a):
        return not a[0]

    def eq(self, a, b):
        return a == b

    def derivative(self, a):
        # (n/d)' = (n'd - nd') / d^2
        F = self.base
        n, d = a
        num = psub(F, pmul(F, pderiv(F, n), d), pmul(F, n, pderiv(F, d)))
        return self.normalize(num, pmul(F, d, d))

    def evaluate(self, a, x):
        """Evaluate at t = x into the base field; unlucky if the denominator vanishes."""
        F = self.base
        dv = peval(F, a[1], x)
        if F.is_zero(dv):
            raise UnluckyEvaluationError(f"denominator vanishes at t = {x}")
        return F.div(peval(F, a[0], x), dv)

    def random_element(self, rng):
        F = self.base
        num = pnorm(F, tuple(F.random_element(rng) for _ in range(rng.randint(1, 3))))
        den = ()
        while not den:
            den = pnorm(F, tuple(F.random_element(rng) for _ in range(rng.randint(1, 3))))
        return self.normalize(num, den)

    def __repr__(self):
        return f"{self.base!r}(t)"


QQ = Rationals()
QQ_T = RationalFunctions(QQ)


# ---------------------------------------------------------------------------
# dense univariate polynomials (tuples, lowest degree first, no trailing zeros)


def pnorm(F, coeffs):
    c = list(coeffs)
    while c and F.is_zero(c[-1]):
        c.pop()
    return tuple(c)


def pconst(F, c):
    return () if F.is_zero(c) else (c,)


def pdeg(a):
    """Degree with the convention deg 0 = -1."""
    return len(a) - 1


def padd(F, a, b):
    if len(a) < len(b):
        a, b = b, a
    c = list(a)
    for i, x in enumerate(b):
        c[i] = F.add(c[i], x)
    return pnorm(F, c)


def psub(F, a, b):
    c = list(a) + [F.zero] * (len(b) - len(a))
    for i, x in enumerate(b):
        c[i] = F.sub(c[i], x)
    return pnorm(F, c)


def pscale(F, a, s):
    if F.is_zero(s):
        return ()
    return pnorm(F, tuple(F.mul(c, s) for c in a))


_KRONECKER_CUTOFF = 64


def pmul(F, a, b):
    if not a or not b:
        return ()
    if (
        isinstance(F, PrimeField)
        and len(a) >= _KRONECKER_CUTOFF
        and len(b) >= _KRONECKER_CUTOFF
    ):
        return _pmul_kronecker(F, a, b)
    out = [F.zero] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if F.is_zero(x):
            continue
        for j, y in enumerate(b):
            out[i + j] = F.add(out[i + j], F.mul(x, y))
    return pnorm(F, out)


def _pmul_kronecker(F, a, b):
    # Pack coefficients into one big integer per operand so the product is a
    # single CPython bigint multiplication; stride wide enough that packed
    # sums of cross terms never overlap.
    p = F.p
    stride = 2 * (p - 1).bit_length() + min(len(a), len(b)).bit_length() + 1
    pa = 0
    for c in reversed(a):
        pa = (pa << stride) | c
    pb = 0
    for c in reversed(b):
        pb = (pb << stride) | c
    prod = pa * pb
    mask = (1 << stride) - 1
    out = []
    for _ in range(len(a) + len(b) - 1):
        out.append((prod & mask) % p)
        prod >>= stride
    return pnorm(F, out)


def pdivmod(F, a, b):
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    if len(a) < len(b):
        return (), a
    rem = list(a)
    blc_inv = F.inv(b[-1])
    quo = [F.zero] * (len(a) - len(b) + 1)
    for k in range(len(a) - len(b), -1, -1):
        c = rem[k + len(b) - 1]
        if F.is_zero(c):
            continue
        q = F.mul(c, blc_inv)
        quo[k] = q
        for i, bc in enumerate(b):
            rem[k + i] = F.sub(rem[k + i], F.mul(q, bc))
    return pnorm(F, quo), pnorm(F, rem)


def pmonic(F, a):
    if not a:
        return a
    inv = F.inv(a[-1])
    return tuple(F.mul(c, inv) for c in a)


def pgcd(F, a, b):
    while b:
        a, b = b, pdivmod(F, a, b)[1]
    return pmonic(F, a)


def plcm(F, a, b):
    if not a or not b:
        return ()
    g = pgcd(F, a, b)
    return pmonic(F, pmul(F, pdivmod(F, a, g)[0], b))


def pderiv(F, a):
    return pnorm(F, tuple(F.mul(c, F.from_int(i)) for i, c in enumerate(a) if i))


def peval(F, a, x):
    acc = F.zero
    for c in reversed(a):
        acc = F.add(F.mul(acc, x), c)
    return acc


def pfrom_ints(F, ints):
    return pnorm(F, tuple(F.from_int(n) for n in ints))


def interpolate(F, points):
    """Lagrange interpolation through distinct points, via Newton differences."""
    xs = [x for x, _ in points]
    assert len(set(xs)) == len(xs), "repeated abscissae"
    # divided differences
    coeffs = [y for _, y in points]
    for j in range(1, len(points)):
        for i in range(len(points) - 1, j - 1, -1):
            num = F.sub(coeffs[i], coeffs[i - 1])
            coeffs[i] = F.div(num, F.sub(xs[i], xs[i - j]))
    # expand the Newton form
    poly = ()
    for i in range(len(points) - 1, -1, -1):
        poly = padd(F, pmul(F, poly, (F.neg(xs[i]), F.one)), pconst(F, coeffs[i]))
    return poly


# ---------------------------------------------------------------------------
# rationals over Q[t] utilities (used by telescoper normalization)


def qpoly_clear_denominators(coeffs):
    """Fraction tuple -> (int tuple, common denominator)."""
    den = math.lcm(*(c.denominator for c in coeffs)) if coeffs else 1
    return tuple(int(c * den) for c in coeffs), den


def collective_primitive(polys):
    """Scale a family of Fraction polynomials to integers with overall content 1."""
    den = 1
    for poly in polys:
        for c in poly:
            den = math.lcm(den, c.denominator)
    scaled = [tuple(int(c * den) for c in poly) for poly in polys]
    content = 0
    for poly in scaled:
        for c in poly:
            content = math.gcd(content, c)
    if content > 1:
        scaled = [tuple(c // content for c in poly) for poly in scaled]
    return scaled


# ---------------------------------------------------------------------------
# primes


def is_prime(n):
    """Miller-Rabin, deterministic for every n below 3.3e24."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def random_prime_31(rng):
    """A uniformly sampled odd prime in [2^30, 2^31)."""
    while True:
        c = rng.randrange(1 << 30, 1 << 31) | 1
        if is_prime(c):
            return c


# ---------------------------------------------------------------------------
# reconstruction primitives


@dataclass(frozen=True)
class ModularImage:
    """A value reduced mod a prime, optionally also evaluated at t = point."""

    prime: int
    point: int | None = None
    payload: object = None

    def __post_init__(self):
        assert self.prime % 2 == 1 and self.prime < (1 << 31), "odd prime below 2^31 required"
        if self.point is not None:
            assert 0 <= self.point < self.prime


def crt_combine(residues):
    """Combine (value, prime) pairs into (value, product of primes).

    Parameters
    ----------
    residues : iterable of (int, int)
        Pairs ``(value mod p, p)`` with pairwise distinct primes.

    Returns
    -------
    (int, int)
        The unique ``(v, N)`` with ``v`` in ``[0, N)`` congruent to every input.
    """
    residues = list(residues)
    if not residues:
        raise ValueError("no residues to combine")
    primes = [p for _, p in residues]
    if len(set(primes)) != len(primes):
        raise ValueError("duplicate primes in CRT input")
    v, m = residues[0][0] % residues[0][1], residues[0][1]
    for r, p in residues[1:]:
        delta = (r - v) * pow(m, -1, p) % p
        v += m * delta
        m *= p
    return v % m, m


def rational_reconstruct(u, modulus):
    """Recover p/q from u mod N with |p|, q <= sqrt(N/2), or None.

    Standard half-extended Euclid on (N, u); the failure outcome is expected
    (it is the signal that more primes are required).
    """
    assert 0 <= u < modulus
    bound = math.isqrt(modulus // 2)
    r0, r1 = modulus, u
    t0, t1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0 or abs(t1) > bound:
        return None
    if math.gcd(r1, abs(t1)) != 1:
        return None
    if math.gcd(abs(t1), modulus) != 1:
        return None
    return Fraction(r1, t1)


def cauchy_interpolate(F, points, deg_bounds):
    """Fit a rational function through sample points over a field.

    Parameters
    ----------
    F : field
        Coefficient field of abscissae and values (typically a PrimeField).
    points : list of (a, v)
        Samples with pairwise distinct abscissae.
    deg_bounds : (int, int)
        ``(d_num, d_den)`` bounds on numerator and denominator degree.

    Returns
    -------
    (num, den) or None
        A normalized rational function matching every sample whose
        denominator value is nonzero, or None when no such function exists
        within the bounds.  The fit uses the first ``d_num + d_den + 1``
        points; every remaining point acts as a consistency check.
    """
    d_num, d_den = deg_bounds
    need = d_num + d_den + 1
    if len(points) < need:
        raise ValueError(f"need at least {need} points, got {len(points)}")
    xs = [a for a, _ in points]
    if len(set(xs)) != len(xs):
        raise ValueError("repeated abscissae")

    fit = points[:need]
    modpoly = (F.one,)
    for a, _ in fit:
        modpoly = pmul(F, modpoly, (F.neg(a), F.one))
    lagrange = interpolate(F, fit)

    r0, r1 = modpoly, lagrange
    v0, v1 = (), (F.one,)
    while pdeg(r1) > d_num:
        q, rem = pdivmod(F, r0, r1)
        r0, r1 = r1, rem
        v0, v1 = v1, psub(F, v0, pmul(F, q, v1))
    num, den = r1, v1
    if not den:
        return None
    g = pgcd(F, num, den) if num else ()
    if num and pdeg(g) > 0:
        return None
    inv = F.inv(den[-1])
    num = tuple(F.mul(c, inv) for c in num)
    den = tuple(F.mul(c, inv) for c in den)
    if pdeg(num) > d_num or pdeg(den) > d_den:
        return None
    for a, v in points:
        dv = peval(F, den, a)
        if F.is_zero(dv):
            continue
        if not F.eq(peval(F, num, a), F.mul(v, dv)):
            return None
    return (num, den)


def adaptive_reconstruct(F, stream, max_points=512, confirm_extra=1):
    """Reconstruct a rational function from a stream of (point, value) pairs.

    Degree bounds start at (1, 1) and double on failure.  When the next
    doubling would need more than ``max_points`` samples, one last attempt is
    made at the largest bounds the budget affords before giving up.  A
    candidate is accepted only after it matches every consumed point plus
    ``confirm_extra`` fresh ones.  Raises BudgetExhaustedError (carrying the
    best candidate so far) when the stream or the ``max_points`` budget runs
    out.
    """
    it = iter(stream)
    pts = []
    best = None
    d_num = d_den = 1

    def take(k):
        for _ in range(k):
            if len(pts) >= max_points:
                raise BudgetExhaustedError(
                    f"evaluation budget {max_points} exhausted", best=best
                )
            try:
                pts.append(next(it))
            except StopIteration:
                raise BudgetExhaustedError("evaluation stream exhausted", best=best)

    while True:
        need = d_num + d_den + 1 + confirm_extra
        final = need >= max_points
        if need > max_points:
            d_num = d_den = max(0, (max_points - 1 - confirm_extra) // 2)
            need = d_num + d_den + 1 + confirm_extra
        take(need - len(pts))
        cand = cauchy_interpolate(F, pts, (d_num, d_den))
        if cand is not None:
            num, den = cand
            ok = True
            for a, v in pts[-confirm_extra:]:
                dv = peval(F, den, a)
                if F.is_zero(dv) or not F.eq(peval(F, num, a), F.mul(v, dv)):
                    ok = False
                    break
            if ok:
                return cand
            best = cand
        if final:
            raise BudgetExhaustedError(
                f"evaluation budget {max_points} exhausted", best=best
            )
        d_num *= 2
        d_den *= 2
