"""
Hyper-dual Numbers
Second-order forward-mode arithmetic: a + b e1 + c e2 + d e1e2 with e1^2 = e2^2 = 0
"""

import math

from core.errors import DomainError, NonFiniteError


class HyperDual:
    """
    Hyper-dual number

    Seeding variable i with b = 1 and variable j with c = 1 makes the
    e1 part d f/d x_i, the e2 part d f/d x_j and the e1e2 part
    d2 f/d x_i d x_j, all without truncation error.
    """

    __slots__ = ('real', 'e1', 'e2', 'e12')

    def __init__(self, real, e1=0.0, e2=0.0, e12=0.0):
        self.real = float(real)
        self.e1 = float(e1)
        self.e2 = float(e2)
        self.e12 = float(e12)
        if not (math.isfinite(self.real) and math.isfinite(self.e1)
                and math.isfinite(self.e2) and math.isfinite(self.e12)):
            raise NonFiniteError(
                f"non-finite derivative part ({self.real!r}, {self.e1!r}, {self.e2!r}, {self.e12!r})"
            )

    @classmethod
    def constant(cls, value):
        return cls(value)

    @classmethod
    def variable(cls, value, seed_first, seed_second):
        return cls(value, 1.0 if seed_first else 0.0, 1.0 if seed_second else 0.0)

    @property
    def is_constant(self):
        return self.e1 == 0.0 and self.e2 == 0.0 and self.e12 == 0.0

    def __repr__(self):
        return f"HyperDual({self.real!r}, {self.e1!r}, {self.e2!r}, {self.e12!r})"

    def __neg__(self):
        return HyperDual(-self.real, -self.e1, -self.e2, -self.e12)

    def __add__(self, other):
        return HyperDual(
            self.real + other.real,
            self.e1 + other.e1,
            self.e2 + other.e2,
            self.e12 + other.e12,
        )

    def __sub__(self, other):
        return HyperDual(
            self.real - other.real,
            self.e1 - other.e1,
            self.e2 - other.e2,
            self.e12 - other.e12,
        )

    def __mul__(self, other):
        return HyperDual(
            self.real * other.real,
            self.real * other.e1 + self.e1 * other.real,
            self.real * other.e2 + self.e2 * other.real,
            self.real * other.e12 + self.e1 * other.e2
            + self.e2 * other.e1 + self.e12 * other.real,
        )

    def __truediv__(self, other):
        if other.real == 0.0:
            raise DomainError('division by zero')
        return self * other.reciprocal()

    def chain(self, g0, g1, g2):
        """
        Apply a scalar function given its value and first two derivatives at self.real

        Args:
            g0: g(a)
            g1: g'(a)
            g2: g''(a)

        Returns:
            HyperDual for g(self)
        """
        return HyperDual(
            g0,
            g1 * self.e1,
            g1 * self.e2,
            g1 * self.e12 + g2 * self.e1 * self.e2,
        )

    def reciprocal(self):
        a = self.real
        return self.chain(_div(1.0, a), _div(-1.0, a * a), _div(2.0, a * a * a))

    def __pow__(self, other):
        if other.is_constant:
            return self._power_constant(other.real)
        if self.real <= 0.0:
            raise DomainError('power with a variable exponent needs a positive base')
        return hd_exp(other * hd_log(self))

    def _power_constant(self, c):
        a = self.real
        g0 = _pow(a, c)
        # zero coefficients are exact zeros; never multiply them by a^(c-k)
        g1 = 0.0 if c == 0.0 else c * _pow(a, c - 1.0)
        g2 = 0.0 if c * (c - 1.0) == 0.0 else c * (c - 1.0) * _pow(a, c - 2.0)
        return self.chain(g0, g1, g2)


def _pow(a, c):
    try:
        return math.pow(a, c)
    except ValueError:
        if a == 0.0:
            raise DomainError('zero raised to a negative power') from None
        raise DomainError('negative base with a non-integer exponent') from None
    except OverflowError:
        raise NonFiniteError('power overflows') from None


def _div(numerator, denominator):
    try:
        return numerator / denominator
    except ZeroDivisionError:
        raise NonFiniteError('derivative underflows to a division by zero') from None


def _guarded(function, value, message):
    try:
        return function(value)
    except OverflowError:
        raise NonFiniteError(message) from None


def hd_sin(x):
    s, c = math.sin(x.real), math.cos(x.real)
    return x.chain(s, c, -s)


def hd_cos(x):
    s, c = math.sin(x.real), math.cos(x.real)
    return x.chain(c, -s, -c)


def hd_exp(x):
    e = _guarded(math.exp, x.real, 'exp overflows')
    return x.chain(e, e, e)


def hd_log(x):
    a = x.real
    if a <= 0.0:
        raise DomainError('log of a non-positive value')
    return x.chain(math.log(a), _div(1.0, a), _div(-1.0, a * a))


def hd_sqrt(x):
    a = x.real
    if a < 0.0:
        raise DomainError('sqrt of a negative value')
    r = math.sqrt(a)
    if r == 0.0 and not x.is_constant:
        raise NonFiniteError('sqrt is not differentiable at 0')
    if r == 0.0:
        return HyperDual(0.0)
    return x.chain(r, _div(0.5, r), _div(-0.25, r * a))


def hd_tanh(x):
    t = math.tanh(x.real)
    sech2 = 1.0 - t * t
    return x.chain(t, sech2, -2.0 * t * sech2)


FUNCTIONS = {
    'sin': hd_sin,
    'cos': hd_cos,
    'exp': hd_exp,
    'log': hd_log,
    'sqrt': hd_sqrt,
    'tanh': hd_tanh,
}
