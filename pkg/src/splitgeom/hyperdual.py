"""Second-order forward-mode scalars (value, gradient, Hessian).

A :class:`HyperDual` carries the 2-jet of a scalar quantity with respect to
the chart coordinates: its value, its gradient and its (symmetric) Hessian.
Arithmetic implements the exact product and chain rules, so any quantity
built from seeded coordinates carries machine-precision first and second
derivatives -- no truncation error.

Values may be scalars or numpy arrays of any shape ``S`` (a batch of
evaluation points); then ``grad`` has shape ``S + (n,)`` and ``hess``
``S + (n, n)``.  All arithmetic broadcasts over the batch.

``partial_deriv(f, a)`` turns the 2-jet of ``f`` into the 1-jet of the
coordinate derivative ``df/dx_a``: its value comes from ``f.grad`` and its
gradient from ``f.hess``.  The result has no Hessian slot (``hess=None``):
one derivative order is consumed and second derivatives of the result are
not available.  Value and gradient slots of any downstream expression stay
exact because binary/unary rules never read an operand's Hessian when
producing the value or gradient of the result.  Taking ``partial_deriv`` of
an order-1 jet raises: that would be a third metric derivative, which this
engine never needs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "HyperDual",
    "seed_jets",
    "constant_like",
    "as_jet",
    "partial_deriv",
    "value_of",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "JetOrderError",
    "JetDomainError",
]


class JetOrderError(RuntimeError):
    """Raised when a derivative beyond the tracked order is requested."""


class JetDomainError(ValueError):
    """Raised when a primitive is evaluated outside its domain."""


def _outer(u, v):
    # symmetric part of the rank-1 update u (x) v + v (x) u
    return u[..., :, None] * v[..., None, :] + v[..., :, None] * u[..., None, :]


class HyperDual:
    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess=None):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = None if hess is None else np.asarray(hess, dtype=float)

    @property
    def dim(self):
        return self.grad.shape[-1]

    @property
    def order(self):
        return 1 if self.hess is None else 2

    def __repr__(self):
        return f"HyperDual(val={self.val!r}, order={self.order})"

    # -- arithmetic ------------------------------------------------------

    def __neg__(self):
        return HyperDual(-self.val, -self.grad,
                         None if self.hess is None else -self.hess)

    def __add__(self, other):
        if isinstance(other, HyperDual):
            h = None
            if self.hess is not None and other.hess is not None:
                h = self.hess + other.hess
            return HyperDual(self.val + other.val, self.grad + other.grad, h)
        return HyperDual(self.val + other, self.grad.copy(),
                         None if self.hess is None else self.hess.copy())

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, HyperDual):
            h = None
            if self.hess is not None and other.hess is not None:
                h = self.hess - other.hess
            return HyperDual(self.val - other.val, self.grad - other.grad, h)
        return HyperDual(self.val - other, self.grad.copy(),
                         None if self.hess is None else self.hess.copy())

    def __rsub__(self, other):
        return HyperDual(other - self.val, -self.grad,
                         None if self.hess is None else -self.hess)

    def __mul__(self, other):
        if isinstance(other, HyperDual):
            val = self.val * other.val
            grad = self.grad * other.val[..., None] + other.grad * self.val[..., None]
            h = None
            if self.hess is not None and other.hess is not None:
                h = (self.hess * other.val[..., None, None]
                     + other.hess * self.val[..., None, None]
                     + _outer(self.grad, other.grad))
            return HyperDual(val, grad, h)
        other = np.asarray(other, dtype=float)
        return HyperDual(self.val * other, self.grad * other[..., None],
                         None if self.hess is None else self.hess * other[..., None, None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, HyperDual):
            return self * other._reciprocal()
        other = np.asarray(other, dtype=float)
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self._reciprocal() * other

    def _reciprocal(self):
        v = self.val
        if np.any(v == 0.0):
            raise JetDomainError("division by zero")
        inv = 1.0 / v
        d1 = -inv * inv
        d2 = 2.0 * inv * inv * inv
        return self._lift(inv, d1, d2)

    def __pow__(self, p):
        if isinstance(p, HyperDual):
            raise TypeError("exponent must be a constant, not a jet")
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p == 0:
                return constant_like(self, 1.0)
            if p == 1:
                return HyperDual(self.val.copy(), self.grad.copy(),
                                 None if self.hess is None else self.hess.copy())
            if p < 0:
                return (self ** (-p))._reciprocal()
            v = np.power(self.val, p)
            d1 = p * np.power(self.val, p - 1)
            d2 = p * (p - 1) * np.power(self.val, p - 2)
            return self._lift(v, d1, d2)
        # real exponent: positive base only (avoids branch cuts)
        if np.any(self.val <= 0.0):
            raise JetDomainError("non-integer power of non-positive base")
        v = np.power(self.val, p)
        d1 = p * np.power(self.val, p - 1.0)
        d2 = p * (p - 1.0) * np.power(self.val, p - 2.0)
        return self._lift(v, d1, d2)

    def _lift(self, v, d1, d2):
        """Chain rule for a primitive u with u(x)=v, u'(x)=d1, u''(x)=d2."""
        grad = d1[..., None] * self.grad
        h = None
        if self.hess is not None:
            h = (d1[..., None, None] * self.hess
                 + d2[..., None, None] * (self.grad[..., :, None] * self.grad[..., None, :]))
        return HyperDual(v, grad, h)


# -- seeding and extraction ----------------------------------------------

def seed_jets(points, order=2):
    """Coordinate jets at ``points`` of shape ``(..., n)``.

    Returns a list of ``n`` HyperDuals, the a-th having value ``x_a``,
    gradient ``e_a`` and zero Hessian.
    """
    points = np.asarray(points, dtype=float)
    n = points.shape[-1]
    shape = points.shape[:-1]
    out = []
    for a in range(n):
        grad = np.zeros(shape + (n,))
        grad[..., a] = 1.0
        hess = np.zeros(shape + (n, n)) if order == 2 else None
        out.append(HyperDual(points[..., a], grad, hess))
    return out

def constant_like(ref, value):
    """A constant jet broadcast-compatible with ``ref``."""
    val = np.broadcast_to(np.asarray(value, dtype=float), ref.val.shape).copy()
    grad = np.zeros_like(ref.grad)
    hess = None if ref.hess is None else np.zeros_like(ref.hess)
    return HyperDual(val, grad, hess)

def as_jet(x, ref):
    """Coerce a plain number/array to a constant jet like ``ref``."""
    if isinstance(x, HyperDual):
        return x
    return constant_like(ref, x)

def partial_deriv(f, axis):
    """First-order jet of the coordinate derivative ``df/dx_axis``."""
    if not isinstance(f, HyperDual):
        raise TypeError("partial_deriv needs a HyperDual")
    if f.hess is None:
        raise JetOrderError(
            "second-order information exhausted: cannot differentiate an order-1 jet")
    return HyperDual(f.grad[..., axis], f.hess[..., axis, :], None)

def value_of(x):
    """Plain value of a jet or passthrough for arrays/floats."""
    if isinstance(x, HyperDual):
        return x.val
    return np.asarray(x, dtype=float)


# -- primitives (dispatch on type, usable in frame/metric callbacks) -----

def sin(x):
    if isinstance(x, HyperDual):
        return x._lift(np.sin(x.val), np.cos(x.val), -np.sin(x.val))
    return np.sin(x)

def cos(x):
    if isinstance(x, HyperDual):
        return x._lift(np.cos(x.val), -np.sin(x.val), -np.cos(x.val))
    return np.cos(x)

def exp(x):
    if isinstance(x, HyperDual):
        e = np.exp(x.val)
        return x._lift(e, e, e)
    return np.exp(x)

def log(x):
    if isinstance(x, HyperDual):
        if np.any(x.val <= 0.0):
            raise JetDomainError("log of non-positive value")
        return x._lift(np.log(x.val), 1.0 / x.val, -1.0 / (x.val * x.val))
    if np.any(np.asarray(x) <= 0.0):
        raise JetDomainError("log of non-positive value")
    return np.log(x)

def sqrt(x):
    if isinstance(x, HyperDual):
        if np.any(x.val <= 0.0):
            raise JetDomainError("sqrt of non-positive value (jet derivative undefined at 0)")
        r = np.sqrt(x.val)
        return x._lift(r, 0.5 / r, -0.25 / (r * x.val))
    if np.any(np.asarray(x) < 0.0):
        raise JetDomainError("sqrt of negative value")
    return np.sqrt(x)
