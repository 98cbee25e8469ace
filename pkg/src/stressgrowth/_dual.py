"""Forward-mode derivatives for batched 3x3 expressions.

A :class:`Dual` holds a value ``v`` and ``k`` directional derivatives ``d``.
Scalars have ``v`` of shape ``(n,)`` and ``d`` of shape ``(n, k)``; tensors have
``v`` of shape ``(n, 3, 3)`` and ``d`` stored as ``(n, 3, k, 3)`` so that both
``A @ dB`` and ``dA @ B`` become one ``3 x 3k`` (or ``3k x 3``) product per point.

The helpers accept plain arrays (any batch shape) as well, so one residual
definition serves both the residual-only evaluation and the differentiated one.
"""

import numpy as np

from . import tensor as tn


def _lift(v):
    """Insert the direction axis into a plain value so it broadcasts against ``d``."""
    return v[:, :, None, :] if v.ndim == 3 else v[:, None]


class Dual:
    __slots__ = ("v", "d")
    # make numpy defer to the reflected operators instead of building object arrays
    __array_ufunc__ = None

    def __init__(self, v, d):
        self.v = v
        self.d = d

    @property
    def k(self):
        return self.d.shape[-2] if self.v.ndim == 3 else self.d.shape[-1]

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v + other.v, self.d + other.d)
        return Dual(self.v + other, self.d)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.v - other.v, self.d - other.d)
        return Dual(self.v - other, self.d)

    def __rsub__(self, other):
        return Dual(other - self.v, -self.d)

    def __neg__(self):
        return Dual(-self.v, -self.d)

    def __mul__(self, other):
        """Elementwise product with an operand of the same kind, or a constant."""
        if isinstance(other, Dual):
            return Dual(self.v * other.v, self.d * _lift(other.v) + _lift(self.v) * other.d)
        if isinstance(other, np.ndarray) and other.ndim == self.v.ndim:
            return Dual(self.v * other, self.d * _lift(other))
        return Dual(self.v * other, self.d * other)

    __rmul__ = __mul__


def value(a):
    return a.v if isinstance(a, Dual) else a


def _left(a, db):
    # a (n,3,3) @ db (n,3,k,3)
    n, _, k, _ = db.shape
    return (a @ db.reshape(n, 3, 3 * k)).reshape(n, 3, k, 3)


def _right(da, b):
    # da (n,3,k,3) @ b (n,3,3)
    n, _, k, _ = da.shape
    return (da.reshape(n, 3 * k, 3) @ b).reshape(n, 3, k, 3)


def mm(a, b):
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.matmul(a, b)
    if not isinstance(a, Dual):
        return Dual(a @ b.v, _left(a, b.d))
    if not isinstance(b, Dual):
        return Dual(a.v @ b, _right(a.d, b))
    return Dual(a.v @ b.v, _right(a.d, b.v) + _left(a.v, b.d))


def scal(s, a):
    """Scalar field ``s`` (batch shape) times tensor field ``a``."""
    if not isinstance(s, Dual) and not isinstance(a, Dual):
        return np.asarray(s)[..., None, None] * a
    if not isinstance(s, Dual):
        return Dual(s[:, None, None] * a.v, s[:, None, None, None] * a.d)
    ds = s.d[:, None, :, None]
    if not isinstance(a, Dual):
        return Dual(s.v[:, None, None] * a, ds * _lift(a))
    return Dual(s.v[:, None, None] * a.v, ds * _lift(a.v) + s.v[:, None, None, None] * a.d)


def trace(a):
    if isinstance(a, Dual):
        return Dual(tn.trace(a.v), np.trace(a.d, axis1=1, axis2=3))
    return tn.trace(a)


def transpose(a):
    if isinstance(a, Dual):
        return Dual(tn.transpose(a.v), np.swapaxes(a.d, 1, 3))
    return tn.transpose(a)


def sum_product(a, b):
    """``sum_ij a_ij b_ij``."""
    if not isinstance(a, Dual) and not isinstance(b, Dual):
        return np.sum(a * b, axis=(-2, -1))
    prod = a * b if isinstance(a, Dual) else b * a
    return Dual(np.sum(prod.v, axis=(-2, -1)), np.sum(prod.d, axis=(1, 3)))


def recip(s):
    if isinstance(s, Dual):
        inv = 1.0 / s.v
        return Dual(inv, -s.d * (inv * inv)[:, None])
    return 1.0 / s


def sqrt(s):
    if isinstance(s, Dual):
        r = np.sqrt(s.v)
        return Dual(r, s.d * (0.5 / r)[:, None])
    return np.sqrt(s)


def apply(s, f, fprime):
    """Scalar function with known derivative."""
    if isinstance(s, Dual):
        return Dual(f(s.v), s.d * fprime(s.v)[:, None])
    return f(s)


def invert_with_det(a):
    if not isinstance(a, Dual):
        return tn.invert_with_det(a)
    inv, det = tn.invert_with_det(a.v)
    d_inv = -_right(_left(inv, a.d), inv)
    # d det = det tr(A^-1 dA)
    d_det = det[:, None] * np.sum(_lift(tn.transpose(inv)) * a.d, axis=(1, 3))
    return Dual(inv, d_inv), Dual(det, d_det)


def seed(values, basis, k, offset):
    """Dual tensor with derivative ``basis[j]`` in direction ``offset + j``."""
    n = values.shape[0]
    d = np.zeros((n, 3, k, 3))
    d[:, :, offset:offset + basis.shape[0], :] = np.swapaxes(basis, 0, 1)
    return Dual(values, d)


def pack_derivative(a):
    """Voigt-packed derivative of a symmetric dual tensor, shape ``(n, k, 6)``."""
    d = np.swapaxes(a.d, 1, 2)
    return tn.voigt_pack(d, check=False)


def mat_exp(a):
    """``exp`` with the value-based scaling and term count of :func:`tensor.mat_exp`."""
    if not isinstance(a, Dual):
        return tn.mat_exp(a)
    nrm = tn.frobenius_norm(a.v)
    top = float(np.max(nrm)) if nrm.size else 0.0
    if not np.isfinite(top):
        raise FloatingPointError("mat_exp argument is not finite")
    s = 0
    if top > tn.EXP_SCALE_TARGET:
        s = int(np.ceil(np.log2(top / tn.EXP_SCALE_TARGET)))
    x = a * (1.0 / 2.0**s)
    # one extra term: the derivative series trails the value series by one order
    nterms = tn._taylor_terms(top / 2.0**s) + 1
    result = Dual(tn.identity(a.v.shape[:-2]), np.zeros_like(a.d))
    for k in range(nterms, 0, -1):
        result = mm(x, result) * (1.0 / k) + tn.I3
    for _ in range(s):
        result = mm(result, result)
    return result
