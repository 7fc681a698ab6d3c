"""Forward-mode derivatives of plaintext CutMax.

``DualArray`` carries a value of shape (n,) and a stack of tangents of
shape (k, n), one per direction, so a full Jacobian is a single pass with
the identity as tangents.
"""

from __future__ import annotations

import numpy as np

from .core import EPS_VAR, CutMaxParams, as_logits, cutmax
from .errors import InvalidParams, SingularityError


class DualArray:
    __slots__ = ("val", "dot")
    __array_priority__ = 1000

    def __init__(self, val, dot):
        self.val = np.asarray(val, dtype=np.float64)
        self.dot = np.asarray(dot, dtype=np.float64)

    @staticmethod
    def _lift(other):
        return other if isinstance(other, DualArray) else DualArray(other, 0.0)

    def __add__(self, other):
        o = self._lift(other)
        return DualArray(self.val + o.val, self.dot + o.dot)

    __radd__ = __add__

    def __neg__(self):
        return DualArray(-self.val, -self.dot)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return DualArray(self.val * o.val, self.dot * o.val + self.val * o.dot)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        return DualArray(self.val / o.val, (self.dot * o.val - self.val * o.dot) / (o.val * o.val))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, k: int):
        k = int(k)
        if k == 0:
            return DualArray(np.ones_like(self.val), np.zeros_like(self.dot * self.val))
        return DualArray(self.val ** k, k * self.val ** (k - 1) * self.dot)

    def rsqrt(self):
        r = 1.0 / np.sqrt(self.val)
        return DualArray(r, -0.5 * r ** 3 * self.dot)

    def sum(self):
        return DualArray(self.val.sum(axis=-1, keepdims=True), self.dot.sum(axis=-1, keepdims=True))

    def mean(self):
        return DualArray(self.val.mean(axis=-1, keepdims=True), self.dot.mean(axis=-1, keepdims=True))


def _forward(x: DualArray, params: CutMaxParams, eps_var: float) -> DualArray:
    y = x
    for t, (p, c) in enumerate(params.schedule(), start=1):
        d = y - y.mean()
        s2 = (d * d).mean()
        if not s2.val[0] >= eps_var:
            raise SingularityError(f"variance {s2.val[0]:.3e} below {eps_var:.1e} at iteration {t}")
        y = (1.0 + d * s2.rsqrt() * (1.0 / c)) ** p
    return y / y.sum()


def cutmax_jvp(x, v, params: CutMaxParams, eps_var: float = EPS_VAR) -> np.ndarray:
    """Directional derivative of ``cutmax`` at ``x`` along ``v`` (or along each row of a 2-D ``v``)."""
    x = as_logits(x)
    if x.ndim != 1:
        raise InvalidParams("cutmax_jvp takes a single vector")
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != x.size or v.ndim > 2:
        raise InvalidParams(f"direction shape {v.shape} does not match n={x.size}")
    return _forward(DualArray(x, v), params, eps_var).dot


def cutmax_jacobian(x, params: CutMaxParams, eps_var: float = EPS_VAR) -> np.ndarray:
    """J[i, j] = dZ_i / dx_j, from n basis directions in one pass."""
    x = as_logits(x)
    return cutmax_jvp(x, np.eye(x.size), params, eps_var).T


def finite_difference_jvp(x, v, params: CutMaxParams, h: float = 1e-5) -> np.ndarray:
    """Central difference (f(x + h v) - f(x - h v)) / 2h; the reference the JVP is checked against."""
    x = as_logits(x)
    v = np.asarray(v, dtype=np.float64)
    return (cutmax(x + h * v, params) - cutmax(x - h * v, params)) / (2.0 * h)
