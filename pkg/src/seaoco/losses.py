"""Loss families f(x, xi) with gradient oracles and declared constants.

A sample is an opaque record produced by an environment. Families read the
fields they need: ``point`` for the vector families, ``shift`` for an added
linear corruption <v, x>, and ``coin`` for the lower-bound gradient oracle.
All fields carry the same leading batch axes as the iterate they meet.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit


class NumericalOverflow(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class Sample:
    point: np.ndarray | None = None
    index: np.ndarray | None = None
    shift: np.ndarray | None = None
    coin: np.ndarray | None = None

    def expand(self, axis: int = 1) -> "Sample":
        """Insert a broadcast axis, e.g. to meet a stack of worker iterates."""
        def ex(a):
            return None if a is None else np.expand_dims(a, axis)
        return Sample(ex(self.point), self.index, ex(self.shift), ex(self.coin))

    def take(self, i) -> "Sample":
        def tk(a):
            return None if a is None else a[i]
        return Sample(tk(self.point), tk(self.index), tk(self.shift), tk(self.coin))


def _check(v):
    if not np.isfinite(v).all():
        raise NumericalOverflow("non-finite loss or gradient")
    return v


def _dot(a, b):
    return np.einsum("...d,...d->...", a, b)


@dataclass(frozen=True)
class LossFamily:
    """Base family. ``G`` bounds gradient norms a.s., ``L`` and ``mu`` are the
    smoothness and strong convexity of the expected loss."""

    G: float = np.inf
    L: float = 0.0
    mu: float = 0.0

    kind = "abstract"

    def __post_init__(self):
        if self.mu < 0 or (self.mu > 0 and self.mu > self.L + 1e-15):
            raise ValueError("need 0 <= mu <= L")

    def with_G(self, G: float) -> "LossFamily":
        return replace(self, G=float(G))

    def _value(self, x, xi):
        raise NotImplementedError

    def _grad(self, x, xi):
        raise NotImplementedError

    def value(self, x, xi: Sample):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            v = self._value(x, xi)
            if xi.shift is not None:
                v = v + _dot(xi.shift, x)
        return _check(v)

    def grad(self, x, xi: Sample):
        x = np.asarray(x, dtype=np.float64)
        with np.errstate(over="ignore", invalid="ignore"):
            g = self._grad(x, xi)
            if xi.shift is not None:
                g = g + xi.shift
        return _check(g)

    def to_dict(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class Linear(LossFamily):
    kind = "linear"

    def _value(self, x, xi):
        return _dot(xi.point, x)

    def _grad(self, x, xi):
        if x.shape == xi.point.shape:
            return xi.point.copy()
        return np.broadcast_to(xi.point, np.broadcast_shapes(x.shape, xi.point.shape)).copy()


@dataclass(frozen=True)
class QuadraticTracking(LossFamily):
    """f(x, xi) = (a/2)||x - xi||^2."""

    a: float = 1.0
    kind = "quadratic_tracking"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("quadratic_tracking needs a > 0")
        object.__setattr__(self, "L", float(self.a))
        object.__setattr__(self, "mu", float(self.a))

    def _value(self, x, xi):
        r = x - xi.point
        return 0.5 * self.a * _dot(r, r)

    def _grad(self, x, xi):
        return self.a * (x - xi.point)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "scale": self.a}


@dataclass(frozen=True)
class LogSmooth(LossFamily):
    """f(x, xi) = log(1 + exp(<xi, x>))."""

    kind = "log_smooth"

    def __post_init__(self):
        object.__setattr__(self, "mu", 0.0)

    def _value(self, x, xi):
        return np.logaddexp(0.0, _dot(xi.point, x))

    def _grad(self, x, xi):
        return expit(_dot(xi.point, x))[..., None] * xi.point


@dataclass(frozen=True)
class RademacherOracle(LossFamily):
    """Gradient oracle of the lower-bound adversary.

    On an interval [a, b], g(x) = coin * G x / (2b), the derivative of
    coin * cz(x) with cz(x) = G x^2 / (4b). Even rounds carry coin = 0.
    The expected loss is identically zero, so L = mu = 0.
    """

    G_lb: float = 1.0
    b: float = 2.0
    kind = "gradient_oracle"

    def _value(self, x, xi):
        return xi.coin * self.G_lb * x[..., 0] ** 2 / (4 * self.b)

    def _grad(self, x, xi):
        return (xi.coin * self.G_lb / (2 * self.b))[..., None] * x

    def to_dict(self) -> dict:
        return {"kind": self.kind, "G": self.G_lb, "b": self.b}


def make_family(spec: dict) -> LossFamily:
    kind = spec.get("kind")
    if kind == "linear":
        return Linear()
    if kind == "quadratic_tracking":
        return QuadraticTracking(a=float(spec.get("scale", 1.0)))
    if kind == "log_smooth":
        return LogSmooth()
    raise ValueError(f"unknown loss family {kind!r}")


def evaluate(family: LossFamily, x, xi: Sample):
    return family.value(x, xi)


def grad(family: LossFamily, x, xi: Sample):
    return family.grad(x, xi)
