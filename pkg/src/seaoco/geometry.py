"""Feasible sets and the Euclidean prox step every learner reduces to.

Vectors live on the last axis; any leading axes are treated as a batch, so
``project(dom, p)`` works for a single point of shape ``(d,)`` as well as for
a stack of points of shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
import itertools

import numpy as np

BOUNDARY_RTOL = 1e-12


class GeometryError(ValueError):
    """Bad input to a geometry routine (shape or non-finite values)."""


class UnboundedObjective(GeometryError):
    """A linear objective with zero proximal weight has no minimizer."""


def _as_points(p, dim: int) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim == 0 or p.shape[-1] != dim:
        raise GeometryError(f"expected trailing dimension {dim}, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise GeometryError("non-finite input")
    return p


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    kind = "box"

    def __post_init__(self):
        lo = np.array(self.lo, dtype=np.float64).reshape(-1)
        hi = np.array(self.hi, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise GeometryError("box bounds must be non-empty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise GeometryError("box bounds must be finite")
        if np.any(lo >= hi):
            raise GeometryError("box requires lo[i] < hi[i] for every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def _project(self, p):
        return np.minimum(np.maximum(p, self.lo), self.hi)

    def _linear_min(self, theta, tie):
        return np.where(theta > 0, self.lo, np.where(theta < 0, self.hi, self._project(tie)))

    def _contains(self, p, tol):
        slack = tol * np.maximum(1.0, np.abs(self.hi - self.lo))
        return np.all((p >= self.lo - slack) & (p <= self.hi + slack), axis=-1)

    def _farthest_sq(self, c):
        # max over the box of ||x - c||^2 is attained at a vertex, coordinatewise
        far = np.maximum(np.abs(self.lo - c), np.abs(self.hi - c))
        return np.sum(far * far, axis=-1)

    def extreme_points(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=np.float64)

    def grid(self, n: int = 100) -> np.ndarray:
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def to_dict(self) -> dict:
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    kind = "ball"

    def __post_init__(self):
        c = np.array(self.center, dtype=np.float64).reshape(-1)
        r = float(self.radius)
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise GeometryError("ball center must be a finite non-empty vector")
        if not (np.isfinite(r) and r > 0):
            raise GeometryError("ball radius must be positive")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center.size

    def diameter(self) -> float:
        return 2.0 * self.radius

    def _project(self, p):
        v = p - self.center
        n = np.sqrt(np.einsum("...d,...d->...", v, v))
        out = n > self.radius
        if not out.any():
            return np.array(p, dtype=np.float64)
        n = n[..., None]
        return np.where(out[..., None], self.center + v * (self.radius / np.maximum(n, self.radius)), p)

    def _linear_min(self, theta, tie):
        n = np.sqrt(np.einsum("...d,...d->...", theta, theta))[..., None]
        pos = n > 0
        edge = self.center - self.radius * theta / np.where(pos, n, 1.0)
        return np.where(pos, edge, self._project(tie))

    def _contains(self, p, tol):
        v = p - self.center
        return np.sqrt(np.sum(v * v, axis=-1)) <= self.radius * (1.0 + tol)

    def _farthest_sq(self, c):
        v = c - self.center
        return (np.sqrt(np.sum(v * v, axis=-1)) + self.radius) ** 2

    def extreme_points(self) -> np.ndarray:
        # boundary circle sample; exact sup for x-independent quantities only
        if self.dim == 1:
            return np.array([[self.center[0] - self.radius], [self.center[0] + self.radius]])
        ang = np.linspace(0.0, 2 * np.pi, 256, endpoint=False)
        pts = np.tile(self.center, (ang.size, 1))
        pts[:, 0] += self.radius * np.cos(ang)
        pts[:, 1] += self.radius * np.sin(ang)
        return pts

    def grid(self, n: int = 100) -> np.ndarray:
        lo = self.center - self.radius
        axes = [np.linspace(a, a + 2 * self.radius, n) for a in lo]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        return np.concatenate([pts[self._contains(pts, 0.0)], self.extreme_points()])

    def to_dict(self) -> dict:
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


Domain = Box | Ball


def box(lo, hi) -> Box:
    return Box(lo, hi)


def ball(center, radius) -> Ball:
    return Ball(center, radius)


def domain_from_dict(spec: dict) -> Domain:
    kind = spec.get("kind")
    if kind == "box":
        return Box(spec["lo"], spec["hi"])
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    raise GeometryError(f"unknown domain kind {kind!r}")


def diameter(domain: Domain) -> float:
    return domain.diameter()


def center(domain: Domain) -> np.ndarray:
    return np.array(domain.center)


def project(domain: Domain, p) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``domain``."""
    return domain._project(_as_points(p, domain.dim))


def contains(domain: Domain, p, tol: float = BOUNDARY_RTOL):
    return domain._contains(np.asarray(p, dtype=np.float64), tol)


def prox_step(domain: Domain, theta, weight, center) -> np.ndarray:
    """argmin_x <x, theta> + (weight/2)||x - center||^2 over the domain.

    Equals ``project(center - theta/weight)``. A zero weight is only allowed
    where theta vanishes; there the answer is ``project(center)``.
    """
    theta = _as_points(theta, domain.dim)
    center = _as_points(center, domain.dim)
    w = np.asarray(weight, dtype=np.float64)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise GeometryError("prox weight must be finite and non-negative")
    w = w[..., None]
    zero = w == 0
    if np.any(zero):
        if np.any(zero & np.any(theta != 0, axis=-1, keepdims=True)):
            raise UnboundedObjective("zero prox weight with a non-zero linear term")
        return domain._project(np.where(zero, center, center - theta / np.where(zero, 1.0, w)))
    return domain._project(center - theta / w)


def linear_minimizer(domain: Domain, theta, tie) -> np.ndarray:
    """A minimizer of <x, theta> over the domain.

    Coordinates (box) or the whole vector (ball) left undetermined by a zero
    linear term are resolved toward ``project(tie)``.
    """
    theta = _as_points(theta, domain.dim)
    tie = np.broadcast_to(_as_points(tie, domain.dim), theta.shape)
    return domain._linear_min(theta, tie)


def farthest_sq(domain: Domain, c) -> np.ndarray:
    """max over x in the domain of ||x - c||^2."""
    return domain._farthest_sq(np.asarray(c, dtype=np.float64))
