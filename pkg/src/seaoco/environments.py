"""Stochastically extended adversaries.

Each environment drives a batch of independent episodes in lockstep. Round t
hands out one sample per episode together with analytic oracles for the
mean gradient, the variance sigma_t^2 and the adversarial variation
Sigma_t^2 (with grad F_0 = 0 at t = 1).

Randomness for episode e comes from three counter-based streams keyed by
(seed, e, role); draws are taken in fixed-size chunks per episode, so an
episode produces the same samples whether it runs alone or in a batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import chi2

from . import geometry as geo
from .losses import (
    LossFamily,
    Linear,
    LogSmooth,
    QuadraticTracking,
    RademacherOracle,
    Sample,
    make_family,
)

ROLES = {"env": 0, "extra_sample": 1, "coins": 2}
CHUNK = 1024
GRID_PER_AXIS = 100


class ProtocolViolation(RuntimeError):
    pass


class NoPreviousDistribution(RuntimeError):
    pass


class InvalidLowerBoundDomain(ValueError):
    pass


class EnvironmentConfigError(ValueError):
    pass


def stream(seed: int, episode: int, role: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(episode), ROLES[role]))
    return np.random.Generator(np.random.Philox(ss))


class _Tape:
    """Rows of pre-drawn randomness, one generator per episode."""

    def __init__(self, gens, draw: Callable[[np.random.Generator, int], np.ndarray]):
        self.gens = gens
        self.draw = draw
        self.buf = None
        self.base = 0
        self.pos = 0

    def row(self, i: int) -> np.ndarray:
        if self.buf is None:
            self.buf = np.stack([self.draw(g, CHUNK) for g in self.gens])
        while i >= self.base + CHUNK:
            self.base += CHUNK
            self.buf = np.stack([self.draw(g, CHUNK) for g in self.gens])
        if i < self.base:
            raise ProtocolViolation("tape rows must be read in order")
        return self.buf[:, i - self.base]

    def next(self) -> np.ndarray:
        r = self.row(self.pos)
        self.pos += 1
        return r


def truncated_gaussian(gen: np.random.Generator, n: int, dim: int, sigma: float, radius: float):
    """n draws of N(0, (sigma^2/dim) I) conditioned on ||z|| <= radius."""
    if sigma == 0:
        return np.zeros((n, dim))
    s = sigma / np.sqrt(dim)
    out = np.empty((0, dim))
    while out.shape[0] < n:
        z = s * gen.standard_normal((max(16, int(1.1 * (n - out.shape[0])) + 8), dim))
        z = z[np.einsum("ij,ij->i", z, z) <= radius * radius]
        out = np.concatenate([out, z])
    return out[:n]


def truncated_variance(dim: int, sigma: float, radius: float) -> float:
    """E||z||^2 for the truncated law above (closed form via chi-square cdfs)."""
    if sigma == 0:
        return 0.0
    s2 = sigma * sigma / dim
    c = radius * radius / s2
    return float(s2 * dim * chi2.cdf(c, dim + 2) / chi2.cdf(c, dim))


def unit_directions(gen: np.random.Generator, n: int, dim: int) -> np.ndarray:
    z = gen.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass
class RoundOutcome:
    xi: Sample
    mean_grad_at: Callable[[np.ndarray], np.ndarray]
    sigma_sq_t: np.ndarray
    Sigma_sq_t: np.ndarray
    mean_point: np.ndarray | None = None


@dataclass
class VarianceProfile:
    sigma_sq: np.ndarray
    Sigma_sq: np.ndarray
    sigma_bar: np.ndarray
    Sigma_bar: np.ndarray
    sigma_max: np.ndarray
    Sigma_max: np.ndarray


class SeaEnvironment:
    """Base class. Subclasses implement ``_round`` and ``_extra``."""

    kind = "abstract"
    iid = False

    def __init__(self, family: LossFamily, domain, T: int, seed: int = 0, episodes: Sequence[int] = (0,)):
        if T < 1:
            raise EnvironmentConfigError("horizon must be positive")
        self.family = family
        self.domain = domain
        self.T = int(T)
        self.seed = int(seed)
        self.episodes = tuple(int(e) for e in episodes)
        self.B = len(self.episodes)
        self.dim = domain.dim
        self._t = 0
        self._sig = np.zeros((self.B, self.T))
        self._Sig = np.zeros((self.B, self.T))
        self.gens = {r: [stream(seed, e, r) for e in self.episodes] for r in ROLES}

    # -- protocol -----------------------------------------------------------
    @property
    def t(self) -> int:
        return self._t

    def step(self, t: int, x_t) -> RoundOutcome:
        if t != self._t + 1 or t > self.T:
            raise ProtocolViolation(f"round {t} requested after round {self._t} (T={self.T})")
        x = np.asarray(x_t, dtype=np.float64).reshape(self.B, self.dim)
        out = self._round(t, x)
        self._t = t
        self._sig[:, t - 1] = out.sigma_sq_t
        self._Sig[:, t - 1] = out.Sigma_sq_t
        return out

    def extra_sample(self, t: int) -> Sample:
        """An independent draw from the distribution of round t - 1."""
        if t <= 1:
            raise NoPreviousDistribution("no distribution before round 1")
        if t != self._t + 1:
            raise ProtocolViolation(f"extra sample for round {t} requested after round {self._t}")
        return self._extra(t)

    def variance_profile(self) -> VarianceProfile:
        n = max(self._t, 1)
        sig = self._sig[:, : self._t]
        Sig = self._Sig[:, : self._t]
        later = Sig[:, 1:]
        return VarianceProfile(
            sigma_sq=sig.copy(),
            Sigma_sq=Sig.copy(),
            sigma_bar=np.sqrt(sig.sum(axis=1) / n),
            Sigma_bar=np.sqrt(later.sum(axis=1) / n),
            sigma_max=sig.max(axis=1) if sig.size else np.zeros(self.B),
            Sigma_max=later.max(axis=1) if later.size else np.zeros(self.B),
        )

    def describe(self) -> dict:
        return {"kind": self.kind, "T": self.T, "seed": self.seed}

    def _round(self, t, x) -> RoundOutcome:
        raise NotImplementedError

    def _extra(self, t) -> Sample:
        raise NotImplementedError


class _VectorEnv(SeaEnvironment):
    """Environments whose sample is a point (plus an optional linear shift).

    For linear and quadratic families grad F_t(x) - grad F_{t-1}(x) does not
    depend on x, so Sigma_t^2 is exact; log_smooth falls back to a grid.
    """

    def __init__(self, family, domain, T, seed=0, episodes=(0,)):
        super().__init__(family, domain, T, seed, episodes)
        self._prev = None  # (mean, shift, support) of round t - 1
        self._grid = None

    def _offset(self, mean, shift):
        # grad F(x) = A x - offset with A = a (quadratic) or 0 (linear)
        fam = self.family
        if isinstance(fam, QuadraticTracking):
            off = fam.a * mean
            return off if shift is None else off - shift
        if isinstance(fam, Linear):
            return -mean if shift is None else -(mean + shift)
        return None

    def _mean_grad_fn(self, mean, shift, support=None, weights=None):
        fam = self.family
        if isinstance(fam, (QuadraticTracking, Linear)):
            off = self._offset(mean, shift)
            A = fam.a if isinstance(fam, QuadraticTracking) else 0.0
            return lambda x: A * np.asarray(x, dtype=np.float64) - off
        return lambda x: self._logsmooth_mean_grad(np.asarray(x, dtype=np.float64), mean, support, weights)

    def _logsmooth_mean_grad(self, x, mean, support, weights):
        # x: (..., B, d) or (B, d); support: (B, n, d) with weights (B, n)
        if support is None:
            return self.family.grad(x, Sample(point=mean))
        z = np.einsum("bnd,...bd->...bn", support, x)
        s = 1.0 / (1.0 + np.exp(-z))
        return np.einsum("...bn,bn,bnd->...bd", s, weights, support)

    def _grid_points(self):
        if self._grid is None:
            self._grid = self.domain.grid(GRID_PER_AXIS)
        return self._grid

    def _sigma_sq(self, var, support=None, weights=None):
        fam = self.family
        if isinstance(fam, QuadraticTracking):
            return fam.a ** 2 * var
        if isinstance(fam, Linear):
            return var
        if support is None:
            return np.zeros(self.B)
        grid = self._grid_points()
        out = np.empty(self.B)
        for b in range(self.B):
            z = grid @ support[b].T  # (G, n)
            g = (1.0 / (1.0 + np.exp(-z)))[:, :, None] * support[b][None]
            mu = np.einsum("gnd,n->gd", g, weights[b])
            dev = np.einsum("gnd,gnd->gn", g - mu[:, None], g - mu[:, None])
            out[b] = np.max(dev @ weights[b])
        return out

    def _Sigma_sq(self, t, mean, shift, support=None, weights=None):
        fam = self.family
        if isinstance(fam, (QuadraticTracking, Linear)):
            off = self._offset(mean, shift)
            if t == 1:
                if isinstance(fam, QuadraticTracking):
                    return fam.a ** 2 * geo.farthest_sq(self.domain, off / fam.a)
                return np.einsum("...d,...d->...", off, off)
            d = off - self._offset(*self._prev[:2])
            return np.einsum("...d,...d->...", d, d)
        grid = self._grid_points()
        cur = self._mean_grad_fn(mean, shift, support, weights)
        now = cur(np.broadcast_to(grid[:, None, :], (grid.shape[0], self.B, self.dim)))
        if t > 1:
            prev = self._mean_grad_fn(*self._prev)
            now = now - prev(np.broadcast_to(grid[:, None, :], (grid.shape[0], self.B, self.dim)))
        return np.max(np.sum(now * now, axis=-1), axis=0)

    def _emit(self, t, sample: Sample, mean, var, shift=None, support=None, weights=None):
        sig = self._sigma_sq(var, support, weights)
        Sig = self._Sigma_sq(t, mean, shift, support, weights)
        fn = self._mean_grad_fn(mean, shift, support, weights)
        self._prev = (mean, shift, support, weights)
        return RoundOutcome(sample, fn, sig, Sig, mean)


def _declared_G_point(family, domain, max_dist: float, max_norm: float, R: float = 0.0):
    """Gradient bound for point samples: quadratic a*(dist + R), linear / log_smooth norm + R."""
    if isinstance(family, QuadraticTracking):
        return family.a * (max_dist + R)
    return max_norm + R


class IID(_VectorEnv):
    """xi = mean + truncated Gaussian noise (point mass when sigma = 0)."""

    kind = "iid"
    iid = True

    def __init__(self, family, domain, T, mean, sigma=0.0, trunc=3.0, seed=0, episodes=(0,)):
        super().__init__(family, domain, T, seed, episodes)
        self.mean = np.asarray(mean, dtype=np.float64).reshape(self.dim)
        self.sigma = float(sigma)
        self.R = float(trunc) * self.sigma
        if self.sigma < 0:
            raise EnvironmentConfigError("sigma must be non-negative")
        if isinstance(family, LogSmooth) and self.sigma > 0:
            raise EnvironmentConfigError("log_smooth i.i.d. noise is only supported as a point mass")
        self.var = truncated_variance(self.dim, self.sigma, self.R)
        dist = max(domain.diameter(), float(np.sqrt(geo.farthest_sq(domain, self.mean))))
        G = _declared_G_point(family, domain, dist, float(np.linalg.norm(self.mean)), self.R)
        if isinstance(family, LogSmooth):
            self.family = family.__class__(G=G, L=float(self.mean @ self.mean) / 4)
        else:
            self.family = family.with_G(G)
        draw = lambda g, n: truncated_gaussian(g, n, self.dim, self.sigma, self.R)
        self._noise = _Tape(self.gens["env"], draw)
        self._xnoise = _Tape(self.gens["extra_sample"], draw)
        self._M = np.broadcast_to(self.mean, (self.B, self.dim))
        self._V = np.full(self.B, self.var)

    def _round(self, t, x):
        pt = self.mean + self._noise.row(t - 1)
        return self._emit(t, Sample(point=pt), self._M, self._V)

    def _extra(self, t):
        return Sample(point=self.mean + self._xnoise.next())

    def describe(self):
        return {**super().describe(), "mean": self.mean.tolist(), "sigma": self.sigma, "radius": self.R}


class AdversarialSeq(_VectorEnv):
    """Point masses. ``sequence`` picks the points: a fixed list (cycled),
    'random', 'alternating', or 'adaptive' (reacts to the current play)."""

    kind = "adversarial_seq"

    def __init__(self, family, domain, T, sequence="random", points=None, scale=1.0, seed=0, episodes=(0,)):
        super().__init__(family, domain, T, seed, episodes)
        self.sequence = sequence
        self.scale = float(scale)
        self.points = None if points is None else np.asarray(points, dtype=np.float64).reshape(-1, self.dim)
        if sequence == "list" and self.points is None:
            raise EnvironmentConfigError("sequence 'list' needs points")
        if sequence not in ("list", "random", "alternating", "adaptive"):
            raise EnvironmentConfigError(f"unknown adversarial sequence {sequence!r}")
        if isinstance(family, QuadraticTracking):
            if self.points is not None:
                dist = float(np.sqrt(np.max(geo.farthest_sq(domain, self.points))))
            else:
                dist = domain.diameter()
            self.family = family.with_G(family.a * dist)
        else:
            norm = self.scale if self.points is None else float(np.max(np.linalg.norm(self.points, axis=1)))
            if isinstance(family, LogSmooth):
                self.family = LogSmooth(G=norm, L=norm * norm / 4)
            else:
                self.family = family.with_G(norm)
        self._dirs = _Tape(self.gens["env"], lambda g, n: unit_directions(g, n, self.dim))
        self._zero = np.zeros(self.B)

    def _point(self, t, x):
        quad = isinstance(self.family, QuadraticTracking)
        dom = self.domain
        if self.sequence == "list":
            return np.broadcast_to(self.points[(t - 1) % len(self.points)], (self.B, self.dim)).copy()
        if self.sequence == "random":
            u = self._dirs.row(t - 1)
            if quad:
                return geo.project(dom, _center(dom) + 0.5 * dom.diameter() * u)
            return self.scale * u
        if self.sequence == "alternating":
            e = np.zeros(self.dim)
            e[0] = 1.0 if t % 2 else -1.0
            if quad:
                return np.broadcast_to(geo.linear_minimizer(dom, -e, _center(dom)), (self.B, self.dim)).copy()
            return np.broadcast_to(self.scale * e, (self.B, self.dim)).copy()
        # adaptive: push the loss at the current play as high as possible
        c = _center(dom)
        v = x - c
        n = np.linalg.norm(v, axis=1, keepdims=True)
        e1 = np.zeros(self.dim)
        e1[0] = 1.0
        u = np.where(n > 0, v / np.where(n > 0, n, 1.0), e1)
        if quad:
            return geo.linear_minimizer(dom, u, c)
        return self.scale * u

    def _round(self, t, x):
        p = self._point(t, x)
        return self._emit(t, Sample(point=p), p, self._zero, support=None)

    def _extra(self, t):
        return Sample(point=self._prev[0].copy())


def _center(dom):
    return np.asarray(dom.center, dtype=np.float64)


class CorruptedIID(IID):
    """i.i.d. base plus linear corruption c_t(x) = <v_t, x> with sum ||v_t|| = C.

    The budget is spent up front at ``rate`` per round. With the default
    'alternating' pattern the direction flips sign every round, which is the
    schedule that makes consecutive means differ; 'constant' keeps it fixed.
    """

    kind = "corrupted_iid"
    iid = False

    def __init__(self, family, domain, T, mean, sigma=0.0, C=0.0, rate=None, pattern="alternating",
                 direction=None, trunc=3.0, seed=0, episodes=(0,)):
        super().__init__(family, domain, T, mean, sigma, trunc, seed, episodes)
        if C < 0:
            raise EnvironmentConfigError("corruption budget must be non-negative")
        if pattern not in ("alternating", "constant", "random"):
            raise EnvironmentConfigError(f"unknown corruption pattern {pattern!r}")
        base_G = self.family.G
        self.C = float(C)
        self.rate = float(base_G if rate is None else rate)
        if self.rate <= 0:
            raise EnvironmentConfigError("corruption rate must be positive")
        u = np.zeros(self.dim)
        u[0] = 1.0
        if direction is not None:
            u = np.asarray(direction, dtype=np.float64).reshape(self.dim)
            u = u / np.linalg.norm(u)
        self.direction = u
        self.pattern = pattern
        mags = np.zeros(self.T)
        left = self.C
        for i in range(self.T):
            if left <= 0:
                break
            mags[i] = min(self.rate, left)
            left -= mags[i]
        if pattern == "alternating":
            mags = mags * np.where(np.arange(self.T) % 2 == 0, 1.0, -1.0)
        if pattern == "random":
            # independent fair signs per episode, drawn from the coin stream
            signs = np.stack([np.where(g.random(self.T) < 0.5, -1.0, 1.0) for g in self.gens["coins"]])
            mags = signs * mags
        self.magnitudes = np.broadcast_to(mags, (self.B, self.T))
        self.family = self.family.with_G(base_G + (self.rate if self.C > 0 else 0.0))

    def shift_at(self, t):
        return self.magnitudes[:, t - 1, None] * self.direction

    def _round(self, t, x):
        v = self.shift_at(t)
        pt = self.mean + self._noise.row(t - 1)
        return self._emit(t, Sample(point=pt, shift=v), self._M, self._V, shift=v)

    def _extra(self, t):
        return Sample(point=self.mean + self._xnoise.next(), shift=self.shift_at(t - 1))

    def corruption_total(self) -> float:
        return float(np.max(np.sum(np.abs(self.magnitudes), axis=1)))

    def describe(self):
        return {**super().describe(), "C": self.C, "rate": self.rate, "pattern": self.pattern}


class ROM(_VectorEnv):
    """Random order model over a fixed set of n points.

    Round t draws uniformly among the points not yet used in the current
    pass; every pass starts from a fresh uniform shuffle.
    """

    kind = "rom"

    def __init__(self, family, domain, n, passes=1, points=None, mean=None, sigma=0.3, trunc=3.0,
                 seed=0, episodes=(0,)):
        super().__init__(family, domain, int(n) * int(passes), seed, episodes)
        self.n = int(n)
        self.passes = int(passes)
        if self.n < 1 or self.passes < 1:
            raise EnvironmentConfigError("rom needs n >= 1 and passes >= 1")
        if points is not None:
            pts = np.asarray(points, dtype=np.float64).reshape(self.n, self.dim)
            self.points = np.broadcast_to(pts, (self.B, self.n, self.dim)).copy()
        else:
            m = np.zeros(self.dim) if mean is None else np.asarray(mean, dtype=np.float64).reshape(self.dim)
            R = float(trunc) * float(sigma)
            self.points = np.stack([m + truncated_gaussian(g, self.n, self.dim, float(sigma), R)
                                    for g in self.gens["env"]])
        fam = family
        if isinstance(fam, QuadraticTracking):
            dist = float(np.sqrt(np.max(geo.farthest_sq(domain, self.points))))
            self.family = fam.with_G(fam.a * dist)
        else:
            norm = float(np.max(np.linalg.norm(self.points, axis=-1)))
            self.family = LogSmooth(G=norm, L=norm * norm / 4) if isinstance(fam, LogSmooth) else fam.with_G(norm)
        self._perm = None
        self._xu = _Tape(self.gens["extra_sample"], lambda g, k: g.random(k))
        self._rows = np.arange(self.B)

    def _support_stats(self, pos):
        rem = self._perm[:, pos:]
        pts = self.points[self._rows[:, None], rem]  # (B, r, d)
        mean = pts.mean(axis=1)
        dev = pts - mean[:, None]
        var = np.einsum("brd,brd->b", dev, dev) / pts.shape[1]
        return mean, var, pts

    def _round(self, t, x):
        pos = (t - 1) % self.n
        if pos == 0:
            self._perm = np.stack([g.permutation(self.n) for g in self.gens["env"]])
        mean, var, pts = self._support_stats(pos)
        idx = self._perm[:, pos]
        sample = Sample(point=self.points[self._rows, idx], index=idx)
        if isinstance(self.family, LogSmooth):
            w = np.full(pts.shape[:2], 1.0 / pts.shape[1])
            out = self._emit(t, sample, mean, var, support=pts, weights=w)
        else:
            out = self._emit(t, sample, mean, var)
        self._pos = pos
        return out

    def _extra(self, t):
        pos = self._pos
        r = self.n - pos
        k = pos + np.minimum((self._xu.next() * r).astype(int), r - 1)
        idx = self._perm[self._rows, k]
        return Sample(point=self.points[self._rows, idx], index=idx)

    def single_pass_constants(self):
        """(sigma_1^2, tilde sigma_1^2) of the full point set, per episode."""
        fam = self.family
        if isinstance(fam, (QuadraticTracking, Linear)):
            a2 = fam.a ** 2 if isinstance(fam, QuadraticTracking) else 1.0
            dev = self.points - self.points.mean(axis=1, keepdims=True)
            v = a2 * np.einsum("bnd,bnd->b", dev, dev) / self.n
            return v, v.copy()
        grid = self._grid_points()
        s1 = np.empty(self.B)
        s2 = np.empty(self.B)
        for b in range(self.B):
            P = self.points[b]
            g = (1.0 / (1.0 + np.exp(-(grid @ P.T))))[:, :, None] * P[None]
            dev = g - g.mean(axis=1, keepdims=True)
            sq = np.einsum("gnd,gnd->gn", dev, dev)
            s1[b] = np.max(sq.mean(axis=1))
            s2[b] = np.mean(np.max(sq, axis=0))
        return s1, s2

    def describe(self):
        return {**super().describe(), "n": self.n, "passes": self.passes}


class Drifting(IID):
    """Means move along a circle (a segment in 1-D) by a fixed chord per round,
    sized so every Sigma_t^2 (t >= 2) equals eps."""

    kind = "drifting"
    iid = False

    def __init__(self, family, domain, T, eps, rho=None, center=None, sigma=0.0, trunc=3.0, seed=0, episodes=(0,)):
        c = _center(domain) if center is None else np.asarray(center, dtype=np.float64)
        super().__init__(family, domain, T, c, sigma, trunc, seed, episodes)
        if eps < 0:
            raise EnvironmentConfigError("eps must be non-negative")
        self.eps = float(eps)
        if rho is None:
            rho = 0.25 * domain.diameter()
        self.rho = float(rho)
        a = family.a if isinstance(family, QuadraticTracking) else 1.0
        step = np.sqrt(self.eps) / a
        t = np.arange(self.T)
        means = np.tile(c, (self.T, 1))
        if self.dim >= 2:
            if step > 2 * self.rho:
                raise EnvironmentConfigError("drift step exceeds the circle diameter")
            ang = 2 * np.arcsin(step / (2 * self.rho)) * t
            means[:, 0] += self.rho * np.cos(ang)
            means[:, 1] += self.rho * np.sin(ang)
        else:
            period = 4 * self.rho
            s = np.mod(step * t, period)
            means[:, 0] += np.where(s < 2 * self.rho, s, period - s) - self.rho
        self.means = means
        dist = max(domain.diameter(), float(np.sqrt(np.max(geo.farthest_sq(domain, means)))))
        self.family = family.with_G(_declared_G_point(family, domain, dist,
                                                      float(np.max(np.linalg.norm(means, axis=1))), self.R))

    def mean_at(self, t):
        return np.broadcast_to(self.means[t - 1], (self.B, self.dim))

    def _round(self, t, x):
        m = self.mean_at(t)
        return self._emit(t, Sample(point=m + self._noise.row(t - 1)), m, self._V)

    def _extra(self, t):
        return Sample(point=self.mean_at(t - 1) + self._xnoise.next())

    def describe(self):
        return {**super().describe(), "eps": self.eps, "rho": self.rho}


class Switching(IID):
    """Piecewise-stationary: the mean alternates between ``means`` at c evenly
    spaced switch rounds."""

    kind = "switching"
    iid = False

    def __init__(self, family, domain, T, c, means=None, sigma=0.0, trunc=3.0, seed=0, episodes=(0,)):
        cen = _center(domain)
        if means is None:
            e = np.zeros(domain.dim)
            e[0] = 0.25 * domain.diameter()
            means = [cen - e, cen + e]
        means = np.asarray(means, dtype=np.float64).reshape(-1, domain.dim)
        super().__init__(family, domain, T, means[0], sigma, trunc, seed, episodes)
        self.c = int(c)
        if self.c < 0:
            raise EnvironmentConfigError("switch count must be non-negative")
        gap = self.T // (self.c + 1)
        self.switch_rounds = [1 + j * gap for j in range(1, self.c + 1)] if gap >= 1 else []
        phase = np.zeros(self.T, dtype=int)
        for s in self.switch_rounds:
            phase[s - 1:] += 1
        self.table = means
        self.phase = phase % len(means)
        dist = max(domain.diameter(), float(np.sqrt(np.max(geo.farthest_sq(domain, means)))))
        self.family = family.with_G(_declared_G_point(family, domain, dist,
                                                      float(np.max(np.linalg.norm(means, axis=1))), self.R))

    def mean_at(self, t):
        return np.broadcast_to(self.table[self.phase[t - 1]], (self.B, self.dim))

    def _round(self, t, x):
        m = self.mean_at(t)
        return self._emit(t, Sample(point=m + self._noise.row(t - 1)), m, self._V)

    def _extra(self, t):
        return Sample(point=self.mean_at(t - 1) + self._xnoise.next())

    def describe(self):
        return {**super().describe(), "c": self.c}


class RademacherLB(SeaEnvironment):
    """Lower-bound adversary on an interval [a, b]: odd rounds emit the
    gradient coin * cz'(x) with a fresh Rademacher coin, even rounds emit 0."""

    kind = "rademacher_lb"

    def __init__(self, domain, T, G=1.0, seed=0, episodes=(0,)):
        if not isinstance(domain, geo.Box) or domain.dim != 1:
            raise InvalidLowerBoundDomain("the lower bound needs a one-dimensional interval")
        a, b = float(domain.lo[0]), float(domain.hi[0])
        if not (1.0 <= a < b and a >= b / 2):
            raise InvalidLowerBoundDomain(f"interval [{a}, {b}] needs 1 <= a < b and a >= b/2")
        family = RademacherOracle(G=float(G), G_lb=float(G), b=b)
        super().__init__(family, domain, T, seed, episodes)
        self.G = float(G)
        self.a, self.b = a, b
        coin = lambda g, n: np.where(g.random(n) < 0.5, -1.0, 1.0)
        self._coins = _Tape(self.gens["coins"], coin)
        self._xcoins = _Tape(self.gens["extra_sample"], coin)
        self._zero = np.zeros(self.B)
        self._var = (self.G / 2) ** 2

    def _round(self, t, x):
        c = self._coins.row(t - 1) if t % 2 else self._zero
        sig = np.full(self.B, self._var if t % 2 else 0.0)
        return RoundOutcome(Sample(coin=c), lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
                            sig, self._zero.copy())

    def _extra(self, t):
        return Sample(coin=self._xcoins.next() if (t - 1) % 2 else self._zero.copy())

    def describe(self):
        return {**super().describe(), "G": self.G, "interval": [self.a, self.b]}


def rademacher_lb_gradient(env: RademacherLB, t: int, x_t, coin):
    if not isinstance(env, RademacherLB):
        raise InvalidLowerBoundDomain("not a lower-bound environment")
    if t % 2 == 0:
        return 0.0 * np.asarray(x_t, dtype=np.float64)
    return coin * env.G * np.asarray(x_t, dtype=np.float64) / (2 * env.b)


def variance_profile(env: SeaEnvironment) -> VarianceProfile:
    return env.variance_profile()


KINDS = {
    "iid": IID,
    "adversarial_seq": AdversarialSeq,
    "corrupted_iid": CorruptedIID,
    "rom": ROM,
    "drifting": Drifting,
    "switching": Switching,
    "rademacher_lb": RademacherLB,
}


def make_environment(spec: dict, family_spec: dict | None, domain, T: int, seed: int = 0,
                     episodes: Sequence[int] = (0,)) -> SeaEnvironment:
    """Build an environment from a plain dict (the ``environment`` config table)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in KINDS:
        raise EnvironmentConfigError(f"unknown environment kind {kind!r}")
    if kind == "rademacher_lb":
        return RademacherLB(domain, T, seed=seed, episodes=episodes, **spec)
    family = make_family(family_spec or {"kind": "quadratic_tracking"})
    if kind == "rom":
        spec.setdefault("n", T)
        return ROM(family, domain, seed=seed, episodes=episodes, **spec)
    if kind == "drifting" and isinstance(spec.get("eps"), str):
        spec["eps"] = _eps_expr(spec["eps"], T)
    return KINDS[kind](family, domain, T, seed=seed, episodes=episodes, **spec)


def _eps_expr(expr: str, T: int) -> float:
    # the only symbolic drift budget supported: "T^p"
    expr = expr.replace(" ", "")
    if expr.startswith("T^"):
        return float(T) ** float(expr[2:])
    raise EnvironmentConfigError(f"cannot read eps expression {expr!r}")
