"""Online-to-batch conversion with linearly growing loss weights.

The online learner sees the scaled losses t * f(., xi_t); the output is the
t-weighted average of its iterates. With an optimistic adaptive learner this
recovers the accelerated O(L D^2 / T^2 + sigma D / sqrt(T)) excess risk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environments import SeaEnvironment
from .losses import QuadraticTracking


class ConversionPreconditionViolated(ValueError):
    pass


def o2b_weights(T: int) -> np.ndarray:
    """2t / (T(T+1)) for t = 1..T."""
    t = np.arange(1, T + 1, dtype=np.float64)
    return 2.0 * t / (T * (T + 1.0))


def weighted_average(xs, weights=None):
    """Weighted mean over the round axis of (B, T, d) iterates; weights sum to one."""
    xs = np.asarray(xs, dtype=np.float64)
    w = o2b_weights(xs.shape[1]) if weights is None else np.asarray(weights, dtype=np.float64)
    return np.einsum("t,btd->bd", w, xs)


def prefix_averages(xs, Ts):
    """Weighted and uniform averages of every prefix length in ``Ts``: two (B, n, d) arrays."""
    xs = np.asarray(xs, dtype=np.float64)
    Ts = np.asarray(Ts, dtype=int)
    t = np.arange(1, xs.shape[1] + 1, dtype=np.float64)
    tw = np.cumsum(t[None, :, None] * xs, axis=1)[:, Ts - 1]
    cs = np.cumsum(xs, axis=1)[:, Ts - 1]
    n = Ts[None, :, None].astype(np.float64)
    return 2.0 * tw / (n * (n + 1.0)), cs / n


@dataclass
class O2BResult:
    x_bar: np.ndarray  # (B, d) t-weighted average
    x_uniform: np.ndarray  # (B, d) plain average
    iterates: np.ndarray  # (B, T, d)
    weights: np.ndarray


def o2b_accelerated(learner, env: SeaEnvironment, T: int) -> O2BResult:
    """Run ``learner`` (built with ``loss_scale=float``) against an i.i.d. env."""
    if not getattr(env, "iid", False):
        raise ConversionPreconditionViolated("online-to-batch needs an i.i.d. environment")
    if learner.name not in ("oftrl", "omd"):
        raise ConversionPreconditionViolated("online-to-batch is defined for OFTRL or OMD")
    if learner.loss_scale(3) != 3:
        raise ConversionPreconditionViolated("the learner must see losses scaled by t")
    xs = np.empty((learner.B, T, learner.dim))
    for t in range(1, T + 1):
        x = learner.play(t, env)
        out = env.step(t, x)
        learner.observe(t, out.xi)
        xs[:, t - 1] = x
    w = o2b_weights(T)
    return O2BResult(weighted_average(xs, w), xs.mean(axis=1), xs, w)


def excess_risk(env: SeaEnvironment, x) -> np.ndarray:
    """F(x) - min F over the domain for i.i.d. quadratic tracking.

    F(x) = (a/2) E||x - xi||^2 differs from (a/2)||x - mean||^2 by a constant,
    so the excess is exact without sampling.
    """
    fam = env.family
    if not isinstance(fam, QuadraticTracking) or not getattr(env, "iid", False):
        raise ConversionPreconditionViolated("closed-form excess risk needs i.i.d. quadratic tracking")
    mean = env.mean
    x = np.asarray(x, dtype=np.float64)
    x_star = env.domain._project(mean)
    r, r0 = x - mean, x_star - mean
    return 0.5 * fam.a * (np.sum(r * r, axis=-1) - np.sum(r0 * r0))
