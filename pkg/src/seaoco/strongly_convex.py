"""Optimistic follow-the-leader on strongly convex surrogates.

With surrogates l_s(x) = <g_s, x - x_s> + (mu/2)||x - x_s||^2 the objective
sum_{s<t} l_s(x) + <m_t, x> is an isotropic quadratic, so its constrained
minimizer is the projection of

    (mu * sum_s x_s - sum_s g_s - m_t) / (mu (t - 1)).

The learner needs mu and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .base import Learner, RoundInfo


@dataclass(frozen=True, eq=False)
class OftlScState:
    mu: float
    grad_sum: np.ndarray
    anchor_sum: np.ndarray
    last_grad: np.ndarray
    x_prev: np.ndarray | None = None
    t: int = 1


def init_oftl_sc_state(mu: float, dim: int, batch: int | None = None) -> OftlScState:
    if not mu > 0:
        raise ValueError("OFTL-SC needs mu > 0")
    lead = () if batch is None else (batch,)
    return OftlScState(float(mu), np.zeros(lead + (dim,)), np.zeros(lead + (dim,)), np.zeros(lead + (dim,)))


def oftl_sc_step(state: OftlScState, domain) -> np.ndarray:
    if state.t == 1:
        return np.broadcast_to(np.asarray(domain.center, dtype=np.float64), state.grad_sum.shape).copy()
    z = (state.mu * state.anchor_sum - state.grad_sum - state.last_grad) / (state.mu * (state.t - 1))
    return domain._project(z)


def oftl_sc_observe(state: OftlScState, x_t, g_t) -> OftlScState:
    x_t = np.asarray(x_t, dtype=np.float64)
    g_t = np.asarray(g_t, dtype=np.float64)
    return replace(state, grad_sum=state.grad_sum + g_t, anchor_sum=state.anchor_sum + x_t,
                   last_grad=g_t, x_prev=x_t, t=state.t + 1)


def surrogate(g_s, x_s, mu, x):
    """l_s(x) = <g_s, x - x_s> + (mu/2)||x - x_s||^2."""
    r = np.asarray(x) - x_s
    return np.sum(g_s * r, axis=-1) + 0.5 * mu * np.sum(r * r, axis=-1)


class OFTLSC(Learner):
    name = "oftl_sc"

    def __init__(self, domain, family, mu, batch=1, loss_scale=None):
        super().__init__(domain, family, batch, loss_scale)
        self.state = init_oftl_sc_state(mu, self.dim, self.B)
        self._x = None
        self._prev_g = self.zeros(self.dim)

    def play(self, t, env=None):
        self._x = oftl_sc_step(self.state, self.domain)
        return self._x

    def observe(self, t, sample):
        x = self._x
        g = self.family.grad(x, sample)
        pair = x if self.state.x_prev is None else self.state.x_prev
        info = RoundInfo(g, np.full(self.B, 1.0 / (self.state.mu * t)), pair, self._prev_g)
        self.state = oftl_sc_observe(self.state, x, g)
        self._prev_g = g
        return info
