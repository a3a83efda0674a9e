"""Optimistic FTRL and optimistic mirror descent with the self-tuned step

    eta_t = D^2 / sum_{s<t} delta_s,   delta_s = min(eta_s |g_s - m_s|^2 / 2, D |g_s - m_s|),

where eta_t = inf while the sum is empty. With eta = inf the regularizer
vanishes and the step reduces to minimizing a linear function over the
domain; a zero linear term then returns the domain center (OFTRL) or the
current secondary iterate (OMD).

States are immutable values; the ``*_observe`` functions return new states.
Arrays may carry a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .base import Learner, RoundInfo
from .losses import Sample


def delta_of(eta, dev_norm, D):
    """min(eta * dev^2 / 2, D * dev); the first branch is dropped when eta = inf."""
    eta = np.asarray(eta, dtype=np.float64)
    dev = np.asarray(dev_norm, dtype=np.float64)
    if np.isfinite(eta).all():
        out = np.minimum(eta * (0.5 * dev * dev), D * dev)
        return float(out) if out.ndim == 0 else out
    # skip dev = 0 so that inf * 0 never happens; eta = inf then leaves D * dev
    quad = np.multiply(eta, 0.5 * dev * dev, out=np.zeros(np.broadcast_shapes(eta.shape, dev.shape)),
                       where=dev > 0)
    out = np.minimum(quad, D * dev)
    return float(out) if out.ndim == 0 else out


def _norm(v):
    return np.sqrt(np.einsum("...d,...d->...", v, v))


def _eta(D, delta_cumsum):
    dc = np.asarray(delta_cumsum, dtype=np.float64)
    pos = dc > 0
    if pos.all():
        return (D * D) / dc
    # an empty sum gives eta = inf
    return np.divide(D * D, dc, out=np.full(dc.shape, np.inf), where=pos)


@dataclass(frozen=True, eq=False)
class AdaptiveStepState:
    D: float
    delta_cumsum: np.ndarray
    grad_accum: np.ndarray
    last_grad: np.ndarray
    t: int = 1

    def __post_init__(self):
        object.__setattr__(self, "_eta", _eta(self.D, self.delta_cumsum))

    @property
    def eta(self):
        return self._eta


def init_step_state(D: float, dim: int, batch: int | None = None) -> AdaptiveStepState:
    lead = () if batch is None else (batch,)
    return AdaptiveStepState(float(D), np.zeros(lead), np.zeros(lead + (dim,)), np.zeros(lead + (dim,)), 1)


def _lazy_or_linear(domain, theta, eta, center, tie):
    """project(center - eta theta), or the linear-term minimizer when eta = inf (ties at project(0) if tie is None)."""
    fin = np.isfinite(eta)
    if fin.all():
        return domain._project(center - eta[..., None] * theta)
    e = np.where(fin, eta, 0.0)[..., None]
    prox = domain._project(center - e * theta)
    if tie is None:
        tie = domain._project(np.zeros_like(theta))
    zero = ~(theta != 0).any(axis=-1)
    lin = domain._linear_min(theta, np.broadcast_to(tie, theta.shape))
    flat = np.broadcast_to(domain._project(center), theta.shape)
    inf_pick = np.where(zero[..., None], flat, lin)
    return np.where(fin[..., None], prox, inf_pick)


def oftrl_step(state: AdaptiveStepState, domain) -> np.ndarray:
    theta = state.last_grad + state.grad_accum
    eta = state.eta
    # the tie-break point project(0) is only needed while eta = inf
    x = _lazy_or_linear(domain, theta, eta, np.zeros_like(theta), None)
    # an empty objective plays the domain center
    fin = np.isfinite(eta)
    if not fin.all():
        empty = (~fin) & ~(theta != 0).any(axis=-1)
        x = np.where(empty[..., None], np.asarray(domain.center), x)
    return x


def oftrl_observe(state: AdaptiveStepState, g) -> AdaptiveStepState:
    g = np.asarray(g, dtype=np.float64)
    dev = _norm(g - state.last_grad)
    d = delta_of(state.eta, dev, state.D)
    return AdaptiveStepState(state.D, state.delta_cumsum + d, state.grad_accum + g, g, state.t + 1)


@dataclass(frozen=True, eq=False)
class OmdState:
    y: np.ndarray
    x: np.ndarray
    step: AdaptiveStepState
    last_sample: Sample | None = None


def init_omd_state(domain, batch: int | None = None) -> OmdState:
    step = init_step_state(domain.diameter(), domain.dim, batch)
    c = np.broadcast_to(np.asarray(domain.center, dtype=np.float64), step.grad_accum.shape).copy()
    return OmdState(c, c.copy(), step, None)


def omd_step(state: OmdState, domain, m_t) -> np.ndarray:
    m_t = np.asarray(m_t, dtype=np.float64)
    return _lazy_or_linear(domain, m_t, state.step.eta, state.y, state.y)


def omd_observe(state: OmdState, domain, m_t, ell_t, x_t=None, sample=None) -> OmdState:
    m_t = np.asarray(m_t, dtype=np.float64)
    ell_t = np.asarray(ell_t, dtype=np.float64)
    eta = state.step.eta
    y_next = _lazy_or_linear(domain, ell_t, eta, state.y, state.y)
    dev = _norm(ell_t - m_t)
    st = state.step
    step = AdaptiveStepState(st.D, st.delta_cumsum + delta_of(eta, dev, st.D), st.grad_accum, ell_t, st.t + 1)
    return OmdState(y_next, state.x if x_t is None else x_t, step, sample)


def _per_episode(eta, B):
    eta = np.asarray(eta, dtype=np.float64)
    return eta.copy() if eta.shape == (B,) else np.broadcast_to(eta, (B,)).copy()


class OFTRL(Learner):
    name = "oftrl"

    def __init__(self, domain, family, batch=1, loss_scale=None):
        super().__init__(domain, family, batch, loss_scale)
        self.state = init_step_state(self.D, self.dim, self.B)
        self._x = None
        self._prev_x = None
        self._prev_g = self.zeros(self.dim)

    def play(self, t, env=None):
        self._x = oftrl_step(self.state, self.domain)
        return self._x

    def observe(self, t, sample):
        x = self._x
        g = self.family.grad(x, sample)
        eta = self.state.eta
        pair = x if self._prev_x is None else self._prev_x
        info = RoundInfo(g, _per_episode(eta, self.B), pair, self._prev_g)
        self.state = oftrl_observe(self.state, self.loss_scale(t) * g)
        self._prev_x, self._prev_g = x, g
        return info


class OMD(Learner):
    name = "omd"

    def __init__(self, domain, family, batch=1, loss_scale=None):
        super().__init__(domain, family, batch, loss_scale)
        self.state = init_omd_state(domain, self.B)
        self._m_raw = self.zeros(self.dim)
        self._m = self.zeros(self.dim)

    def play(self, t, env=None):
        st = self.state
        if t == 1 or st.last_sample is None:
            self._m_raw = self.zeros(self.dim)
        else:
            self._m_raw = self.family.grad(st.y, st.last_sample)
        self._m = self.loss_scale(t - 1) * self._m_raw if t > 1 else self._m_raw
        x = omd_step(st, self.domain, self._m)
        self.state = OmdState(st.y, x, st.step, st.last_sample)
        return x

    def observe(self, t, sample):
        st = self.state
        g = self.family.grad(st.x, sample)
        info = RoundInfo(g, _per_episode(st.step.eta, self.B), st.y, self._m_raw)
        self.state = omd_observe(st, self.domain, self._m, self.loss_scale(t) * g, st.x, sample)
        return info
