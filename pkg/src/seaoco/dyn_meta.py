"""dynMetaGrad: optimistic exponential weights with an AdaHedge-style rate over
fixed-step optimistic mirror-descent workers, for dynamic regret.

Meta weights P_tk ∝ exp(-gamma_t (M_tk + sum_{s<t} L_sk)) with
gamma_t = log K / sum_{s<t} delta_s and the mixability-gap analogue

    delta_s = max_P <P_s - P, L_s - M_s> - |P_s - P|_1^2 / (4 gamma_s).

Worker k is OMD with psi(w) = |w|^2 / (2 eta_k), optimism
m_tk = grad f(w_hat_tk, xi_{t-1}) and loss gradient l_tk = grad f(w_tk, xi_t).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Learner, RoundInfo


@dataclass(frozen=True)
class DynGrid:
    K: int
    etas: np.ndarray


def dyn_grid(D: float, L: float, T: int) -> DynGrid:
    if not L > 0:
        raise ValueError("the dynamic grid needs a positive smoothness constant L")
    K = max(1, int(np.ceil(np.log2(D * T))))
    i = np.arange(1, K + 1)
    return DynGrid(K, 2.0 ** i / (D * L * np.sqrt(T + 1)))


def dyn_meta_weights(gamma, M_t, cum_loss=None, P1=None) -> np.ndarray:
    """Exponential weights; gamma = inf puts uniform mass on the argmin set."""
    M_t = np.asarray(M_t, dtype=np.float64)
    score = M_t if cum_loss is None else M_t + cum_loss
    K = score.shape[-1]
    prior = np.full(score.shape, 1.0 / K) if P1 is None else np.broadcast_to(P1, score.shape)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), score.shape[:-1])
    smin = np.min(score, axis=-1, keepdims=True)
    rel = score - smin
    fin = np.isfinite(gamma)
    g = np.where(fin, gamma, 0.0)[..., None]
    w = prior * np.exp(-g * rel)
    tol = 1e-12 * np.maximum(1.0, np.max(np.abs(score), axis=-1, keepdims=True))
    arg = prior * (rel <= tol)
    w = np.where(fin[..., None], w, arg)
    return w / np.sum(w, axis=-1, keepdims=True)


def adahedge_gap(P_s, v, gamma) -> np.ndarray:
    """max_P <P_s - P, v> - |P_s - P|_1^2 / (4 gamma) over the simplex.

    Moving mass m away from the coordinates with the largest v (capped by
    P_s) onto the smallest-v coordinate gives a concave piecewise-linear gain
    h(m), and |P_s - P|_1 = 2m, so the objective is h(m) - m^2 / gamma. Each
    linear piece of slope s peaks at m = gamma s / 2 clipped to the piece.
    """
    P_s = np.asarray(P_s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=np.float64), v.shape[:-1])
    order = np.argsort(-v, axis=-1, kind="stable")
    vs = np.take_along_axis(v, order, axis=-1)
    caps = np.take_along_axis(P_s, order, axis=-1)
    slope = vs - np.min(v, axis=-1, keepdims=True)
    ends = np.cumsum(caps, axis=-1)
    starts = ends - caps
    gain_end = np.cumsum(caps * slope, axis=-1)
    gain_start = gain_end - caps * slope
    fin = np.isfinite(gamma)
    g = np.where(fin, gamma, 0.0)[..., None]
    m = np.clip(g * slope / 2, starts, ends)
    with np.errstate(divide="ignore", invalid="ignore"):
        pen = np.where(g > 0, m * m / np.where(g > 0, g, 1.0), np.where(m > 0, np.inf, 0.0))
    val = gain_start + slope * (m - starts) - pen
    best = np.maximum(np.max(val, axis=-1), 0.0)
    return np.where(fin, best, np.maximum(gain_end[..., -1], 0.0))


def path_length(us) -> float:
    """sum_t |u_t - u_{t-1}| with u_0 = u_1."""
    u = np.asarray(us, dtype=np.float64)
    if u.shape[0] == 0:
        raise ValueError("empty comparator sequence")
    if u.ndim == 1:
        u = u[:, None]
    return float(np.sum(np.linalg.norm(np.diff(u, axis=0), axis=-1)))


@dataclass
class AdaHedgeState:
    K: int
    gap_cumsum: np.ndarray
    cum_loss: np.ndarray

    @property
    def gamma(self):
        lk = np.log(self.K)
        g = self.gap_cumsum
        return np.where(g > 0, lk / np.where(g > 0, g, 1.0), np.inf)


class DynMetaGrad(Learner):
    name = "dynmeta"

    def __init__(self, domain, family, T, batch=1, L=None, record=False, loss_scale=None):
        super().__init__(domain, family, batch, loss_scale)
        L = family.L if L is None else L
        self.grid = dyn_grid(self.D, float(L), T)
        K = self.grid.K
        self.state = AdaHedgeState(K, self.zeros(), self.zeros(K))
        c = np.asarray(domain.center, dtype=np.float64)
        self.w_hat = np.broadcast_to(c, (self.B, K, self.dim)).copy()
        self.P_prev = None
        self._prev_sample = None
        self.record = record
        if record:
            self.history = {k: [] for k in ("P", "w", "W", "W_hat", "ell", "M", "L", "ell_k", "m_k",
                                            "gamma", "delta")}

    def play(self, t, env=None):
        K = self.grid.K
        eta = self.grid.etas[:, None]
        if self._prev_sample is None:
            m_k = np.zeros_like(self.w_hat)
        else:
            m_k = self.family.grad(self.w_hat, self._prev_sample.expand(1))
        w = self.domain._project(self.w_hat - eta * m_k)
        gamma = self.state.gamma
        if self._prev_sample is None:
            M = self.zeros(K)
            P = dyn_meta_weights(gamma, M, self.state.cum_loss)
            W_hat = np.einsum("bk,bkd->bd", P, w)
            ell_hat = self.zeros(self.dim)
        else:
            W_hat = np.einsum("bk,bkd->bd", self.P_prev, w)
            ell_hat = self.family.grad(W_hat, self._prev_sample)
            M = np.einsum("bkd,bd->bk", w, ell_hat)
            P = dyn_meta_weights(gamma, M, self.state.cum_loss)
        self._round = (w, m_k, M, P, gamma, W_hat, ell_hat)
        self._W = np.einsum("bk,bkd->bd", P, w)
        return self._W

    def observe(self, t, sample):
        w, m_k, M, P, gamma, W_hat, ell_hat = self._round
        W = self._W
        ell = self.family.grad(W, sample)
        L = np.einsum("bkd,bd->bk", w, ell)
        delta = adahedge_gap(P, L - M, gamma)
        self.state.gap_cumsum = self.state.gap_cumsum + delta
        self.state.cum_loss = self.state.cum_loss + L
        ell_k = self.family.grad(w, sample.expand(1))
        self.w_hat = self.domain._project(self.w_hat - self.grid.etas[:, None] * ell_k)
        self.P_prev = P
        self._prev_sample = sample
        if self.record:
            for k, v in (("P", P), ("w", w), ("W", W), ("W_hat", W_hat), ("ell", ell), ("M", M), ("L", L),
                         ("ell_k", ell_k), ("m_k", m_k), ("gamma", gamma), ("delta", delta)):
                self.history[k].append(np.array(v))
        return RoundInfo(ell, np.broadcast_to(gamma, (self.B,)).copy(), W_hat, ell_hat)
