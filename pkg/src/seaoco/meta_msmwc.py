"""Multi-scale multiplicative weights with correction (MsMwC) over a grid of
optimistic mirror-descent workers.

Meta update, with the weighted negative entropy phi(P) = sum_k P_k log(P_k) / eta_k:

    P_t       = argmin_P <M_t, P> + D_phi(P, P_hat_t)
    P_hat_t+1 = argmin_P <L_t + L_hat_t, P> + D_phi(P, P_hat_t)

where M_tk = <m_t, w_tk>, L_tk = <l_t, w_tk> and
L_hat_tk = 32 eta_k (L_tk - M_tk - <P_t, L_t - M_t>)^2. The optimism
m_t = grad f(W_{t-1}, xi_hat_{t-1}) uses an independent extra sample from the
previous round's distribution.

Worker k runs OMD with psi_t(w) = (A_t/2)|w|^2 on the surrogate
c_t(w) = <w, l_t> + 64 eta_k |w - W_t|^2 |l_t - m_t|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .base import Learner, RoundInfo

PROB_FLOOR = 1e-300
MAX_EXPANSIONS = 200
CORRECTION = 32.0
SURROGATE_GRAD = 2.0 ** 7


class SolverDivergence(RuntimeError):
    pass


@dataclass(frozen=True)
class MsmwcGrid:
    K: int
    etas: np.ndarray


def msmwc_grid(D: float, G: float, T: int) -> MsmwcGrid:
    K = max(1, int(np.ceil(np.log2(2 * D * T))))
    i = np.arange(1, K + 1)
    return MsmwcGrid(K, 1.0 / (D * G * 2.0 ** (i + 8)))


def _norm_log(log_anchor, eta, linear, lam):
    return logsumexp(log_anchor - eta * (linear + lam[..., None]), axis=-1)


def weighted_entropy_argmin(etas, linear, anchor, return_multiplier=False, tol=1e-14):
    """argmin over the simplex of <linear, P> + D_phi(P, anchor).

    The minimizer is P_k = anchor_k exp(-eta_k (linear_k + lam)); lam is the
    root of the (decreasing) log-normalizer, found by bisection on an
    expanding bracket followed by Newton polishing. Leading axes batch.
    """
    linear = np.asarray(linear, dtype=np.float64)
    anchor = np.maximum(np.asarray(anchor, dtype=np.float64), PROB_FLOOR)
    eta = np.broadcast_to(np.asarray(etas, dtype=np.float64), linear.shape)
    if np.any(eta <= 0):
        raise ValueError("entropy weights must be positive")
    la = np.log(anchor)
    span = np.max(np.abs(linear), axis=-1) + np.max(1.0 / eta, axis=-1)
    lo, hi = -span, span.copy()
    for _ in range(MAX_EXPANSIONS):
        bad_lo = _norm_log(la, eta, linear, lo) < 0
        bad_hi = _norm_log(la, eta, linear, hi) > 0
        if not (np.any(bad_lo) or np.any(bad_hi)):
            break
        width = hi - lo
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    else:
        raise SolverDivergence("could not bracket the normalization multiplier")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pos = _norm_log(la, eta, linear, mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-6 * np.maximum(1.0, np.abs(mid))):
            break
    lam = 0.5 * (lo + hi)
    for _ in range(8):
        logp = la - eta * (linear + lam[..., None])
        p = np.exp(logp)
        s = p.sum(axis=-1)
        slope = np.sum(eta * p, axis=-1)
        step = (s - 1.0) / slope
        lam = np.clip(lam + step, lo, hi)
        if np.all(np.abs(step) <= tol * np.maximum(1.0, np.abs(lam))):
            break
    P = np.maximum(np.exp(la - eta * (linear + lam[..., None])), PROB_FLOOR)
    return (P, lam) if return_multiplier else P


def stationarity_residual(etas, linear, anchor, P):
    """Spread of the implied multipliers -linear_k - log(P_k/anchor_k)/eta_k."""
    eta = np.broadcast_to(np.asarray(etas, dtype=np.float64), np.shape(linear))
    lam = -np.asarray(linear) - (np.log(P) - np.log(np.maximum(anchor, PROB_FLOOR))) / eta
    return np.max(lam, axis=-1) - np.min(lam, axis=-1)


def weighted_entropy_objective(etas, linear, anchor, P):
    """<linear, P> + sum_k (P_k log(P_k/anchor_k) - P_k + anchor_k) / eta_k."""
    P = np.asarray(P, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl = np.where(P > 0, P * np.log(P / anchor), 0.0) - P + anchor
    return np.sum(linear * P, axis=-1) + np.sum(kl / etas, axis=-1)


@dataclass
class MetaState:
    P_hat: np.ndarray
    P: np.ndarray
    etas: np.ndarray


@dataclass
class WorkerState:
    etas: np.ndarray
    w: np.ndarray  # (..., K, d) current plays
    w_hat: np.ndarray
    A: np.ndarray  # (..., K)


def init_meta(grid: MsmwcGrid, batch: int | None = None) -> MetaState:
    p = grid.etas ** 2 / np.sum(grid.etas ** 2)
    lead = () if batch is None else (batch,)
    p = np.broadcast_to(p, lead + (grid.K,)).copy()
    return MetaState(p, p.copy(), grid.etas)


def init_workers(grid: MsmwcGrid, domain, G: float, batch: int | None = None) -> WorkerState:
    lead = () if batch is None else (batch,)
    c = np.broadcast_to(np.asarray(domain.center, dtype=np.float64), lead + (grid.K, domain.dim)).copy()
    A = np.broadcast_to(8 * G * G * grid.etas, lead + (grid.K,)).copy()
    return WorkerState(grid.etas, c.copy(), c, A)


def worker_play(ws: WorkerState, domain, m_t) -> np.ndarray:
    """w_t = argmin <w, m_t> + (A_t/2)|w - w_hat_t|^2."""
    m = np.asarray(m_t, dtype=np.float64)[..., None, :]
    ws.w = domain._project(ws.w_hat - m / ws.A[..., None])
    return ws.w


def worker_round(ws: WorkerState, domain, m_t, ell_t, W_t) -> WorkerState:
    m = np.asarray(m_t, dtype=np.float64)[..., None, :]
    ell = np.asarray(ell_t, dtype=np.float64)[..., None, :]
    dev2 = np.sum((ell - m) ** 2, axis=-1)  # (..., 1)
    grad_c = ell + SURROGATE_GRAD * ws.etas[..., :, None] * dev2[..., None] * (ws.w - np.asarray(W_t)[..., None, :])
    w_hat = domain._project(ws.w_hat - grad_c / ws.A[..., None])
    A = ws.A + ws.etas * np.sum((grad_c - m) ** 2, axis=-1)
    return WorkerState(ws.etas, ws.w, w_hat, A)


def meta_weights(meta: MetaState, M_t) -> np.ndarray:
    meta.P = weighted_entropy_argmin(meta.etas, M_t, meta.P_hat)
    return meta.P


def meta_update(meta: MetaState, M_t, L_t):
    """Second meta step; returns (L_hat, admissibility ratio 32 eta |L - (M + C)|)."""
    P = meta.P
    C = np.sum(P * (L_t - M_t), axis=-1, keepdims=True)
    r = L_t - (M_t + C)
    L_hat = CORRECTION * meta.etas * r * r
    meta.P_hat = weighted_entropy_argmin(meta.etas, L_t + L_hat, meta.P_hat)
    return L_hat, CORRECTION * meta.etas * np.abs(r)


def meta_round(meta: MetaState, workers: WorkerState, domain, m_t, ell_fn):
    """One full round given the optimism m_t and a callback W_t -> l_t."""
    w = worker_play(workers, domain, m_t)
    M = np.einsum("...kd,...d->...k", w, m_t)
    P = meta_weights(meta, M)
    W = np.einsum("...k,...kd->...d", P, w)
    ell = ell_fn(W)
    L = np.einsum("...kd,...d->...k", w, ell)
    meta_update(meta, M, L)
    new_workers = worker_round(workers, domain, m_t, ell, W)
    return W, meta, new_workers


class MsMwC(Learner):
    name = "msmwc"

    def __init__(self, domain, family, T, batch=1, G=None, record=False, loss_scale=None):
        super().__init__(domain, family, batch, loss_scale)
        G = family.G if G is None else G
        if not np.isfinite(G) or G <= 0:
            raise ValueError("MsMwC needs a finite gradient bound G")
        self.G = float(G)
        self.grid = msmwc_grid(self.D, self.G, T)
        self.meta = init_meta(self.grid, self.B)
        self.workers = init_workers(self.grid, domain, self.G, self.B)
        self.record = record
        self._W_prev = None
        self._m = self.zeros(self.dim)
        self.max_admissibility = 0.0
        if record:
            self.history = {k: [] for k in ("P", "w", "W", "m", "ell", "M", "L", "L_hat")}

    def play(self, t, env):
        if t == 1:
            self._m = self.zeros(self.dim)
        else:
            self._m = self.family.grad(self._W_prev, env.extra_sample(t))
        w = worker_play(self.workers, self.domain, self._m)
        self._M = np.einsum("bkd,bd->bk", w, self._m)
        P = meta_weights(self.meta, self._M)
        self._W = np.einsum("bk,bkd->bd", P, w)
        return self._W

    def observe(self, t, sample):
        W, m = self._W, self._m
        ell = self.family.grad(W, sample)
        w = self.workers.w
        L = np.einsum("bkd,bd->bk", w, ell)
        P = self.meta.P
        L_hat, adm = meta_update(self.meta, self._M, L)
        self.max_admissibility = max(self.max_admissibility, float(np.max(adm)))
        self.workers = worker_round(self.workers, self.domain, m, ell, W)
        if self.record:
            for k, v in (("P", P), ("w", w), ("W", W), ("m", m), ("ell", ell), ("M", self._M),
                         ("L", L), ("L_hat", L_hat)):
                self.history[k].append(np.array(v))
        prev = W if self._W_prev is None else self._W_prev
        self._W_prev = W
        return RoundInfo(ell, np.sum(P * self.grid.etas, axis=-1), prev, m)
