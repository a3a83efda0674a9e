"""Episode execution, regret accounting, bounds, rate fits and export.

Traces hold a batch of episodes: every per-round array has shape (B, T, ...).
Episode e of a batch is bitwise identical to the same episode run alone.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import json
import math
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import geometry as geo
from .dyn_meta import DynMetaGrad
from .environments import SeaEnvironment, make_environment
from .losses import Linear, LossFamily, NumericalOverflow, QuadraticTracking, RademacherOracle, Sample
from .meta_msmwc import MsMwC
from .optimistic_core import OFTRL, OMD
from .strongly_convex import OFTLSC

CHUNK_EPISODES = 100
SQRT2 = math.sqrt(2.0)


class UnknownLearner(ValueError):
    pass


class EpisodeFailure(RuntimeError):
    pass


class InfeasibleComparator(ValueError):
    pass


class ComparatorSolveFailure(RuntimeError):
    pass


class UnknownTheorem(ValueError):
    pass


LEARNERS = {"oftrl": OFTRL, "omd": OMD, "oftl_sc": OFTLSC, "msmwc": MsMwC, "dynmeta": DynMetaGrad}


@dataclass
class ExperimentSpec:
    """Plain-data description of one (learner, environment) pairing."""

    domain: dict
    environment: dict
    learner: dict
    family: dict = field(default_factory=lambda: {"kind": "quadratic_tracking"})

    def build_domain(self):
        return geo.domain_from_dict(self.domain)

    def build_env(self, T: int, seed: int, episodes: Sequence[int]) -> SeaEnvironment:
        return make_environment(self.environment, self.family, self.build_domain(), T, seed, episodes)


def make_learner(spec: dict, domain, family: LossFamily, T: int, batch: int = 1, loss_scale=None):
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in LEARNERS:
        raise UnknownLearner(f"unknown learner {name!r}")
    scaled = spec.pop("scaled", False)
    if scaled and loss_scale is None:
        loss_scale = float
    if name in ("oftrl", "omd"):
        return LEARNERS[name](domain, family, batch=batch, loss_scale=loss_scale, **spec)
    if name == "oftl_sc":
        spec.setdefault("mu", family.mu)
        return OFTLSC(domain, family, batch=batch, **spec)
    return LEARNERS[name](domain, family, T, batch=batch, **spec)


@dataclass
class Trace:
    learner: str
    env: dict
    seed: int
    episodes: tuple
    family: LossFamily
    domain: object
    xs: np.ndarray
    losses: np.ndarray
    grads: np.ndarray
    steps: np.ndarray
    sigma_sq: np.ndarray
    Sigma_sq: np.ndarray
    pairs: np.ndarray
    optimism: np.ndarray
    mean_grad_sq: np.ndarray
    points: np.ndarray | None = None
    shifts: np.ndarray | None = None
    coins: np.ndarray | None = None
    indices: np.ndarray | None = None
    mean_points: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    @property
    def B(self) -> int:
        return self.xs.shape[0]

    @property
    def T(self) -> int:
        return self.xs.shape[1]

    def samples(self, upto: int | None = None) -> Sample:
        sl = slice(None, upto)
        def cut(a):
            return None if a is None else a[:, sl]
        return Sample(cut(self.points), cut(self.indices), cut(self.shifts), cut(self.coins))

    def episode(self, i: int) -> "Trace":
        def take(a):
            return None if a is None else a[i:i + 1]
        kw = {k: take(getattr(self, k)) for k in (
            "xs", "losses", "grads", "steps", "sigma_sq", "Sigma_sq", "pairs", "optimism", "mean_grad_sq",
            "points", "shifts", "coins", "indices", "mean_points")}
        extras = {k: v[i:i + 1] for k, v in self.extras.items()}
        return Trace(self.learner, self.env, self.seed, (self.episodes[i],), self.family, self.domain,
                     extras=extras, **kw)

    def truncate(self, T: int) -> "Trace":
        def cut(a):
            return None if a is None else a[:, :T]
        kw = {k: cut(getattr(self, k)) for k in (
            "xs", "losses", "grads", "steps", "sigma_sq", "Sigma_sq", "pairs", "optimism", "mean_grad_sq",
            "points", "shifts", "coins", "indices", "mean_points")}
        return Trace(self.learner, self.env, self.seed, self.episodes, self.family, self.domain, **kw)


def run_batch(spec: ExperimentSpec, T: int, seed: int = 0, episodes: Sequence[int] = (0,),
              record: bool = False) -> Trace:
    """Run the given episodes of ``spec`` in lockstep for T rounds."""
    episodes = tuple(int(e) for e in episodes)
    B = len(episodes)
    where = f"episodes {episodes[0]}..{episodes[-1]} (seed {seed})"
    lspec = dict(spec.learner)
    if record and lspec.get("name") in ("msmwc", "dynmeta"):
        lspec["record"] = True
    try:
        env = spec.build_env(T, seed, episodes)
        domain, family = env.domain, env.family
        learner = make_learner(lspec, domain, family, T, B)
    except UnknownLearner:
        raise
    except Exception as exc:  # noqa: BLE001
        raise EpisodeFailure(f"setup of {where}: {exc}") from exc
    d = domain.dim
    xs = np.empty((B, T, d))
    grads = np.empty((B, T, d))
    pairs = np.empty((B, T, d))
    opt = np.empty((B, T, d))
    steps = np.empty((B, T))
    mg = np.empty((B, T))
    sig = np.empty((B, T))
    Sig = np.empty((B, T))
    store = {}
    mean_points = None
    t = 0
    try:
        for t in range(1, T + 1):
            x = learner.play(t, env)
            out = env.step(t, x)
            info = learner.observe(t, out.xi)
            i = t - 1
            xs[:, i] = x
            grads[:, i] = info.g
            steps[:, i] = info.step
            pairs[:, i] = info.pair
            opt[:, i] = info.optimism
            g_mean = out.mean_grad_at(x)
            mg[:, i] = np.einsum("bd,bd->b", g_mean, g_mean)
            sig[:, i] = out.sigma_sq_t
            Sig[:, i] = out.Sigma_sq_t
            if t == 1:
                names = [n for n in ("point", "shift", "coin", "index") if getattr(out.xi, n) is not None]
                for n in names:
                    v = np.asarray(getattr(out.xi, n))
                    store[n] = np.zeros((B, T) + v.shape[1:], dtype=v.dtype)
                if out.mean_point is not None:
                    mean_points = np.empty((B, T, d))
            for n in names:
                store[n][:, i] = getattr(out.xi, n)
            if mean_points is not None:
                mean_points[:, i] = out.mean_point
        xi_all = Sample(store.get("point"), store.get("index"), store.get("shift"), store.get("coin"))
        try:
            losses = family.value(xs, xi_all)
        except NumericalOverflow:
            # losses are evaluated after the loop; find the first offending round
            for t in range(1, T + 1):
                family.value(xs[:, t - 1], xi_all.take((slice(None), t - 1)))
            raise
    except Exception as exc:  # noqa: BLE001
        raise EpisodeFailure(f"round {t} of {where}: {exc}") from exc
    if not np.all(geo.contains(domain, xs, 1e-9)):
        raise EpisodeFailure("learner produced an infeasible iterate")
    extras = {}
    for k, v in getattr(learner, "history", {}).items():
        if v:
            extras[k] = np.stack(v, axis=1)
    if record:
        extras["_learner"] = learner
    return Trace(learner.name, env.describe(), seed, episodes, family, domain, xs, losses, grads, steps,
                 sig, Sig, pairs, opt, mg, store.get("point"), store.get("shift"), store.get("coin"),
                 store.get("index"), mean_points, extras)


def run_episode(spec: ExperimentSpec, T: int, seed: int = 0, episode: int = 0, record: bool = False) -> Trace:
    return run_batch(spec, T, seed, (episode,), record)


def _chunk_job(args):
    spec, T, seed, eps, metric = args
    return metric(run_batch(spec, T, seed, eps))


def map_episodes(spec: ExperimentSpec, T: int, seed: int, episodes: Sequence[int],
                 metric: Callable[[Trace], np.ndarray], threads: int = 1, chunk: int = CHUNK_EPISODES):
    """Apply ``metric`` to every episode; results are stacked in episode order."""
    episodes = list(episodes)
    jobs = [(spec, T, seed, tuple(episodes[i:i + chunk]), metric) for i in range(0, len(episodes), chunk)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(j) for j in jobs]
    return np.concatenate([np.asarray(p) for p in parts], axis=0)


# -- comparators and regret ------------------------------------------------

def _check_feasible(domain, u):
    if not np.all(geo.contains(domain, u, 1e-9)):
        raise InfeasibleComparator("comparator outside the domain")


def _as_batch_points(trace: Trace, u):
    u = np.asarray(u, dtype=np.float64)
    if u.ndim == 1:
        u = np.broadcast_to(u, (trace.B, u.size))
    return u


def best_fixed_comparator(trace: Trace, max_iter: int = 10 ** 6, tol: float = 1e-9) -> np.ndarray:
    """argmin over the domain of sum_t f(u, xi_t), per episode."""
    fam, dom = trace.family, trace.domain
    if isinstance(fam, QuadraticTracking):
        target = trace.points.mean(axis=1)
        if trace.shifts is not None:
            target = target - trace.shifts.mean(axis=1) / fam.a
        return dom._project(target)
    if isinstance(fam, Linear):
        S = trace.points.sum(axis=1)
        if trace.shifts is not None:
            S = S + trace.shifts.sum(axis=1)
        return geo.linear_minimizer(dom, S, np.asarray(dom.center))
    if isinstance(fam, RademacherOracle):
        return linearized_comparator(trace)
    # projected gradient descent on the empirical average
    xi = trace.samples()
    u = np.broadcast_to(np.asarray(dom.center, dtype=np.float64), (trace.B, dom.dim)).copy()
    step = 1.0 / max(fam.L, 1e-12)
    for _ in range(max_iter):
        g = fam.grad(u[:, None, :], xi).mean(axis=1)
        nxt = dom._project(u - step * g)
        if np.max(np.linalg.norm(nxt - u, axis=-1)) / step <= tol:
            return nxt
        u = nxt
    raise ComparatorSolveFailure("projected gradient did not converge")


def linearized_comparator(trace: Trace) -> np.ndarray:
    S = trace.grads.sum(axis=1)
    return geo.linear_minimizer(trace.domain, S, np.asarray(trace.domain.center))


def comparator_losses(trace: Trace, u) -> np.ndarray:
    u = _as_batch_points(trace, u)
    _check_feasible(trace.domain, u)
    return trace.family.value(u[:, None, :], trace.samples())


def regret(trace: Trace, u) -> np.ndarray:
    return trace.losses.sum(axis=1) - comparator_losses(trace, u).sum(axis=1)


def dynamic_regret(trace: Trace, u_path) -> np.ndarray:
    u = np.asarray(u_path, dtype=np.float64)
    if u.ndim == 2:
        u = np.broadcast_to(u, (trace.B,) + u.shape)
    _check_feasible(trace.domain, u)
    return trace.losses.sum(axis=1) - trace.family.value(u, trace.samples()).sum(axis=1)


def linearized_regret(trace: Trace, u) -> np.ndarray:
    u = _as_batch_points(trace, u)
    return np.einsum("btd,btd->b", trace.grads, trace.xs - u[:, None, :])


def optimal_path(trace: Trace) -> np.ndarray:
    """u_t* = argmin F_t, available in closed form for quadratic families."""
    if not isinstance(trace.family, QuadraticTracking) or trace.mean_points is None:
        raise ComparatorSolveFailure("optimal path needs a quadratic family with known means")
    target = trace.mean_points
    if trace.shifts is not None:
        target = target - trace.shifts / trace.family.a
    return trace.domain._project(target)


def prefix_regret(trace: Trace, Ts: Sequence[int]) -> np.ndarray:
    """Static regret of every prefix T in ``Ts`` against that prefix's best
    fixed comparator; shape (B, len(Ts))."""
    Ts = np.asarray(Ts, dtype=int)
    fam, dom = trace.family, trace.domain
    cl = np.cumsum(trace.losses, axis=1)[:, Ts - 1]
    if isinstance(fam, QuadraticTracking):
        a = fam.a
        P = trace.points
        Sp = np.cumsum(P, axis=1)[:, Ts - 1]
        Sp2 = np.cumsum(np.sum(P * P, axis=-1), axis=1)[:, Ts - 1]
        Sv = np.zeros_like(Sp) if trace.shifts is None else np.cumsum(trace.shifts, axis=1)[:, Ts - 1]
        n = Ts[None, :, None].astype(float)
        u = dom._project((Sp - Sv / a) / n)
        uu = np.sum(u * u, axis=-1)
        comp = 0.5 * a * (Ts[None] * uu - 2 * np.sum(u * Sp, axis=-1) + Sp2) + np.sum(u * Sv, axis=-1)
        return cl - comp
    if isinstance(fam, Linear):
        Z = trace.points if trace.shifts is None else trace.points + trace.shifts
        S = np.cumsum(Z, axis=1)[:, Ts - 1]
        u = geo.linear_minimizer(dom, S, np.asarray(dom.center))
        return cl - np.sum(u * S, axis=-1)
    if isinstance(fam, RademacherOracle):
        return prefix_linearized_regret(trace, Ts)
    out = np.empty((trace.B, len(Ts)))
    for j, T in enumerate(Ts):
        sub = trace.truncate(int(T))
        out[:, j] = regret(sub, best_fixed_comparator(sub))
    return out


def prefix_linearized_regret(trace: Trace, Ts: Sequence[int]) -> np.ndarray:
    """max_u sum_{t<=T} <g_t, x_t - u> for every T in ``Ts``."""
    Ts = np.asarray(Ts, dtype=int)
    gx = np.cumsum(np.sum(trace.grads * trace.xs, axis=-1), axis=1)[:, Ts - 1]
    S = np.cumsum(trace.grads, axis=1)[:, Ts - 1]
    u = geo.linear_minimizer(trace.domain, S, np.asarray(trace.domain.center))
    return gx - np.sum(u * S, axis=-1)


# -- Monte-Carlo aggregation ------------------------------------------------

@dataclass
class MCEstimate:
    mean: float
    stderr: float
    ci95: tuple
    n: int

    @property
    def halfwidth(self) -> float:
        return 0.5 * (self.ci95[1] - self.ci95[0])


def mc_estimate(values) -> MCEstimate:
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    n = v.size
    if n < 2:
        raise ValueError("need at least two values")
    mean = math.fsum(v) / n
    var = math.fsum((v - mean) ** 2) / (n - 1)
    se = math.sqrt(var / n)
    return MCEstimate(mean, se, (mean - 1.959963984540054 * se, mean + 1.959963984540054 * se), n)


def static_regret_metric(trace: Trace) -> np.ndarray:
    return prefix_regret(trace, [trace.T])[:, 0]


def expected_regret(spec: ExperimentSpec, T: int, n_seeds: int, seed: int = 0, metric=None,
                    threads: int = 1) -> MCEstimate:
    if n_seeds < 2:
        raise ValueError("expected_regret needs n_seeds >= 2")
    vals = map_episodes(spec, T, seed, range(n_seeds), metric or static_regret_metric, threads)
    return mc_estimate(vals)


# -- bounds ------------------------------------------------------------------

THEOREMS = ("thm1", "thm2", "thm4", "msmwc", "worst_case", "corollary_corrupt", "corollary_rom")


def theorem_bound(theorem: str, *, T, D, G=0.0, L=0.0, mu=0.0, sigma_bar=0.0, Sigma_bar=0.0,
                  sigma_max=0.0, Sigma_max=0.0, C=0.0, sigma1_sq=None, sigma1_tilde_sq=None) -> float:
    """Numeric value of a regret bound. sigma_max / Sigma_max are variances."""
    sq = math.sqrt(T)
    if theorem in ("thm1", "thm2"):
        return (27 + 6 * SQRT2) * L * D * D + (2 + 4 * SQRT2) * D * (sigma_bar + Sigma_bar) * sq
    if theorem == "worst_case":
        return (2 * SQRT2 + 4) * D * G * sq
    if theorem == "thm4":
        if mu <= 0:
            raise ValueError("thm4 needs mu > 0")
        return ((8 * sigma_max + 4 * Sigma_max) * math.log(T) / mu
                + 4 * D * D * L * L / mu * math.log(1 + 16 * L / mu))
    if theorem == "msmwc":
        if mu <= 0:
            raise ValueError("msmwc bound needs mu > 0")
        return 64 * (sigma_max + Sigma_max + D * D * L * L) * math.log(D * T) ** 2 / mu + 64 * D * D
    if theorem == "corollary_corrupt":
        return (27 + 6 * SQRT2) * L * D * D + (2 + 4 * SQRT2) * D * (sigma_bar * sq + 2 * math.sqrt(G * C))
    if theorem == "corollary_rom":
        s1, st = sigma1_sq, sigma1_tilde_sq
        if s1 is None or st is None:
            raise ValueError("corollary_rom needs sigma1_sq and sigma1_tilde_sq")
        sb = math.sqrt(s1 * math.log(2 * math.e ** 2 * st / s1)) if s1 > 0 else 0.0
        return (27 + 6 * SQRT2) * L * D * D + (2 + 4 * SQRT2) * D * (sb * sq + math.sqrt(8) * G)
    raise UnknownTheorem(f"unknown theorem tag {theorem!r}")


@dataclass
class RegretReport:
    static_regret: float
    linearized_regret: float
    dynamic_regret: float | None
    comparator: list
    bound_value: float | None
    bound_margin: float | None
    sigma_bar: float
    Sigma_bar: float
    sigma_max: float
    Sigma_max: float
    T: int = 0
    D: float = 0.0
    G: float = 0.0
    L: float = 0.0
    mu: float = 0.0
    theorem: str | None = None
    episode: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _profile(trace: Trace):
    T = trace.T
    sig, Sig = trace.sigma_sq, trace.Sigma_sq
    later = Sig[:, 1:]
    return (np.sqrt(sig.sum(axis=1) / T), np.sqrt(later.sum(axis=1) / T), sig.max(axis=1),
            later.max(axis=1) if later.shape[1] else np.zeros(trace.B))


def make_reports(trace: Trace, theorem: str | None = None, dynamic: bool = False, **extra) -> list:
    u = best_fixed_comparator(trace)
    st = regret(trace, u)
    lin = linearized_regret(trace, linearized_comparator(trace))
    dyn = dynamic_regret(trace, optimal_path(trace)) if dynamic else None
    sb, Sb, sm, Sm = _profile(trace)
    fam = trace.family
    out = []
    for b in range(trace.B):
        rep = RegretReport(float(st[b]), float(lin[b]), None if dyn is None else float(dyn[b]), u[b].tolist(),
                           None, None, float(sb[b]), float(Sb[b]), float(sm[b]), float(Sm[b]), trace.T,
                           trace.domain.diameter(), float(fam.G), float(fam.L), float(fam.mu), theorem,
                           trace.episodes[b])
        if theorem is not None:
            rep.bound_value = report_bound(rep, theorem, **extra)
            rep.bound_margin = rep.bound_value - (rep.dynamic_regret if dynamic else rep.static_regret)
        out.append(rep)
    return out


def report_bound(report: RegretReport, theorem: str, **extra) -> float:
    return theorem_bound(theorem, T=report.T, D=report.D, G=report.G, L=report.L, mu=report.mu,
                         sigma_bar=report.sigma_bar, Sigma_bar=report.Sigma_bar, sigma_max=report.sigma_max,
                         Sigma_max=report.Sigma_max, **extra)


def bound_check(report: RegretReport, theorem: str, observed: float | None = None, **extra) -> float:
    """margin = bound - observed regret (the report's static regret by default)."""
    if theorem not in THEOREMS:
        raise UnknownTheorem(f"unknown theorem tag {theorem!r}")
    obs = report.static_regret if observed is None else observed
    return report_bound(report, theorem, **extra) - obs


# -- fits and diagnostics -----------------------------------------------------

def linear_fit(x, y):
    """Least-squares line; returns (slope, intercept, r_squared)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + icpt)
    tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / tot if tot > 0 else 1.0
    return float(slope), float(icpt), float(r2)


def rate_fit(series) -> float:
    """Log-log least-squares slope of (T, value) pairs."""
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
        raise ValueError("rate_fit needs at least four (T, value) pairs")
    if np.any(arr <= 0):
        raise ValueError("rate_fit needs positive T and values")
    return linear_fit(np.log(arr[:, 0]), np.log(arr[:, 1]))[0]


def _grad_table(trace: Trace, grid: np.ndarray) -> np.ndarray:
    # (B, T, G, d) gradients of every realized loss on the grid
    xi = trace.samples()
    xi = Sample(None if xi.point is None else xi.point[:, :, None], xi.index,
                None if xi.shift is None else xi.shift[:, :, None],
                None if xi.coin is None else xi.coin[:, :, None])
    return trace.family.grad(np.broadcast_to(grid, (trace.B, trace.T) + grid.shape), xi)


def _x_free_grads(trace: Trace):
    """Gradient parts that vary across rounds when they do not depend on x."""
    fam = trace.family
    if isinstance(fam, QuadraticTracking):
        z = -fam.a * trace.points
    elif isinstance(fam, Linear):
        z = trace.points.copy()
    else:
        return None
    if trace.shifts is not None:
        z = z + trace.shifts
    return z


def variation_diagnostics(trace: Trace, grid_per_axis: int = 100):
    """(Var_T, D_2, sigma_cum, Sigma_cum) per episode.

    Var_T = sup_x sum_t |grad f_t(x) - mean_s grad f_s(x)|^2 and
    D_2 = sum_{t>=2} sup_x |grad f_t(x) - grad f_{t-1}(x)|^2; both are exact
    for linear and quadratic families and use a domain grid otherwise.
    """
    z = _x_free_grads(trace)
    if z is not None:
        dev = z - z.mean(axis=1, keepdims=True)
        var_T = np.einsum("btd,btd->b", dev, dev)
        dz = np.diff(z, axis=1)
        d2 = np.einsum("btd,btd->b", dz, dz)
    else:
        grid = trace.domain.grid(grid_per_axis)
        g = _grad_table(trace, grid)
        dev = g - g.mean(axis=1, keepdims=True)
        var_T = np.max(np.einsum("btgd,btgd->bg", dev, dev), axis=-1)
        dg = np.diff(g, axis=1)
        d2 = np.sum(np.max(np.einsum("btgd,btgd->btg", dg, dg), axis=-1), axis=-1)
    return var_T, d2, trace.sigma_sq.sum(axis=1), trace.Sigma_sq[:, 1:].sum(axis=1)


def prop_b6_check(trace: Trace, paired_points=None) -> np.ndarray:
    """RHS - LHS of

        sum_t |grad f(x_t, xi_t) - grad f(y_t, xi_{t-1})|^2
            <= 4 (Sigma + |grad F_1(x_1)|^2) + 8 sigma + 4 L^2 sum_t |x_t - y_t|^2 + 4 L^2 D^2,

    with Sigma summed over t >= 2 and the optimistic gradients recorded in
    the trace (zero at t = 1)."""
    ys = trace.pairs if paired_points is None else np.asarray(paired_points)
    L, D = trace.family.L, trace.domain.diameter()
    lhs = np.einsum("btd,btd->b", trace.grads - trace.optimism, trace.grads - trace.optimism)
    Sig = trace.Sigma_sq[:, 1:].sum(axis=1) + trace.mean_grad_sq[:, 0]
    sig = trace.sigma_sq.sum(axis=1)
    gap = np.einsum("btd,btd->b", trace.xs - ys, trace.xs - ys)
    rhs = 4 * Sig + 8 * sig + 4 * L * L * gap + 4 * L * L * D * D
    return rhs - lhs


# -- export --------------------------------------------------------------------

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_trace_csv(trace: Trace, path, episode: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = trace.domain.dim
    gn = np.linalg.norm(trace.grads[episode], axis=-1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(d)] + ["loss", "grad_norm", "eta", "sigma_sq", "Sigma_sq"])
        for i in range(trace.T):
            row = [str(i + 1)] + [_fmt(v) for v in trace.xs[episode, i]]
            row += [_fmt(trace.losses[episode, i]), _fmt(gn[i]), _fmt(trace.steps[episode, i]),
                    _fmt(trace.sigma_sq[episode, i]), _fmt(trace.Sigma_sq[episode, i])]
            w.writerow(row)
    return path


def read_trace_csv(path):
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # 17 significant digits round-trip every double exactly
        return float(format(v, ".17g")) if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_report_json(payload: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True))
    return path
