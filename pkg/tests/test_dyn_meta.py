import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seaoco import geometry as geo
from seaoco import harness as H
from seaoco.dyn_meta import DynMetaGrad, adahedge_gap, dyn_grid, dyn_meta_weights, path_length
from seaoco.losses import QuadraticTracking, Sample
from oracles import simplex_grid


def test_first_round_is_uniform():
    np.testing.assert_allclose(dyn_meta_weights(np.inf, np.zeros(4)), np.full(4, 0.25))


@given(st.floats(0.01, 100), st.floats(-10, 10))
def test_constant_scores_are_uniform(gamma, c):
    np.testing.assert_allclose(dyn_meta_weights(gamma, np.full(3, c), np.full(3, 2 * c)), np.full(3, 1 / 3))


def test_two_expert_softmax():
    P = dyn_meta_weights(1.0, np.array([0.0, 1.0]))
    e = math.exp(-1.0)
    np.testing.assert_allclose(P, [1 / (1 + e), e / (1 + e)], rtol=1e-15)
    np.testing.assert_allclose(P, [0.7311, 0.2689], atol=5e-5)


def test_gap_examples():
    assert adahedge_gap(np.array([0.2, 0.3, 0.5]), np.full(3, 4.0), 2.0) == 0.0
    assert adahedge_gap(np.array([1.0, 0.0]), np.array([1.0, 0.0]), np.inf) == 1.0


def _gap_objective(P_s, v, gamma, P):
    return (P_s - P) @ v - np.sum(np.abs(P_s - P), axis=-1) ** 2 / (4 * gamma)


def _zoom_max(P_s, v, gamma):
    """Grid search on the 3-simplex, refined twice around the incumbent."""
    pts = simplex_grid(3, 1e-3)
    best = pts[np.argmax(_gap_objective(P_s, v, gamma, pts))]
    for half, h in ((5e-3, 5e-5), (1e-4, 1e-6)):
        a = np.arange(-half, half + h / 2, h)
        da, db = np.meshgrid(a, a, indexing="ij")
        cand = np.c_[best[0] + da.ravel(), best[1] + db.ravel()]
        cand = np.c_[cand, 1 - cand.sum(axis=1)]
        cand = cand[np.all(cand >= 0, axis=1)]
        best = cand[np.argmax(_gap_objective(P_s, v, gamma, cand))]
    return float(_gap_objective(P_s, v, gamma, best[None])[0])


@pytest.mark.parametrize("seed", range(8))
def test_gap_matches_simplex_grid(seed):
    rng = np.random.default_rng(seed)
    P_s = rng.dirichlet(np.ones(3))
    v = rng.normal(size=3)
    gamma = rng.uniform(0.2, 5.0)
    got = float(adahedge_gap(P_s, v, gamma))
    coarse = simplex_grid(3, 1e-3)
    assert got >= np.max(_gap_objective(P_s, v, gamma, coarse)) - 1e-12
    assert abs(got - _zoom_max(P_s, v, gamma)) <= 1e-5


@given(st.integers(1, 6), st.integers(0, 10 ** 6), st.floats(1e-3, 1e3))
def test_gap_non_negative(K, seed, gamma):
    rng = np.random.default_rng(seed)
    assert adahedge_gap(rng.dirichlet(np.ones(K)), rng.normal(size=K), gamma) >= 0


def test_path_length():
    assert path_length(np.tile([[0.3, 0.1]], (5, 1))) == 0.0
    assert path_length([[0.0], [1.0], [0.0]]) == 2.0
    rng = np.random.default_rng(0)
    u = rng.normal(size=(50, 2))
    assert path_length(u) == pytest.approx(sum(np.linalg.norm(u[i] - u[i - 1]) for i in range(1, 50)), rel=1e-13)
    with pytest.raises(ValueError):
        path_length(np.empty((0, 2)))


def test_grid_needs_smoothness():
    with pytest.raises(ValueError):
        dyn_grid(2.0, 0.0, 100)


# -- rounds ------------------------------------------------------------------------------

SEG = geo.box([-0.5], [0.5])


def _hand_gap_two(P_s, v, gamma):
    # K = 2: move mass m from the worse expert to the better one
    s = abs(v[0] - v[1])
    cap = P_s[0] if v[0] > v[1] else P_s[1]
    if math.isinf(gamma):
        return s * cap
    m = min(max(gamma * s / 2, 0.0), cap)
    return max(s * m - m * m / gamma, 0.0)


def test_scripted_two_expert_episode():
    fam = QuadraticTracking(a=1.0, G=2.0)
    lrn = DynMetaGrad(SEG, fam, 3, record=True)
    assert lrn.grid.K == 2
    pts = [0.4, -0.5, 0.3]
    for t, p in enumerate(pts, 1):
        lrn.play(t)
        lrn.observe(t, Sample(point=np.array([[p]])))
    h = {k: np.stack(v, axis=1)[0] for k, v in lrn.history.items()}
    # independent recomputation of the meta weights and of the meta regret
    gaps, cum, Ps = 0.0, np.zeros(2), []
    for t in range(3):
        gamma = math.log(2) / gaps if gaps > 0 else math.inf
        score = h["M"][t] + cum
        if math.isinf(gamma):
            P = np.where(score <= score.min() + 1e-12 * max(1, np.abs(score).max()), 1.0, 0.0)
            P = P / P.sum()
        else:
            z = np.exp(-gamma * (score - score.min()))
            P = z / z.sum()
        Ps.append(P)
        gaps += _hand_gap_two(P, h["L"][t] - h["M"][t], gamma)
        cum = cum + h["L"][t]
    Ps = np.array(Ps)
    np.testing.assert_allclose(h["P"], Ps, rtol=0, atol=1e-12)
    for k in range(2):
        hand = sum(h["L"][t] @ Ps[t] - h["L"][t][k] for t in range(3))
        got = float(np.sum(np.einsum("tk,tk->t", h["P"], h["L"]) - h["L"][:, k]))
        assert abs(hand - got) <= 1e-9


def test_first_round_conventions():
    fam = QuadraticTracking(a=1.0, G=2.0)
    lrn = DynMetaGrad(geo.ball([0.0, 0.0], 1.0), fam, 64, record=True)
    W = lrn.play(1)
    lrn.observe(1, Sample(point=np.array([[0.3, 0.3]])))
    h = lrn.history
    np.testing.assert_allclose(h["P"][0], np.full((1, lrn.grid.K), 1 / lrn.grid.K))
    np.testing.assert_array_equal(h["W"][0], h["W_hat"][0])
    np.testing.assert_array_equal(W, [[0.0, 0.0]])


def test_workers_stationary_without_gradient():
    fam = QuadraticTracking(a=1.0, G=2.0)
    lrn = DynMetaGrad(geo.ball([0.0, 0.0], 1.0), fam, 50)
    for t in range(1, 51):
        W = lrn.play(t)
        lrn.observe(t, Sample(point=np.array([[0.0, 0.0]])))
        np.testing.assert_array_equal(W, [[0.0, 0.0]])
    np.testing.assert_array_equal(lrn.w_hat, 0.0)


def test_tiny_steps_pin_workers():
    fam = QuadraticTracking(a=1.0, G=2.0)
    lrn = DynMetaGrad(geo.ball([0.0, 0.0], 1.0), fam, 50, L=1e12)
    rng = np.random.default_rng(0)
    for t in range(1, 51):
        lrn.play(t)
        lrn.observe(t, Sample(point=rng.uniform(-1, 1, (1, 2))))
    assert np.max(np.abs(lrn.w_hat)) <= 1e-9


# -- traces ------------------------------------------------------------------------------

def drift_spec(eps="T^-0.5", sigma=0.1):
    return H.ExperimentSpec({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                            {"kind": "drifting", "eps": eps, "sigma": sigma}, {"name": "dynmeta"})


@pytest.mark.parametrize("T,seed", [(64, 0), (256, 1), (500, 2)])
def test_trace_invariants(T, seed):
    tr = H.run_batch(drift_spec(), T, seed, range(4), record=True)
    lrn = tr.extras["_learner"]
    h = tr.extras
    u = H.optimal_path(tr)
    dyn = H.dynamic_regret(tr, u)
    delta, gamma = h["delta"], h["gamma"]
    assert np.all(delta >= 0)
    assert np.all(gamma[:, 1:] <= gamma[:, :-1])
    gamma_next = lrn.state.gamma
    np.testing.assert_allclose(delta.sum(axis=1), math.log(lrn.grid.K) / gamma_next, rtol=1e-12)
    D = tr.domain.diameter()
    P, w, ell, L = h["P"], h["w"], h["ell"], h["L"]
    for b in range(tr.B):
        path = path_length(u[b])
        for k in range(lrn.grid.K):
            meta = float(np.sum(np.einsum("tk,tk->t", P[b], L[b]) - L[b, :, k]))
            worker = float(np.einsum("td,td->", ell[b], w[b, :, k] - u[b]))
            assert dyn[b] <= meta + worker + 1e-9
            eta = lrn.grid.etas[k]
            own = float(np.einsum("td,td->", h["ell_k"][b, :, k], w[b, :, k] - u[b]))
            dev = float(np.sum((h["ell_k"][b, :, k] - h["m_k"][b, :, k]) ** 2))
            assert own <= (2 * D * path + D * D) / (2 * eta) + eta * dev + 1e-9
