import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seaoco import geometry as geo
from seaoco import harness as H
from seaoco.losses import QuadraticTracking, Sample
from seaoco.optimistic_core import (OFTRL, OMD, AdaptiveStepState, delta_of, init_omd_state, init_step_state,
                                    omd_observe, omd_step, oftrl_observe, oftrl_step)
from oracles import refined_argmin_1d

INTERVAL = geo.box([-1.0], [1.0])
BALL = geo.ball([0.0, 0.0], 1.0)


def test_delta_of_examples():
    assert delta_of(0.5, 2.0, 1.0) == 1.0
    assert delta_of(0.5, 0.0, 1.0) == 0.0
    assert delta_of(np.inf, 3.0, 2.0) == 6.0
    assert delta_of(np.inf, 0.0, 2.0) == 0.0
    assert delta_of(0.1, 1.0, 5.0) == pytest.approx(0.05)


def test_first_play_is_domain_center():
    for dom in (BALL, geo.box([0.0, 1.0], [2.0, 3.0])):
        st_ = init_step_state(dom.diameter(), 2)
        np.testing.assert_array_equal(oftrl_step(st_, dom), dom.center)


def test_prox_step_on_ball():
    st_ = AdaptiveStepState(2.0, np.array(4.0), np.array([2.0, 0.0]), np.zeros(2), 2)  # eta = 4 / 4 = 1
    assert st_.eta == 1.0
    np.testing.assert_allclose(oftrl_step(st_, BALL), [-1.0, 0.0])


def test_infinite_step_plays_linear_minimizer():
    st_ = AdaptiveStepState(2.0, np.array(0.0), np.array([0.0, 3.0]), np.zeros(2), 2)
    np.testing.assert_allclose(oftrl_step(st_, BALL), [0.0, -1.0])


def test_first_observation():
    st_ = oftrl_observe(init_step_state(1.0, 2), np.array([1.0, 0.0]))
    assert st_.delta_cumsum == 1.0 and st_.eta == 1.0


def test_exact_prediction_leaves_step_unchanged():
    st_ = oftrl_observe(init_step_state(1.0, 2), np.array([1.0, 0.0]))
    nxt = oftrl_observe(st_, np.array([1.0, 0.0]))
    assert nxt.eta == st_.eta and nxt.delta_cumsum == st_.delta_cumsum
    np.testing.assert_array_equal(nxt.grad_accum, [2.0, 0.0])


def hand_rolled_etas(gs, D):
    etas, acc, m = [math.inf], 0.0, np.zeros_like(gs[0])
    for g in gs:
        dev = float(np.linalg.norm(g - m))
        eta = etas[-1]
        acc += D * dev if math.isinf(eta) else min(eta * dev * dev / 2, D * dev)
        etas.append(math.inf if acc == 0 else D * D / acc)
        m = g
    return etas


def test_scripted_step_sizes():
    gs = [np.array(v) for v in ([1.0, 0.0], [0.5, 0.5], [-1.0, 2.0], [-1.0, 2.0], [0.0, -0.3])]
    st_ = init_step_state(2.0, 2)
    seen = [st_.eta]
    for g in gs:
        st_ = oftrl_observe(st_, g)
        seen.append(float(st_.eta))
    np.testing.assert_allclose(seen, hand_rolled_etas(gs, 2.0), rtol=1e-15)


def run_scripted(cls, points):
    fam = QuadraticTracking(a=1.0, G=4.0)
    learner = cls(INTERVAL, fam, batch=1)
    xs, gs, etas = [], [], []
    for t, p in enumerate(points, 1):
        x = learner.play(t)
        info = learner.observe(t, Sample(point=np.array([[p]])))
        xs.append(float(x[0, 0]))
        gs.append(float(info.g[0, 0]))
        etas.append(float(info.step[0]))
    return xs, gs, etas


def test_oftrl_matches_brute_force_argmin():
    pts = [0.7, -0.4, 0.9]
    xs, gs, etas = run_scripted(OFTRL, pts)
    assert xs[0] == 0.0
    D = 2.0
    ref_eta = hand_rolled_etas([np.array([g]) for g in gs], D)
    np.testing.assert_allclose(etas, ref_eta[:3], rtol=1e-15)
    for t in range(2, 4):
        theta = sum(gs[: t - 1]) + gs[t - 2]
        eta = ref_eta[t - 1]
        ref = refined_argmin_1d(lambda z: theta * z + z * z / (2 * eta), -1.0, 1.0)
        assert abs(xs[t - 1] - ref) <= 1e-8


def test_omd_matches_brute_force_argmin():
    pts = [0.7, -0.4, 0.9, 0.1]
    xs, gs, etas = run_scripted(OMD, pts)
    y, m, eta = 0.0, 0.0, math.inf
    acc = 0.0
    for t, p in enumerate(pts, 1):
        if math.isinf(eta):
            x = y if m == 0 else (-1.0 if m > 0 else 1.0)
        else:
            x = refined_argmin_1d(lambda z: m * z + (z - y) ** 2 / (2 * eta), -1.0, 1.0)
        assert abs(xs[t - 1] - x) <= 1e-8
        g = x - p
        if math.isinf(eta):
            y_next = y if g == 0 else (-1.0 if g > 0 else 1.0)
        else:
            y_next = refined_argmin_1d(lambda z: g * z + (z - y) ** 2 / (2 * eta), -1.0, 1.0)
        dev = abs(g - m)
        acc += 2.0 * dev if math.isinf(eta) else min(eta * dev * dev / 2, 2.0 * dev)
        eta = 4.0 / acc if acc > 0 else math.inf
        y, m = y_next, y_next - p  # optimism: gradient at y_{t+1} with the sample of round t


def test_omd_identities():
    st_ = init_omd_state(BALL)
    st_ = omd_observe(st_, BALL, np.zeros(2), np.array([1.0, 0.0]))
    np.testing.assert_array_equal(omd_step(st_, BALL, np.zeros(2)), st_.y)
    nxt = omd_observe(st_, BALL, np.zeros(2), np.zeros(2))
    np.testing.assert_array_equal(nxt.y, st_.y)


# -- trace properties --------------------------------------------------------------------

def adv_spec(learner, sequence="random"):
    return H.ExperimentSpec({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                            {"kind": "adversarial_seq", "sequence": sequence}, {"name": learner},
                            {"kind": "linear"})


def iid_spec(learner, sigma):
    return H.ExperimentSpec({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                            {"kind": "iid", "mean": [0.5, -0.3], "sigma": sigma}, {"name": learner})


@given(st.sampled_from(["oftrl", "omd"]), st.sampled_from(["random", "alternating", "adaptive"]),
       st.integers(0, 10 ** 6), st.integers(2, 300))
def test_step_sizes_monotone_and_delta_identity(learner, seq, seed, T):
    tr = H.run_batch(adv_spec(learner, seq), T, seed, range(3), record=True)
    etas = tr.steps
    assert np.all(np.diff(etas, axis=1) <= 0)
    st_ = tr.extras["_learner"].state
    st_ = st_ if learner == "oftrl" else st_.step
    fin = np.isfinite(st_.eta)
    np.testing.assert_allclose(st_.delta_cumsum[fin], tr.domain.diameter() ** 2 / st_.eta[fin], rtol=1e-12)


@given(st.sampled_from(["oftrl", "omd"]), st.integers(0, 10 ** 6), st.integers(10, 400))
def test_worst_case_bound(learner, seed, T):
    tr = H.run_batch(adv_spec(learner), T, seed, range(4))
    u = H.linearized_comparator(tr)
    lin = H.linearized_regret(tr, u)
    G, D = tr.family.G, tr.domain.diameter()
    assert np.all(lin <= (2 * math.sqrt(2) + 4) * D * G * math.sqrt(T))


@given(st.integers(0, 10 ** 6), st.integers(5, 300), st.sampled_from([0.0, 0.3]),
       st.sampled_from(["adv", "iid"]))
def test_oftrl_surrogate_regret_bound(seed, T, sigma, kind):
    # regularizer |x|^2 / (2 eta_t) is (1/eta_t)-strongly convex, which fixes the constants below
    spec = adv_spec("oftrl") if kind == "adv" else iid_spec("oftrl", sigma)
    tr = H.run_batch(spec, T, seed, range(3), record=True)
    learner = tr.extras["_learner"]
    x_next = oftrl_step(learner.state, tr.domain)
    xs = np.concatenate([tr.xs, x_next[:, None]], axis=1)
    g = tr.grads
    m = np.concatenate([np.zeros_like(g[:, :1]), g[:, :-1]], axis=1)
    u = H.linearized_comparator(tr)
    lin = H.linearized_regret(tr, u)
    step = xs[:, 1:] - xs[:, :-1]
    inv_eta = np.where(np.isinf(tr.steps), 0.0, 1.0 / tr.steps)
    terms = np.einsum("btd,btd->bt", g - m, -step) - 0.5 * inv_eta * np.einsum("btd,btd->bt", step, step)
    eta_end = learner.state.eta
    reg = np.where(np.isinf(eta_end), 0.0, np.sum(u * u, axis=-1) / (2 * eta_end))
    assert np.all(lin <= reg + terms.sum(axis=1) + 1e-6)


def test_batch_matches_single_episode():
    spec = iid_spec("omd", 0.3)
    batch = H.run_batch(spec, 200, 5, (0, 1, 2))
    alone = H.run_episode(spec, 200, 5, 1)
    np.testing.assert_array_equal(batch.xs[1], alone.xs[0])
