import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from seaoco import geometry as geo
from seaoco.environments import (IID, ROM, AdversarialSeq, CorruptedIID, Drifting, EnvironmentConfigError,
                                 InvalidLowerBoundDomain, NoPreviousDistribution, ProtocolViolation,
                                 RademacherLB, Switching, make_environment, rademacher_lb_gradient,
                                 truncated_variance, variance_profile)
from seaoco.losses import Linear, LogSmooth, QuadraticTracking
from oracles import ball_grid

BALL = geo.ball([0.0, 0.0], 1.0)
Q = QuadraticTracking(a=1.0)


def play_out(env, x=None, rng=None):
    outs = []
    for t in range(1, env.T + 1):
        if rng is not None:
            x = geo.project(env.domain, rng.uniform(-1, 1, (env.B, env.dim)))
        elif x is None:
            x = np.broadcast_to(np.asarray(env.domain.center, float), (env.B, env.dim))
        outs.append(env.step(t, x))
    return outs


# -- protocol ---------------------------------------------------------------------

def test_point_mass_iid_has_no_variance():
    env = IID(Q, BALL, 50, [0.0, 0.0], sigma=0.0)
    outs = play_out(env)
    assert all(float(o.sigma_sq_t[0]) == 0.0 for o in outs)
    assert all(float(o.Sigma_sq_t[0]) == 0.0 for o in outs[1:])


def test_rounds_must_come_in_order():
    env = IID(Q, BALL, 5, [0.0, 0.0], sigma=0.1)
    env.step(1, [[0.0, 0.0]])
    with pytest.raises(ProtocolViolation):
        env.step(3, [[0.0, 0.0]])
    with pytest.raises(ProtocolViolation):
        env.step(1, [[0.0, 0.0]])


def test_extra_sample_needs_a_previous_round():
    env = IID(Q, BALL, 5, [0.0, 0.0], sigma=0.1)
    with pytest.raises(NoPreviousDistribution):
        env.extra_sample(1)


def test_zero_corruption_matches_iid_samples():
    a = IID(Q, BALL, 300, [0.2, 0.1], sigma=0.4, seed=7, episodes=range(3))
    b = CorruptedIID(Q, BALL, 300, [0.2, 0.1], sigma=0.4, C=0.0, seed=7, episodes=range(3))
    for oa, ob in zip(play_out(a), play_out(b)):
        np.testing.assert_array_equal(oa.xi.point, ob.xi.point)
        np.testing.assert_array_equal(ob.xi.shift, 0.0)


def test_rom_second_round_is_uniform_over_remaining_points():
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]])
    env = ROM(Q, BALL, 3, points=pts, seed=3)
    first = int(env.step(1, [[0.0, 0.0]]).xi.index[0])
    rest = [i for i in range(3) if i != first]
    out = env.step(2, [[0.0, 0.0]])
    np.testing.assert_allclose(out.mean_point, pts[rest].mean(axis=0)[None])
    # extra_sample(3) draws from the law of round 2
    seen = np.array([int(env.extra_sample(3).index[0]) for _ in range(100000)])
    assert first not in seen
    counts = np.bincount(seen, minlength=3)
    assert stats.chisquare(counts[rest]).pvalue > 0.01


def test_rom_single_pass_uses_every_point_once():
    env = ROM(Q, BALL, 40, sigma=0.3, seed=1, episodes=range(4))
    idx = np.stack([o.xi.index for o in play_out(env)], axis=1)
    for row in idx:
        assert sorted(row) == list(range(40))


def test_rom_passes_reshuffle():
    env = ROM(Q, BALL, 30, passes=3, sigma=0.3, seed=2)
    idx = np.array([int(o.xi.index[0]) for o in play_out(env)]).reshape(3, 30)
    assert all(sorted(r) == list(range(30)) for r in idx)
    assert not (np.array_equal(idx[0], idx[1]) and np.array_equal(idx[1], idx[2]))


def test_iid_extra_sample_has_the_step_law():
    env = IID(Q, BALL, 4000, [0.1, 0.0], sigma=0.5, seed=11)
    main, extra = [], []
    for t in range(1, env.T + 1):
        if t > 1:
            extra.append(env.extra_sample(t).point[0, 0])
        main.append(env.step(t, [[0.0, 0.0]]).xi.point[0, 0])
    assert stats.ks_2samp(main, extra).pvalue > 0.01


def test_dirac_extra_sample_repeats_previous_point():
    env = AdversarialSeq(Q, BALL, 10, "random", seed=4, episodes=range(2))
    prev = env.step(1, np.zeros((2, 2))).xi.point
    np.testing.assert_array_equal(env.extra_sample(2).point, prev)


# -- lower bound adversary ----------------------------------------------------------

LB = geo.box([1.0], [2.0])


def test_rademacher_gradient_examples():
    env = RademacherLB(LB, 10, G=1.0)
    assert rademacher_lb_gradient(env, 2, 1.7, 1.0) == 0.0
    assert rademacher_lb_gradient(env, 1, 2.0, 1.0) == pytest.approx(0.5)
    assert rademacher_lb_gradient(env, 3, 1.0, -1.0) == pytest.approx(-0.25)


@pytest.mark.parametrize("dom", [geo.box([0.5], [1.0]), geo.box([1.0], [3.0]), geo.ball([0.0, 0.0], 1.0),
                                 geo.box([1.0, 1.0], [2.0, 2.0])])
def test_rademacher_rejects_bad_interval(dom):
    with pytest.raises(InvalidLowerBoundDomain):
        RademacherLB(dom, 10)


def test_rademacher_even_rounds_are_zero_and_gradient_magnitude():
    env = RademacherLB(LB, 200, G=2.0, seed=5, episodes=range(8))
    rng = np.random.default_rng(0)
    for t in range(1, 201):
        x = rng.uniform(1, 2, (8, 1))
        out = env.step(t, x)
        g = np.abs(env.family.grad(x, out.xi))
        if t % 2 == 0:
            assert np.all(g == 0)
        else:
            # |G x / (2b)| on [b/2, b] lies in [G/4, G/2]
            assert np.all((g >= 2.0 / 4 - 1e-12) & (g <= 2.0 / 2 + 1e-12))


# -- variance profile ----------------------------------------------------------------

def test_adversarial_has_zero_sigma_bar():
    env = AdversarialSeq(Q, BALL, 100, "random", episodes=range(3))
    play_out(env)
    np.testing.assert_array_equal(variance_profile(env).sigma_bar, 0.0)


def test_iid_has_zero_Sigma_bar():
    env = IID(Q, BALL, 100, [0.3, 0.3], sigma=0.5, episodes=range(3))
    play_out(env)
    prof = variance_profile(env)
    np.testing.assert_array_equal(prof.Sigma_bar, 0.0)
    assert np.all(prof.sigma_bar > 0)


def test_profile_averages_and_maxima():
    env = Switching(Q, BALL, 100, c=3, sigma=0.2, episodes=range(2))
    play_out(env)
    prof = variance_profile(env)
    np.testing.assert_allclose(prof.sigma_bar ** 2, prof.sigma_sq.sum(axis=1) / 100)
    np.testing.assert_allclose(prof.Sigma_bar ** 2, prof.Sigma_sq[:, 1:].sum(axis=1) / 100)
    np.testing.assert_array_equal(prof.Sigma_max, prof.Sigma_sq[:, 1:].max(axis=1))


@pytest.mark.parametrize("seed", range(5))
def test_rom_single_pass_adversarial_variation_is_bounded(seed):
    env = ROM(Q, BALL, 200, sigma=0.5, seed=seed, episodes=range(5))
    play_out(env)
    prof = variance_profile(env)
    assert np.all(prof.Sigma_sq[:, 1:].sum(axis=1) <= 8 * env.family.G ** 2)


# -- properties ------------------------------------------------------------------------

@given(st.integers(0, 2 ** 63), st.sampled_from(["iid", "corrupted_iid", "rom", "adversarial_seq", "drifting"]))
def test_same_seed_same_stream(seed, kind):
    spec = {"kind": kind, **({"mean": [0.1, 0.2], "sigma": 0.3} if kind in ("iid", "corrupted_iid") else {}),
            **({"C": 3.0, "pattern": "random"} if kind == "corrupted_iid" else {}),
            **({"eps": 0.01} if kind == "drifting" else {})}
    runs = []
    for _ in range(2):
        env = make_environment(spec, {"kind": "quadratic_tracking"}, BALL, 30, seed=seed, episodes=(0, 1))
        runs.append(np.stack([o.xi.point for o in play_out(env)]))
    np.testing.assert_array_equal(runs[0], runs[1])


def test_episode_stream_independent_of_batch():
    alone = IID(Q, BALL, 1500, [0.0, 0.0], sigma=0.4, seed=9, episodes=(5,))
    batch = IID(Q, BALL, 1500, [0.0, 0.0], sigma=0.4, seed=9, episodes=(2, 5, 8))
    a = np.stack([o.xi.point[0] for o in play_out(alone)])
    b = np.stack([o.xi.point[1] for o in play_out(batch)])
    np.testing.assert_array_equal(a, b)


@given(st.floats(0.5, 60), st.sampled_from(["alternating", "constant", "random"]), st.integers(0, 1000))
def test_corruption_budget(C, pattern, seed):
    env = CorruptedIID(Linear(), BALL, 80, [0.1, 0.0], sigma=0.2, C=C, pattern=pattern, seed=seed,
                       episodes=range(3))
    grid = ball_grid([0, 0], 1.0, 0.25)
    total = np.zeros(3)
    for t in range(1, 81):
        v = env.step(t, np.zeros((3, 2))).xi.shift
        # c_t(x) = <v_t, x>: its gradient is v_t everywhere on the grid
        total += np.max(np.linalg.norm(np.broadcast_to(v[:, None], (3, len(grid), 2)), axis=-1), axis=1)
    assert np.all(total <= C + 1e-9)
    assert env.corruption_total() <= C + 1e-9


@given(st.floats(1e-4, 0.2), st.integers(20, 200), st.sampled_from([1, 2]))
def test_drift_budget(eps, T, dim):
    dom = geo.ball(np.zeros(dim), 1.0)
    env = Drifting(Q, dom, T, eps, sigma=0.1)
    play_out(env)
    prof = variance_profile(env)
    assert prof.Sigma_bar[0] ** 2 <= eps + 1e-9


@given(st.integers(0, 12), st.integers(20, 300))
def test_switch_budget(c, T):
    env = Switching(Q, BALL, T, c, sigma=0.1)
    play_out(env)
    prof = variance_profile(env)
    assert int(np.sum(prof.Sigma_sq[0, 1:] > 0)) <= c
    assert prof.Sigma_bar[0] <= env.family.G * np.sqrt(2 * c / T) + 1e-9


def test_truncated_variance_matches_monte_carlo():
    from seaoco.environments import truncated_gaussian
    g = np.random.default_rng(0)
    for dim, sigma, R in [(1, 1.0, 0.5), (2, 0.3, 0.9), (3, 1.0, 3.0)]:
        z = truncated_gaussian(g, 200000, dim, sigma, R)
        assert np.all(np.linalg.norm(z, axis=1) <= R)
        mc = np.mean(np.sum(z * z, axis=1))
        assert truncated_variance(dim, sigma, R) == pytest.approx(mc, rel=1e-2)


SIGMA_CASES = {
    "iid": lambda: IID(Q, BALL, 6, [0.3, -0.1], sigma=0.6),
    "iid_linear": lambda: IID(Linear(), BALL, 6, [0.3, -0.1], sigma=0.6),
    "adversarial": lambda: AdversarialSeq(Q, BALL, 6, "random"),
    "corrupted": lambda: CorruptedIID(Q, BALL, 6, [0.3, -0.1], sigma=0.6, C=2.0),
    "rom": lambda: ROM(Q, BALL, 12, sigma=0.5),
    "rom_logsmooth": lambda: ROM(LogSmooth(), BALL, 12, sigma=0.8, mean=[0.5, 0.5]),
    "drifting": lambda: Drifting(Q, BALL, 6, 0.05, sigma=0.6),
    "switching": lambda: Switching(Q, BALL, 6, 2, sigma=0.6),
    "rademacher": lambda: RademacherLB(LB, 6, G=1.5),
}


@pytest.mark.parametrize("case", list(SIGMA_CASES))
def test_declared_sigma_bounds_monte_carlo_variance(case):
    env = SIGMA_CASES[case]()
    dom = env.domain
    grid = ball_grid([0, 0], 1.0, 0.2) if dom.dim == 2 else np.linspace(1.0, 2.0, 100)[:, None]
    x = np.broadcast_to(np.asarray(dom.center, float), (1, dom.dim))
    outs = [env.step(t, x) for t in range(1, env.T)]
    t = len(outs)  # extra_sample(t + 1) draws from the law of round t
    draws = [env.extra_sample(t + 1) for _ in range(10000)]
    grads = []
    for xi in draws:
        grads.append(env.family.grad(grid, xi.take(0).expand(0)) if dom.dim == 2 or xi.coin is None
                     else env.family.grad(grid, type(xi)(coin=np.broadcast_to(xi.coin[0], (len(grid),)))))
    grads = np.stack(grads)  # (N, grid, d)
    mean = outs[-1].mean_grad_at(grid[:, None, :])[:, 0]
    mc = np.max(np.mean(np.sum((grads - mean) ** 2, axis=-1), axis=0))
    declared = float(outs[-1].sigma_sq_t[0])
    assert mc <= declared * 1.05 + 1e-12


def test_factory_errors():
    with pytest.raises(EnvironmentConfigError):
        make_environment({"kind": "nope"}, None, BALL, 10)
    with pytest.raises(EnvironmentConfigError):
        make_environment({"kind": "drifting", "eps": "sqrt(T)"}, None, BALL, 10)
    with pytest.raises(EnvironmentConfigError):
        IID(Q, BALL, 10, [0, 0], sigma=-1.0)
    assert make_environment({"kind": "drifting", "eps": "T^-0.5"}, None, BALL, 16).eps == pytest.approx(0.25)
