import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppalloc._rng import trial_rng
from ppalloc.arrival import InitialSequence, blocks_instance, build_instance, realize, sample_realization
from ppalloc.policies import (AcceptAll, Alg1, Alg2, BallQueyranne, ContractViolation, MarketParams, Mixture,
                              Policy, RejectAll, UniformRate, opt_offline, run_policy, simulate,
                              trajectory_csv, u_bounds)

from oracles import brute_force_opt, reference_alg1, reference_alg2, reference_ball


def identity(pattern, a=0.5):
    seq = build_instance(pattern, a)
    return realize(seq, [], [])


def decisions(out):
    return [row["decision"] for row in out.trajectory]


# -- offline optimum ------------------------------------------------------------

def test_opt_examples():
    assert opt_offline(3, 5, 4, 0.5) == 3.5
    assert brute_force_opt([1] * 3 + [0.5] * 5, 4) == 3.5
    assert opt_offline(0, 0, 7, 0.3) == 0
    assert opt_offline(6, 11, 6, 0.3) == 6


@pytest.mark.parametrize("a", [0.25, 0.5, 0.9])
def test_opt_matches_brute_force_small(a):
    for n in range(3, 9):
        for n1 in range(n + 1):
            for n2 in range(n - n1 + 1):
                for b in range(1, n + 1):
                    vals = [1.0] * n1 + [a] * n2
                    assert opt_offline(n1, n2, b, a) == pytest.approx(brute_force_opt(vals, b))


def test_market_params_validation():
    with pytest.raises(ValueError):
        MarketParams(0, 10, 0.5, 0.5)
    with pytest.raises(ValueError):
        MarketParams(11, 10, 0.5, 0.5)
    with pytest.raises(ValueError):
        MarketParams(2, 2, 0.5, 0.5)
    with pytest.raises(ValueError):
        MarketParams(2, 10, 1.0, 0.5)
    with pytest.raises(ValueError):
        MarketParams(2, 10, 0.5, 1.5)


# -- trivial policies -----------------------------------------------------------

def test_accept_all_no_rationing():
    r = sample_realization(build_instance("1,a,0,a,1,0,0,0"), 0.5, 3)
    out = run_policy(AcceptAll(MarketParams(4, 8, 0.5, 0.5)), r, MarketParams(4, 8, 0.5, 0.5))
    assert out.revenue == opt_offline(2, 2, 4, 0.5) == 3.0


def test_accept_all_greedy_by_order():
    prm = MarketParams(2, 4, 0.5, 0.0)
    out = run_policy(AcceptAll(prm), identity("a,a,1,1"), prm)
    assert out.revenue == 1.0
    assert decisions(out) == [True, True, False, False]


def test_reject_all():
    prm = MarketParams(3, 6, 0.5, 0.5)
    out = run_policy(RejectAll(prm), sample_realization(build_instance("1,1,a,a,1,0"), 0.5, 0), prm)
    assert out.revenue == 0 and out.q1_final == out.q2_final == 0


class Greedy(Policy):
    """Deliberately broken: accepts every arrival regardless of stock."""

    def decide(self, step, kinds, inventory):
        return kinds != 0


class GrabsEmpty(Policy):
    def decide(self, step, kinds, inventory):
        return np.ones(kinds.shape, dtype=bool)


def test_contract_violations_raise():
    prm = MarketParams(1, 4, 0.5, 0.0)
    with pytest.raises(ContractViolation):
        run_policy(Greedy(prm), identity("1,1,0,0"), prm)
    with pytest.raises(ContractViolation):
        run_policy(GrabsEmpty(prm), identity("1,0,1,1"), prm)


def test_length_mismatch():
    with pytest.raises(ValueError):
        run_policy(AcceptAll(MarketParams(2, 5, 0.5, 0.5)), identity("1,1,0,0"), MarketParams(2, 5, 0.5, 0.5))


# -- first online policy ----------------------------------------------------------

def test_alg1_hand_trace():
    prm = MarketParams(2, 4, 0.5, 0.5)
    pol = Alg1(prm)
    out = run_policy(pol, identity("a,a,1,a"), prm)
    assert decisions(out) == [False, False, True, False]
    assert out.revenue == 1.0 and out.q1_final == 1
    assert pol.q2e.tolist() == [0] and pol.q2f.tolist() == [0]
    assert opt_offline(1, 3, 2, 0.5) == 1.5


def test_alg1_tight_instance():
    b = n = 200
    prm = MarketParams(b, n, 0.5, 0.5)
    seq = blocks_instance([("a", n)])
    for seed in range(5):
        pol = Alg1(prm)
        out = run_policy(pol, sample_realization(seq, 0.5, seed), prm)
        assert pol.q2e[0] <= 0.5 * b
        assert pol.q2f[0] <= int(pol.theta * b)
        assert out.revenue / opt_offline(0, n, b, 0.5) <= 0.5 + pol.theta + 1 / b


def test_alg1_rejects_p_one():
    with pytest.raises(ValueError):
        Alg1(MarketParams(2, 4, 0.5, 1.0))


kinds_lists = st.lists(st.sampled_from([0, 1, 2]), min_size=3, max_size=30)


@settings(max_examples=300, deadline=None)
@given(kinds=kinds_lists, b_frac=st.floats(0.01, 1), a=st.floats(0.05, 0.95), seed=st.integers(0, 10**6))
def test_alg1_equals_ball_at_p_zero(kinds, b_frac, a, seed):
    n = len(kinds)
    b = max(1, int(b_frac * n))
    prm = MarketParams(b, n, a, 0.0)
    r = identity_from_codes(kinds, a)
    t1 = run_policy(Alg1(prm), r, prm).trajectory
    t2 = run_policy(BallQueyranne(prm), r, prm).trajectory
    assert [(x["decision"], x["q1"], x["q2"]) for x in t1] == [(x["decision"], x["q1"], x["q2"]) for x in t2]


def identity_from_codes(kinds, a=0.5):
    return realize(InitialSequence(kinds, a), [], [])


@settings(max_examples=300, deadline=None)
@given(kinds=kinds_lists, b_frac=st.floats(0.01, 1), a=st.floats(0.05, 0.95), p=st.floats(0, 0.99))
def test_alg1_matches_reference(kinds, b_frac, a, p):
    n = len(kinds)
    b = max(1, int(b_frac * n))
    prm = MarketParams(b, n, a, p)
    pol = Alg1(prm)
    out = run_policy(pol, identity_from_codes(kinds, a), prm)
    dec, q1, q2e, q2f = reference_alg1(kinds, b, a, p)
    assert decisions(out) == dec
    assert (out.q1_final, int(pol.q2e[0]), int(pol.q2f[0])) == (q1, q2e, q2f)
    assert q2f <= int(np.floor(pol.theta * b + 1e-9))
    prev_q2e = 0
    for row in out.trajectory:
        if row["q2e"] > prev_q2e:
            assert row["q1"] + row["q2e"] <= int(np.floor(row["step"] * p * b / n + 1e-9))
        prev_q2e = row["q2e"]


# -- baselines ---------------------------------------------------------------------

def test_ball_examples():
    b, n, a = 40, 80, 0.5
    prm = MarketParams(b, n, a, 0.0)
    out = run_policy(BallQueyranne(prm), identity_from_codes([2] * b + [0] * (n - b), a), prm)
    assert out.revenue == a * int(b / (2 - a))
    prm1 = MarketParams(5, 8, 0.5, 0.0)
    out1 = run_policy(BallQueyranne(prm1), identity("1,1,1,0,0,0,0,0"), prm1)
    assert out1.revenue == 3
    assert BallQueyranne(MarketParams(50, 60, 0.999, 0)).limit == 49


def test_uniform_hand_trace():
    prm = MarketParams(4, 8, 0.5, 0.5)
    out = run_policy(UniformRate(prm), identity("a,a,a,a,0,0,0,0"), prm)
    assert decisions(out) == [False, True, False, True, False, False, False, False]
    assert out.q2_final == 2


def test_uniform_full_inventory_accepts_all():
    prm = MarketParams(6, 6, 0.5, 0.5)
    out = run_policy(UniformRate(prm), identity("a,1,a,a,1,a"), prm)
    assert out.revenue == opt_offline(2, 4, 6, 0.5)


@settings(max_examples=100, deadline=None)
@given(kinds=kinds_lists, b_frac=st.floats(0.01, 1), a=st.floats(0.05, 0.95))
def test_ball_matches_reference(kinds, b_frac, a):
    n = len(kinds)
    b = max(1, int(b_frac * n))
    prm = MarketParams(b, n, a, 0.3)
    out = run_policy(BallQueyranne(prm), identity_from_codes(kinds, a), prm)
    dec, q1, q2 = reference_ball(kinds, b, a)
    assert decisions(out) == dec and (out.q1_final, out.q2_final) == (q1, q2)


# -- adaptive policy -----------------------------------------------------------------

def test_u_bounds_hand_values():
    prm = MarketParams(8, 16, 0.5, 0.5)
    u1, u12 = u_bounds(2, 1, 0.25, prm, 1 / 8)
    assert u1 == pytest.approx(12.8)
    assert u12 == pytest.approx(14.4)
    assert u_bounds(2, 1, 0.0625, prm, 1 / 8) == (8.0, 8.0)


def test_u_bounds_full_rate():
    prm = MarketParams(10, 20, 0.5, 1.0)
    for step in range(1, 21):
        lam = step / 20
        u1, _ = u_bounds(step, 0, lam, prm, 0.0)
        assert u1 == pytest.approx(20)


def test_u_bounds_vectorized():
    prm = MarketParams(8, 16, 0.5, 0.5)
    u1, u12 = u_bounds(np.array([2, 2]), np.array([1, 1]), np.array([0.25, 0.0625]), prm, 1 / 8)
    assert u1.tolist() == pytest.approx([12.8, 8.0]) and u12.tolist() == pytest.approx([14.4, 8.0])


def test_alg2_rejects_bad_params():
    with pytest.raises(ValueError):
        Alg2(MarketParams(3, 6, 0.5, 0.5), 1.0)
    with pytest.raises(ValueError):
        Alg2(MarketParams(3, 6, 0.5, 0.0), 0.5)


def test_alg2_tiny_trace_against_reference():
    prm = MarketParams(3, 6, 0.5, 0.5)
    kinds = [2, 2, 2, 1, 1, 1]
    out = run_policy(Alg2(prm, 0.6), identity_from_codes(kinds), prm)
    dec, q1, q2 = reference_alg2(kinds, 3, 0.5, 0.5, 0.6)
    assert decisions(out) == dec
    assert (out.q1_final, out.q2_final) == (q1, q2)
    # phi b = 2.4 admits two before delta; at step 3 u1 = 0 lifts the cap to floor(4.2)
    assert dec == [True, True, True, False, False, False]


def test_alg2_takes_everything_on_type2_then_empty():
    b, n, a, p = 50, 100, 0.5, 0.5
    prm = MarketParams(b, n, a, p)
    seq = blocks_instance([("a", b), ("0", n - b)], a)
    for seed in range(10):
        out = run_policy(Alg2(prm, 0.85), sample_realization(seq, p, seed), prm)
        assert out.revenue == pytest.approx(a * b)


def test_alg2_threshold_before_delta():
    prm = MarketParams(10, 100, 0.5, 0.5)
    pol = Alg2(prm, 0.8)
    # before delta u1 = b, so the cap is floor(phi b) = 4
    assert float(pol.threshold(prm.b)) == 4
    pol.reset(2)
    pol.q2[:] = [4, 5]
    acc = pol.decide(1, np.array([2, 2], dtype=np.int8), np.array([10, 10]))
    assert acc.tolist() == [True, False]


@settings(max_examples=300, deadline=None)
@given(kinds=kinds_lists, b_frac=st.floats(0.05, 1), a=st.floats(0.05, 0.95), p=st.floats(0.05, 1),
       c=st.floats(0, 0.99))
def test_alg2_matches_reference(kinds, b_frac, a, p, c):
    n = len(kinds)
    b = max(1, int(b_frac * n))
    prm = MarketParams(b, n, a, p)
    out = run_policy(Alg2(prm, c), identity_from_codes(kinds, a), prm)
    dec, q1, q2 = reference_alg2(kinds, b, a, p, c)
    assert decisions(out) == dec and (out.q1_final, out.q2_final) == (q1, q2)


@settings(max_examples=200, deadline=None)
@given(b=st.integers(1, 100), a=st.floats(0.05, 0.95), c1=st.floats(0, 0.99), c2=st.floats(0, 0.99),
       u=st.floats(0, 200), du=st.floats(0, 50))
def test_alg2_threshold_monotone(b, a, c1, c2, u, du):
    prm = MarketParams(b, max(b, 3), a, 0.5)
    lo, hi = sorted((c1, c2))
    t = Alg2(prm, lo)
    assert t.threshold(u + du) <= t.threshold(u)
    assert Alg2(prm, hi).threshold(u) <= t.threshold(u)


# -- mixture ---------------------------------------------------------------------------

def test_mixture_degenerate_weights():
    prm = MarketParams(20, 60, 0.5, 0.5)
    seq = blocks_instance([("a", 20), ("1", 10), ("0", 30)])
    for seed in range(5):
        r = sample_realization(seq, 0.5, seed)
        mix = Mixture([(Alg1(prm), 1.0), (UniformRate(prm), 0.0)], seed=seed)
        assert decisions(run_policy(mix, r, prm)) == decisions(run_policy(Alg1(prm), r, prm))


def test_mixture_weight_validation():
    prm = MarketParams(2, 4, 0.5, 0.5)
    with pytest.raises(ValueError):
        Mixture([(Alg1(prm), 0.7), (UniformRate(prm), 0.7)])
    with pytest.raises(ValueError):
        Mixture([(Alg1(prm), -0.5), (UniformRate(prm), 1.5)])
    with pytest.raises(ValueError):
        Mixture([])


def test_mixture_selection_frequency():
    prm = MarketParams(2, 4, 0.5, 0.3)
    mix = Mixture([(BallQueyranne(prm), 0.3), (UniformRate(prm), 0.7)], seed=5)
    mix.reset(100_000)
    assert abs(np.mean(mix.choices == 0) - 0.3) <= 0.01


# -- universal properties -----------------------------------------------------------------

def all_policies(prm):
    pols = [AcceptAll(prm), RejectAll(prm), BallQueyranne(prm), UniformRate(prm),
            Mixture([(BallQueyranne(prm), 0.5), (UniformRate(prm), 0.5)], seed=1)]
    if prm.p < 1:
        pols.append(Alg1(prm))
    if prm.p > 0:
        pols.append(Alg2(prm, 0.7))
    return pols


@settings(max_examples=200, deadline=None)
@given(kinds=kinds_lists, b_frac=st.floats(0.01, 1), a=st.floats(0.05, 0.95), p=st.floats(0, 1),
       seed=st.integers(0, 10**6))
def test_alg_below_opt_and_b(kinds, b_frac, a, p, seed):
    n = len(kinds)
    b = max(1, int(b_frac * n))
    prm = MarketParams(b, n, a, p)
    seq = InitialSequence(kinds, a)
    r = sample_realization(seq, p, seed)
    opt = opt_offline(seq.n1, seq.n2, b, a)
    for pol in all_policies(prm):
        out = run_policy(pol, r, prm)
        assert out.revenue <= opt + 1e-12
        assert out.revenue <= b
        assert out.revenue == pytest.approx(out.q1_final + a * out.q2_final)
        assert out.q1_final + out.q2_final <= b
        steps = out.trajectory
        for prev, cur in zip(steps, steps[1:]):
            assert cur["q1"] >= prev["q1"] and cur["q2"] >= prev["q2"]


@settings(max_examples=100, deadline=None)
@given(kinds=kinds_lists, tail=kinds_lists, cut=st.integers(1, 30), a=st.floats(0.05, 0.95),
       p=st.floats(0.05, 0.95))
def test_online_property(kinds, tail, cut, a, p):
    n = len(kinds)
    cut = min(cut, n)
    other = (kinds[:cut] + tail + kinds)[:n]
    b = max(1, n // 2)
    prm = MarketParams(b, n, a, p)
    for make in (lambda: Alg1(prm), lambda: Alg2(prm, 0.6), lambda: UniformRate(prm), lambda: BallQueyranne(prm)):
        d1 = decisions(run_policy(make(), identity_from_codes(kinds, a), prm))
        d2 = decisions(run_policy(make(), identity_from_codes(other, a), prm))
        assert d1[:cut] == d2[:cut]


def test_batched_matches_single_runs():
    prm = MarketParams(30, 90, 0.5, 0.4)
    seq = blocks_instance([("a", 30), ("1", 20), ("0", 40)])
    rs = [sample_realization(seq, 0.4, trial_rng(2, t)) for t in range(20)]
    arrivals = np.stack([r.arrivals for r in rs])
    for make in (lambda: Alg1(prm), lambda: Alg2(prm, 0.8), lambda: UniformRate(prm)):
        batch = simulate(make(), arrivals, prm).revenue
        single = [run_policy(make(), r, prm).revenue for r in rs]
        assert batch.tolist() == pytest.approx(single)


def test_state_is_plain_data():
    prm = MarketParams(2, 4, 0.5, 0.5)
    pol = Alg1(prm)
    run_policy(pol, identity("a,a,1,a"), prm)
    st_ = pol.state()
    assert st_["q1"] == [1] and st_["q2e"] == [0] and st_["params"]["b"] == 2


def test_trajectory_csv():
    prm = MarketParams(2, 4, 0.5, 0.5)
    text = trajectory_csv(run_policy(Alg1(prm), identity("a,a,1,a"), prm))
    lines = text.splitlines()
    assert lines[0] == "step,lambda,arrival_kind,decision,q1,q2e,q2f,q2,inventory_left"
    assert lines[3] == "3,0.75,1,accept,1,0,0,0,1"
    ball = trajectory_csv(run_policy(BallQueyranne(prm), identity("a,a,1,a"), prm)).splitlines()
    assert ball[1] == "1,0.25,a,accept,0,,,1,1"
