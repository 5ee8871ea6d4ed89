import numpy as np
import pytest

from acrl.agent import (Policy, RolloutBatch, compute_gae, evaluate,
                        ppo_update, actor_loss_and_grads)
from acrl.envs import Context, make_env
from acrl.nn import ContractViolation, NumericFault


def make_policy(**kw):
    kw.setdefault("hidden", (16, 16))
    kw.setdefault("rng", np.random.default_rng(0))
    return Policy(4, [0, 0], [1, 1], **kw)


def test_requires_exactly_one_head():
    with pytest.raises(ContractViolation):
        Policy(4, [0], [1])
    with pytest.raises(ContractViolation):
        Policy(4, [0], [1], n_actions=3, action_dim=2)


def test_uniform_logits_log_prob():
    policy = make_policy(n_actions=6)
    # zero the actor so every action has log-prob ln(1/6)
    policy.actor.set_params([np.zeros_like(p) for p in policy.actor.params()])
    obs = np.ones(4)
    for a in range(6):
        assert policy.log_prob(obs, [0.5, 0.5], a) == pytest.approx(
            np.log(1.0 / 6.0))


def test_act_returns_consistent_log_prob():
    policy = make_policy(n_actions=3)
    rng = np.random.default_rng(1)
    obs = rng.standard_normal(4)
    action, logp, value = policy.act(obs, [0.2, 0.8], rng)
    assert logp == pytest.approx(policy.log_prob(obs, [0.2, 0.8], action))
    assert np.isfinite(value)


def test_continuous_head_greedy_is_mean():
    policy = make_policy(action_dim=2)
    obs = np.ones(4)
    mean = policy.act_greedy(obs, [0.0, 0.0])
    # with eps = 0 the sampled action equals the mean

    class _ZeroRng:
        @staticmethod
        def standard_normal(shape):
            return np.zeros(shape)

    action, logp, _ = policy.act(obs, [0.0, 0.0], _ZeroRng())
    assert np.allclose(action, mean)
    assert logp == pytest.approx(policy.log_prob(obs, [0.0, 0.0], action))


def test_continuous_log_prob_matches_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    policy = make_policy(action_dim=2)
    obs = np.full(4, 0.3)
    mean = policy.act_greedy(obs, [0.1, 0.9])
    std = np.exp(policy.log_std)
    a = np.array([0.4, -1.2])
    want = scipy_stats.norm.logpdf(a, mean, std).sum()
    assert policy.log_prob(obs, [0.1, 0.9], a) == pytest.approx(want)


def test_nonfinite_logits_fault():
    policy = make_policy(n_actions=3)
    params = policy.actor.params()
    params[0][0, 0] = np.nan
    with pytest.raises(NumericFault):
        policy.act(np.ones(4), [0.0, 0.0], np.random.default_rng(0))


def test_snapshot_restore_roundtrip():
    policy = make_policy(n_actions=3)
    saved = policy.snapshot()
    for p in policy.actor.params():
        p += 1.0
    policy.restore(saved)
    obs = np.ones(4)
    head0 = policy.actor.forward(policy.policy_input(obs, [0.0, 0.0]))
    policy2 = make_policy(n_actions=3)
    head1 = policy2.actor.forward(policy2.policy_input(obs, [0.0, 0.0]))
    assert np.array_equal(head0, head1)


# -- GAE ---------------------------------------------------------------------


def test_gae_single_step():
    adv, ret = compute_gae([1.0], [0.5], [True], 0.0, 0.9, 0.95)
    assert adv[0] == pytest.approx(1.0 - 0.5)
    assert ret[0] == pytest.approx(1.0)


def test_gae_hand_computed():
    gamma, lam = 0.5, 0.5
    rewards = [1.0, 0.0, 2.0]
    values = [0.2, 0.4, 0.6]
    dones = [False, False, True]
    # work backwards by hand
    d2 = 2.0 - 0.6
    d1 = 0.0 + gamma * 0.6 - 0.4
    d0 = 1.0 + gamma * 0.4 - 0.2
    a2 = d2
    a1 = d1 + gamma * lam * a2
    a0 = d0 + gamma * lam * a1
    adv, ret = compute_gae(rewards, values, dones, 0.0, gamma, lam)
    assert np.allclose(adv, [a0, a1, a2])
    assert np.allclose(ret, adv + np.array(values))


def test_gae_episode_boundary_blocks_bootstrap():
    # with a done flag between, the second episode's values never leak back
    adv_joined, _ = compute_gae([0.0, 5.0], [0.0, 0.0], [True, True],
                                0.0, 0.99, 0.95)
    assert adv_joined[0] == pytest.approx(0.0)


def test_gae_lambda_one_is_discounted_return():
    rewards = [1.0, 1.0, 1.0]
    values = [0.0, 0.0, 0.0]
    adv, _ = compute_gae(rewards, values, [False, False, True], 0.0, 0.9, 1.0)
    assert adv[0] == pytest.approx(1.0 + 0.9 + 0.81)


def test_gae_length_mismatch():
    with pytest.raises(ContractViolation):
        compute_gae([1.0], [0.0, 0.0], [True], 0.0, 0.9, 0.95)


# -- PPO update --------------------------------------------------------------


def _filled_batch(policy, n=64, seed=2):
    rng = np.random.default_rng(seed)
    batch = RolloutBatch()
    for i in range(n):
        obs = rng.standard_normal(4)
        ctx = rng.uniform(0, 1, 2)
        a, logp, v = policy.act(obs, ctx, rng)
        batch.add(obs, ctx, a, logp, v, rng.standard_normal(), i % 16 == 15)
    return batch


def test_ppo_update_runs_and_reports():
    policy = make_policy(n_actions=3)
    batch = _filled_batch(policy)
    stats = ppo_update(policy, batch, epochs=2, minibatch_size=16,
                       rng=np.random.default_rng(3))
    for key in ("actor_loss", "value_loss", "entropy"):
        assert np.isfinite(stats[key])
    assert stats["adv_mean"] == pytest.approx(0.0, abs=1e-9)


def test_ppo_empty_batch():
    policy = make_policy(n_actions=3)
    with pytest.raises(ContractViolation):
        ppo_update(policy, RolloutBatch())


def test_ppo_numeric_fault_restores(monkeypatch):
    policy = make_policy(n_actions=3)
    batch = _filled_batch(policy)
    before = [p.copy() for p in policy.actor.params()]

    import acrl.agent as agent_mod
    calls = {"n": 0}
    real = agent_mod._minibatch_step

    def flaky(*args):
        calls["n"] += 1
        if calls["n"] == 3:
            raise NumericFault("injected")
        return real(*args)

    monkeypatch.setattr(agent_mod, "_minibatch_step", flaky)
    with pytest.raises(NumericFault):
        ppo_update(policy, batch, epochs=1, minibatch_size=16,
                   rng=np.random.default_rng(4))
    after = policy.actor.params()
    for b, a in zip(before, after):
        assert np.array_equal(b, a)


def test_clip_masks_gradient():
    # with the ratio far above 1+eps and positive advantage, no gradient flows
    policy = make_policy(n_actions=2)
    x = np.ones((1, 6))
    actions = np.array([0])
    old_logp = np.array([-20.0])  # ratio = exp(new - old) >> 1 + eps
    adv = np.array([1.0])
    policy.entropy_coef = 0.0
    _, grads, _, _ = actor_loss_and_grads(policy, x, actions, old_logp, adv)
    for g in grads:
        assert np.allclose(g, 0.0)


def test_ppo_improves_on_bandit():
    # single-state bandit: action 1 pays 1, action 0 pays 0
    rng = np.random.default_rng(5)
    policy = make_policy(n_actions=2, lr=3e-3)
    obs = np.zeros(4)
    ctx = np.zeros(2)
    for _ in range(30):
        batch = RolloutBatch()
        for _ in range(128):
            a, logp, v = policy.act(obs, ctx, rng)
            batch.add(obs, ctx, a, logp, v, float(a == 1), True)
        ppo_update(policy, batch, epochs=4, minibatch_size=64, rng=rng)
    probs = np.exp([policy.log_prob(obs, ctx, a) for a in (0, 1)])
    assert probs[1] > 0.8


def test_evaluate_greedy_deterministic():
    env = make_env("grid", "easy_a")
    policy = Policy(env.observation_dim, *env.context_bounds(),
                    n_actions=env.n_actions, hidden=(16, 16),
                    rng=np.random.default_rng(6))
    ctx = Context([2.0, 3.0])
    r1 = evaluate(policy, env, ctx, 3)
    r2 = evaluate(policy, env, ctx, 3)
    assert r1 == r2
    with pytest.raises(ContractViolation):
        evaluate(policy, env, ctx, 0)
