import numpy as np
import pytest

from ailad import env as E
from ailad import nn
from ailad import policy as P
from ailad import discriminator as disc
from ailad import density as dens
from ailad.summarize import M

LEVEL = E.generate_level(1, 7)


def small_policy(seed=0, hidden=(8,)):
    return P.make_policy(E.obs_size(LEVEL), np.random.default_rng(seed), hidden=hidden)


def test_single_legal_action_has_zero_logp():
    pp = small_policy()
    mask = np.zeros(E.N_ACTIONS, dtype=bool)
    mask[E.END_TURN] = True
    _, obs, _ = E.reset(LEVEL)
    assert P.act(pp, obs, np.zeros(M), mask, np.random.default_rng(0)) == (E.END_TURN, 0.0)


def test_zero_params_sample_uniformly():
    pp = small_policy()
    pp.actor = np.zeros_like(pp.actor)
    state, obs, mask = E.reset(LEVEL)
    rng = np.random.default_rng(1)
    legal = np.flatnonzero(mask)
    counts = np.zeros(E.N_ACTIONS)
    for _ in range(4000):
        a, lp = P.act(pp, obs, np.zeros(M), mask, rng)
        counts[a] += 1
        assert lp == pytest.approx(-np.log(len(legal)))
    assert counts[~mask].sum() == 0
    freq = counts[legal] / counts.sum()
    assert np.all(np.abs(freq - 1 / len(legal)) < 0.03)


def test_no_latent_uses_zero_vector():
    assert np.all(P.sample_latent(np.random.default_rng(0), M, enabled=False) == 0)
    t = P.collect_episode(LEVEL, small_policy(), np.random.default_rng(0), latent=False)
    assert np.all(t.z == 0)


def test_collect_episode_deterministic_and_complete():
    pp = small_policy()
    a = P.collect_episode(LEVEL, pp, np.random.default_rng(5))
    b = P.collect_episode(LEVEL, pp, np.random.default_rng(5))
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.z, b.z)
    assert len(a) >= 1 and a.z.shape == (M,)
    assert a.log.outcome in ("win", "lose", "draw")
    assert a.obs.shape == (len(a), E.obs_size(LEVEL))
    assert np.all(a.masks[np.arange(len(a)), a.actions])


def filled_buffer(n=6, seed=0):
    pp = small_policy()
    rng = np.random.default_rng(seed)
    buf = P.ReplayBuffer(capacity=4, metric_buffer=dens.MetricBuffer(16, M))
    for i in range(n):
        t = P.collect_episode(LEVEL, pp, rng, episode_id=i)
        buf.add(t, rng.standard_normal(M))
    return pp, buf


def test_replay_buffer_capacity_and_recent_first():
    _, buf = filled_buffer()
    assert len(buf) == 4 and len(buf.metric_buffer) == 6
    batch = buf.sample(3, np.random.default_rng(0), n_recent=1)
    assert batch[0].episode_id == 5
    assert len({t.episode_id for t in batch}) == 3


def test_relabel_idempotent_and_offset_identity():
    _, buf = filled_buffer()
    assert P.relabel_rewards(P.ReplayBuffer(), None, 0.0) == 0
    d = disc.make_discriminator(np.random.default_rng(0), hidden=(8,))
    assert P.relabel_rewards(buf, d, np.log(0.3)) == 4
    first = [t.reward for t in buf.items]
    P.relabel_rewards(buf, d, np.log(0.3))
    assert [t.reward for t in buf.items] == first
    shifted = d.copy()
    shifted.f_params[-1] += 1.0
    P.relabel_rewards(buf, shifted, np.log(0.3))
    np.testing.assert_allclose([t.reward for t in buf.items], np.array(first) + 1.0, atol=1e-12)


def test_update_requires_labels():
    pp, buf = filled_buffer()
    with pytest.raises(P.UnlabeledTrajectory):
        P.update_policy(pp, list(buf.items))


def test_on_policy_importance_weights_are_one():
    pp, buf = filled_buffer()
    for t in buf.items:
        t.reward = 1.0
    _, diag = P.update_policy(pp, list(buf.items))
    assert diag["importance_weight"] == pytest.approx(1.0, abs=1e-12)


def _two_action_toy():
    spec = nn.MlpSpec((2, 2), head="masked_softmax")
    rng = np.random.default_rng(0)
    pp = P.PolicyParams(spec, rng.standard_normal(spec.n_params), nn.MlpSpec((2, 1)), np.zeros(3),
                        nn.AdamState.fresh(spec.n_params, 1e-3), nn.AdamState.fresh(3, 1e-3), latent_dim=0)
    x = np.array([[0.5, -1.0]])
    mask = np.ones((1, 2), dtype=bool)
    return pp, x, mask


def test_actor_gradient_single_step_is_minus_grad_log_pi():
    pp, x, mask = _two_action_toy()
    rec, logp, _ = P.actor_gradient(pp, x, mask, np.array([1]), np.ones(1), np.ones(1), entropy_coef=0.0)
    # d/dtheta of -log pi(a=1|x) through the logits: (p - onehot) outer x
    p = nn.forward(pp.actor_spec, pp.actor, x, mask)[0]
    g_logits = p - np.array([0.0, 1.0])
    np.testing.assert_allclose(rec.grad[:4].reshape(2, 2), np.outer(x[0], g_logits), atol=1e-12)
    np.testing.assert_allclose(rec.grad[4:], g_logits, atol=1e-12)
    assert logp[0] == pytest.approx(np.log(p[1]))


def test_zero_advantage_leaves_pure_entropy_gradient():
    pp, x, mask = _two_action_toy()
    beta = 0.3
    rec, _, _ = P.actor_gradient(pp, x, mask, np.array([0]), np.ones(1), np.zeros(1), entropy_coef=beta)

    def neg_entropy(params):
        p = nn.forward(pp.actor_spec, params, x, mask)[0]
        return beta * float(np.sum(p * np.log(p)))

    eps = 1e-6
    num = np.array([(neg_entropy(pp.actor + eps * e) - neg_entropy(pp.actor - eps * e)) / (2 * eps)
                    for e in np.eye(len(pp.actor))])
    np.testing.assert_allclose(rec.grad, num, atol=1e-8)


def test_update_policy_moves_toward_rewarded_action():
    pp, x, mask = _two_action_toy()
    p0 = nn.forward(pp.actor_spec, pp.actor, x, mask)[0, 1]
    traj = P.Trajectory(obs=x, masks=mask, actions=np.array([1]), logp=np.array([np.log(p0)]),
                        z=np.zeros(0), log=E.EventLog(), metrics=np.zeros(M), reward=1.0)
    for _ in range(50):
        pp, _ = P.update_policy(pp, [traj], P.UpdateConfig(gamma=1.0, entropy_coef=0.0))
    assert nn.forward(pp.actor_spec, pp.actor, x, mask)[0, 1] > p0
