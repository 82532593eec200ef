import math
import os

import numpy as np
import pytest

import memo


def test_morphology_counts():
    graph, partition = memo.build_crawler(3, 3)
    assert graph.num_joints == 8
    assert partition.num_instances == 5
    memo.validate_partition(graph, partition)

    layout = memo.observation_layout(graph, partition, "crawler")
    assert layout.total_dim == 5 + 8 * 4

    lg, lp = memo.build_lifter(2, 3)
    assert lg.num_joints == 8
    assert lp.num_instances == 4
    assert memo.observation_layout(lg, lp, "lifter").total_dim == 3 + 8 * 4

    with pytest.raises(Exception):
        memo.build_crawler(1, 1)


def test_env_determinism_and_rewards():
    cfg = memo.EnvConfig(kind="crawler", count_a=3, count_b=3, seed=7)
    env_a, env_b = memo.Env(cfg), memo.Env(cfg)
    obs_a, obs_b = env_a.reset(), env_b.reset()
    np.testing.assert_array_equal(obs_a, obs_b)
    assert obs_a.shape == (37,)

    zero = np.zeros(8)
    obs, reward, reported, done = env_a.step(zero)
    assert reward == pytest.approx(0.1)
    assert reported == pytest.approx(0.1)
    assert not done
    assert env_a.root_x == 0.0

    rng = np.random.default_rng(3)
    actions = rng.uniform(-1, 1, size=(20, 8))
    env_b.step(zero)
    for a in actions:
        ra = env_a.step(a)
        rb = env_b.step(a)
        np.testing.assert_array_equal(ra[0], rb[0])

    assert memo.reward_locomotion(0.02, 1.0, zero) == pytest.approx(0.3)
    assert memo.reward_grasp(0.5, 0.0, True) == pytest.approx(5.0)
    assert memo.reward_grasp(0.5, 0.3, False) == pytest.approx(-0.03)


def test_lifter_reset():
    env = memo.Env(memo.EnvConfig(kind="lifter", count_a=2, count_b=3))
    env.reset()
    assert env.disk_center[1] == pytest.approx(0.10)
    assert not env.attached


def test_running_normalizer_matches_numpy():
    rng = np.random.default_rng(11)
    data = rng.normal(size=(1000, 6)) * 3.0 + 1.5
    norm = memo.RunningNormalizer(6)
    for row in data:
        norm.update(row)
    np.testing.assert_allclose(norm.mean, data.mean(axis=0), atol=1e-9)
    np.testing.assert_allclose(norm.variance, data.var(axis=0), atol=1e-9)

    first = memo.RunningNormalizer(3)
    x = np.array([1.0, -2.0, 4.0])
    first.update(x)
    np.testing.assert_array_equal(first.normalize(x), np.zeros(3))


def test_orthogonal_init_gram():
    q = memo.orthogonal_init(6, 6, 1.0, seed=5)
    np.testing.assert_allclose(q.T @ q, np.eye(6), atol=1e-10)
    wide = memo.orthogonal_init(3, 9, 2.0, seed=5)
    np.testing.assert_allclose(wide @ wide.T, 4.0 * np.eye(3), atol=1e-10)


def test_jacobi_svd_matches_numpy():
    rng = np.random.default_rng(13)
    matrix = rng.normal(size=(8, 40))
    s, u, v = memo.jacobi_svd(matrix)
    np.testing.assert_allclose(s, np.linalg.svd(matrix, compute_uv=False), atol=1e-9)
    np.testing.assert_allclose(u @ np.diag(s) @ v.T, matrix, atol=1e-9)


def test_gae_matches_reference_loop():
    rng = np.random.default_rng(17)
    steps = 40
    rewards = rng.normal(size=steps)
    values = rng.normal(size=steps)
    dones = (rng.uniform(size=steps) < 0.15).astype(float)
    bootstrap = 0.37
    gamma, lam = 0.99, 0.95

    adv, ret = memo.gae(rewards, values, dones, bootstrap, gamma, lam)

    expected = np.zeros(steps)
    acc = 0.0
    for t in reversed(range(steps)):
        next_v = values[t + 1] if t + 1 < steps else bootstrap
        delta = rewards[t] + gamma * next_v * (1 - dones[t]) - values[t]
        acc = delta + gamma * lam * (1 - dones[t]) * acc
        expected[t] = acc
    np.testing.assert_allclose(adv, expected, atol=1e-12)
    np.testing.assert_allclose(ret, expected + values, atol=1e-12)


def test_log_prob_closed_form():
    means = np.zeros(4)
    logstd = np.zeros(4)
    at_mode = memo.log_prob(means, logstd, means)
    assert at_mode == pytest.approx(-0.5 * math.log(2 * math.pi) * 4)
    one = memo.log_prob(np.zeros(1), np.zeros(1), np.ones(1))
    assert one == pytest.approx(-1.4189385, abs=1e-6)


def test_run_experiment_and_checkpoint(tmp_path):
    os.environ["MEMO_THREADS"] = "1"
    config = tmp_path / "expert.cfg"
    config.write_text(
        "phase = train_expert\n"
        "seeds = 3\n"
        f"output_dir = {tmp_path / 'runs'}\n"
        "[env]\n"
        "kind = crawler\n"
        "segments = 2\n"
        "legs = 2\n"
        "episode_len = 16\n"
        "[policy]\n"
        "signal_dim = 8\n"
        "module_hidden = 8\n"
        "architecture = modular\n"
        "[rl]\n"
        "total_timesteps = 128\n"
        "batch_size = 64\n"
        "num_envs = 2\n"
        "epochs = 2\n"
        "minibatch_count = 2\n"
    )
    run_dirs = memo.run_experiment(str(config))
    assert len(run_dirs) == 1
    ckpt_path = os.path.join(run_dirs[0], "checkpoint.memockpt")
    assert os.path.exists(ckpt_path)
    assert os.path.exists(os.path.join(run_dirs[0], "metrics.csv"))

    ckpt = memo.load_checkpoint(ckpt_path)
    assert ckpt.is_modular
    assert ckpt.env_kind == "crawler"
    env = memo.Env(memo.EnvConfig(kind="crawler", count_a=2, count_b=2))
    action = ckpt.mean_action(env.reset())
    assert action.shape == (5,)
    assert np.isfinite(ckpt.evaluate(episodes=1, seed=1))

    summary = memo.spectrum_summary(ckpt, num_trajectories=1, seed=2)
    assert 0.0 <= summary["pooled_median"] <= 1.0

    missing = tmp_path / "missing.cfg"
    missing.write_text(
        "phase = pretrain\n[env]\nkind = crawler\n"
        f"[il]\nexpert_checkpoint = {tmp_path / 'nope.memockpt'}\n"
    )
    with pytest.raises(FileNotFoundError):
        memo.run_experiment(str(missing))
