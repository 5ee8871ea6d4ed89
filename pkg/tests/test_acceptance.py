"""End-to-end acceptance checks, one test per shipped guarantee.

The end-to-end training runs (grid two-room maze and continuous U-maze)
are marked ``slow``; everything else finishes in well under a minute.
Run the full set with ``pytest tests/test_acceptance.py`` or skip the
training runs with ``-m "not slow"``.
"""

import json
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from acrl.cli import build_run, gradcheck_suite, main
from acrl.config import config_from_dict
from acrl.curriculum import AcrlRunner, source_distribution_init
from acrl.envs import Context, make_env
from acrl.envs.gridmaze import (FORWARD, PICKUP, TOGGLE, TURN_LEFT,
                                TURN_RIGHT, GridMazeEnv, parse_layout)
from acrl.mds import mds_spectrum
from acrl.nn import DiagGaussian
from acrl.taskrepr import TaskEmbedding, aggregate_trajectory

SEEDS = [0, 1, 2, 3, 4]


# 1. gradient suite ----------------------------------------------------------

def test_gradient_suite_twenty_seeds():
    t0 = time.time()
    worst = {}
    for seed in range(20):
        for name, err in gradcheck_suite(seed=seed).items():
            worst[name] = max(worst.get(name, 0.0), err)
    elapsed = time.time() - t0
    for name, err in worst.items():
        assert err < 1e-4, f"{name}: {err:.3e}"
    assert elapsed < 60.0, f"gradient suite took {elapsed:.1f}s"


# 2. product of Gaussians ----------------------------------------------------

def _numeric_product_1d(m1, v1, m2, v2):
    """Mean/variance of the normalized product of two 1-D Gaussian pdfs,
    computed by quadrature."""
    lo = min(m1, m2) - 8.0 * max(np.sqrt(v1), np.sqrt(v2))
    hi = max(m1, m2) + 8.0 * max(np.sqrt(v1), np.sqrt(v2))
    x = np.linspace(lo, hi, 20001)
    p = (np.exp(-0.5 * (x - m1) ** 2 / v1) *
         np.exp(-0.5 * (x - m2) ** 2 / v2))
    p /= np.trapezoid(p, x)
    mean = np.trapezoid(x * p, x)
    var = np.trapezoid((x - mean) ** 2 * p, x)
    return mean, var


def test_product_of_gaussians_vs_density_oracle():
    t0 = time.time()
    rng = np.random.default_rng(42)
    for _ in range(200):
        m = rng.normal(0.0, 2.0, size=2)
        v = rng.uniform(0.1, 3.0, size=2)
        agg = aggregate_trajectory([
            DiagGaussian(np.array([m[0]]), np.array([np.log(v[0])])),
            DiagGaussian(np.array([m[1]]), np.array([np.log(v[1])]))])
        mean_o, var_o = _numeric_product_1d(m[0], v[0], m[1], v[1])
        assert agg.mean[0] == pytest.approx(mean_o, abs=1e-4)
        assert np.exp(agg.log_var[0]) == pytest.approx(var_o, abs=1e-4)
    assert time.time() - t0 < 10.0


def test_product_of_gaussians_permutation_invariance():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 12))
        d = int(rng.integers(1, 5))
        gs = [DiagGaussian(rng.normal(size=d), rng.uniform(-2, 2, size=d))
              for _ in range(n)]
        ref = aggregate_trajectory(gs)
        perm = [gs[i] for i in rng.permutation(n)]
        got = aggregate_trajectory(perm)
        assert np.max(np.abs(got.mean - ref.mean)) < 1e-6
        assert np.max(np.abs(got.log_var - ref.log_var)) < 1e-6


def test_product_of_gaussians_precision_monotonic():
    rng = np.random.default_rng(8)
    for _ in range(100):
        gs = [DiagGaussian(rng.normal(size=3), rng.uniform(-2, 2, size=3))
              for _ in range(int(rng.integers(1, 8)))]
        agg = aggregate_trajectory(gs)
        agg_prec = np.exp(-agg.log_var)
        total = sum(np.exp(-g.log_var) for g in gs)
        assert np.allclose(agg_prec, total)
        for g in gs:
            # the round-trip through log space costs a couple of ulps
            assert np.all(agg_prec >= np.exp(-g.log_var) * (1.0 - 1e-12))


# 3. reward semantics --------------------------------------------------------

_KEYED = """\
width 7
height 5
max_steps 30
has_key true
#######
#SE..#.#
#...D.#
#..L#.#
#######
"""


def test_grid_goal_reward_exact():
    env = GridMazeEnv(parse_layout("""\
width 5
height 5
max_steps 20
has_key false
#####
#SE..#
#...#
#...#
#####
"""))
    env.reset(Context([3.0, 1.0]))
    env.step(FORWARD)
    _, r, done, _ = env.step(FORWARD)
    assert done and r == 1.0 - 0.5 * 2 / 20


def test_grid_key_door_lava_rewards_exact():
    env = GridMazeEnv(parse_layout(_KEYED))
    env.reset(Context([5.0, 1.0, 2.0, 2.0]))
    env.step(FORWARD)                    # (2,1), key below
    env.step(TURN_RIGHT)
    _, r_key, _, info = env.step(PICKUP)
    assert r_key == 0.5 * (1.0 - 0.5 * info["steps"] / 30)
    env.step(FORWARD)                    # (2,2)
    env.step(TURN_LEFT)
    env.step(FORWARD)                    # (3,2), door ahead
    _, r_door, _, _ = env.step(TOGGLE)
    assert r_door == 0.25
    _, r_again, _, _ = env.step(TOGGLE)  # closing pays nothing
    assert r_again == 0.0

    env.reset(Context([5.0, 1.0, 1.0, 2.0]))
    env.step(FORWARD)
    env.step(TURN_RIGHT)
    env.step(FORWARD)
    env.step(TURN_LEFT)
    env.step(FORWARD)                    # (3,2)
    env.step(TURN_RIGHT)                 # lava ahead at (3,3)
    _, r_lava, done, _ = env.step(FORWARD)
    assert done and r_lava == -0.5

    env.reset(Context([5.0, 1.0, 1.0, 2.0]))
    env.step(FORWARD)
    env.step(TURN_RIGHT)
    env.step(FORWARD)
    env.step(TURN_LEFT)
    env.step(FORWARD)                    # (3,2), locked door ahead
    _, r_locked, done, _ = env.step(FORWARD)
    assert done and r_locked == -0.5


def test_point_rewards_exact():
    env = make_env("point")
    env.reset(Context([0.0, 8.0]))
    _, r, done, _ = env.step(np.array([0.5, 0.0]))
    assert r == -1.0 and not done
    env.reset(Context([2.5, 0.0]))
    _, r, done, _ = env.step(np.array([0.3, 0.0]))
    assert done and r == 0.0  # -1 step penalty + 1 success bonus


# 4. algorithm steps ---------------------------------------------------------

def test_lsp_endpoints():
    from acrl.curriculum import VaeBuffer, lsp_update
    from acrl.envs import Trajectory, Transition

    env = make_env("grid", "easy_a")

    class _Identity:
        task_decoder = None

        def forward(self, z):
            return np.asarray(z, dtype=np.float64)

    class _Learner:
        def __init__(self):
            self.decoders = _Identity()
            self.decoders.task_decoder = self.decoders

        def embed_task(self, traj):
            m = traj.context.asarray()
            return TaskEmbedding(DiagGaussian(m, np.zeros_like(m)),
                                 traj.context, 1.0)

    buf = VaeBuffer(8)
    for cell in [(2.0, 2.0), (3.0, 2.0)]:
        t = Trajectory(Context(cell))
        t.append(Transition(np.zeros(1), 0, 1.0, np.zeros(1)))
        buf.push(Context(cell), t)
    target = TaskEmbedding(DiagGaussian(np.array([8.0, 1.0]), np.zeros(2)),
                           Context([8.0, 1.0]), 1.0)
    at_one = lsp_update(buf, _Learner(), target, 1.0, 0.4, env)
    assert all(c.values == (8.0, 1.0) for c in at_one)
    at_zero = lsp_update(buf, _Learner(), target, 0.0, 0.4, env)
    assert [c.values for c in at_zero] == [(2.0, 2.0), (3.0, 2.0)]


def test_ebu_index_zero_probability():
    from acrl.curriculum import VaeBuffer, ebu_update
    from acrl.envs import Trajectory, Transition

    t0 = time.time()
    env = make_env("point")

    class _Learner:
        decoders = None

        def embed_task(self, traj):
            m = traj.context.asarray()
            return TaskEmbedding(DiagGaussian(m, np.zeros_like(m)),
                                 traj.context, 1.0)

    buf = VaeBuffer(64)
    for i in range(30):
        c = Context([6.0 + 0.1 * i, 8.0])
        t = Trajectory(c)
        t.append(Transition(np.zeros(1), 0, 10.0, np.zeros(1)))
        buf.push(c, t)
    target = TaskEmbedding(DiagGaussian(np.array([6.0, 8.0]), np.zeros(2)),
                           Context([6.0, 8.0]), 1.0)
    rng = np.random.default_rng(3)
    _, dists = ebu_update(buf, _Learner(), target, 1.0, 1e-9, -100.0, env,
                          100_000, rng, return_distances=True)
    nearest = min(dists)
    p0 = np.mean([d == nearest for d in dists])
    assert p0 == pytest.approx(1.0 - np.exp(-0.5), abs=0.01)
    assert time.time() - t0 < 30.0


def test_gating_and_switching(monkeypatch):
    from acrl.agent import Policy
    from acrl.curriculum import CurriculumConfig
    from acrl.envs import Trajectory, Transition
    from acrl.taskrepr import RepresentationLearner

    env = make_env("grid", "easy_a")
    rng = np.random.default_rng(10)
    learner = RepresentationLearner(env, 2, rng)
    policy = Policy(env.observation_dim, *env.context_bounds(),
                    n_actions=env.n_actions, hidden=(8, 8), rng=rng)
    cfg = CurriculumConfig(Context([8.0, 1.0]), total_steps=10 ** 9,
                           n_u=1, k=1, m=4)
    runner = AcrlRunner(env, policy, learner, cfg, rng,
                        rollout_steps=10 ** 9)

    def rollout(cell):
        ctx = Context(cell)
        obs = env.reset(ctx)
        traj = Trajectory(ctx)
        for _ in range(3):
            nobs, _, done, _ = env.step(5)
            traj.append(Transition(obs, 5, 0.3, nobs))
            obs = nobs
            if done:
                break
        return traj

    for cell in [(2.0, 2.0), (3.0, 2.0)]:
        runner.vae_buffer.push(Context(cell), rollout(cell))
    runner.best_target_trajectory = rollout((8.0, 1.0))
    runner.best_target_return = 0.9

    # gate closed: mean training return below the threshold, no updater runs
    monkeypatch.setattr(runner, "train_eval_return", lambda: 0.1)
    monkeypatch.setattr(runner, "target_eval", lambda: 0.0)
    runner._curriculum_check()
    assert runner.records[-1].updater == "none"

    # gate open: target return crossing delta_tar switches EBU -> LSP and
    # dropping back re-enables EBU
    monkeypatch.setattr(runner, "train_eval_return", lambda: 0.9)
    schedule = iter([0.1, 0.2, 0.6, 0.7, 0.2])
    monkeypatch.setattr(runner, "target_eval", lambda: next(schedule))
    for _ in range(5):
        runner._curriculum_check()
    assert [r.updater for r in runner.records[1:]] == [
        "EBU", "EBU", "LSP", "LSP", "EBU"]


# 5. embedding-dimension spectra ---------------------------------------------

def test_mds_planted_dimensions():
    t0 = time.time()
    rng = np.random.default_rng(11)
    for d in (1, 2, 3):
        pts = np.zeros((40, 5))
        pts[:, :d] = rng.standard_normal((40, d))
        # random rotation hides the planted subspace from the axes
        q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        report = mds_spectrum(pts @ q.T)
        lam1 = report.eigenvalues[0]
        dominant = int(np.sum(report.eigenvalues > 1e-6 * lam1))
        assert dominant == d
    degenerate = mds_spectrum(np.ones((10, 3)))
    assert np.max(np.abs(degenerate.eigenvalues)) < 1e-9
    assert time.time() - t0 < 5.0


# 6-8. end-to-end training runs ----------------------------------------------

def _train(family, strategy, seed, stop_at):
    doc = {"family": family, "seed": seed, "strategy": strategy}
    cfg = config_from_dict(doc)
    cfg.stop_at_return = stop_at
    env, policy, learner, ccfg, rng = build_run(cfg)
    runner = AcrlRunner(env, policy, learner, ccfg, rng,
                        strategy=strategy, rollout_steps=cfg.rollout_steps,
                        ppo_epochs=cfg.ppo_epochs,
                        minibatch_size=cfg.minibatch_size,
                        stop_at_return=stop_at)
    if strategy == "acrl":
        source_distribution_init(runner.task_buffer,
                                 Context(cfg.source_center), cfg.source_std,
                                 cfg.source_count, env, rng)
    return runner.run()


def _time_to_threshold(records, threshold):
    for r in records:
        if np.isfinite(r.target_return) and r.target_return >= threshold:
            return r.env_steps
    return np.inf


@pytest.fixture(scope="session")
def grid_runs():
    # the curriculum runs go the full budget (the drift check needs the
    # whole latent-interpolation phase, and first-crossing time can be read
    # off the records); the baselines stop as soon as they reach threshold
    out = {"acrl": {seed: _train("grid", "acrl", seed, None)
                    for seed in SEEDS}}
    for strategy in ("default", "random"):
        out[strategy] = {seed: _train("grid", strategy, seed, 0.75)
                         for seed in SEEDS}
    return out


@pytest.mark.slow
def test_grid_curriculum_beats_baselines(grid_runs):
    acrl_ttt = [_time_to_threshold(grid_runs["acrl"][s], 0.75)
                for s in SEEDS]
    default_ttt = [_time_to_threshold(grid_runs["default"][s], 0.75)
                   for s in SEEDS]
    random_ttt = [_time_to_threshold(grid_runs["random"][s], 0.75)
                  for s in SEEDS]
    assert sum(np.isfinite(t) for t in acrl_ttt) >= 4, acrl_ttt
    assert sum(np.isfinite(t) for t in default_ttt) <= 1, default_ttt
    assert np.median(acrl_ttt) < np.median(random_ttt), (acrl_ttt,
                                                         random_ttt)


@pytest.mark.slow
def test_grid_curriculum_drifts_toward_target(grid_runs):
    checked = 0
    for seed in SEEDS:
        records = grid_runs["acrl"][seed]
        if not np.isfinite(_time_to_threshold(records, 0.75)):
            continue
        updaters = [r.updater for r in records]
        last_ebu = max((i for i, u in enumerate(updaters) if u == "EBU"),
                       default=-1)
        phase = [(i, r.mean_latent_dist_to_target)
                 for i, r in enumerate(records)
                 if i > last_ebu and r.updater == "LSP"
                 and np.isfinite(r.mean_latent_dist_to_target)]
        if len(phase) < 4:
            phase = [(i, r.mean_latent_dist_to_target)
                     for i, r in enumerate(records)
                     if r.updater == "LSP"
                     and np.isfinite(r.mean_latent_dist_to_target)]
        if len(phase) < 4:
            continue
        idx, dist = zip(*phase)
        rho = spearmanr(idx, dist).statistic
        assert rho <= -0.5, f"seed {seed}: rho={rho:.2f} over {len(idx)}"
        checked += 1
    assert checked >= 1


@pytest.mark.slow
def test_point_curriculum_reaches_target():
    acrl_ok = sum(
        np.isfinite(_time_to_threshold(
            _train("point", "acrl", seed, -40.0), -40.0))
        for seed in SEEDS)
    default_ok = sum(
        np.isfinite(_time_to_threshold(
            _train("point", "default", seed, -40.0), -40.0))
        for seed in SEEDS)
    assert acrl_ok >= 3, acrl_ok
    assert default_ok == 0, default_ok


# 9. determinism -------------------------------------------------------------

def test_train_is_byte_deterministic(tmp_path):
    doc = {"family": "grid", "seed": 5, "total_steps": 6000,
           "rollout_steps": 512, "n_u": 20, "k": 2, "m": 8,
           "update_threshold": -1.0, "source_count": 16}
    outputs = []
    for run in ("a", "b"):
        cfg = dict(doc, out_dir=str(tmp_path / run))
        path = tmp_path / f"{run}.json"
        path.write_text(json.dumps(cfg))
        assert main(["train", "--config", str(path)]) == 0
        outputs.append({name: (tmp_path / run / name).read_bytes()
                        for name in ("run_log.csv", "checkpoint.bin")})
    assert outputs[0]["run_log.csv"] == outputs[1]["run_log.csv"]
    assert outputs[0]["checkpoint.bin"] == outputs[1]["checkpoint.bin"]
