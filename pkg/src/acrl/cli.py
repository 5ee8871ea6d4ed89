"""Command-line entry point: train / eval / analyze-mds / gradcheck."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from .agent import Policy, actor_loss_and_grads, critic_loss_and_grads, evaluate
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .curriculum import AcrlRunner, CurriculumConfig, source_distribution_init
from .envs import Context, make_env
from .export import (export_curriculum_snapshot, write_embeddings,
                     write_run_log, read_embedding_means)
from .mds import mds_spectrum
from .nn import Mlp, finite_diff_check
from .taskrepr import RepresentationLearner, elbo_forward_backward


def rollout_workers():
    """Worker cap from ACRL_THREADS; collection is serial, so this only
    validates the setting."""
    raw = os.environ.get("ACRL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"ACRL_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("ACRL_THREADS must be >= 1")
    return n


def build_run(cfg):
    """Construct (env, policy, learner, curriculum config, rng) from a
    validated RunConfig."""
    rng = np.random.default_rng(cfg.seed)
    env = make_env(cfg.family, cfg.layout)
    low, high = env.context_bounds()
    kind = ({"n_actions": env.n_actions} if hasattr(env, "n_actions")
            else {"action_dim": env.action_dim})
    policy = Policy(env.observation_dim, low, high, gamma=cfg.gamma,
                    gae_lambda=cfg.gae_lambda, clip_eps=cfg.clip_eps,
                    entropy_coef=cfg.entropy_coef, lr=cfg.policy_lr,
                    rng=rng, **kind)
    learner = RepresentationLearner(env, cfg.latent_dim, rng, lr=cfg.vae_lr,
                                    batch_size=cfg.vae_batch_size,
                                    kl_weight=cfg.kl_weight)
    ccfg = CurriculumConfig(
        target_context=Context(cfg.target), total_steps=cfg.total_steps,
        delta=cfg.delta, delta_tar=cfg.delta_tar,
        update_threshold=cfg.update_threshold,
        sampling_ratio=cfg.sampling_ratio, alpha=cfg.alpha, beta=cfg.beta,
        sigma=cfg.sigma, n_u=cfg.n_u, k=cfg.k, m=cfg.m,
        vae_buffer_size=cfg.vae_buffer_size,
        task_buffer_size=cfg.task_buffer_size,
        ebu_sort_order=cfg.ebu_sort_order)
    return env, policy, learner, ccfg, rng


def cmd_train(cfg, snapshots=False):
    rollout_workers()
    env, policy, learner, ccfg, rng = build_run(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)

    def snapshot_hook(runner, record):
        path = os.path.join(cfg.out_dir, f"snapshot_{record.episode:07d}.csv")
        export_curriculum_snapshot(runner.task_buffer, env, path)

    runner = AcrlRunner(env, policy, learner, ccfg, rng,
                        strategy=cfg.strategy,
                        rollout_steps=cfg.rollout_steps,
                        ppo_epochs=cfg.ppo_epochs,
                        minibatch_size=cfg.minibatch_size,
                        stop_at_return=cfg.stop_at_return,
                        on_record=snapshot_hook if snapshots else None)
    if cfg.strategy == "acrl" and cfg.source_center:
        source_distribution_init(runner.task_buffer,
                                 Context(cfg.source_center), cfg.source_std,
                                 cfg.source_count, env, rng)
    records = runner.run()
    write_run_log(records, os.path.join(cfg.out_dir, "run_log.csv"))
    ckpt.save_arrays(os.path.join(cfg.out_dir, "checkpoint.bin"),
                     ckpt.state_to_arrays(policy, learner))
    embeddings = [learner.embed_task(traj)
                  for _, traj in runner.vae_buffer.entries
                  if len(traj) > 0]
    write_embeddings(embeddings, os.path.join(cfg.out_dir, "embeddings.csv"))
    export_curriculum_snapshot(runner.task_buffer, env,
                               os.path.join(cfg.out_dir, "snapshot_final.csv"))
    print(f"done: {runner.env_steps} env steps, {runner.episode + 1} episodes, "
          f"records={len(records)}")
    return 0


def cmd_eval(cfg, checkpoint_path):
    env, policy, learner, ccfg, _ = build_run(cfg)
    ckpt.arrays_to_state(ckpt.load_arrays(checkpoint_path), policy, learner)
    ret = evaluate(policy, env, ccfg.target_context, ccfg.k)
    print(f"mean_target_return {ret!r}")
    return 0


def cmd_analyze_mds(embeddings_path, out_path):
    means = read_embedding_means(embeddings_path)
    report = mds_spectrum(means)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "eigenvalue"])
        for i, ev in enumerate(report.eigenvalues):
            writer.writerow([i, repr(float(ev))])
    print(f"n_points {report.n_points} top2_mass {report.top2_mass!r}")
    return 0


def _jitter(param_arrays, rng, scale=0.05):
    # Biases initialize to zero, which can leave whole relu layers parked
    # exactly on the kink; finite differences straddle the kink and disagree
    # with the (subgradient) analytic value there. Checking at a generic
    # point avoids the degeneracy.
    for p in param_arrays:
        p += scale * rng.standard_normal(p.shape)


def gradcheck_suite(seed=0):
    """Finite-difference suites over the trainable losses on small random
    nets. Returns {suite_name: max relative error}."""
    rng = np.random.default_rng(seed)
    errs = {}

    # policy losses (discrete actor + critic)
    policy = Policy(6, [0, 0], [9, 9], n_actions=4, hidden=(8, 8), rng=rng)
    _jitter(policy.actor.params() + policy.critic.params(), rng)
    x = rng.standard_normal((5, 8))
    actions = rng.integers(0, 4, size=5)
    old_logp = -np.log(4.0) * np.ones(5)
    adv = rng.standard_normal(5)
    returns = rng.standard_normal(5)

    def actor_fn(params):
        policy.actor.set_params(params)
        loss, grads, _, _ = actor_loss_and_grads(policy, x, actions,
                                                 old_logp, adv)
        return loss, grads

    errs["actor"] = finite_diff_check(actor_fn, policy.actor.params(), 1e-5)

    def critic_fn(params):
        policy.critic.set_params(params)
        loss, grads, _ = critic_loss_and_grads(policy, x, returns)
        return loss, grads

    errs["critic"] = finite_diff_check(critic_fn, policy.critic.params(),
                                       1e-5)

    # ELBO on a tiny encoder/decoder pair
    from .taskrepr import TransitionEncoder, VaeDecoders

    enc = TransitionEncoder(5, 3, 2, rng, embed_dims=(8, 4, 4), hidden=8)
    dec = VaeDecoders(2, 5, 2, rng, hidden=8, reward_hidden=8)
    _jitter(enc.params() + dec.elbo_params(), rng)
    s = rng.standard_normal((3, 5))
    a = np.eye(3)
    r = rng.standard_normal(3)
    sp = rng.standard_normal((3, 5))
    eps = rng.standard_normal((3, 2))

    def elbo_fn(params):
        n_enc = len(enc.params())
        enc.set_params(params[:n_enc])
        dec.set_elbo_params(params[n_enc:])
        loss, _, eg, dg = elbo_forward_backward(enc, dec, s, a, r, sp, 0.1,
                                                eps)
        return loss, eg + dg

    errs["elbo"] = finite_diff_check(elbo_fn,
                                     enc.params() + dec.elbo_params(), 1e-5)

    # task decoder loss
    tdec = Mlp([2, 8, 8, 2], activation="relu", init="fan_in", rng=rng)
    _jitter(tdec.params(), rng)
    z = rng.standard_normal((4, 2))
    c = rng.standard_normal((4, 2))

    def task_fn(params):
        tdec.set_params(params)
        out = tdec.forward(z)
        diff = out - c
        grads, _ = tdec.backward(2.0 * diff)
        return float(np.sum(diff ** 2)), grads

    errs["task_decoder"] = finite_diff_check(task_fn, tdec.params(), 1e-5)
    return errs


def cmd_gradcheck():
    failures = []
    for name, err in gradcheck_suite().items():
        print(f"{name} loss: max rel err {err:.3e}")
        if err >= 1e-4:
            failures.append(name)
    if failures:
        print(f"FAILED: {failures}")
        return 1
    print("all gradient checks passed")
    return 0


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.strategy is not None:
        cfg.strategy = args.strategy
    return cfg


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="acrl",
        description="Latent-representation curriculum RL engine")
    sub = parser.add_subparsers(dest="command")

    def add_common(p):
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.add_argument("--strategy",
                       choices=["acrl", "random", "default"], default=None)

    p_train = sub.add_parser("train", help="run a full training job")
    add_common(p_train)
    p_train.add_argument("--snapshots", action="store_true",
                         help="dump a task-buffer snapshot at every update")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the target")
    add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)

    p_mds = sub.add_parser("analyze-mds",
                           help="spectrum of dumped task embeddings")
    p_mds.add_argument("--embeddings", required=True)
    p_mds.add_argument("--out", default="mds_spectrum.csv")

    sub.add_parser("gradcheck", help="finite-difference gradient suites")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    if args.command is None:
        parser.print_usage()
        return 2
    try:
        if args.command == "train":
            cfg = _apply_overrides(load_config(args.config), args)
            return cmd_train(cfg, snapshots=args.snapshots)
        if args.command == "eval":
            cfg = _apply_overrides(load_config(args.config), args)
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "analyze-mds":
            return cmd_analyze_mds(args.embeddings, args.out)
        if args.command == "gradcheck":
            return cmd_gradcheck()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
