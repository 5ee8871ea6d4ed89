"""Curriculum on the continuous U-maze.

The point mass starts at the bottom-left opening of a U-shaped corridor
and the target goal sits around the bend at the top-left, so random
exploration almost never stumbles onto it. The curriculum seeds easy
goals next to the start and pushes the goal distribution around the bend.
Prints a check-by-check trace and stops early once greedy target return
clears the success threshold.

Usage:
    python demos/point_maze_curriculum.py [total_steps] [seed]
"""

import sys

from acrl.cli import build_run
from acrl.config import config_from_dict
from acrl.curriculum import AcrlRunner, source_distribution_init
from acrl.envs import Context


def main():
    total_steps = int(sys.argv[1]) if len(sys.argv) > 1 else 400_000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    cfg = config_from_dict({"family": "point", "seed": seed,
                            "total_steps": total_steps})
    env, policy, learner, ccfg, rng = build_run(cfg)

    def report(runner, rec):
        print(f"step {rec.env_steps:>8}  train {rec.mean_train_return:+7.1f}  "
              f"target {rec.target_return:+7.1f}  {rec.updater:<4} "
              f"generated {rec.n_generated:>3}")

    runner = AcrlRunner(env, policy, learner, ccfg, rng,
                        rollout_steps=cfg.rollout_steps,
                        ppo_epochs=cfg.ppo_epochs,
                        minibatch_size=cfg.minibatch_size,
                        stop_at_return=-40.0, on_record=report)
    source_distribution_init(runner.task_buffer, Context(cfg.source_center),
                             cfg.source_std, cfg.source_count, env, rng)
    print(f"target {cfg.target}, success threshold -40, "
          f"budget {total_steps} steps")
    runner.run()

    goals = [ctx.values for ctx in runner.task_buffer.contexts]
    if goals:
        xs = [g[0] for g in goals]
        ys = [g[1] for g in goals]
        print(f"\nfinal goal distribution: x in [{min(xs):.1f}, {max(xs):.1f}],"
              f" y in [{min(ys):.1f}, {max(ys):.1f}] ({len(goals)} goals)")
    print(f"counters: {runner.counts}")


if __name__ == "__main__":
    main()
