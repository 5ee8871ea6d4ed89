"""How many dimensions do the task embeddings actually use?

Trains briefly on the grid so the trajectory VAE sees a spread of tasks,
embeds every buffered trajectory, and runs classical multidimensional
scaling on the posterior means. Goals vary along two axes, so roughly two
eigenvalues of the double-centered Gram matrix should carry almost all of
the mass — the latent space inherits the intrinsic dimension of the task
distribution rather than its own nominal width.

Usage:
    python demos/latent_space_tour.py [total_steps] [seed]
"""

import sys

import numpy as np

from acrl.cli import build_run
from acrl.config import config_from_dict
from acrl.curriculum import AcrlRunner, source_distribution_init
from acrl.envs import Context
from acrl.mds import mds_spectrum


def main():
    total_steps = int(sys.argv[1]) if len(sys.argv) > 1 else 80_000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    cfg = config_from_dict({"family": "grid", "seed": seed,
                            "total_steps": total_steps, "latent_dim": 4})
    env, policy, learner, ccfg, rng = build_run(cfg)
    runner = AcrlRunner(env, policy, learner, ccfg, rng,
                        rollout_steps=cfg.rollout_steps,
                        ppo_epochs=cfg.ppo_epochs,
                        minibatch_size=cfg.minibatch_size)
    source_distribution_init(runner.task_buffer, Context(cfg.source_center),
                             cfg.source_std, cfg.source_count, env, rng)
    runner.run()

    means = np.array([learner.embed_task(traj).mean
                      for _, traj in runner.vae_buffer.entries
                      if len(traj) > 0])
    print(f"{len(means)} embedded trajectories, nominal latent dim "
          f"{means.shape[1]}")
    report = mds_spectrum(means)
    total = np.sum(np.maximum(report.eigenvalues, 0.0))
    print("eigenvalue   share")
    for ev in report.eigenvalues:
        share = max(ev, 0.0) / total if total > 0 else 0.0
        bar = "#" * int(50 * share)
        print(f"{ev:>10.4f}   {share:5.1%} {bar}")
    print(f"top-2 mass: {report.top2_mass:.3f}")


if __name__ == "__main__":
    main()
