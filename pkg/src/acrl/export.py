"""Curriculum snapshot and run-log export: schema-stable CSVs and a plain
textual PGM heatmap for grid families.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .envs.gridmaze import GridMazeEnv

RUN_LOG_COLUMNS = [
    "env_steps", "episode", "mean_train_return", "target_return", "updater",
    "n_generated", "mean_latent_dist_to_target", "vae_loss",
    "task_decoder_loss",
]

SNAPSHOT_GRID_COLUMNS = ["cell_x", "cell_y", "count", "mean_eval_return"]
SNAPSHOT_POINT_COLUMNS = ["x", "y"]


def _fmt(value):
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_run_log(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_LOG_COLUMNS)
        for r in records:
            writer.writerow([
                r.env_steps, r.episode, _fmt(r.mean_train_return),
                _fmt(r.target_return), r.updater, r.n_generated,
                _fmt(r.mean_latent_dist_to_target), _fmt(r.vae_loss),
                _fmt(r.task_decoder_loss)])


def export_curriculum_snapshot(task_buffer, env, path,
                               returns_by_context=None):
    """Dump the task buffer: per-cell counts plus a PGM heatmap for grid
    families, a raw scatter CSV for continuous ones."""
    if isinstance(env, GridMazeEnv):
        _export_grid(task_buffer, env, path, returns_by_context or {})
    else:
        _export_point(task_buffer, path)


def _export_grid(task_buffer, env, path, returns_by_context):
    counts = {}
    for ctx in task_buffer.contexts:
        cell = (int(round(ctx.values[0])), int(round(ctx.values[1])))
        counts[cell] = counts.get(cell, 0) + 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_GRID_COLUMNS)
        for cell in sorted(counts):
            ret = returns_by_context.get(cell, float("nan"))
            writer.writerow([cell[0], cell[1], counts[cell], _fmt(ret)])
    pgm_path = os.path.splitext(path)[0] + ".pgm"
    w, h = env.spec.width, env.spec.height
    grid = np.zeros((h, w), dtype=int)
    for (x, y), n in counts.items():
        if 0 <= x < w and 0 <= y < h:
            grid[y, x] = n
    peak = max(grid.max(), 1)
    with open(pgm_path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in grid:
            fh.write(" ".join(str(int(255 * v / peak)) for v in row) + "\n")


def _export_point(task_buffer, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SNAPSHOT_POINT_COLUMNS)
        for ctx in task_buffer.contexts:
            writer.writerow([_fmt(float(ctx.values[0])),
                             _fmt(float(ctx.values[1]))])


def write_embeddings(embeddings, path):
    """CSV dump of task embeddings: latent mean columns, source context
    columns, episodic return."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if not embeddings:
            writer.writerow(["z0", "z1", "c0", "c1", "return"])
            return
        d = len(embeddings[0].mean)
        cd = embeddings[0].source_context.dim
        header = ([f"z{i}" for i in range(d)]
                  + [f"c{i}" for i in range(cd)] + ["return"])
        writer.writerow(header)
        for emb in embeddings:
            row = [_fmt(float(v)) for v in emb.mean]
            row += [_fmt(float(v)) for v in emb.source_context.values]
            row.append(_fmt(float(emb.source_return)))
            writer.writerow(row)


def read_embedding_means(path):
    """Latent mean matrix from an embeddings CSV."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        zcols = [i for i, name in enumerate(header) if name.startswith("z")]
        rows = [[float(r[i]) for i in zcols] for r in reader]
    return np.array(rows)
