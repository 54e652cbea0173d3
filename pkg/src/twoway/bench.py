"""Benchmark grids: the synthetic linear/logistic comparisons and the real-data run,
all four algorithms on one dataset."""
import logging

import numpy as np

from . import engine
from .config import ALGOS, RunConfig
from .errors import ConfigError

log = logging.getLogger(__name__)

# full-size grids; --scale multiplies n and d
FIGURES = {
    "fig1": dict(model="linear", m=20, n=600, d=20000, s=10, rounds=10),
    "fig2": dict(model="logistic", m=10, n=1000, d=2000, s=20, rounds=10),
    "fig3": dict(model="logistic", m=10, rounds=10),
}


def figure_config(name, scale=1.0):
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}")
    if not scale > 0:
        raise ConfigError("--scale must be positive")
    grid = dict(FIGURES[name])
    for key in ("n", "d"):
        if key in grid:
            grid[key] = max(1, int(round(grid[key] * scale)))
    if "d" in grid:
        grid["s"] = min(grid["s"], grid["d"])
    return RunConfig(algo="twoway", **grid)


def validation_loss(cfg, shards, val):
    trace = engine.run(cfg, shards, holdout=val)
    return trace.rows[-1].holdout_loss


def select_mu_min(cfg, shards, val, grid):
    """Pick the mu floor from ``grid`` with the smallest validation loss of the final iterate."""
    if val is None:
        raise ConfigError("--mu-grid needs a validation split (real data)")
    if any(not g > 0 for g in grid):
        raise ConfigError("--mu-grid values must be positive")
    scores = []
    for g in grid:
        loss = validation_loss(cfg.replace(mu_min=g, timing=False), shards, val)
        log.info("%s mu_min=%g validation loss %.6g", cfg.algo, g, loss)
        scores.append(loss)
    best = grid[int(np.argmin(scores))]
    return cfg.replace(mu_min=best)


def run_all(cfg, mu_grid=None, algos=ALGOS):
    """Run every algorithm on the dataset ``cfg`` describes; returns their traces."""
    from .cli import load_problem

    shards, theta_star, val, test = load_problem(cfg)
    traces = []
    for algo in algos:
        c = cfg.replace(algo=algo, transport="inproc")
        if mu_grid:
            c = select_mu_min(c, shards, val, mu_grid)
        traces.append(engine.run(c, shards, theta_star, holdout=test))
    return traces
