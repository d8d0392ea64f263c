"""Deterministic per-stage seed derivation from one master seed.

Each pipeline stage draws its randomness from a `SeedSequence` spawned at a
fixed counter, so stages are independently reproducible and inserting a new
stage never shifts the seeds of existing ones.
"""

import numpy as np

STAGE_COUNTERS = {
    "synth": 0,
    "split": 1,
    "model:discrete_time_hazard": 10,
    "model:poisson_pem": 11,
    "model:cox": 12,
    "model:weibull_aft": 13,
    "model:survival_forest": 14,
    "tuning": 20,
    "bootstrap": 30,
    "importance": 31,
    "ablation": 32,
    "window_grid": 33,
}


def stage_seed_sequence(master_seed, stage):
    if stage not in STAGE_COUNTERS:
        raise KeyError(f"unknown pipeline stage '{stage}'")
    return np.random.SeedSequence(entropy=master_seed,
                                  spawn_key=(STAGE_COUNTERS[stage],))


def stage_seed(master_seed, stage):
    """A 32-bit integer seed for the given stage."""
    return int(stage_seed_sequence(master_seed, stage).generate_state(1)[0])


def stage_rng(master_seed, stage):
    return np.random.default_rng(stage_seed_sequence(master_seed, stage))
