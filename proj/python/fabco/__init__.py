"""Feasibility-aware behavior cloning from observation.

Configs, trajectories and reports are plain dicts; the native module
exchanges them as JSON text.
"""

import json

from . import _fabco
from ._fabco import DynModels, feasibility_from_error, welch_t_test

__all__ = [
    "DynModels",
    "config_hash",
    "default_config",
    "evaluate_policy",
    "feasibility_from_error",
    "feasibility_profile",
    "generate_random_trajectory",
    "run_ablation",
    "synth_demo",
    "task_success",
    "train_dynamics",
    "train_policy",
    "welch_t_test",
]


def _text(value):
    if value is None:
        return ""
    return value if isinstance(value, str) else json.dumps(value)


def default_config():
    return json.loads(_fabco.default_config())


def config_hash(config=None):
    return _fabco.config_hash(_text(config))


def generate_random_trajectory(seed, n_waypoints=5, steps=50):
    return json.loads(_fabco.generate_random_trajectory(seed, n_waypoints, steps))


def synth_demo(speed_multiplier=1.0, seed=0, jitter_std=0.0):
    return json.loads(_fabco.synth_demo(speed_multiplier, seed, jitter_std))


def task_success(trajectory):
    return _fabco.task_success(_text(trajectory))


def train_dynamics(config=None, seed=0):
    return _fabco.train_dynamics(_text(config), seed)


def train_policy(models, variant="fabco", config=None, seed=0):
    return json.loads(_fabco.train_policy(models, variant, _text(config), seed))


def feasibility_profile(models, trajectory, sigma_w=0.15):
    return json.loads(models.feasibility_profile(_text(trajectory), sigma_w))


def evaluate_policy(policy, config=None, n_rollouts=30, seed=0):
    return json.loads(
        _fabco.evaluate_policy(_text(policy), _text(config), n_rollouts, seed))


def run_ablation(config, out_dir):
    return json.loads(_fabco.run_ablation(_text(config), str(out_dir)))
