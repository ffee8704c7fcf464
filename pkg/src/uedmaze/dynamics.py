"""Learned transition model and its training step.

A feedforward predictor maps (observation vector, one-hot action) to scores
with the observation's shape. Fit quality is measured as exact mean absolute
error (L1) over every output element; optimization goes through a smoothed-L1
surrogate (quadratic within 1e-2 of the kink) so the gradient is continuous,
but every reported number is the exact L1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import NUM_ACTIONS, OBS_DIM
from .nn import ChainSet, DenseSpec, FlatParams, adam_step, clip_grad_norm

SMOOTH_L1_WIDTH = 1e-2


@dataclass(frozen=True)
class DynamicsArch:
    hidden: tuple = (64, 64)

    def chains(self):
        layers = []
        width = OBS_DIM + NUM_ACTIONS
        for h in self.hidden:
            layers.append(DenseSpec(width, h, "relu"))
            width = h
        layers.append(DenseSpec(width, OBS_DIM, "linear"))
        return {"net": layers}


class DynamicsModel:
    def __init__(self, arch: DynamicsArch = DynamicsArch()):
        self.arch = arch
        self.net = ChainSet(arch.chains())

    def init_params(self, rng) -> FlatParams:
        return FlatParams(self.net.init_theta(rng))

    def forward(self, theta, obs, action_onehot):
        """Predict next-observation scores for a batch; returns (pred, cache)."""
        obs = np.asarray(obs, dtype=np.float64)
        action_onehot = np.asarray(action_onehot, dtype=np.float64)
        if obs.ndim != 2 or obs.shape[1] != OBS_DIM:
            raise ValueError(f"expected obs of shape (N, {OBS_DIM}), got {obs.shape}")
        if action_onehot.shape != (obs.shape[0], NUM_ACTIONS):
            raise ValueError(f"action batch shape {action_onehot.shape} does not match obs")
        pred, cache = self.net.forward(theta, "net", np.concatenate([obs, action_onehot], axis=1))
        if not np.all(np.isfinite(pred)):
            raise FloatingPointError("non-finite dynamics prediction")
        return pred, cache

    def predict(self, theta, obs, action_onehot):
        return self.forward(theta, obs, action_onehot)[0]


def transition_loss(predicted, actual):
    """Exact L1: mean absolute element-wise difference. Shapes must match."""
    predicted = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if predicted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("empty prediction")
    return float(np.abs(predicted - actual).mean())


def smooth_l1(diff, width=SMOOTH_L1_WIDTH):
    """Elementwise surrogate: quadratic inside |d| < width, |d| - width/2 outside."""
    a = np.abs(diff)
    return np.where(a < width, 0.5 * diff * diff / width, a - 0.5 * width)


def smooth_l1_grad(diff, width=SMOOTH_L1_WIDTH):
    return np.where(np.abs(diff) < width, diff / width, np.sign(diff))


def dynamics_loss_and_grad(model: DynamicsModel, theta, obs, action_onehot, next_obs):
    """Mean smoothed-L1 over all elements and its parameter gradient."""
    pred, cache = model.forward(theta, obs, action_onehot)
    diff = pred - np.asarray(next_obs, dtype=np.float64)
    loss = float(smooth_l1(diff).mean())
    grad = np.zeros_like(theta)
    model.net.backward(theta, "net", cache, smooth_l1_grad(diff) / diff.size, grad)
    return loss, grad


@dataclass(frozen=True)
class DynamicsTrainConfig:
    learning_rate: float = 1e-3
    adam_eps: float = 1e-5
    max_grad_norm: float = 0.5


def train_dynamics(model, params: FlatParams, obs, action_onehot, next_obs, cfg: DynamicsTrainConfig):
    """One gradient step on the batch; returns (new_params, stats).

    stats["loss_l1"] is the exact pre-step L1. Non-finite gradients abort the
    step: the input parameters come back unchanged with stats["aborted"] True.
    """
    pred = model.predict(params.theta, obs, action_onehot)
    l1 = transition_loss(pred, next_obs)
    loss, grad = dynamics_loss_and_grad(model, params.theta, obs, action_onehot, next_obs)
    stats = {"loss_l1": l1, "loss_surrogate": loss, "aborted": False}
    if not np.all(np.isfinite(grad)):
        return params, {**stats, "aborted": True}
    grad, norm = clip_grad_norm(grad, cfg.max_grad_norm)
    stats["grad_norm"] = norm
    return adam_step(params, grad, cfg.learning_rate, cfg.adam_eps), stats


def trajectory_transitions(traj):
    """(obs, one-hot action, next_obs) arrays covering every step of the episode."""
    if traj.length == 0:
        raise ValueError("empty trajectory")
    actions = np.eye(NUM_ACTIONS)[traj.actions]
    return traj.observations[:-1], actions, traj.observations[1:]


def stack_transitions(trajs):
    parts = [trajectory_transitions(t) for t in trajs]
    return (
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
    )
