"""Regret estimators used to score levels.

Two trajectory-level signals combine into the score a level is ranked by:

- positive value loss: the average positive part of the lambda-discounted
  TD-error sums (the GAE advantages), measuring how much better than its own
  value estimate the agent just did;
- average transition prediction loss: the mean per-step L1 error of the
  learned dynamics model along the trajectory, measuring how unfamiliar the
  level's transitions are.

combined = pvl + alpha * atpl. Scoring never mutates parameters or
trajectories beyond reading the cached td_errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import trajectory_transitions, transition_loss


@dataclass(frozen=True)
class RegretScore:
    pvl: float
    atpl: float
    alpha: float
    combined: float


def positive_value_loss(traj, gamma, gae_lambda):
    """Mean positive part of the discounted TD-error tail sums.

    Requires compute_gae to have filled td_errors. The divisor is the number
    of transitions actually summed.
    """
    if traj.td_errors is None:
        raise ValueError("trajectory has no td_errors; run compute_gae first")
    total, count = _pvl_parts(traj, gamma, gae_lambda)
    return float(total) / count


def _pvl_parts(traj, gamma, gae_lambda):
    deltas = traj.td_errors
    if len(deltas) == 0:
        raise ValueError("empty trajectory")
    acc = 0.0
    total = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        acc = deltas[t] + gamma * gae_lambda * acc
        if acc > 0.0:
            total += acc
    return total, len(deltas)


def positive_value_loss_many(trajs, gamma, gae_lambda):
    """Step-weighted PVL across a rollout wave: sum of positive parts over total transitions."""
    if not trajs:
        raise ValueError("no trajectories")
    parts = [_pvl_parts(t, gamma, gae_lambda) for t in trajs]
    return float(sum(p[0] for p in parts)) / sum(p[1] for p in parts)


def average_transition_prediction_loss(traj, model, theta):
    """Mean per-step transition L1 along one trajectory."""
    obs, act, nxt = trajectory_transitions(traj)
    pred = model.predict(theta, obs, act)
    per_step = np.abs(pred - nxt).mean(axis=1)
    return float(per_step.mean())


def average_transition_prediction_loss_many(trajs, model, theta):
    """Step-weighted ATPL across a rollout wave."""
    if not trajs:
        raise ValueError("no trajectories")
    totals = 0.0
    steps = 0
    for traj in trajs:
        obs, act, nxt = trajectory_transitions(traj)
        pred = model.predict(theta, obs, act)
        totals += float(np.abs(pred - nxt).mean(axis=1).sum())
        steps += traj.length
    return totals / steps


def approx_regret(pvl, atpl, alpha):
    """combined = pvl + alpha * atpl, exactly."""
    if pvl < 0 or atpl < 0:
        raise ValueError(f"pvl and atpl must be non-negative, got {pvl}, {atpl}")
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    pvl, atpl = float(pvl), float(atpl)
    return RegretScore(pvl=pvl, atpl=atpl, alpha=alpha, combined=pvl + alpha * atpl)


def max_monte_carlo(traj, best_return):
    """Mean gap between the best return seen on this level and the visit-time values."""
    best = max(best_return, traj.episode_return)
    return float(np.mean(best - traj.values[:-1]))
