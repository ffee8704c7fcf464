"""Partially observable maze environment.

The agent sees a 5x5 egocentric window (itself at the bottom-center cell,
facing the top of the window) one-hot encoded over {empty, wall, goal,
out-of-bounds}, plus a one-hot facing direction. Seven discrete actions:
0 turn left, 1 turn right, 2 move forward (blocked by walls), 3..6 do
nothing but still consume a step. The only reward is 1 - T/T_max on
reaching the goal after T steps; episodes end at the goal or after
max_episode_steps. Dynamics are fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .levels import DIR_VECTORS, NUM_DIRECTIONS, Level

CLASS_EMPTY = 0
CLASS_WALL = 1
CLASS_GOAL = 2
CLASS_OOB = 3
NUM_CELL_CLASSES = 4

VIEW_SIZE = 5
VIEW_PAD = 4  # max |offset| between agent and a viewed cell

NUM_ACTIONS = 7
ACTION_LEFT = 0
ACTION_RIGHT = 1
ACTION_FORWARD = 2

OBS_IMAGE_DIM = VIEW_SIZE * VIEW_SIZE * NUM_CELL_CLASSES
OBS_DIM = OBS_IMAGE_DIM + NUM_DIRECTIONS

_EYE_CLASSES = np.eye(NUM_CELL_CLASSES)
_EYE_DIRECTIONS = np.eye(NUM_DIRECTIONS)


def _view_offsets():
    """(dx, dy) from the agent to each view cell, row-major, one table per facing.

    View row 0 is furthest ahead, row 4 contains the agent at column 2;
    columns run left to right from the agent's perspective.
    """
    tables = []
    for direction in range(NUM_DIRECTIONS):
        fx, fy = DIR_VECTORS[direction]
        rx, ry = DIR_VECTORS[(direction + 1) % NUM_DIRECTIONS]
        offsets = np.empty((VIEW_SIZE * VIEW_SIZE, 2), dtype=np.int64)
        i = 0
        for row in range(VIEW_SIZE):
            forward = (VIEW_SIZE - 1) - row
            for col in range(VIEW_SIZE):
                lateral = col - VIEW_SIZE // 2
                offsets[i] = (forward * fx + lateral * rx, forward * fy + lateral * ry)
                i += 1
        tables.append(offsets)
    return tables


_VIEW_OFFSETS = _view_offsets()


@dataclass(frozen=True)
class Observation:
    """image: (5, 5, 4) one-hot cell classes; direction: (4,) one-hot facing."""

    image: np.ndarray
    direction: np.ndarray

    def vector(self):
        """Flat float64 feature vector of length OBS_DIM (image C-order, then direction)."""
        return np.concatenate([self.image.ravel(), self.direction])


class MazeEnv:
    """Single-level episodic environment. reset() before stepping; step() after done raises."""

    def __init__(self, level: Level, max_episode_steps: int):
        if max_episode_steps < 1:
            raise ValueError(f"max_episode_steps must be >= 1, got {max_episode_steps}")
        level.validate()
        self.level = level
        self.max_episode_steps = max_episode_steps
        self._grid = self._compile(level)
        self.agent_pos = level.agent_pos
        self.agent_dir = level.agent_dir
        self.t = 0
        self.done = False
        self._started = False

    @staticmethod
    def _compile(level):
        """Padded cell-class grid; everything outside the level is out-of-bounds."""
        grid = np.full((level.height + 2 * VIEW_PAD, level.width + 2 * VIEW_PAD), CLASS_OOB, dtype=np.int64)
        for y in range(level.height):
            for x in range(level.width):
                grid[y + VIEW_PAD, x + VIEW_PAD] = CLASS_WALL if level.is_wall(x, y) else CLASS_EMPTY
        gx, gy = level.goal_pos
        grid[gy + VIEW_PAD, gx + VIEW_PAD] = CLASS_GOAL
        return grid

    def reset(self):
        self.agent_pos = self.level.agent_pos
        self.agent_dir = self.level.agent_dir
        self.t = 0
        self.done = False
        self._started = True
        return self._observe()

    def step(self, action):
        """Advance one step; returns (observation, reward, done)."""
        if not self._started:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("step() after the episode ended; call reset()")
        if not 0 <= action < NUM_ACTIONS:
            raise ValueError(f"action out of range: {action}")
        if action == ACTION_LEFT:
            self.agent_dir = (self.agent_dir - 1) % NUM_DIRECTIONS
        elif action == ACTION_RIGHT:
            self.agent_dir = (self.agent_dir + 1) % NUM_DIRECTIONS
        elif action == ACTION_FORWARD:
            dx, dy = DIR_VECTORS[self.agent_dir]
            target = (self.agent_pos[0] + dx, self.agent_pos[1] + dy)
            if not self.level.is_wall(*target):
                self.agent_pos = target
        self.t += 1
        reward = 0.0
        if self.agent_pos == self.level.goal_pos:
            self.done = True
            reward = 1.0 - self.t / self.max_episode_steps
        elif self.t >= self.max_episode_steps:
            self.done = True
        return self._observe(), reward, self.done

    def _observe(self):
        x, y = self.agent_pos
        offsets = _VIEW_OFFSETS[self.agent_dir]
        xs = offsets[:, 0] + (x + VIEW_PAD)
        ys = offsets[:, 1] + (y + VIEW_PAD)
        classes = self._grid[ys, xs]
        image = _EYE_CLASSES[classes].reshape(VIEW_SIZE, VIEW_SIZE, NUM_CELL_CLASSES)
        return Observation(image=image, direction=_EYE_DIRECTIONS[self.agent_dir].copy())
