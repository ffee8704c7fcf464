import numpy as np
import pytest

from uedmaze.env import (
    ACTION_FORWARD,
    ACTION_LEFT,
    ACTION_RIGHT,
    CLASS_GOAL,
    CLASS_OOB,
    CLASS_WALL,
    MazeEnv,
    NUM_ACTIONS,
    OBS_DIM,
    OBS_IMAGE_DIM,
)
from uedmaze.levels import Level


def corridor(goal_x=2):
    return Level(5, 5, frozenset(), (1, 1), 1, (goal_x, 1)).validate()


def test_goal_reward_follows_elapsed_time():
    env = MazeEnv(corridor(goal_x=2), 250)
    env.reset()
    obs, reward, done = env.step(ACTION_FORWARD)
    assert done and reward == 1 - 1 / 250
    env = MazeEnv(corridor(goal_x=3), 250)
    env.reset()
    env.step(ACTION_FORWARD)
    _, reward, done = env.step(ACTION_FORWARD)
    assert done and reward == 1 - 2 / 250


def test_timeout_gives_zero_reward():
    env = MazeEnv(corridor(), 3)
    env.reset()
    total = 0.0
    for _ in range(3):
        _, r, done = env.step(ACTION_LEFT)
        total += r
    assert done and total == 0.0


def test_noop_actions_change_nothing_but_time():
    env = MazeEnv(corridor(), 100)
    env.reset()
    for action in range(3, NUM_ACTIONS):
        _, r, done = env.step(action)
        assert env.agent_pos == (1, 1) and env.agent_dir == 1
        assert r == 0.0 and not done
    assert env.t == NUM_ACTIONS - 3


def test_turning_cycles_all_directions():
    env = MazeEnv(corridor(), 100)
    env.reset()
    seen = [env.agent_dir]
    for _ in range(4):
        env.step(ACTION_RIGHT)
        seen.append(env.agent_dir)
    assert seen == [1, 2, 3, 0, 1]
    env.step(ACTION_LEFT)
    assert env.agent_dir == 0


def test_walls_and_border_block_movement():
    level = Level(5, 5, frozenset({(2, 1)}), (1, 1), 1, (3, 3)).validate()
    env = MazeEnv(level, 100)
    env.reset()
    env.step(ACTION_FORWARD)  # into the wall at (2, 1)
    assert env.agent_pos == (1, 1)
    env.step(ACTION_LEFT)  # face up, border above
    env.step(ACTION_FORWARD)
    assert env.agent_pos == (1, 1)


def test_view_is_egocentric_with_agent_bottom_center():
    # facing up: the cell directly ahead appears one row above the agent slot
    level = Level(7, 7, frozenset({(3, 2)}), (3, 3), 0, (5, 5)).validate()
    obs = MazeEnv(level, 100).reset()
    assert obs.image.shape == (5, 5, 4)
    assert obs.image[3, 2, CLASS_WALL] == 1.0  # (3, 2) is straight ahead
    assert obs.image[4, 2].sum() == 1.0  # agent's own cell is visible and empty
    assert obs.direction.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_view_rotates_with_the_agent():
    level = Level(7, 7, frozenset({(4, 3)}), (3, 3), 1, (5, 5)).validate()
    obs = MazeEnv(level, 100).reset()  # facing right: (4, 3) is straight ahead
    assert obs.image[3, 2, CLASS_WALL] == 1.0
    assert obs.direction.tolist() == [0.0, 1.0, 0.0, 0.0]


def test_view_marks_out_of_bounds_and_goal():
    level = Level(5, 5, frozenset(), (1, 1), 0, (2, 1)).validate()
    obs = MazeEnv(level, 100).reset()
    # facing up from (1, 1): two rows ahead is outside the grid entirely
    assert obs.image[0, 2, CLASS_OOB] == 1.0
    assert obs.image[4, 3, CLASS_GOAL] == 1.0  # goal right of the agent


def test_observation_vector_layout():
    obs = MazeEnv(corridor(), 100).reset()
    vec = obs.vector()
    assert vec.shape == (OBS_DIM,)
    assert np.array_equal(vec[:OBS_IMAGE_DIM], obs.image.reshape(-1))
    assert np.array_equal(vec[OBS_IMAGE_DIM:], obs.direction)


def test_step_contract_violations_raise():
    env = MazeEnv(corridor(), 100)
    with pytest.raises(RuntimeError):
        env.step(ACTION_FORWARD)
    env.reset()
    with pytest.raises(ValueError):
        env.step(NUM_ACTIONS)
    env.step(ACTION_FORWARD)  # reaches the goal
    with pytest.raises(RuntimeError):
        env.step(ACTION_FORWARD)


def test_deterministic_given_actions():
    level = Level(9, 9, frozenset({(3, 3), (4, 5)}), (1, 1), 1, (7, 7)).validate()
    rng = np.random.default_rng(0)
    actions = rng.integers(0, NUM_ACTIONS, size=60)
    results = []
    for _ in range(2):
        env = MazeEnv(level, 100)
        env.reset()
        trace = []
        for a in actions:
            obs, r, done = env.step(int(a))
            trace.append((obs.vector().tobytes(), r, done))
            if done:
                break
        results.append(trace)
    assert results[0] == results[1]
