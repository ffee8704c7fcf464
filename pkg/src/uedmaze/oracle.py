"""Brute-force oracles for every theoretical identity the framework relies on.

Each oracle recomputes a quantity by the most literal method available
(double loops, tabular fixed points, Monte Carlo simulation, central finite
differences) so the efficient implementations elsewhere have something
independent to be checked against. verification_report() bundles them into
the suite behind the CLI's verify command.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent import PolicyArch, PolicyNetwork, PpoBatch, PpoConfig, ppo_loss_and_grad
from .dynamics import DynamicsArch, DynamicsModel, dynamics_loss_and_grad
from .env import NUM_ACTIONS, OBS_DIM


# ---------------------------------------------------------------------------
# naive GAE / positive value loss


def naive_gae(td_errors, gamma, lam):
    """O(T^2) advantage recomputation: A_t = sum_k (gamma lam)^(k-t) delta_k."""
    n = len(td_errors)
    adv = np.zeros(n)
    for t in range(n):
        for k in range(t, n):
            adv[t] += (gamma * lam) ** (k - t) * td_errors[k]
    return adv


def naive_pvl(td_errors, gamma, lam):
    """Mean positive part of the naive advantages."""
    adv = naive_gae(td_errors, gamma, lam)
    total = 0.0
    for a in adv:
        if a > 0:
            total += a
    return total / len(adv)


def naive_transition_loss(predicted, actual):
    """Element-by-element L1 with plain Python loops."""
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError("shape mismatch")
    total = 0.0
    count = 0
    for p, a in zip(predicted.ravel().tolist(), actual.ravel().tolist()):
        total += abs(p - a)
        count += 1
    return total / count


# ---------------------------------------------------------------------------
# tabular MDPs and the regret decomposition


@dataclass(frozen=True)
class TabularMDP:
    """Finite MDP with a true kernel P and an empirical estimate P_hat.

    P, P_hat: (S, A, S) row-stochastic; R: (S, A); gamma in (0, 1).
    """

    P: np.ndarray
    P_hat: np.ndarray
    R: np.ndarray
    gamma: float

    def validate(self):
        s, a, s2 = self.P.shape
        if s != s2 or self.P_hat.shape != self.P.shape or self.R.shape != (s, a):
            raise ValueError("inconsistent MDP shapes")
        for kernel in (self.P, self.P_hat):
            if np.any(kernel < 0) or not np.allclose(kernel.sum(axis=2), 1.0, atol=1e-9):
                raise ValueError("kernel rows must be distributions")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        return self


def value_iteration(mdp: TabularMDP, kernel="true", tol=1e-13, max_iter=1_000_000, policy="greedy"):
    """Fixed point of the Bellman operator with greedy successor actions.

    kernel selects the transition model: "true" for P (yielding Q*) or
    "empirical" for P_hat (yielding the model-consistent Q). Iterates until
    the sup-norm residual drops below tol.
    """
    if policy != "greedy":
        raise ValueError(f"unsupported successor-action rule {policy!r}")
    if kernel == "true":
        P = mdp.P
    elif kernel == "empirical":
        P = mdp.P_hat
    else:
        raise ValueError(f"kernel must be 'true' or 'empirical', got {kernel!r}")
    q = np.zeros_like(mdp.R)
    for _ in range(max_iter):
        nxt = mdp.R + mdp.gamma * P @ q.max(axis=1)
        if np.max(np.abs(nxt - q)) < tol:
            return nxt
        q = nxt
    raise RuntimeError(f"value iteration did not converge within {max_iter} sweeps")


@dataclass(frozen=True)
class DecompositionReport:
    """lhs = Q*(s,a) - Q(s,a); the two terms already include the gamma factor."""

    lhs: float
    value_error_term: float
    transition_error_term: float

    @property
    def residual(self):
        return abs(self.lhs - (self.value_error_term + self.transition_error_term))


def decomposition_check(mdp: TabularMDP, s, a, q_star=None, q_hat=None):
    """Split Q*(s,a) - Q(s,a) into value error and transition prediction error.

    value error:      gamma * E_{s1 ~ P}[max_a' Q*(s1, a') - max_a' Q(s1, a')]
    transition error: gamma * (E_{s1 ~ P}[max_a' Q(s1, a')] - E_{s2 ~ P_hat}[max_a' Q(s2, a')])

    with Q the empirical-kernel fixed point; successor actions are greedy
    under the table they evaluate. The two terms sum to lhs exactly.
    """
    if q_star is None:
        q_star = value_iteration(mdp, "true")
    if q_hat is None:
        q_hat = value_iteration(mdp, "empirical")
    v_star = q_star.max(axis=1)
    v_hat = q_hat.max(axis=1)
    lhs = q_star[s, a] - q_hat[s, a]
    value_err = mdp.gamma * float(mdp.P[s, a] @ (v_star - v_hat))
    trans_err = mdp.gamma * float(mdp.P[s, a] @ v_hat - mdp.P_hat[s, a] @ v_hat)
    return DecompositionReport(float(lhs), value_err, trans_err)


def random_mdp(rng, max_states=6, max_actions=3, kernel_noise=0.5):
    """Random dense MDP with a perturbed empirical kernel."""
    s = int(rng.integers(2, max_states + 1))
    a = int(rng.integers(2, max_actions + 1))
    p = rng.random((s, a, s)) + 1e-3
    p /= p.sum(axis=2, keepdims=True)
    p_hat = p + kernel_noise * rng.random((s, a, s)) + 1e-3
    p_hat /= p_hat.sum(axis=2, keepdims=True)
    r = rng.uniform(-1.0, 1.0, size=(s, a))
    gamma = float(rng.uniform(0.5, 0.95))
    return TabularMDP(P=p, P_hat=p_hat, R=r, gamma=gamma).validate()


# ---------------------------------------------------------------------------
# replay-wait simulation (priority lower bound)


def staleness_simulation(schedule, trials, rng, max_steps=1_000_000):
    """Empirical mean first-pick times under proportional-to-priority sampling.

    schedule: (n_steps, n_tasks) array of raw priorities; row s is used at
    step s and the last row repeats afterwards. Each trial samples tasks one
    per step until every task has been picked once; the wait of a task is the
    index (1-based) of the step that first picked it. Returns (mean_waits,
    bounds) with bounds[i] = n_tasks * max(schedule[0]) / schedule[0, i].
    """
    schedule = np.asarray(schedule, dtype=np.float64)
    if schedule.ndim != 2 or schedule.shape[0] < 1:
        raise ValueError("schedule must be (n_steps, n_tasks)")
    if np.any(schedule <= 0):
        raise ValueError("priorities must stay positive")
    if np.any(np.diff(schedule, axis=0) > 1e-12):
        raise ValueError("priorities must be non-increasing over time")
    n_tasks = schedule.shape[1]
    probs = schedule / schedule.sum(axis=1, keepdims=True)
    first_hit = np.zeros((trials, n_tasks), dtype=np.int64)
    for trial in range(trials):
        remaining = n_tasks
        step = 0
        while remaining > 0:
            if step >= max_steps:
                raise RuntimeError("simulation exceeded max_steps")
            row = probs[min(step, len(probs) - 1)]
            u = rng.random()
            task = min(int(np.searchsorted(np.cumsum(row), u)), n_tasks - 1)
            if first_hit[trial, task] == 0:
                first_hit[trial, task] = step + 1
                remaining -= 1
            step += 1
    mean_waits = first_hit.mean(axis=0)
    m0 = schedule[0].max()
    bounds = n_tasks * m0 / schedule[0]
    return mean_waits, bounds


def expected_waits(schedule):
    """Exact E[first-pick step] (1-based) per task under proportional sampling.

    E[T_i] = sum_{k>=0} Pr[task i missed in steps 0..k-1]; the last schedule
    row repeats forever, so the tail is a geometric series.
    """
    schedule = np.asarray(schedule, dtype=np.float64)
    probs = schedule / schedule.sum(axis=1, keepdims=True)
    survival = np.ones(probs.shape[1])
    total = np.zeros(probs.shape[1])
    for k in range(len(probs) - 1):
        total += survival
        survival *= 1.0 - probs[k]
    return total + survival / probs[-1]


def shared_decay_schedule(initial_priorities, n_steps, rng, min_factor=0.2):
    """Non-increasing schedule: one shared multiplicative decay path for all tasks.

    Shared decay keeps every task's share of the total mass constant, which is
    the regime where the proportional-sampling wait bound provably holds; a
    per-task decay can starve one task and break the bound even though each
    priority alone is non-increasing.
    """
    initial = np.asarray(initial_priorities, dtype=np.float64)
    factors = np.cumprod(rng.uniform(min_factor ** (1.0 / max(n_steps, 1)), 1.0, size=n_steps))
    factors = np.concatenate([[1.0], factors])
    return factors[:, None] * initial[None, :]


def prop1_sign_check(before, after):
    """Batch-mean difficulty reduction vs the mean per-task forward difference.

    Returns (reduction, mean_forward_difference); the two are exact negatives
    of each other (the forward difference uses after - before).
    """
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    if before.shape != after.shape or before.ndim != 1 or len(before) == 0:
        raise ValueError("need equal-length non-empty difficulty vectors")
    reduction = float(np.mean(before - after))
    forward = float(np.mean(after - before))
    return reduction, forward


# ---------------------------------------------------------------------------
# finite differences


def finite_difference_gradient(f, theta, h=1e-6):
    """Central differences, one coordinate at a time."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(len(theta)):
        bumped = theta.copy()
        bumped[i] = theta[i] + h
        hi = f(bumped)
        bumped[i] = theta[i] - h
        lo = f(bumped)
        grad[i] = (hi - lo) / (2.0 * h)
    return grad


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


# ---------------------------------------------------------------------------
# assembled verification suite


def _random_trajectory(rng, min_len=1, max_len=60):
    from .agent import Trajectory

    n = int(rng.integers(min_len, max_len + 1))
    traj = Trajectory(
        observations=rng.random((n + 1, OBS_DIM)),
        actions=rng.integers(0, NUM_ACTIONS, size=n),
        log_probs=rng.uniform(-3.0, 0.0, size=n),
        rewards=rng.normal(size=n),
        values=rng.normal(size=n + 1),
        terminal=bool(rng.random() < 0.5),
    )
    if traj.terminal:
        traj.values[-1] = 0.0
    return traj


def _check_gae_pvl(rng):
    from .agent import compute_gae
    from .scoring import positive_value_loss

    worst = 0.0
    for _ in range(100):
        gamma = float(rng.uniform(0.9, 1.0))
        lam = float(rng.uniform(0.8, 1.0))
        traj = _random_trajectory(rng)
        compute_gae(traj, gamma, lam)
        adv_oracle = naive_gae(traj.td_errors, gamma, lam)
        worst = max(worst, float(np.max(np.abs(traj.advantages - adv_oracle))))
        worst = max(worst, abs(positive_value_loss(traj, gamma, lam) - naive_pvl(traj.td_errors, gamma, lam)))
    hand = naive_pvl(np.array([1.0, -2.0, 0.5]), 1.0, 1.0)
    hand_ok = abs(hand - 0.5 / 3.0) < 1e-12
    return worst < 1e-10 and hand_ok, f"max abs err {worst:.2e}; hand case {hand:.6f}"


def _check_decomposition(rng):
    worst = 0.0
    for _ in range(100):
        mdp = random_mdp(rng)
        q_star = value_iteration(mdp, "true")
        q_hat = value_iteration(mdp, "empirical")
        for s in range(mdp.R.shape[0]):
            for a in range(mdp.R.shape[1]):
                rep = decomposition_check(mdp, s, a, q_star, q_hat)
                worst = max(worst, rep.residual)
    return worst < 1e-9, f"max residual {worst:.2e} over 100 random MDPs, all (s, a)"


def _check_prop1(rng):
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 40))
        before = rng.normal(size=n)
        after = rng.normal(size=n)
        reduction, forward = prop1_sign_check(before, after)
        worst = max(worst, abs(reduction + forward))
    return worst < 1e-12, f"max |reduction + forward| {worst:.2e} (sign conventions are exact negatives)"


def _check_staleness(rng):
    """Three layers: exact waits obey the bound; the geometric closed form
    matches the general recurrence; simulation matches the exact waits.

    Shared decay keeps shares constant, so each wait is geometric with its
    initial share: the exact mean and variance are known, and the bound can
    be tested without sampling noise (it is tight at equal shares, where a
    noisy mean would land above it half the time).
    """
    detail = []
    ok = True
    worst_margin = -np.inf
    for _ in range(20):
        n = int(rng.integers(2, 17))
        initial = rng.uniform(0.3, 1.0, size=n)
        schedule = shared_decay_schedule(initial, n_steps=int(rng.integers(1, 50)), rng=rng)
        exact = expected_waits(schedule)
        shares = initial / initial.sum()
        if np.max(np.abs(exact - 1.0 / shares)) > 1e-9:
            ok = False
            detail.append("recurrence disagrees with the geometric closed form")
        bounds = len(initial) * initial.max() / initial
        worst_margin = max(worst_margin, float(np.max(exact - bounds)))
        if np.any(exact > bounds + 1e-9):
            ok = False
            detail.append(f"bound violated: waits {exact} bounds {bounds}")
    detail.append(f"worst exact-wait margin {worst_margin:.2e} <= 0 over 20 schedules")
    trials = 4000
    for _ in range(4):
        n = int(rng.integers(2, 9))
        initial = rng.uniform(0.3, 1.0, size=n)
        schedule = shared_decay_schedule(initial, n_steps=int(rng.integers(1, 20)), rng=rng)
        empirical, _ = staleness_simulation(schedule, trials=trials, rng=rng)
        shares = initial / initial.sum()
        exact = 1.0 / shares
        tol = 5.0 * np.sqrt((1.0 - shares) / shares**2 / trials)
        if np.any(np.abs(empirical - exact) > tol):
            ok = False
            detail.append(f"simulation off: empirical {empirical} exact {exact}")
    uniform = np.full((1, 4), 0.25)
    waits, _ = staleness_simulation(uniform, trials=trials, rng=rng)
    detail.append(f"uniform-quarter mean wait {waits.mean():.4f}")
    uniform_ok = abs(float(waits.mean()) - 4.0) <= 0.2
    note = "schedule family: shared multiplicative decay (constant shares); " + "; ".join(detail)
    return ok and uniform_ok, note


def _check_atpl_oracle(rng):
    from .scoring import average_transition_prediction_loss

    model = DynamicsModel(DynamicsArch(hidden=(12,)))
    theta = model.init_params(rng).theta
    worst = 0.0
    for _ in range(100):
        traj = _random_trajectory(rng, min_len=1, max_len=20)
        fast = average_transition_prediction_loss(traj, model, theta)
        total = 0.0
        for t in range(traj.length):
            pred = model.predict(
                theta,
                traj.observations[t : t + 1],
                np.eye(NUM_ACTIONS)[traj.actions[t : t + 1]],
            )
            total += naive_transition_loss(pred[0], traj.observations[t + 1])
        worst = max(worst, abs(fast - total / traj.length))
    return worst < 1e-12, f"max abs err {worst:.2e} vs per-step loop"


def _toy_policy_batch(policy, rng, n=24):
    from .agent import log_softmax

    obs = rng.random((n, OBS_DIM))
    actions = rng.integers(0, NUM_ACTIONS, size=n)
    # old log-probs from a different random parameter point so ratios != 1
    old_theta = policy.init_params(rng).theta + 0.05 * rng.standard_normal(policy.net.size)
    logits, values, _ = policy.forward(old_theta, obs)
    old_logp = log_softmax(logits)[np.arange(n), actions]
    adv = rng.normal(size=n)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return PpoBatch(
        obs=obs,
        actions=actions,
        old_log_probs=old_logp,
        advantages=adv,
        returns=rng.normal(size=n),
        old_values=values + 0.1 * rng.standard_normal(n),
    )


def check_policy_gradient(rng, points=5, tol=1e-4):
    """Central-difference check of the PPO loss gradient at random parameter points."""
    policy = PolicyNetwork(PolicyArch(dir_embed_dim=3, trunk_hidden=(8,), head_hidden=(6,)))
    cfg = PpoConfig(clip_range=0.2, value_loss_coef=0.5, entropy_coef=0.0)
    worst = 0.0
    for _ in range(points):
        batch = _toy_policy_batch(policy, rng)
        theta = policy.init_params(rng).theta + 0.1 * rng.standard_normal(policy.net.size)
        _, grad, _ = ppo_loss_and_grad(policy, theta, batch, cfg)
        fd = finite_difference_gradient(lambda th: ppo_loss_and_grad(policy, th, batch, cfg)[0], theta)
        worst = max(worst, relative_error(grad, fd))
    return worst < tol, f"max rel err {worst:.2e} over {points} points"


def check_dynamics_gradient(rng, points=5, tol=1e-4):
    """Central-difference check of the smoothed transition-loss gradient."""
    model = DynamicsModel(DynamicsArch(hidden=(8,)))
    worst = 0.0
    for _ in range(points):
        n = 16
        obs = rng.random((n, OBS_DIM))
        act = np.eye(NUM_ACTIONS)[rng.integers(0, NUM_ACTIONS, size=n)]
        nxt = rng.random((n, OBS_DIM))
        theta = model.init_params(rng).theta + 0.1 * rng.standard_normal(model.net.size)
        _, grad = dynamics_loss_and_grad(model, theta, obs, act, nxt)
        fd = finite_difference_gradient(lambda th: dynamics_loss_and_grad(model, th, obs, act, nxt)[0], theta)
        worst = max(worst, relative_error(grad, fd))
    return worst < tol, f"max rel err {worst:.2e} over {points} points"


def verification_report(seed=0):
    """Run every oracle; returns {"passed": bool, "checks": [{name, passed, detail}]}."""
    checks = []
    suite = (
        ("gae_pvl_vs_naive_oracle", _check_gae_pvl),
        ("regret_decomposition_identity", _check_decomposition),
        ("colearnability_sign_consistency", _check_prop1),
        ("replay_wait_bound", _check_staleness),
        ("transition_loss_vs_loop_oracle", _check_atpl_oracle),
        ("policy_gradient_finite_differences", check_policy_gradient),
        ("dynamics_gradient_finite_differences", check_dynamics_gradient),
    )
    for i, (name, fn) in enumerate(suite):
        rng = np.random.default_rng([seed, i])
        passed, detail = fn(rng)
        checks.append({"name": name, "passed": bool(passed), "detail": detail})
    return {"passed": all(c["passed"] for c in checks), "checks": checks}
