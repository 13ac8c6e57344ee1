"""The five strategies as deterministic step functions plus an episode runner.

Each step function maps the current sufficient statistics to the next action.
Quantities that involve a logarithm (stopping thresholds, exploration
bonuses) are precomputed once per horizon in shared read-only tables; the
vectorized batch engine indexes the same tables, which keeps the two
execution paths bit-identical.

Reward-noise convention: an episode owns one seeded stream of standard
normals, and the t-th draw is the noise of the t-th step whose reward the
policy observes.  ETC strategies stop drawing at commitment because nothing
in the trajectory depends on post-commitment rewards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np

from .core import BanditInstance, PolicyKind, PolicySpec, Trajectory
from .special import lambert_w

#: Episodes longer than this keep per-arm counters only, not the action list.
ACTION_STORAGE_LIMIT = 10_000


@dataclass
class PolicyState:
    """Sufficient statistics driving every step decision.

    t counts actions taken so far (0-based); sums accumulate raw rewards so
    the empirical means are sum_i / n_i.
    """

    t: int = 0
    n1: int = 0
    n2: int = 0
    sum1: float = 0.0
    sum2: float = 0.0
    committed_arm: Optional[int] = None
    tau: Optional[int] = None

    @property
    def mu1_hat(self) -> float:
        return self.sum1 / self.n1

    @property
    def mu2_hat(self) -> float:
        return self.sum2 / self.n2


def update(state: PolicyState, action: int, reward: float) -> None:
    """Fold one observed (action, reward) pair into the statistics."""
    if action == 1:
        state.n1 += 1
        state.sum1 += reward
    elif action == 2:
        state.n2 += 1
        state.sum2 += reward
    else:
        raise ValueError(f"action must be 1 or 2, got {action}")
    state.t += 1


def _commit(state: PolicyState, tau: int) -> None:
    # Ties go to arm 1; once committed the phase never reverts.
    state.tau = tau
    state.committed_arm = 1 if state.mu1_hat >= state.mu2_hat else 2


def fb_etc_budget(horizon: int, gap: float) -> int:
    """Per-arm exploration count ceil(2 W(T^2 gap^4 / 32 pi) / gap^2).

    Clamped into [1, horizon // 2] so the exploration phase always fits.
    """
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 2:
        raise ValueError(f"horizon must be an integer >= 2, got {horizon}")
    if not (math.isfinite(gap) and gap > 0.0):
        raise ValueError(f"gap must be positive, got {gap}")
    y = (horizon * gap * gap) ** 2 / (32.0 * math.pi)
    n = math.ceil(2.0 * lambert_w(y) / (gap * gap))
    return max(1, min(n, horizon // 2))


def sprt_threshold(horizon: int, gap: float) -> float:
    """Commit once the paired log-likelihood-ratio statistic reaches this."""
    return math.log(horizon * gap * gap)


@lru_cache(maxsize=32)
def bai_threshold_table(horizon: int) -> np.ndarray:
    """Commit thresholds on |mu1_hat - mu2_hat| after n pairs, n = 1..T//2.

    Entry n-1 is sqrt(4 log(T / 2n) / n) with the logarithm clipped at zero,
    so the rule always fires by the time the remaining-time ratio hits one.
    """
    pairs = np.arange(1, horizon // 2 + 1, dtype=np.float64)
    logs = np.log(horizon / (2.0 * pairs))
    np.clip(logs, 0.0, None, out=logs)
    table = np.sqrt(4.0 * logs / pairs)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=32)
def ucb_bonus_table(horizon: int) -> np.ndarray:
    """Exploration bonus sqrt(2 log(T/N) / N) indexed by the pull count N.

    Entry 0 is NaN so an accidental zero-count lookup surfaces immediately;
    unpulled arms are handled by the forced-pull rules instead.
    """
    counts = np.arange(1, horizon + 1, dtype=np.float64)
    table = np.empty(horizon + 1)
    table[0] = np.nan
    table[1:] = np.sqrt(2.0 * np.log(horizon / counts) / counts)
    table.setflags(write=False)
    return table


def delta_ucb_slack(horizon: int, gap: float) -> float:
    """The shrinking slack gap * log(e + T gap^2)^(-1/8) / 4."""
    if not (math.isfinite(gap) and gap > 0.0):
        raise ValueError(f"gap must be positive, got {gap}")
    return gap * math.log(math.e + horizon * gap * gap) ** (-0.125) / 4.0


def fb_etc_step(state: PolicyState, budget: int, horizon: int) -> int:
    """Alternate for `budget` pairs, then play the empirical best forever."""
    _check_time(state, horizon)
    if state.committed_arm is None and state.t >= 2 * budget:
        _commit(state, 2 * budget)
    if state.committed_arm is not None:
        return state.committed_arm
    return 1 if state.t % 2 == 0 else 2


def sprt_etc_step(state: PolicyState, horizon: int, gap: float) -> int:
    """Alternate until the sequential probability ratio test concludes.

    After each complete pair the statistic n * gap * |mu1_hat - mu2_hat| is
    compared against log(T gap^2); commitment happens on >=.  A nonpositive
    threshold (T gap^2 <= 1) therefore commits after one sample per arm.
    """
    _check_time(state, horizon)
    if not gap > 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    if state.committed_arm is None and state.t >= 2 and state.t % 2 == 0:
        pairs = state.t // 2
        stat = (pairs * gap) * abs(state.mu1_hat - state.mu2_hat)
        if stat >= sprt_threshold(horizon, gap):
            _commit(state, state.t)
    if state.committed_arm is not None:
        return state.committed_arm
    return 1 if state.t % 2 == 0 else 2


def bai_etc_step(state: PolicyState, horizon: int) -> int:
    """Alternate until the gap-free identification threshold is crossed."""
    _check_time(state, horizon)
    if state.committed_arm is None and state.t >= 2 and state.t % 2 == 0:
        pairs = state.t // 2
        threshold = bai_threshold_table(horizon)[pairs - 1]
        if abs(state.mu1_hat - state.mu2_hat) >= threshold:
            _commit(state, state.t)
    if state.committed_arm is not None:
        return state.committed_arm
    return 1 if state.t % 2 == 0 else 2


def delta_ucb_step(state: PolicyState, horizon: int, gap: float) -> int:
    """Play the less-sampled arm unless its upper confidence bound falls a
    slack-corrected gap below the other arm's empirical mean."""
    _check_time(state, horizon)
    if not gap > 0.0:
        raise ValueError(f"gap must be positive, got {gap}")
    if state.n1 <= state.n2:
        arm_min, n_min = 1, state.n1
    else:
        arm_min, n_min = 2, state.n2
    if n_min == 0:
        return arm_min
    if arm_min == 1:
        mu_min, mu_max = state.mu1_hat, state.mu2_hat
    else:
        mu_min, mu_max = state.mu2_hat, state.mu1_hat
    bonus = ucb_bonus_table(horizon)[n_min]
    slack = gap - 2.0 * delta_ucb_slack(horizon, gap)
    if mu_min + bonus >= mu_max + slack:
        return arm_min
    return 3 - arm_min


def ucb_star_step(state: PolicyState, horizon: int) -> int:
    """Pick the larger index mu_hat + sqrt(2 log(T/N) / N); unpulled arms
    have an infinite index and ties resolve to arm 1."""
    _check_time(state, horizon)
    if state.n1 == 0:
        return 1
    if state.n2 == 0:
        return 2
    table = ucb_bonus_table(horizon)
    index1 = state.sum1 / state.n1 + table[state.n1]
    index2 = state.sum2 / state.n2 + table[state.n2]
    return 1 if index1 >= index2 else 2


def _check_time(state: PolicyState, horizon: int) -> None:
    if state.t >= horizon:
        raise ValueError(f"no action left at t={state.t} with horizon {horizon}")


def resolve_fb_budget(spec: PolicySpec) -> int:
    """The exploration budget an FB_ETC spec actually runs with."""
    if spec.fb_budget is not None:
        return spec.fb_budget
    return fb_etc_budget(spec.horizon, spec.known_gap)


def _make_step(spec: PolicySpec):
    kind = spec.kind
    if kind is PolicyKind.FB_ETC:
        budget = resolve_fb_budget(spec)
        return lambda state: fb_etc_step(state, budget, spec.horizon)
    if kind is PolicyKind.SPRT_ETC:
        return lambda state: sprt_etc_step(state, spec.horizon, spec.known_gap)
    if kind is PolicyKind.BAI_ETC:
        return lambda state: bai_etc_step(state, spec.horizon)
    if kind is PolicyKind.DELTA_UCB:
        return lambda state: delta_ucb_step(state, spec.horizon, spec.known_gap)
    if kind is PolicyKind.UCB_STAR:
        return lambda state: ucb_star_step(state, spec.horizon)
    raise ValueError(f"unknown policy kind {kind}")


def run_episode(
    spec: PolicySpec,
    instance: BanditInstance,
    rng: np.random.Generator,
    store_actions: Optional[bool] = None,
) -> Trajectory:
    """Run one episode and return its trajectory.

    Deterministic given the stream: rewards are mean_of(action) plus the
    next standard normal of `rng`.  For ETC kinds the remaining pulls are
    accounted in bulk at commitment without consuming further draws, and the
    stopping rule is evaluated after every complete pair, including a final
    evaluation when exploration fills the whole horizon.
    """
    horizon = spec.horizon
    if store_actions is None:
        store_actions = horizon <= ACTION_STORAGE_LIMIT
    step = _make_step(spec)
    state = PolicyState()
    actions: Optional[List[int]] = [] if store_actions else None

    while state.t < horizon:
        action = step(state)
        if state.committed_arm is not None:
            remaining = horizon - state.t
            if actions is not None:
                actions.extend([action] * remaining)
            if action == 1:
                state.n1 += remaining
            else:
                state.n2 += remaining
            state.t = horizon
            break
        reward = instance.mean_of(action) + rng.standard_normal()
        update(state, action, reward)
        if actions is not None:
            actions.append(action)
    else:
        # Exploration reached the horizon: evaluate the rule one last time so
        # a crossing at the final even step is still recorded (tau == T).
        if spec.kind.is_etc and state.committed_arm is None:
            _final_etc_check(spec, state)

    if instance.gap == 0.0:
        pseudo = 0.0
    else:
        pulls = state.n2 if instance.best_arm == 1 else state.n1
        pseudo = instance.gap * pulls
    return Trajectory(
        n1=state.n1,
        n2=state.n2,
        tau=state.tau,
        committed_arm=state.committed_arm,
        pseudo_regret=pseudo,
        actions=tuple(actions) if actions is not None else None,
    )


def _final_etc_check(spec: PolicySpec, state: PolicyState) -> None:
    if state.t % 2 != 0:
        return
    kind = spec.kind
    if kind is PolicyKind.FB_ETC:
        if state.t >= 2 * resolve_fb_budget(spec):
            _commit(state, 2 * resolve_fb_budget(spec))
    elif kind is PolicyKind.SPRT_ETC:
        pairs = state.t // 2
        stat = (pairs * spec.known_gap) * abs(state.mu1_hat - state.mu2_hat)
        if stat >= sprt_threshold(spec.horizon, spec.known_gap):
            _commit(state, state.t)
    elif kind is PolicyKind.BAI_ETC:
        pairs = state.t // 2
        if abs(state.mu1_hat - state.mu2_hat) >= bai_threshold_table(spec.horizon)[pairs - 1]:
            _commit(state, state.t)
