"""Replication engine: seeded estimates, experiment plans, slope fits.

Seeding layout: every episode stream derives from a splitmix64 chain over
(master_seed, policy id, horizon, replication index).  Replication r always
gets the same stream no matter how work is chunked or how many threads run,
so results are reproducible and independent of scheduling.  Replications are
written into arrays indexed by r and reduced in one pass, which keeps the
floating-point reduction order fixed as well.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import engine
from .core import BanditInstance, PolicyKind, PolicySpec, RegretEstimate

#: Replications per work unit.  Fixed (never derived from the thread count)
#: so that chunk boundaries cannot influence results.
REP_CHUNK = 8192

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def sub_seed(
    master_seed: int,
    policy_index: int,
    horizon_index: int,
    replication_index: int,
) -> int:
    """Derive a 64-bit stream seed from an experiment coordinate.

    A splitmix64 chain folds the three coordinates into the master seed one
    at a time.  Identical tuples give identical seeds and distinct tuples
    collide only at the usual 64-bit birthday rate, so every (policy,
    horizon, replication) cell owns an effectively independent stream.
    """
    s = _splitmix64(master_seed & _MASK64)
    for part in (policy_index, horizon_index, replication_index):
        s = _splitmix64(s ^ (part & _MASK64))
    return s


def _splitmix64_array(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def seed_block(
    master_seed: int, policy_index: int, horizon_index: int, start: int, stop: int
) -> np.ndarray:
    """Vectorized `sub_seed` for replication indices start..stop-1."""
    prefix = _splitmix64(master_seed & _MASK64)
    for part in (policy_index, horizon_index):
        prefix = _splitmix64(prefix ^ (part & _MASK64))
    reps = np.arange(start, stop, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _splitmix64_array(np.uint64(prefix) ^ reps)


@dataclass(frozen=True)
class ExperimentPlan:
    """A grid of (policy kind, horizon) cells sharing one instance and seed."""

    kinds: Tuple[PolicyKind, ...]
    instance: BanditInstance
    horizons: Tuple[int, ...]
    reps: int
    master_seed: int

    def __post_init__(self) -> None:
        if not self.kinds:
            raise ValueError("plan needs at least one policy kind")
        if not self.horizons:
            raise ValueError("plan needs at least one horizon")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        if self.reps < 1:
            raise ValueError("reps must be positive")

    def spec_for(self, kind: PolicyKind, horizon: int) -> PolicySpec:
        gap = self.instance.gap if kind.requires_gap else None
        return PolicySpec(kind=kind, horizon=horizon, known_gap=gap)


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of gap * mean_regret against log(horizon)."""

    slope: float
    intercept: float
    r_squared: float
    fit_range: Tuple[float, float]
    n_points: int


def estimate_regret(
    spec: PolicySpec,
    instance: BanditInstance,
    reps: int,
    master_seed: int,
    threads: int = 1,
) -> RegretEstimate:
    """Monte Carlo mean pseudo-regret over `reps` independent episodes.

    Returns stopping-time and misidentification statistics for ETC kinds.
    The result is a pure function of (spec, instance, reps, master_seed);
    `threads` only controls how many chunks run concurrently.
    """
    if reps < 2:
        raise ValueError("need at least 2 replications for a standard error")
    horizon = spec.horizon
    n1 = np.empty(reps, dtype=np.int64)
    n2 = np.empty(reps, dtype=np.int64)
    tau = np.empty(reps, dtype=np.int64)
    committed = np.empty(reps, dtype=np.int8)

    def work(start: int) -> None:
        stop = min(start + REP_CHUNK, reps)
        seeds = seed_block(master_seed, spec.kind.stable_id, horizon, start, stop)
        result = engine.run_batch(spec, instance, seeds)
        n1[start:stop] = result.n1
        n2[start:stop] = result.n2
        tau[start:stop] = result.tau
        committed[start:stop] = result.committed

    starts = range(0, reps, REP_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, starts))
    else:
        for start in starts:
            work(start)

    gap = instance.gap
    if gap == 0.0:
        pseudo = np.zeros(reps)
    else:
        sub_pulls = n2 if instance.best_arm == 1 else n1
        pseudo = gap * sub_pulls.astype(np.float64)
    mean = float(np.mean(pseudo))
    stderr = float(np.std(pseudo, ddof=1) / math.sqrt(reps))

    mean_tau: Optional[float] = None
    misid_rate: Optional[float] = None
    if spec.kind.is_etc:
        capped = np.where(tau >= 0, tau, horizon)
        mean_tau = float(np.mean(capped))
        if gap == 0.0:
            misid_rate = 0.0
        else:
            bad = (tau >= 0) & (tau < horizon) & (committed == instance.suboptimal_arm)
            misid_rate = float(np.mean(bad))
    return RegretEstimate(
        mean=mean,
        stderr=stderr,
        reps=reps,
        seed=master_seed,
        horizon=horizon,
        policy=spec,
        mean_tau=mean_tau,
        misid_rate=misid_rate,
    )


def run_plan(plan: ExperimentPlan, threads: int = 1) -> List[RegretEstimate]:
    """One RegretEstimate per (kind, horizon) cell, in plan order.

    Cell results depend only on (master_seed, kind, horizon, reps), so
    permuting or filtering the plan permutes rows without changing values.
    """
    results = []
    for kind in plan.kinds:
        for horizon in plan.horizons:
            spec = plan.spec_for(kind, horizon)
            results.append(
                estimate_regret(spec, plan.instance, plan.reps, plan.master_seed, threads)
            )
    return results


def estimate_slope(
    points: Sequence[Tuple[float, float]],
    gap: float,
    fit_range: Optional[Tuple[float, float]] = None,
) -> SlopeFit:
    """Ordinary least squares of gap * mean_regret against log(horizon).

    points holds (horizon, mean_regret) pairs; only those with horizon
    inside fit_range (inclusive) enter the fit, and at least three must
    remain.  The slope estimates the constant c in regret ~ c log(T) / gap.
    """
    if fit_range is None:
        horizons = [t for t, _ in points]
        fit_range = (min(horizons), max(horizons))
    lo, hi = fit_range
    kept = [(t, r) for t, r in points if lo <= t <= hi]
    if len(kept) < 3:
        raise ValueError(f"need at least 3 points in fit range, got {len(kept)}")
    x = np.log([t for t, _ in kept])
    y = gap * np.asarray([r for _, r in kept], dtype=np.float64)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    residual = y - (slope * x + intercept)
    ss_res = float(np.dot(residual, residual))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    if ss_tot == 0.0:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r_squared = max(0.0, 1.0 - ss_res / ss_tot)
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        r_squared=r_squared,
        fit_range=(float(lo), float(hi)),
        n_points=len(kept),
    )
