"""Domain types for two-armed Gaussian bandit experiments.

All types are immutable value objects after construction and can be shared
freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple


class PolicyKind(Enum):
    """The five strategies, keyed by their CLI/CSV names."""

    FB_ETC = "fb_etc"
    SPRT_ETC = "sprt_etc"
    BAI_ETC = "bai_etc"
    DELTA_UCB = "delta_ucb"
    UCB_STAR = "ucb_star"

    @property
    def requires_gap(self) -> bool:
        """Whether the strategy needs the gap as an input parameter."""
        return self in (PolicyKind.FB_ETC, PolicyKind.SPRT_ETC, PolicyKind.DELTA_UCB)

    @property
    def is_etc(self) -> bool:
        """Whether the strategy explores alternately and then commits."""
        return self in (PolicyKind.FB_ETC, PolicyKind.SPRT_ETC, PolicyKind.BAI_ETC)

    @property
    def stable_id(self) -> int:
        """Fixed integer id used for stream-seed derivation.

        Independent of any experiment-plan ordering, so reordering policies
        in a plan permutes result rows without changing any random stream.
        """
        return _STABLE_IDS[self]


_STABLE_IDS = {
    PolicyKind.FB_ETC: 0,
    PolicyKind.SPRT_ETC: 1,
    PolicyKind.BAI_ETC: 2,
    PolicyKind.DELTA_UCB: 3,
    PolicyKind.UCB_STAR: 4,
}


@dataclass(frozen=True)
class BanditInstance:
    """A pair of unit-variance Gaussian arms.

    Attributes:
        mu1: mean reward of arm 1.
        mu2: mean reward of arm 2.
    """

    mu1: float
    mu2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu1) and math.isfinite(self.mu2)):
            raise ValueError("arm means must be finite")

    @property
    def gap(self) -> float:
        return abs(self.mu1 - self.mu2)

    @property
    def best_arm(self) -> int:
        """Index of the optimal arm; ties resolve to arm 1."""
        return 1 if self.mu1 >= self.mu2 else 2

    @property
    def suboptimal_arm(self) -> int:
        return 3 - self.best_arm

    def mean_of(self, arm: int) -> float:
        if arm == 1:
            return self.mu1
        if arm == 2:
            return self.mu2
        raise ValueError(f"arm must be 1 or 2, got {arm}")


@dataclass(frozen=True)
class PolicySpec:
    """A strategy choice together with its horizon and gap parameters.

    Attributes:
        kind: which of the five strategies to run.
        horizon: number of rounds T (at least 2, one sample per arm).
        known_gap: the gap handed to gap-aware strategies; required for
            FB_ETC, SPRT_ETC and DELTA_UCB, forbidden otherwise.
        fb_budget: optional per-arm exploration budget override for FB_ETC.
            When omitted the Lambert-function budget rule is used.
    """

    kind: PolicyKind
    horizon: int
    known_gap: Optional[float] = None
    fb_budget: Optional[int] = None

    def __post_init__(self) -> None:
        if not isinstance(self.horizon, int) or isinstance(self.horizon, bool):
            raise ValueError("horizon must be an integer")
        if self.horizon < 2:
            raise ValueError(f"horizon must be at least 2, got {self.horizon}")
        if self.kind.requires_gap:
            if self.known_gap is None:
                raise ValueError(f"{self.kind.value} requires known_gap")
            if not (math.isfinite(self.known_gap) and self.known_gap > 0):
                raise ValueError(f"known_gap must be positive, got {self.known_gap}")
        elif self.known_gap is not None:
            raise ValueError(f"{self.kind.value} must not receive known_gap")
        if self.fb_budget is not None:
            if self.kind is not PolicyKind.FB_ETC:
                raise ValueError("fb_budget only applies to fb_etc")
            if not (1 <= self.fb_budget <= self.horizon // 2):
                raise ValueError(
                    f"fb_budget must lie in [1, horizon//2], got {self.fb_budget}"
                )


@dataclass(frozen=True)
class Trajectory:
    """Outcome of one episode.

    Attributes:
        actions: the played arms in order, or None when only counters were
            kept (long horizons).
        n1, n2: pull counts of arms 1 and 2; n1 + n2 equals the horizon.
        tau: even stopping time at which an ETC strategy committed, or None
            when no commitment happened (fully sequential strategies, or an
            ETC exploration phase that consumed the whole horizon).
        committed_arm: the arm played after tau, or None.
        pseudo_regret: gap times the number of suboptimal-arm pulls.
    """

    n1: int
    n2: int
    tau: Optional[int]
    committed_arm: Optional[int]
    pseudo_regret: float
    actions: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if self.n1 < 0 or self.n2 < 0:
            raise ValueError("pull counts must be nonnegative")
        if self.tau is not None and self.tau % 2 != 0:
            raise ValueError(f"stopping time must be even, got {self.tau}")
        if (self.committed_arm is None) != (self.tau is None):
            raise ValueError("committed_arm and tau must be set together")
        if self.actions is not None:
            if len(self.actions) != self.n1 + self.n2:
                raise ValueError("actions length inconsistent with counts")
            if self.n1 != sum(1 for a in self.actions if a == 1):
                raise ValueError("actions inconsistent with arm-1 count")

    @property
    def horizon(self) -> int:
        return self.n1 + self.n2


@dataclass(frozen=True)
class RegretEstimate:
    """Monte Carlo mean pseudo-regret with its standard error.

    mean_tau is the average of the stopping time capped at the horizon and
    misid_rate the fraction of episodes that committed to the suboptimal arm
    strictly before the horizon; both are None for fully sequential kinds.
    """

    mean: float
    stderr: float
    reps: int
    seed: int
    horizon: int
    policy: PolicySpec
    mean_tau: Optional[float] = None
    misid_rate: Optional[float] = None


@dataclass(frozen=True)
class BoundReport:
    """A finite-time regret bound with its validity regime.

    value holds the theorem's displayed bound when regime_ok is true and the
    theorem's alternative (fallback) bound otherwise, so it is always finite.
    minimax_value is the uniform sqrt(T)-type bound.
    """

    value: float
    regime_ok: bool
    fallback_value: float
    minimax_value: float

    @property
    def applicable(self) -> float:
        """The bound that holds for these parameters (value or fallback)."""
        return self.value if self.regime_ok else self.fallback_value

    @property
    def tightest(self) -> float:
        """The best bound available: min(applicable, minimax)."""
        return min(self.applicable, self.minimax_value)


def pseudo_regret_of(
    trajectory: Trajectory,
    instance: BanditInstance,
    horizon: Optional[int] = None,
) -> float:
    """Gap times the number of pulls of the suboptimal arm.

    Zero whenever the gap is zero.  Raises ValueError when the trajectory is
    inconsistent with the stated horizon.
    """
    if horizon is not None and trajectory.horizon != horizon:
        raise ValueError(
            f"trajectory covers {trajectory.horizon} rounds, expected {horizon}"
        )
    if instance.gap == 0.0:
        return 0.0
    pulls = trajectory.n2 if instance.best_arm == 1 else trajectory.n1
    return instance.gap * pulls
