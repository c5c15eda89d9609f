"""Behavioral sub-goal selection policies.

Implements the selection rules the runner can mix and match via
``subgoal.strategy``: minimum-density selection (MEGA), the desired/achieved
mixture with its KL-driven weight (OMEGA), skewed resampling of the buffer
(Skew-Fit), success-band selection (Goal-GAN-style GOID), and a uniform
goal-space baseline. Selectors are pure in their inputs plus the supplied
random stream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import density
from .density import DensityModel, EmptyBufferError

MAX_CANDIDATES = 10_000


def _unique_log_density(model: DensityModel, goals: np.ndarray) -> np.ndarray:
    """Per-entry log density, evaluated once per distinct goal."""
    uniq, inverse = np.unique(goals, axis=0, return_inverse=True)
    return density.log_density_many(model, uniq)[inverse]


def mega_select(buffer_goals, model: DensityModel, rng, max_candidates: int = MAX_CANDIDATES):
    """A buffered goal of minimal estimated density; ties break uniformly.

    Buffers beyond ``max_candidates`` are subsampled before scoring.
    """
    goals = np.asarray(buffer_goals, dtype=np.float64)
    if goals.ndim == 1:
        goals = goals.reshape(-1, 2) if goals.size else goals.reshape(0, 2)
    if goals.shape[0] == 0:
        raise EmptyBufferError("cannot select a sub-goal from an empty buffer")
    if goals.shape[0] > max_candidates:
        goals = goals[rng.choice(goals.shape[0], size=max_candidates, replace=False)]
    logp = _unique_log_density(model, goals)
    minimal = np.flatnonzero(logp == logp.min())
    pick = minimal[int(rng.integers(len(minimal)))]
    return tuple(goals[pick])


def omega_alpha(kl_estimate: float, b: float) -> float:
    """Desired-goal mixing weight 1 / max(b + KL, 1); KL is clamped at 0."""
    kl = max(0.0, float(kl_estimate))
    return 1.0 / max(b + kl, 1.0)


@dataclass
class OmegaParams:
    b: float = -3.0
    alpha: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")


def omega_select(params: OmegaParams, desired_sampler, buffer_goals, model: DensityModel, rng):
    """With probability alpha a desired-goal draw, otherwise minimum density."""
    if rng.random() < params.alpha:
        return tuple(desired_sampler(rng))
    return mega_select(buffer_goals, model, rng)


def kl_desired_vs_achieved(desired_goals, achieved_model: DensityModel, bandwidth: float) -> float:
    """Monte Carlo KL(desired || achieved) from matched KDE fits, clamped at 0."""
    desired_model = density.fit_kde(desired_goals, bandwidth)
    log_dg = density.log_density_many(desired_model, desired_goals)
    log_ag = density.log_density_many(achieved_model, desired_goals)
    return max(0.0, float((log_dg - log_ag).mean()))


def skewfit_select(buffer_goals, model: DensityModel, exponent: float, rng):
    """Sample a buffered goal with probability proportional to density**exponent."""
    goals = np.asarray(buffer_goals, dtype=np.float64)
    if goals.ndim == 1:
        goals = goals.reshape(-1, 2) if goals.size else goals.reshape(0, 2)
    if goals.shape[0] == 0:
        raise EmptyBufferError("cannot select a sub-goal from an empty buffer")
    if goals.shape[0] > MAX_CANDIDATES:
        goals = goals[rng.choice(goals.shape[0], size=MAX_CANDIDATES, replace=False)]
    logp = _unique_log_density(model, goals)
    logw = exponent * logp
    logw -= logw.max()
    w = np.exp(logw)
    w /= w.sum()
    return tuple(goals[int(rng.choice(goals.shape[0], p=w))])


def uniform_select(goal_space, rng):
    """Uniform draw over an explicit goal-space support."""
    if len(goal_space) == 0:
        raise EmptyBufferError("empty goal space")
    return tuple(goal_space[int(rng.integers(len(goal_space)))])


class SuccessTable:
    """Per-goal-bin success statistics over a sliding window of pursuits."""

    def __init__(self, window: int = 200):
        self.window = window
        self._records: deque = deque(maxlen=window)

    def record(self, goal_bin, success: bool):
        self._records.append((tuple(goal_bin), bool(success)))

    def estimates(self) -> dict:
        """bin -> (attempts, successes) over the window."""
        stats: dict = {}
        for goal_bin, success in self._records:
            attempts, successes = stats.get(goal_bin, (0, 0))
            stats[goal_bin] = (attempts + 1, successes + int(success))
        return stats

    def __len__(self) -> int:
        return len(self._records)


def goid_select(table: SuccessTable, r_min: float, r_max: float, rng):
    """A goal bin of intermediate estimated difficulty.

    Bins whose success estimate falls inside [r_min, r_max] are sampled with
    weight (0.5 - |estimate - 0.5|) + 0.01; when no bin qualifies, the bin
    with the estimate closest to 0.5 is returned.
    """
    stats = table.estimates()
    if not stats:
        raise EmptyBufferError("success table has no attempted goal bins")
    bins = sorted(stats)
    rates = np.array([stats[b][1] / stats[b][0] for b in bins])
    in_band = np.flatnonzero((rates >= r_min) & (rates <= r_max))
    if in_band.size == 0:
        gap = np.abs(rates - 0.5)
        closest = np.flatnonzero(gap == gap.min())
        return bins[closest[int(rng.integers(len(closest)))]]
    weights = (0.5 - np.abs(rates[in_band] - 0.5)) + 0.01
    weights /= weights.sum()
    return bins[int(rng.choice(in_band, p=weights))]
