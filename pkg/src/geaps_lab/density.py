"""Achieved-goal density models: histogram counts and Gaussian-kernel KDE.

KDE fits follow the usual achieved-goal protocol: goals are min-max
normalized to the unit box per dimension using the fitted batch's extremes
(degenerate dimensions pass through unscaled), the product Gaussian kernel
is applied in normalized space, and queried densities carry the Jacobian
back to original units. Duplicate fit samples are aggregated into weighted
kernels, which keeps lattice-heavy buffers cheap to evaluate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .accel import kde_logpdf

# probability floor used when taking logs of empty bins / underflowed kernels
DENSITY_FLOOR = 1e-12

HISTOGRAM = "histogram"
KDE = "kde"


class EmptyBufferError(ValueError):
    """Raised when a fit or query is attempted over no goals."""


@dataclass
class DensityModel:
    kind: str
    sample_count: int
    bin_size: float = 0.0
    bandwidth: float = 0.0
    # histogram state
    bin_probs: dict = field(default_factory=dict)
    # kde state: aggregated unique samples in normalized space
    samples: np.ndarray | None = None
    log_weights: np.ndarray | None = None
    offset: np.ndarray | None = None
    scale: np.ndarray | None = None


def _as_array(goals) -> np.ndarray:
    arr = np.asarray(goals, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1) if arr.size else arr.reshape(0, 2)
    return arr


def goal_bin(goal, bin_size: float) -> tuple:
    return tuple(int(np.floor(c / bin_size)) for c in goal)


def fit_histogram(goals, bin_size: float) -> DensityModel:
    """Empirical bin probabilities: count / total."""
    arr = _as_array(goals)
    if arr.shape[0] == 0:
        raise EmptyBufferError("cannot fit a histogram to an empty goal buffer")
    if bin_size <= 0:
        raise ValueError("bin_size must be positive")
    bins = np.floor(arr / bin_size).astype(np.int64)
    uniq, counts = np.unique(bins, axis=0, return_counts=True)
    total = counts.sum()
    probs = {tuple(int(v) for v in row): c / total for row, c in zip(uniq, counts)}
    return DensityModel(
        kind=HISTOGRAM, sample_count=int(total), bin_size=float(bin_size), bin_probs=probs
    )


def fit_kde(goals, bandwidth: float) -> DensityModel:
    """Gaussian-kernel KDE over min-max normalized goals."""
    arr = _as_array(goals)
    if arr.shape[0] == 0:
        raise EmptyBufferError("cannot fit a KDE to an empty goal buffer")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    offset = arr.min(axis=0)
    spread = arr.max(axis=0) - offset
    scale = np.where(spread > 0, spread, 1.0)
    normalized = (arr - offset) / scale
    uniq, counts = np.unique(normalized, axis=0, return_counts=True)
    return DensityModel(
        kind=KDE,
        sample_count=int(arr.shape[0]),
        bandwidth=float(bandwidth),
        samples=np.ascontiguousarray(uniq),
        log_weights=np.log(counts.astype(np.float64)),
        offset=offset,
        scale=scale,
    )


def log_density_many(model: DensityModel, goals) -> np.ndarray:
    """Vectorized log density; floored so the result is always finite."""
    arr = _as_array(goals)
    if model.kind == HISTOGRAM:
        out = np.empty(arr.shape[0], dtype=np.float64)
        for i, row in enumerate(arr):
            p = model.bin_probs.get(goal_bin(row, model.bin_size), 0.0)
            out[i] = np.log(max(p, DENSITY_FLOOR))
        return out
    if model.samples is None:
        raise EmptyBufferError("density model is not fitted")
    queries = (arr - model.offset) / model.scale
    log_jac = float(np.log(model.scale).sum())
    logp = kde_logpdf(model.samples, model.log_weights, np.ascontiguousarray(queries),
                      model.bandwidth) - log_jac
    return np.maximum(logp, np.log(DENSITY_FLOOR))


def log_density(model: DensityModel, goal) -> float:
    return float(log_density_many(model, [tuple(goal)])[0])


def empirical_entropy(model: DensityModel, eval_goals=None) -> float:
    """Entropy estimate in nats.

    Histogram models report the exact Shannon entropy of the bin
    distribution. KDE models report the resubstitution estimate
    -mean(log density) over ``eval_goals``.
    """
    if model.kind == HISTOGRAM:
        if eval_goals is not None and len(eval_goals) == 0:
            raise EmptyBufferError("empty evaluation set")
        probs = np.fromiter(model.bin_probs.values(), dtype=np.float64)
        probs = probs[probs > 0]
        return float(-(probs * np.log(probs)).sum())
    if eval_goals is None or len(eval_goals) == 0:
        raise EmptyBufferError("KDE entropy needs a non-empty evaluation set")
    return float(-log_density_many(model, eval_goals).mean())


@dataclass
class SkewedWeights:
    weights: np.ndarray
    exponent: float


def skew_weights(model: DensityModel, buffer_goals, exponent: float) -> SkewedWeights:
    """Per-goal sampling weights proportional to density**exponent."""
    arr = _as_array(buffer_goals)
    if arr.shape[0] == 0:
        raise EmptyBufferError("cannot skew an empty goal buffer")
    logp = log_density_many(model, arr)
    logw = exponent * logp
    logw -= logw.max()
    w = np.exp(logw)
    return SkewedWeights(weights=w / w.sum(), exponent=float(exponent))
