"""Tabular goal-conditioned learner with hindsight relabelling.

The replay buffer keeps transitions as flat arrays grouped by trajectory
(cell ids for the learner, float coordinates for density fitting) so the
per-step training batch — uniform sampling, rfaab relabelling, one-step TD —
runs through the compiled kernels in ``accel``. Relabelled rewards are the
sparse reach indicator on cell-binned goals; continuous positions are binned
to maze cells for every table key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import accel, env
from .density import EmptyBufferError
from .env import EnvState, GAMDPSpec, Trajectory

POOL_CAPACITY = 50_000

RFAAB_CATEGORIES = ("real", "future", "actual", "achieved", "behavioral")


def parse_rfaab(text: str) -> np.ndarray:
    """Parse a relabelling mix like ``rfaab_1_4_3_1_1`` into its five ratios."""
    parts = text.strip().split("_")
    if parts[0] != "rfaab" or len(parts) != 6:
        raise ValueError(f"malformed relabelling strategy {text!r}")
    ratios = np.array([int(p) for p in parts[1:]], dtype=np.float64)
    if (ratios < 0).any() or ratios.sum() <= 0:
        raise ValueError("relabelling ratios must be non-negative with a positive sum")
    return ratios


@dataclass
class Transition:
    """One step of experience; ``goal`` is None for exploration data."""

    s: EnvState
    a: object
    s_next: EnvState
    goal: tuple | None = None


class ReplayBuffer:
    """Bounded transition store; eviction drops whole leading trajectories."""

    _FIELDS = ("s_cell", "action", "next_cell", "ag_cell", "goal_cell", "traj_end")

    def __init__(self, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        size = min(capacity, 4096)
        self.s_cell = np.empty(size, dtype=np.int64)
        self.action = np.empty(size, dtype=np.int64)
        self.next_cell = np.empty(size, dtype=np.int64)
        self.ag_cell = np.empty(size, dtype=np.int64)
        self.goal_cell = np.empty(size, dtype=np.int64)
        self.traj_end = np.empty(size, dtype=np.int64)
        self.ag_xy = np.empty((size, 2), dtype=np.float64)
        self._n = 0
        self._traj_bounds: list[tuple[int, int]] = []

    def __len__(self) -> int:
        return self._n

    @property
    def achieved_goals(self) -> np.ndarray:
        return self.ag_xy[: self._n]

    def _grow_to(self, n: int):
        size = self.s_cell.shape[0]
        if n <= size:
            return
        new = max(n, min(self.capacity, size * 2))
        for name in self._FIELDS:
            arr = getattr(self, name)
            out = np.empty(new, dtype=arr.dtype)
            out[: self._n] = arr[: self._n]
            setattr(self, name, out)
        xy = np.empty((new, 2), dtype=np.float64)
        xy[: self._n] = self.ag_xy[: self._n]
        self.ag_xy = xy

    def _evict(self, needed: int):
        drop = 0
        freed = 0
        while freed < needed and drop < len(self._traj_bounds):
            start, end = self._traj_bounds[drop]
            freed += end - start
            drop += 1
        offset = self._traj_bounds[drop - 1][1]
        keep = self._n - offset
        for name in self._FIELDS:
            arr = getattr(self, name)
            arr[:keep] = arr[offset : self._n]
        self.ag_xy[:keep] = self.ag_xy[offset : self._n]
        self.traj_end[:keep] -= offset
        self._traj_bounds = [(s - offset, e - offset) for s, e in self._traj_bounds[drop:]]
        self._n = keep

    def add_trajectory(self, trajectory: Trajectory, spec: GAMDPSpec):
        """Append a rollout; per-transition goal labels of None mean unlabeled."""
        n = len(trajectory)
        if n == 0:
            return
        if n > self.capacity:
            raise ValueError("trajectory longer than buffer capacity")
        if self._n + n > self.capacity:
            self._evict(self._n + n - self.capacity)
        self._grow_to(self._n + n)
        maze = spec.maze
        lo = self._n
        labels = trajectory.goal_labels or [None] * n
        for i in range(n):
            s = trajectory.states[i]
            s_next = trajectory.states[i + 1]
            ag = env.achieved_goal(s_next)
            goal = labels[i]
            j = lo + i
            self.s_cell[j] = maze.cell_index(env.goal_cell(s.position, spec))
            # continuous rollouts store palette indices, never raw displacements
            self.action[j] = int(trajectory.actions[i])
            self.next_cell[j] = maze.cell_index(env.goal_cell(s_next.position, spec))
            self.ag_cell[j] = maze.cell_index(env.goal_cell(ag, spec))
            self.goal_cell[j] = (
                -1 if goal is None else maze.cell_index(env.goal_cell(goal, spec))
            )
            self.ag_xy[j, 0] = float(ag[0])
            self.ag_xy[j, 1] = float(ag[1])
        self._n += n
        self.traj_end[lo : self._n] = self._n
        self._traj_bounds.append((lo, self._n))


class GoalPools:
    """FIFO rings of historical desired-goal and behavioral-goal cells."""

    def __init__(self, capacity: int = POOL_CAPACITY):
        self.capacity = capacity
        self.actual = np.empty(capacity, dtype=np.int64)
        self.behavioral = np.empty(capacity, dtype=np.int64)
        self.n_actual = 0
        self.n_behavioral = 0
        self._actual_head = 0
        self._behavioral_head = 0

    def record_actual(self, cell_idx: int):
        self.actual[self._actual_head] = cell_idx
        self._actual_head = (self._actual_head + 1) % self.capacity
        self.n_actual = min(self.n_actual + 1, self.capacity)

    def record_behavioral(self, cell_idx: int):
        self.behavioral[self._behavioral_head] = cell_idx
        self._behavioral_head = (self._behavioral_head + 1) % self.capacity
        self.n_behavioral = min(self.n_behavioral + 1, self.capacity)


class QTable:
    """Dense (state cell, goal cell, action) value table."""

    def __init__(self, spec: GAMDPSpec, learning_rate: float = 0.5):
        n_cells = spec.maze.width * spec.maze.height
        self.spec = spec
        self.learning_rate = float(learning_rate)
        self.discount = float(spec.discount)
        self.values = np.zeros((n_cells, n_cells, spec.n_actions), dtype=np.float64)
        self.value_cap = 1.0 / (1.0 - self.discount) if self.discount < 1.0 else 1e12

    @property
    def n_actions(self) -> int:
        return self.values.shape[2]

    def cell_index(self, position) -> int:
        return self.spec.maze.cell_index(env.goal_cell(position, self.spec))


def act(q: QTable, state: EnvState, goal, epsilon: float, rng) -> int:
    """Epsilon-greedy action index with uniform tie-breaking on the argmax."""
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q.n_actions))
    row = q.values[q.cell_index(state.position), q.cell_index(goal)]
    ties = np.flatnonzero(row == row.max())
    if ties.shape[0] == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.shape[0])])


@dataclass
class SampledBatch:
    """Uniform buffer draw plus the context relabelling needs."""

    buffer: ReplayBuffer
    idx: np.ndarray

    def __len__(self) -> int:
        return len(self.idx)


@dataclass
class LabelledBatch:
    s_cell: np.ndarray
    action: np.ndarray
    next_cell: np.ndarray
    ag_cell: np.ndarray
    goal: np.ndarray
    category: np.ndarray


def sample_batch(buffer: ReplayBuffer, n: int, rng) -> SampledBatch:
    """n transitions drawn uniformly with replacement."""
    if len(buffer) == 0:
        raise EmptyBufferError("cannot sample from an empty replay buffer")
    if n < 1:
        raise ValueError("batch size must be at least 1")
    u = rng.random(n)
    idx = np.minimum((u * len(buffer)).astype(np.int64), len(buffer) - 1)
    return SampledBatch(buffer=buffer, idx=idx)


def _draw_categories(ratios: np.ndarray, n: int, rng) -> np.ndarray:
    cum = np.cumsum(ratios / ratios.sum())
    return np.searchsorted(cum, rng.random(n), side="right").astype(np.int64)


def relabel(batch: SampledBatch, ratios: np.ndarray, rng, pools: GoalPools | None = None) -> LabelledBatch:
    """Assign each transition a goal per its drawn rfaab category.

    real keeps the stored goal (unlabeled exploration data falls through to
    an achieved draw), future picks a later achieved goal from the same
    trajectory, actual/achieved/behavioral draw from the respective pools;
    empty pools fall back to the transition's own achieved goal.
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (5,) or (ratios < 0).any() or ratios.sum() <= 0:
        raise ValueError("ratios must be 5 non-negative numbers with a positive sum")
    if pools is None:
        pools = GoalPools(capacity=1)
    buf = batch.buffer
    n = len(batch)
    cat = _draw_categories(ratios, n, rng)
    labels = accel.relabel_goals(
        batch.idx,
        cat,
        rng.random(n),
        rng.random(n),
        buf.goal_cell[: len(buf)],
        buf.ag_cell[: len(buf)],
        buf.traj_end[: len(buf)],
        pools.actual,
        pools.n_actual,
        pools.behavioral,
        pools.n_behavioral,
    )
    return LabelledBatch(
        s_cell=buf.s_cell[batch.idx],
        action=buf.action[batch.idx],
        next_cell=buf.next_cell[batch.idx],
        ag_cell=buf.ag_cell[batch.idx],
        goal=labels,
        category=cat,
    )


def q_update(q: QTable, labelled: LabelledBatch, goal_reached_predicate=None) -> QTable:
    """One-step TD update over a labelled batch; reward 1 on goal reach.

    The default predicate is cell equality between the transition's achieved
    goal and its label. A custom predicate receives (achieved cell index,
    goal cell index) arrays and returns a boolean array.
    """
    if len(labelled.s_cell) == 0:
        raise ValueError("labelled batch is empty")
    if goal_reached_predicate is None:
        reached = labelled.ag_cell == labelled.goal
    else:
        reached = np.asarray(goal_reached_predicate(labelled.ag_cell, labelled.goal))
    reward = reached.astype(np.float64)
    accel.td_update(
        q.values,
        labelled.s_cell,
        labelled.goal,
        labelled.action,
        reward,
        labelled.next_cell,
        reward,  # done mask equals the reach indicator
        q.learning_rate,
        q.discount,
        q.value_cap,
    )
    return q


def train_step(q: QTable, buffer: ReplayBuffer, pools: GoalPools, ratios: np.ndarray,
               batch_size: int, rng) -> None:
    """Sample, relabel, and TD-update one batch (the per-env-step cadence)."""
    batch = sample_batch(buffer, batch_size, rng)
    labelled = relabel(batch, ratios, rng, pools)
    q_update(q, labelled)
