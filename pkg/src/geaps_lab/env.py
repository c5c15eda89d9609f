"""Maze environments for goal-conditioned control.

A maze is a ``width x height`` grid of free cells with walls living on the
edges between orthogonally adjacent cells; the outer boundary always blocks.
The same layout backs a discrete gridworld (4 cardinal moves, one cell per
step) and a continuous point-mass variant (bounded 2-D displacements with
axis-aligned wall sliding).

Text fixture format (``maze_to_text`` / ``maze_from_text``): an optional
first line ``!continuous``, then ``2*height + 1`` lines of ``2*width + 1``
characters. Rows are printed top-down, i.e. line 1 holds the cells with
``y = height - 1``. Characters at (odd row, odd col) are cells: ``S`` start,
``G`` desired region, ``*`` both, ``.`` plain. All other positions are
structural: ``#`` for a wall or border segment (corner positions are always
``#``), space for an open passage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

Cell = tuple[int, int]

# discrete action order: right, left, up, down
DELTAS = ((1, 0), (-1, 0), (0, 1), (0, -1))
N_DISCRETE_ACTIONS = 4

_SQ = math.sqrt(0.5)
# continuous displacement palette: 8 unit compass directions
CONTINUOUS_ACTIONS = (
    (1.0, 0.0),
    (_SQ, _SQ),
    (0.0, 1.0),
    (-_SQ, _SQ),
    (-1.0, 0.0),
    (-_SQ, -_SQ),
    (0.0, -1.0),
    (_SQ, -_SQ),
)

# continuous motion stops this far short of a blocking wall
WALL_EPS = 1e-9

# goal-reached radius for the continuous variant, in cells
CONTINUOUS_GOAL_RADIUS = 0.5

# within-cell offsets are binned at this pitch for policy keys
OFFSET_BIN = 0.2


class EpisodeExhaustedError(RuntimeError):
    """Raised when stepping an episode whose horizon is already spent."""


def _wall_key(a: Cell, b: Cell) -> tuple[Cell, Cell]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class MazeSpec:
    """Static maze layout plus the desired-goal support."""

    width: int
    height: int
    walls: frozenset[tuple[Cell, Cell]]
    start_cell: Cell
    desired_region: frozenset[Cell]
    continuous_flag: bool = False

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("maze must be at least 1x1")
        if not self.in_bounds(self.start_cell):
            raise ValueError(f"start cell {self.start_cell} out of bounds")
        for cell in self.desired_region:
            if not self.in_bounds(cell):
                raise ValueError(f"desired cell {cell} out of bounds")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def has_wall(self, a: Cell, b: Cell) -> bool:
        if not self.in_bounds(a) or not self.in_bounds(b):
            return True
        return _wall_key(a, b) in self.walls

    def blocked(self, cell: Cell, action: int) -> bool:
        dx, dy = DELTAS[action]
        return self.has_wall(cell, (cell[0] + dx, cell[1] + dy))

    def cells(self) -> list[Cell]:
        return [(x, y) for y in range(self.height) for x in range(self.width)]

    def cell_index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def index_cell(self, idx: int) -> Cell:
        return (idx % self.width, idx // self.width)

    def is_connected(self) -> bool:
        """Flood fill from the start cell over open edges."""
        seen = {self.start_cell}
        stack = [self.start_cell]
        while stack:
            cell = stack.pop()
            for a in range(N_DISCRETE_ACTIONS):
                if self.blocked(cell, a):
                    continue
                dx, dy = DELTAS[a]
                nxt = (cell[0] + dx, cell[1] + dy)
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == self.width * self.height

    def transition_table(self) -> np.ndarray:
        """Dense next-cell-index table, shape (cells, 4); blocked moves self-loop."""
        table = np.empty((self.width * self.height, N_DISCRETE_ACTIONS), dtype=np.int64)
        for cell in self.cells():
            i = self.cell_index(cell)
            for a in range(N_DISCRETE_ACTIONS):
                if self.blocked(cell, a):
                    table[i, a] = i
                else:
                    dx, dy = DELTAS[a]
                    table[i, a] = self.cell_index((cell[0] + dx, cell[1] + dy))
        return table


def generate_maze(
    seed: int,
    width: int,
    height: int,
    loop_prob: float,
    start_cell: Cell | None = None,
    desired_region: frozenset[Cell] | None = None,
    continuous: bool = False,
) -> MazeSpec:
    """Seeded maze generation: backtracker spanning tree plus loop carving.

    Every interior wall that survives the spanning tree is independently
    removed with probability ``loop_prob``, so the layout ranges from a pure
    tree of dead ends (0.0) to an open room (1.0). Out-of-range parameters
    are clamped. The default start is (0, 0) with the diagonally opposite
    corner as the desired region.
    """
    width = max(1, int(width))
    height = max(1, int(height))
    loop_prob = min(1.0, max(0.0, float(loop_prob)))
    if start_cell is None:
        start_cell = (0, 0)
    if desired_region is None:
        desired_region = frozenset({(width - 1, height - 1)})

    rng = np.random.default_rng(seed)
    walls = set()
    for x in range(width):
        for y in range(height):
            if x + 1 < width:
                walls.add(_wall_key((x, y), (x + 1, y)))
            if y + 1 < height:
                walls.add(_wall_key((x, y), (x, y + 1)))

    visited = {start_cell}
    stack = [start_cell]
    while stack:
        cell = stack[-1]
        candidates = []
        for dx, dy in DELTAS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if 0 <= nxt[0] < width and 0 <= nxt[1] < height and nxt not in visited:
                candidates.append(nxt)
        if not candidates:
            stack.pop()
            continue
        nxt = candidates[int(rng.integers(len(candidates)))]
        walls.discard(_wall_key(cell, nxt))
        visited.add(nxt)
        stack.append(nxt)

    if loop_prob > 0.0:
        for wall in sorted(walls):
            if rng.random() < loop_prob:
                walls.discard(wall)

    return MazeSpec(
        width=width,
        height=height,
        walls=frozenset(walls),
        start_cell=start_cell,
        desired_region=desired_region,
        continuous_flag=continuous,
    )


def empty_maze(
    width: int,
    height: int,
    start_cell: Cell | None = None,
    desired_region: frozenset[Cell] | None = None,
    continuous: bool = False,
) -> MazeSpec:
    """Open room with no interior walls."""
    if start_cell is None:
        start_cell = (0, 0)
    if desired_region is None:
        desired_region = frozenset({(width - 1, height - 1)})
    return MazeSpec(
        width=width,
        height=height,
        walls=frozenset(),
        start_cell=start_cell,
        desired_region=desired_region,
        continuous_flag=continuous,
    )


def generate_pretrain_suite(seed: int, count: int, size: int) -> list[MazeSpec]:
    """Distinct small training mazes, all started from the central cell.

    Loop probability is drawn per maze so the suite mixes corridor-heavy and
    open topographies; duplicate layouts are rejected and regenerated.
    """
    if size < 3:
        raise ValueError("suite mazes need size >= 3 for a central start cell")
    count = max(0, int(count))
    rng = np.random.default_rng(seed)
    center = (size // 2, size // 2)
    suite: list[MazeSpec] = []
    seen: set[frozenset] = set()
    while len(suite) < count:
        sub_seed = int(rng.integers(2**62))
        loop_prob = float(rng.uniform(0.0, 0.4))
        maze = generate_maze(sub_seed, size, size, loop_prob, start_cell=center)
        if maze.walls in seen:
            continue
        seen.add(maze.walls)
        suite.append(maze)
    return suite


@dataclass(frozen=True)
class GAMDPSpec:
    """Goal-augmented MDP: maze dynamics plus horizon and discount."""

    maze: MazeSpec
    horizon: int
    discount: float

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError("discount must lie in (0, 1]")

    @property
    def continuous(self) -> bool:
        return self.maze.continuous_flag

    @property
    def n_actions(self) -> int:
        return len(CONTINUOUS_ACTIONS) if self.continuous else N_DISCRETE_ACTIONS


@dataclass(frozen=True)
class EnvState:
    position: tuple
    step_index: int = 0


def initial_state(spec: GAMDPSpec) -> EnvState:
    cell = spec.maze.start_cell
    if spec.continuous:
        return EnvState(position=(cell[0] + 0.5, cell[1] + 0.5), step_index=0)
    return EnvState(position=cell, step_index=0)


def _slide_axis(maze: MazeSpec, pos: float, delta: float, cross_cell, bound: int) -> float:
    """Move one coordinate, stopping just short of a blocking wall."""
    new = pos + delta
    cur = min(int(pos), bound - 1)
    if delta > 0 and new >= cur + 1:
        if cur + 1 >= bound or maze.has_wall(cross_cell(cur), cross_cell(cur + 1)):
            return (cur + 1) - WALL_EPS
    elif delta < 0 and new < cur:
        if cur - 1 < 0 or maze.has_wall(cross_cell(cur), cross_cell(cur - 1)):
            return float(cur) + WALL_EPS
    return new


def step(state: EnvState, action, spec: GAMDPSpec) -> EnvState:
    """Advance one step; blocked motion leaves the position unchanged.

    Discrete mazes take an action index into the four cardinal moves.
    Continuous mazes take a displacement pair, clamped to unit magnitude,
    applied axis by axis so walls slide rather than stop the whole move.
    """
    if state.step_index >= spec.horizon:
        raise EpisodeExhaustedError(
            f"episode horizon {spec.horizon} exhausted at step {state.step_index}"
        )
    maze = spec.maze
    if not spec.continuous:
        a = int(action)
        x, y = state.position
        if maze.blocked((x, y), a):
            new_pos = (x, y)
        else:
            dx, dy = DELTAS[a]
            new_pos = (x + dx, y + dy)
        return EnvState(position=new_pos, step_index=state.step_index + 1)

    dx, dy = float(action[0]), float(action[1])
    norm = math.hypot(dx, dy)
    if norm > 1.0:
        dx, dy = dx / norm, dy / norm
    x, y = state.position
    cy = min(int(y), maze.height - 1)
    x = _slide_axis(maze, x, dx, lambda cx: (cx, cy), maze.width)
    cx = min(int(x), maze.width - 1)
    y = _slide_axis(maze, y, dy, lambda cyy: (cx, cyy), maze.height)
    return EnvState(position=(x, y), step_index=state.step_index + 1)


def apply_action(state: EnvState, action_index: int, spec: GAMDPSpec) -> EnvState:
    """Step with a palette index, valid for both maze variants."""
    if spec.continuous:
        return step(state, CONTINUOUS_ACTIONS[action_index], spec)
    return step(state, action_index, spec)


def achieved_goal(state: EnvState) -> tuple:
    """The goal realized by a state: its position."""
    return state.position


def agent_obs(state: EnvState, spec: GAMDPSpec):
    """Translation-invariant local observation.

    Discrete: 4-bit blocked-move mask (bit i set when cardinal move i is
    blocked by a wall or the border). Continuous: the within-cell offset.
    """
    if spec.continuous:
        x, y = state.position
        return (x - math.floor(x), y - math.floor(y))
    mask = 0
    for a in range(N_DISCRETE_ACTIONS):
        if spec.maze.blocked(state.position, a):
            mask |= 1 << a
    return mask


def n_obs_keys(spec: GAMDPSpec) -> int:
    if spec.continuous:
        side = int(round(1.0 / OFFSET_BIN))
        return side * side
    return 1 << N_DISCRETE_ACTIONS


def obs_index(obs, spec: GAMDPSpec) -> int:
    """Policy-table key for an observation."""
    if spec.continuous:
        side = int(round(1.0 / OFFSET_BIN))
        ix = min(int(obs[0] / OFFSET_BIN), side - 1)
        iy = min(int(obs[1] / OFFSET_BIN), side - 1)
        return iy * side + ix
    return int(obs)


def goal_reached(goal_a, goal_b, spec: GAMDPSpec) -> bool:
    """Exact cell match (discrete) or within half a cell (continuous)."""
    if spec.continuous:
        return math.hypot(goal_a[0] - goal_b[0], goal_a[1] - goal_b[1]) <= CONTINUOUS_GOAL_RADIUS
    return tuple(goal_a) == tuple(goal_b)


def goal_cell(goal, spec: GAMDPSpec) -> Cell:
    """Bin a goal to its maze cell."""
    if not spec.continuous:
        return (int(goal[0]), int(goal[1]))
    x = min(max(int(goal[0]), 0), spec.maze.width - 1)
    y = min(max(int(goal[1]), 0), spec.maze.height - 1)
    return (x, y)


@dataclass
class Trajectory:
    """One rollout: states (length n+1), actions (length n), optional labels.

    ``goal_labels`` holds the pursuit goal per transition, or None for
    goal-free exploration data; ``skill_ids`` records the active skill per
    transition for skill-driven rollouts.
    """

    states: list[EnvState]
    actions: list
    goal_labels: list = field(default_factory=list)
    skill_ids: list | None = None

    def __len__(self) -> int:
        return len(self.actions)


# ---------------------------------------------------------------------------
# text fixtures
# ---------------------------------------------------------------------------

def maze_to_text(maze: MazeSpec) -> str:
    rows = 2 * maze.height + 1
    cols = 2 * maze.width + 1
    grid = [[" "] * cols for _ in range(rows)]
    for r in range(rows):
        for c in range(cols):
            if r % 2 == 0 and c % 2 == 0:
                grid[r][c] = "#"
    for x in range(maze.width):
        for y in range(maze.height):
            r = 2 * (maze.height - 1 - y) + 1
            c = 2 * x + 1
            is_start = (x, y) == maze.start_cell
            is_goal = (x, y) in maze.desired_region
            if is_start and is_goal:
                grid[r][c] = "*"
            elif is_start:
                grid[r][c] = "S"
            elif is_goal:
                grid[r][c] = "G"
            else:
                grid[r][c] = "."
            for a, (dx, dy) in enumerate(DELTAS):
                if maze.has_wall((x, y), (x + dx, y + dy)):
                    grid[r - dy][c + dx] = "#"
    lines = ["".join(row) for row in grid]
    if maze.continuous_flag:
        lines.insert(0, "!continuous")
    return "\n".join(lines) + "\n"


def maze_from_text(text: str) -> MazeSpec:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    continuous = False
    if lines and lines[0].startswith("!"):
        continuous = lines[0].strip() == "!continuous"
        lines = lines[1:]
    rows = len(lines)
    cols = len(lines[0])
    if rows % 2 == 0 or cols % 2 == 0 or any(len(ln) != cols for ln in lines):
        raise ValueError("malformed maze text block")
    height = (rows - 1) // 2
    width = (cols - 1) // 2
    walls = set()
    start: Cell | None = None
    desired: set[Cell] = set()
    for x in range(width):
        for y in range(height):
            r = 2 * (height - 1 - y) + 1
            c = 2 * x + 1
            ch = lines[r][c]
            if ch in ("S", "*"):
                start = (x, y)
            if ch in ("G", "*"):
                desired.add((x, y))
            if x + 1 < width and lines[r][c + 1] == "#":
                walls.add(_wall_key((x, y), (x + 1, y)))
            if y + 1 < height and lines[r - 1][c] == "#":
                walls.add(_wall_key((x, y), (x, y + 1)))
    if start is None:
        raise ValueError("maze text has no start cell")
    return MazeSpec(
        width=width,
        height=height,
        walls=frozenset(walls),
        start_cell=start,
        desired_region=frozenset(desired),
        continuous_flag=continuous,
    )
