"""Brute-force verifiers for the exploration-entropy machinery.

Everything here is exact and enumeration-based: trajectory trees are walked
in full (guarded), entropies are computed from explicit distributions, and
trajectory decompositions are replayed action by action. These routines are
the ground truth the statistical modules are tested against, and they back
the ``geaps-lab oracle`` subcommand.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import env
from .env import EnvState, GAMDPSpec, Trajectory

ENUMERATION_GUARD = 10**7


class EnumerationLimitError(ValueError):
    """Raised when a requested enumeration would exceed the guard."""


class UnmatchedPatternError(ValueError):
    """Raised when a pattern has no library match for its goal transition."""


# ---------------------------------------------------------------------------
# exact distributions and entropies
# ---------------------------------------------------------------------------

def shannon_entropy(dist) -> float:
    """Exact Shannon entropy in nats of a mapping or array of probabilities."""
    if isinstance(dist, dict):
        probs = np.asarray(list(dist.values()), dtype=np.float64)
    else:
        probs = np.asarray(dist, dtype=np.float64)
    probs = probs[probs > 0]
    return float(-(probs * np.log(probs)).sum())


def _check_distribution(dist, tol=1e-9):
    total = sum(dist.values())
    if abs(total - 1.0) > tol or any(p < -tol for p in dist.values()):
        raise ValueError(f"not a probability distribution (sum={total})")


def entropy_mixture_check(p1: dict, p2: dict, c: float):
    """Mixture entropy versus the weighted sum of component entropies.

    Returns (mixture entropy, weighted bound, holds), where holds means the
    mixture entropy is at least the bound minus 1e-12.
    """
    _check_distribution(p1)
    _check_distribution(p2)
    if not (0.0 <= c <= 1.0):
        raise ValueError("mixture weight must lie in [0, 1]")
    support = set(p1) | set(p2)
    mix = {g: c * p1.get(g, 0.0) + (1.0 - c) * p2.get(g, 0.0) for g in support}
    lhs = shannon_entropy(mix)
    rhs = c * shannon_entropy(p1) + (1.0 - c) * shannon_entropy(p2)
    return lhs, rhs, lhs >= rhs - 1e-12


# ---------------------------------------------------------------------------
# exhaustive trajectory enumeration
# ---------------------------------------------------------------------------

@dataclass
class TrajectorySet:
    trajectories: list[Trajectory]
    probs: np.ndarray
    horizon: int


def uniform_policy(spec: GAMDPSpec):
    probs = np.full(spec.n_actions, 1.0 / spec.n_actions)

    def policy(state: EnvState) -> np.ndarray:
        return probs

    return policy


def enumerate_trajectories(
    spec: GAMDPSpec, start: EnvState, horizon: int, policy=None
) -> TrajectorySet:
    """All positive-probability trajectories of the given length.

    ``policy`` maps a state to per-action probabilities; zero-probability
    branches are pruned. Discrete mazes only.
    """
    if spec.continuous:
        raise ValueError("trajectory enumeration is defined for discrete mazes only")
    if spec.n_actions**horizon > ENUMERATION_GUARD:
        raise EnumerationLimitError(
            f"{spec.n_actions}^{horizon} trajectories exceed the {ENUMERATION_GUARD} guard"
        )
    if policy is None:
        policy = uniform_policy(spec)

    trajectories: list[Trajectory] = []
    probs: list[float] = []

    def walk(states, actions, prob):
        if len(actions) == horizon:
            trajectories.append(Trajectory(states=list(states), actions=list(actions)))
            probs.append(prob)
            return
        state = states[-1]
        action_probs = policy(state)
        for a in range(spec.n_actions):
            pa = float(action_probs[a])
            if pa == 0.0:
                continue
            states.append(env.step(state, a, spec))
            actions.append(a)
            walk(states, actions, prob * pa)
            states.pop()
            actions.pop()

    walk([start], [], 1.0)
    return TrajectorySet(trajectories=trajectories, probs=np.asarray(probs), horizon=horizon)


def visit_distribution(traj: Trajectory, phi, horizon: int) -> dict:
    """Goal-visit frequencies over the post-initial states, normalized by T."""
    dist: dict = {}
    for state in traj.states[1 : horizon + 1]:
        g = phi(state)
        dist[g] = dist.get(g, 0.0) + 1.0 / horizon
    return dist


def enumerate_pe(spec: GAMDPSpec, start: EnvState, horizon: int, policy=None) -> dict:
    """Exact goal-encounter distribution of an exploration policy."""
    ts = enumerate_trajectories(spec, start, horizon, policy)
    pe: dict = {}
    for traj, p in zip(ts.trajectories, ts.probs):
        for g, f in visit_distribution(traj, env.achieved_goal, horizon).items():
            pe[g] = pe.get(g, 0.0) + float(p) * f
    return pe


# ---------------------------------------------------------------------------
# goal-transition patterns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GoalTransitionPattern:
    agent_start: object
    agent_end: object
    delta_g: tuple
    actions: tuple

    @property
    def cardinality(self) -> int:
        return len(self.actions)

    @property
    def match_key(self):
        return (self.agent_start, self.agent_end, self.delta_g)


def _delta(g_from, g_to) -> tuple:
    return tuple(b - a for a, b in zip(g_from, g_to))


def decompose_trajectory(traj: Trajectory, phi, obs_fn) -> list[GoalTransitionPattern]:
    """Split a trajectory at its maximal constant-goal segments.

    Each pattern spans from the first occurrence of one goal to the first
    occurrence of the next; a terminal marker closes the last segment, so a
    constant-goal trajectory becomes a single zero-transition pattern.
    Concatenating the pattern action sequences reproduces the trajectory.
    """
    if len(traj) < 1:
        raise ValueError("cannot decompose an empty trajectory")
    goals = [phi(s) for s in traj.states]
    horizon = len(traj.actions)
    anchors = [(goals[0], 0)]
    for t in range(1, len(goals)):
        if goals[t] != anchors[-1][0]:
            anchors.append((goals[t], t))
    if anchors[-1][1] != horizon:
        anchors.append((goals[horizon], horizon))
    patterns = []
    for (g_a, t_a), (g_b, t_b) in zip(anchors, anchors[1:]):
        patterns.append(
            GoalTransitionPattern(
                agent_start=obs_fn(traj.states[t_a]),
                agent_end=obs_fn(traj.states[t_b]),
                delta_g=_delta(g_a, g_b),
                actions=tuple(traj.actions[t_a:t_b]),
            )
        )
    return patterns


def replay_patterns(start: EnvState, patterns, spec: GAMDPSpec) -> list[EnvState]:
    """Execute the concatenated pattern actions from a start state."""
    states = [start]
    for pattern in patterns:
        for a in pattern.actions:
            states.append(env.step(states[-1], a, spec))
    return states


def pattern_library(patterns) -> dict:
    """Minimal-cardinality pattern per (start obs, end obs, goal delta)."""
    lib: dict = {}
    for p in patterns:
        best = lib.get(p.match_key)
        if best is None or p.cardinality < best.cardinality:
            lib[p.match_key] = p
    return lib


def substitute_patterns(decomp, library: dict):
    """Swap each pattern for the cheapest library match; returns (plan, steps)."""
    plan = []
    total = 0
    for p in decomp:
        match = library.get(p.match_key)
        if match is None:
            raise UnmatchedPatternError(
                f"no library pattern for goal transition {p.delta_g}"
            )
        chosen = match if match.cardinality <= p.cardinality else p
        plan.append(chosen)
        total += chosen.cardinality
    return plan, total


# ---------------------------------------------------------------------------
# skill-cluster equivalence
# ---------------------------------------------------------------------------

@dataclass
class ClusterReport:
    mi_skills: float
    h_given_skills: float
    mi_trajectories: float
    h_given_trajectories: float
    sums_equal: bool


def _joint_information(weights, visit_dists):
    """(I(W;G), H(G|W)) for p(w)=weights and rows p(g|w)=visit_dists."""
    support = sorted({g for d in visit_dists for g in d})
    marginal = {g: 0.0 for g in support}
    for w, dist in zip(weights, visit_dists):
        for g, f in dist.items():
            marginal[g] += w * f
    mi = 0.0
    h_cond = 0.0
    for w, dist in zip(weights, visit_dists):
        if w == 0.0:
            continue
        for g, f in dist.items():
            if f <= 0.0:
                continue
            joint = w * f
            mi += joint * np.log(f / marginal[g])
            h_cond -= joint * np.log(f)
    return float(mi), float(h_cond)


def cluster_equivalence(ts: TrajectorySet, phi, clustering) -> ClusterReport:
    """Information decomposition through a clustering versus raw trajectories.

    ``clustering`` is a callable on a trajectory or a sequence of cluster ids
    aligned with ``ts.trajectories``. Verifies that grouping trajectories
    into skills preserves I + H(G|.) exactly.
    """
    if callable(clustering):
        ids = [clustering(t) for t in ts.trajectories]
    else:
        ids = list(clustering)
        if len(ids) != len(ts.trajectories):
            raise ValueError("clustering length mismatch")

    visit_dists = [visit_distribution(t, phi, ts.horizon) for t in ts.trajectories]

    cluster_ids = sorted(set(ids))
    weights = []
    cluster_dists = []
    for z in cluster_ids:
        members = [i for i, cid in enumerate(ids) if cid == z]
        pz = float(sum(ts.probs[i] for i in members))
        if pz == 0.0:
            raise ValueError(f"cluster {z} carries no probability mass")
        dist: dict = {}
        for i in members:
            for g, f in visit_dists[i].items():
                dist[g] = dist.get(g, 0.0) + float(ts.probs[i]) / pz * f
        weights.append(pz)
        cluster_dists.append(dist)

    mi_z, h_z = _joint_information(weights, cluster_dists)
    mi_t, h_t = _joint_information([float(p) for p in ts.probs], visit_dists)
    sums_equal = abs((mi_z + h_z) - (mi_t + h_t)) <= 1e-9
    return ClusterReport(
        mi_skills=mi_z,
        h_given_skills=h_z,
        mi_trajectories=mi_t,
        h_given_trajectories=h_t,
        sums_equal=sums_equal,
    )


# ---------------------------------------------------------------------------
# full verification suite (CLI `oracle`)
# ---------------------------------------------------------------------------

def _corridor_spec(blocked_left=False):
    walls = frozenset({((0, 0), (1, 0))}) if blocked_left else frozenset()
    maze = env.MazeSpec(
        width=3, height=1, walls=walls, start_cell=(1, 0),
        desired_region=frozenset({(2, 0)}),
    )
    return GAMDPSpec(maze=maze, horizon=50, discount=0.98)


def _left_right_policy(spec):
    probs = np.zeros(spec.n_actions)
    probs[0] = 0.5
    probs[1] = 0.5

    def policy(state):
        return probs

    return policy


def _random_trajectory(rng, spec, max_len=12) -> Trajectory:
    state = env.initial_state(spec)
    states = [state]
    actions = []
    for _ in range(int(rng.integers(1, max_len + 1))):
        a = int(rng.integers(spec.n_actions))
        state = env.step(state, a, spec)
        states.append(state)
        actions.append(a)
    return Trajectory(states=states, actions=actions)


def run_verification(seed: int = 0) -> dict:
    """Run every oracle check; returns a JSON-ready report with a pass flag."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    report: dict = {"checks": {}, "passed": True}

    def record(name, ok, **extra):
        report["checks"][name] = {"ok": bool(ok), **extra}
        if not ok:
            report["passed"] = False

    # exact goal-encounter distribution on the corridor fixtures
    spec = _corridor_spec()
    pe = enumerate_pe(spec, env.initial_state(spec), 1, _left_right_policy(spec))
    expected = {(0, 0): 0.5, (2, 0): 0.5}
    ok = set(pe) == set(expected) and all(abs(pe[g] - expected[g]) < 1e-15 for g in expected)
    record("pe_corridor_open", ok, distribution={str(k): v for k, v in pe.items()})

    spec_b = _corridor_spec(blocked_left=True)
    pe_b = enumerate_pe(spec_b, env.initial_state(spec_b), 1, _left_right_policy(spec_b))
    expected_b = {(1, 0): 0.5, (2, 0): 0.5}
    ok = set(pe_b) == set(expected_b) and all(
        abs(pe_b[g] - expected_b[g]) < 1e-15 for g in expected_b
    )
    record("pe_corridor_blocked", ok, distribution={str(k): v for k, v in pe_b.items()})

    total_ok = True
    for _ in range(50):
        t_spec = GAMDPSpec(
            maze=env.generate_maze(int(rng.integers(2**31)), 3, 2, 0.3),
            horizon=50, discount=0.98,
        )
        pe_r = enumerate_pe(t_spec, env.initial_state(t_spec), 3)
        total_ok &= abs(sum(pe_r.values()) - 1.0) < 1e-12
    record("pe_normalization_random", total_ok)

    # mixture-entropy lower bound on random triples
    worst = 0.0
    ok = True
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        p1 = rng.dirichlet(np.ones(n))
        p2 = rng.dirichlet(np.ones(n))
        c = float(rng.random())
        lhs, rhs, holds = entropy_mixture_check(
            {i: float(v) for i, v in enumerate(p1)},
            {i: float(v) for i, v in enumerate(p2)},
            c,
        )
        worst = max(worst, rhs - lhs)
        ok &= holds
    record("entropy_mixture_1000", ok, worst_violation=worst)

    # decompose / replay round trip on random trajectories
    ok = True
    for i in range(1000):
        t_spec = GAMDPSpec(
            maze=env.generate_maze(int(rng.integers(2**31)), 4, 4, 0.25),
            horizon=50, discount=0.98,
        )
        traj = _random_trajectory(rng, t_spec)
        obs_fn = lambda s, sp=t_spec: env.agent_obs(s, sp)
        patterns = decompose_trajectory(traj, env.achieved_goal, obs_fn)
        replayed = replay_patterns(traj.states[0], patterns, t_spec)
        ok &= [env.achieved_goal(s) for s in replayed] == [
            env.achieved_goal(s) for s in traj.states
        ]
        ok &= sum(p.cardinality for p in patterns) == len(traj)
    record("decompose_replay_1000", ok)

    # pattern substitution never exceeds the exploration horizon
    sub_spec = GAMDPSpec(maze=env.generate_maze(5, 3, 3, 0.4), horizon=50, discount=0.98)
    horizon = 4
    ts = enumerate_trajectories(sub_spec, env.initial_state(sub_spec), horizon)
    obs_fn = lambda s: env.agent_obs(s, sub_spec)
    decomps = [decompose_trajectory(t, env.achieved_goal, obs_fn) for t in ts.trajectories]
    library = pattern_library([p for d in decomps for p in d])
    ok = True
    improved = 0
    for d in decomps:
        _, total = substitute_patterns(d, library)
        ok &= total <= horizon
        improved += int(total < horizon)
    record("substitution_within_budget", ok, trajectories=len(decomps), improved=improved)

    # information-sum preservation under arbitrary clusterings
    c_spec = _corridor_spec()
    ts2 = enumerate_trajectories(c_spec, env.initial_state(c_spec), 2)
    ok = True
    worst = 0.0
    for _ in range(100):
        k = int(rng.integers(1, 6))
        ids = rng.integers(k, size=len(ts2.trajectories))
        rep = cluster_equivalence(ts2, env.achieved_goal, list(ids))
        gap = abs((rep.mi_skills + rep.h_given_skills)
                  - (rep.mi_trajectories + rep.h_given_trajectories))
        worst = max(worst, gap)
        ok &= rep.sums_equal
    record("cluster_equivalence_100", ok, worst_gap=worst)

    # entropy of the goal-encounter marginal equals I + H(G|Omega)
    pe2 = enumerate_pe(c_spec, env.initial_state(c_spec), 2)
    rep = cluster_equivalence(ts2, env.achieved_goal, list(range(len(ts2.trajectories))))
    gap = abs(shannon_entropy(pe2) - (rep.mi_trajectories + rep.h_given_trajectories))
    record("goal_entropy_identity", gap <= 1e-9, gap=gap)

    report["runtime_seconds"] = time.perf_counter() - t0
    return report
