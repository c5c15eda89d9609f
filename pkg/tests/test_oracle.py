import math

import numpy as np
import pytest

from geaps_lab import env, oracle
from geaps_lab.env import EnvState, GAMDPSpec, Trajectory


def corridor_spec(blocked_left=False):
    walls = frozenset({((0, 0), (1, 0))}) if blocked_left else frozenset()
    maze = env.MazeSpec(width=3, height=1, walls=walls, start_cell=(1, 0),
                        desired_region=frozenset({(2, 0)}))
    return GAMDPSpec(maze=maze, horizon=50, discount=0.98)


def left_right(spec):
    probs = np.zeros(spec.n_actions)
    probs[0] = probs[1] = 0.5
    return lambda state: probs


def test_enumerate_pe_corridor_hand_enumeration():
    spec = corridor_spec()
    pe = oracle.enumerate_pe(spec, env.initial_state(spec), 1, left_right(spec))
    assert pe == {(0, 0): 0.5, (2, 0): 0.5}


def test_enumerate_pe_blocked_corridor_counts_current_cell():
    spec = corridor_spec(blocked_left=True)
    pe = oracle.enumerate_pe(spec, env.initial_state(spec), 1, left_right(spec))
    assert pe == {(1, 0): 0.5, (2, 0): 0.5}


def test_enumerate_pe_sums_to_one_random_instances():
    rng = np.random.default_rng(2)
    for _ in range(20):
        spec = GAMDPSpec(maze=env.generate_maze(int(rng.integers(2**31)), 3, 3, 0.2),
                         horizon=50, discount=0.98)
        pe = oracle.enumerate_pe(spec, env.initial_state(spec), 3)
        assert sum(pe.values()) == pytest.approx(1.0, abs=1e-12)


def test_enumerate_pe_matches_monte_carlo():
    spec = corridor_spec()
    horizon = 3
    exact = oracle.enumerate_pe(spec, env.initial_state(spec), horizon)
    rng = np.random.default_rng(0)
    counts = {}
    n = 100_000
    for _ in range(n):
        state = env.initial_state(spec)
        for _ in range(horizon):
            state = env.step(state, int(rng.integers(4)), spec)
            g = env.achieved_goal(state)
            counts[g] = counts.get(g, 0) + 1
    empirical = {g: c / (n * horizon) for g, c in counts.items()}
    tv = 0.5 * sum(abs(exact.get(g, 0) - empirical.get(g, 0))
                   for g in set(exact) | set(empirical))
    assert tv < 0.01


def test_enumeration_guard():
    spec = corridor_spec()
    with pytest.raises(oracle.EnumerationLimitError):
        oracle.enumerate_trajectories(spec, env.initial_state(spec), 20)


def test_mixture_check_identical_components_equality():
    p = {0: 0.25, 1: 0.75}
    lhs, rhs, holds = oracle.entropy_mixture_check(p, p, 0.3)
    assert holds
    assert lhs == pytest.approx(rhs, abs=1e-15)


def test_mixture_check_disjoint_uniforms():
    p1 = {0: 0.5, 1: 0.5}
    p2 = {2: 0.5, 3: 0.5}
    lhs, rhs, holds = oracle.entropy_mixture_check(p1, p2, 0.5)
    assert holds
    assert lhs == pytest.approx(math.log(4.0), abs=1e-12)
    assert rhs == pytest.approx(math.log(2.0), abs=1e-12)


def test_mixture_check_random_triples_hold():
    rng = np.random.default_rng(4)
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        p1 = {i: float(v) for i, v in enumerate(rng.dirichlet(np.ones(n)))}
        p2 = {i: float(v) for i, v in enumerate(rng.dirichlet(np.ones(n)))}
        _, _, holds = oracle.entropy_mixture_check(p1, p2, float(rng.random()))
        assert holds


def test_mixture_check_rejects_invalid_distribution():
    with pytest.raises(ValueError):
        oracle.entropy_mixture_check({0: 0.5}, {0: 1.0}, 0.5)


def make_trajectory(spec, actions):
    state = env.initial_state(spec)
    states = [state]
    for a in actions:
        state = env.step(state, a, spec)
        states.append(state)
    return Trajectory(states=states, actions=list(actions))


def test_decompose_repeated_then_new_goal():
    # goal sequence (g1, g1, g2): one pattern spanning both actions
    spec = corridor_spec(blocked_left=True)
    traj = make_trajectory(spec, [1, 0])  # blocked left (stay), then right
    obs = lambda s: env.agent_obs(s, spec)
    patterns = oracle.decompose_trajectory(traj, env.achieved_goal, obs)
    assert len(patterns) == 1
    assert patterns[0].delta_g == (1, 0)
    assert patterns[0].cardinality == 2


def test_decompose_constant_goal_single_zero_pattern():
    spec = corridor_spec(blocked_left=True)
    traj = make_trajectory(spec, [1, 1, 1])
    obs = lambda s: env.agent_obs(s, spec)
    patterns = oracle.decompose_trajectory(traj, env.achieved_goal, obs)
    assert len(patterns) == 1
    assert patterns[0].delta_g == (0, 0)
    assert patterns[0].actions == (1, 1, 1)


def test_decompose_empty_trajectory_raises():
    spec = corridor_spec()
    traj = Trajectory(states=[env.initial_state(spec)], actions=[])
    with pytest.raises(ValueError):
        oracle.decompose_trajectory(traj, env.achieved_goal, lambda s: 0)


def test_decompose_replay_round_trip_random():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        spec = GAMDPSpec(maze=env.generate_maze(int(rng.integers(2**31)), 4, 3, 0.3),
                         horizon=50, discount=0.98)
        actions = [int(rng.integers(4)) for _ in range(int(rng.integers(1, 10)))]
        traj = make_trajectory(spec, actions)
        obs = lambda s, sp=spec: env.agent_obs(s, sp)
        patterns = oracle.decompose_trajectory(traj, env.achieved_goal, obs)
        replayed = oracle.replay_patterns(traj.states[0], patterns, spec)
        assert [env.achieved_goal(s) for s in replayed] == \
            [env.achieved_goal(s) for s in traj.states]
        assert sum(p.cardinality for p in patterns) == len(actions)


def test_substitute_shorter_pattern_reduces_steps():
    p_long = oracle.GoalTransitionPattern(agent_start=0, agent_end=0,
                                          delta_g=(1, 0), actions=(1, 0, 0))
    p_short = oracle.GoalTransitionPattern(agent_start=0, agent_end=0,
                                           delta_g=(1, 0), actions=(0,))
    library = oracle.pattern_library([p_long, p_short])
    plan, total = oracle.substitute_patterns([p_long], library)
    assert total == 1
    assert plan[0] is p_short


def test_substitute_self_library_is_identity():
    spec = corridor_spec()
    traj = make_trajectory(spec, [0, 1, 1])
    obs = lambda s: env.agent_obs(s, spec)
    decomp = oracle.decompose_trajectory(traj, env.achieved_goal, obs)
    library = oracle.pattern_library(decomp)
    plan, total = oracle.substitute_patterns(decomp, library)
    assert total == len(traj)
    assert [p.match_key for p in plan] == [p.match_key for p in decomp]


def test_substitute_missing_pattern_names_delta():
    p = oracle.GoalTransitionPattern(agent_start=0, agent_end=0,
                                     delta_g=(2, 2), actions=(0, 0))
    with pytest.raises(oracle.UnmatchedPatternError, match=r"\(2, 2\)"):
        oracle.substitute_patterns([p], {})


def test_substitute_full_library_within_budget():
    rng = np.random.default_rng(5)
    for seed in range(3):
        spec = GAMDPSpec(maze=env.generate_maze(seed, 3, 3, 0.4),
                         horizon=50, discount=0.98)
        horizon = 4
        ts = oracle.enumerate_trajectories(spec, env.initial_state(spec), horizon)
        obs = lambda s, sp=spec: env.agent_obs(s, sp)
        decomps = [oracle.decompose_trajectory(t, env.achieved_goal, obs)
                   for t in ts.trajectories]
        library = oracle.pattern_library([p for d in decomps for p in d])
        for d in decomps:
            _, total = oracle.substitute_patterns(d, library)
            assert total <= horizon


def test_cluster_singletons_match_trajectory_decomposition():
    spec = corridor_spec()
    ts = oracle.enumerate_trajectories(spec, env.initial_state(spec), 2)
    rep = oracle.cluster_equivalence(ts, env.achieved_goal, list(range(len(ts.trajectories))))
    assert rep.mi_skills == pytest.approx(rep.mi_trajectories, abs=1e-12)
    assert rep.h_given_skills == pytest.approx(rep.h_given_trajectories, abs=1e-12)


def test_cluster_single_cluster_collapses_mi():
    spec = corridor_spec()
    ts = oracle.enumerate_trajectories(spec, env.initial_state(spec), 2)
    rep = oracle.cluster_equivalence(ts, env.achieved_goal, [0] * len(ts.trajectories))
    assert rep.mi_skills == pytest.approx(0.0, abs=1e-12)
    assert rep.sums_equal
    pe = oracle.enumerate_pe(spec, env.initial_state(spec), 2)
    assert rep.h_given_skills == pytest.approx(oracle.shannon_entropy(pe), abs=1e-12)


def test_cluster_random_clusterings_preserve_sum():
    spec = corridor_spec()
    ts = oracle.enumerate_trajectories(spec, env.initial_state(spec), 2)
    rng = np.random.default_rng(10)
    for _ in range(100):
        ids = list(rng.integers(int(rng.integers(1, 5)), size=len(ts.trajectories)))
        rep = oracle.cluster_equivalence(ts, env.achieved_goal, ids)
        assert rep.sums_equal


def test_goal_entropy_identity():
    spec = corridor_spec()
    ts = oracle.enumerate_trajectories(spec, env.initial_state(spec), 2)
    pe = oracle.enumerate_pe(spec, env.initial_state(spec), 2)
    rep = oracle.cluster_equivalence(ts, env.achieved_goal, list(range(len(ts.trajectories))))
    assert oracle.shannon_entropy(pe) == pytest.approx(
        rep.mi_trajectories + rep.h_given_trajectories, abs=1e-9)


def test_run_verification_passes():
    report = oracle.run_verification()
    assert report["passed"]
    assert report["runtime_seconds"] < 60.0
