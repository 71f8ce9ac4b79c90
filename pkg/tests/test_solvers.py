from __future__ import annotations

from collections import deque

import pytest

from callgym.core import EpisodeConfig, make_env
from callgym.envs.sliding import COLS, EMPTY, ROWS
from callgym.solvers import DEFAULTS, STRATEGIES, SolverError, SolverOptions, min_steps, solve, verify_plan
from callgym.solvers.continuous import _split_scalar
from callgym.solvers.permutation import reorder_payload, selection_swaps

from conftest import ALL_ENVS, env_for


def naive_maze_bfs(wall, src, dst) -> int:
    seen = {src: 0}
    q = deque([src])
    while q:
        r, c = q.popleft()
        if (r, c) == dst:
            return seen[(r, c)]
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if not wall[nr][nc] and (nr, nc) not in seen:
                seen[(nr, nc)] = seen[(r, c)] + 1
                q.append((nr, nc))
    raise AssertionError("unreachable")


def naive_sliding_bfs(start, goal) -> int:
    """Unidirectional BFS written from the movement rules alone."""
    def moves(board):
        for b in set(board) - {EMPTY}:
            cells = [i for i, v in enumerate(board) if v == b]
            for dr, dc in ((-1, 0), (0, 1), (1, 0), (0, -1)):
                dest = []
                for i in cells:
                    r, c = divmod(i, COLS)
                    r, c = r + dr, c + dc
                    if not (0 <= r < ROWS and 0 <= c < COLS) or board[r * COLS + c] not in (EMPTY, b):
                        break
                    dest.append(r * COLS + c)
                else:
                    out = list(board)
                    for i in cells:
                        out[i] = EMPTY
                    for j in dest:
                        out[j] = b
                    yield tuple(out)

    seen = {start: 0}
    q = deque([start])
    while q:
        s = q.popleft()
        if s == goal:
            return seen[s]
        for n in moves(s):
            if n not in seen:
                seen[n] = seen[s] + 1
                q.append(n)
    raise AssertionError("unreachable")


def test_strategy_table():
    assert set(STRATEGIES) == set(ALL_ENVS)
    assert STRATEGIES["matchstick_equation"] == ("bfs", "dfs", "sos")
    assert STRATEGIES["matchstick_rotation"] == ("3_moves", "probe_then_solve")
    assert STRATEGIES["mental_rotation_3d"] == ("solve_only", "rotate_then_solve")
    assert all(DEFAULTS[k] == v[0] for k, v in STRATEGIES.items())


@pytest.mark.parametrize("difficulty", ["easy", "hard"])
def test_default_plans_win(env_id, difficulty):
    for seed in range(3):
        env = env_for(env_id, difficulty, seed)
        before = env.state_hash()
        plan = solve(env)
        assert env.state_hash() == before
        assert plan.actions[-1].name == "stop"
        assert verify_plan(env, plan, EpisodeConfig(env_id, difficulty).step_budget)


def test_every_strategy_hits_targets(env_id):
    env = env_for(env_id, "easy", 7)
    budget = EpisodeConfig(env_id, "easy").step_budget
    for strategy in STRATEGIES[env_id]:
        m = min_steps(env, strategy)
        for target in sorted({m, m + 1, m + 2, budget - 1}):
            plan = solve(env, SolverOptions(strategy, target, seed=1))
            assert plan.steps == target, (strategy, target)
            assert verify_plan(env, plan, budget), (strategy, target)


def test_below_minimum_is_rejected(env_id):
    env = env_for(env_id, "easy", 2)
    strategy = DEFAULTS[env_id]
    m = min_steps(env, strategy)
    if m > 0:
        with pytest.raises(SolverError):
            solve(env, SolverOptions(strategy, m - 1))


def test_unknown_strategy():
    with pytest.raises(SolverError, match="unknown strategy"):
        solve(env_for("maze2d", "easy", 0), SolverOptions("astar"))


def test_maze_bfs_is_optimal():
    for seed in range(10):
        env = env_for("maze2d", "hard", seed)
        assert solve(env).steps == naive_maze_bfs(env.wall, env.agent, env.target)


def test_sliding_bfs_is_optimal():
    for seed in range(5):
        env = make_env(EpisodeConfig("sliding_block", None, {"sm": 6, "ms": 999}, seed=seed))
        assert solve(env).steps == naive_sliding_bfs(env.board, env.target)


def test_maze3d_counts_turns():
    env = env_for("maze3d", "easy", 3)
    plan = solve(env)
    names = [a.name for a in plan.actions[:-1]]
    assert names.count("move") == naive_maze_bfs(env.wall, env.agent, env.target)
    assert plan.steps >= names.count("move")


def test_solver_is_seeded():
    env = env_for("matchstick_equation", "easy", 4)
    a = solve(env, SolverOptions("dfs", seed=3)).texts()
    assert a == solve(env, SolverOptions("dfs", seed=3)).texts()


def test_search_strategies_insert_backtracks():
    env = env_for("matchstick_equation", "hard", 1)
    for strategy in ("dfs", "sos"):
        plan = solve(env, SolverOptions(strategy))
        names = [a.name for a in plan.actions]
        assert plan.meta["backtracks"] >= 1 and names.count("undo") == plan.meta["backtracks"]


def test_probe_then_solve_opens_with_unit_probes():
    env = env_for("matchstick_rotation", "hard", 0)
    plan = solve(env, SolverOptions("probe_then_solve"))
    assert plan.texts()[:2] == ["('move', (1.0, 0.0, 0.0))", "('move', (0.0, 1.0, 0.0))"]
    assert verify_plan(env, plan, 30)


def test_rotate_then_solve_shape():
    env = env_for("mental_rotation_3d", "easy", 0)
    plan = solve(env, SolverOptions("rotate_then_solve"))
    assert plan.steps == 15
    assert plan.texts()[:4] == ["('rotate', (90.0, 0.0, 0.0))"] * 4


def test_reorder_payload_inverts():
    perm = [2, 0, 3, 1]
    p = reorder_payload(perm)
    assert [perm[k] for k in p] == [0, 1, 2, 3]


def test_selection_swaps_sort():
    perm = [3, 1, 0, 2, 4]
    work = list(perm)
    swaps = selection_swaps(perm)
    for i, j in swaps:
        work[i], work[j] = work[j], work[i]
    assert work == sorted(perm) and len(swaps) <= len(perm) - 1


def test_split_scalar_sums_exactly():
    import numpy as np
    rng = np.random.default_rng(0)
    for n in range(1, 6):
        parts = _split_scalar(-137.5, n, rng)
        assert len(parts) == n and sum(parts) == pytest.approx(-137.5) and all(p < 0 for p in parts)
