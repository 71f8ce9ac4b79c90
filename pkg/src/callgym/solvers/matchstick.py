"""Matchstick Equation (bfs / dfs / sos) and Matchstick Rotation (3_moves / probe_then_solve)."""

from __future__ import annotations

import numpy as np

from ..envs.matchstick import (
    MatchstickEquation, MatchstickRotation, all_moves, apply_move, equation_valid,
    invalid_positions, shortest_fix, signed_delta,
)
from .base import SolverError, SolverOptions, SolverPlan, call, check_target, solver_rng

MAX_FIX_DEPTH = 3


def _fix(env: MatchstickEquation) -> list:
    # iterative deepening: tighter pruning at small depths makes this far cheaper than one deep search
    for depth in range(MAX_FIX_DEPTH + 1):
        path = shortest_fix(env.classes, env.segs, depth)
        if path is not None:
            return path
    raise SolverError("no fix within depth limit")  # pragma: no cover - generation certifies a short fix


def _occupied_move(env: MatchstickEquation, rng) -> tuple:
    """A move whose destination is taken: rejected by the env, state unchanged."""
    cands = [(i, s, j, t) for i, ss in enumerate(env.segs) for s in sorted(ss)
             for j, tt in enumerate(env.segs) for t in sorted(tt) if (i, s) != (j, t)]
    return cands[int(rng.integers(len(cands)))]


def _detours(segs, classes, correct, rng, count, plausible: bool):
    """``count`` moves from ``segs`` that are not ``correct`` and do not solve the puzzle.

    With ``plausible`` the moves are drawn from those a pruned search would
    expand (they keep the number of broken glyphs repairable).
    """
    moves = all_moves(classes, segs)
    if plausible:
        limit = invalid_positions(classes, segs) + 2
        cand = [m for m in moves if invalid_positions(classes, apply_move(segs, m)) <= limit
                and invalid_positions(classes, apply_move(segs, m)) <= invalid_positions(classes, segs)]
        if len(cand) > 1:
            moves = cand
    out = []
    while len(out) < count:
        m = moves[int(rng.integers(len(moves)))]
        if m != correct and not equation_valid(classes, apply_move(segs, m)):
            out.append(m)
    return out


def solve_equation(env: MatchstickEquation, opts: SolverOptions) -> SolverPlan:
    strategy = opts.strategy or "bfs"
    path = _fix(env)
    if strategy == "bfs" and check_target(opts, len(path)) in (None, len(path)):
        return SolverPlan([call("move", *m) for m in path], "bfs", opts.seed)
    if strategy not in ("bfs", "dfs", "sos"):
        raise SolverError(f"unknown strategy {strategy!r}")
    rng = solver_rng(env, opts, strategy)
    target = check_target(opts, len(path))
    if target is None:
        tries = int(rng.integers(1, 4)) if strategy == "dfs" else int(rng.integers(1, 3))
        extra = 2 * tries
    else:
        extra = target - len(path)
    n_pairs, odd = divmod(extra, 2)
    per_step = [0] * len(path)
    for _ in range(n_pairs):
        per_step[int(rng.integers(len(path)))] += 1
    actions = []
    segs = env.segs
    if odd:
        actions.append(call("move", *_occupied_move(env, rng)))
    backtracks = 0
    for m, k in zip(path, per_step):
        for d in _detours(segs, env.classes, m, rng, k, plausible=strategy == "dfs"):
            actions += [call("move", *d), call("undo")]
            backtracks += 1
        actions.append(call("move", *m))
        segs = apply_move(segs, m)
    return SolverPlan(actions, strategy, opts.seed, {"backtracks": backtracks})


def _rotation_deltas(env: MatchstickRotation):
    (x, y, th), (tx, ty, tth) = env.current, env.target
    return (tx - x) / env.scale, (ty - y) / env.scale, signed_delta(th, tth)


def _splits(total: np.ndarray, pieces: int, rng) -> list[np.ndarray]:
    """Split a vector into ``pieces`` forward steps with random positive weights."""
    w = rng.uniform(0.5, 1.5, size=pieces)
    w = w / w.sum()
    out = [total * wi for wi in w[:-1]]
    out.append(total - sum(out, np.zeros_like(total)))
    return out


def solve_rotation(env: MatchstickRotation, opts: SolverOptions) -> SolverPlan:
    """Translation-only moves toward the target, then one move fixing the rest and the angle."""
    strategy = opts.strategy or "3_moves"
    rng = solver_rng(env, opts, strategy)
    ux, uy, dth = _rotation_deltas(env)
    total = np.array([ux, uy])
    actions = []
    if strategy == "3_moves":
        n = check_target(opts, 1) or 3
    elif strategy == "probe_then_solve":
        n = check_target(opts, 3) or 3
        # two unit probes reveal the hidden scale; the oracle already knows it
        actions = [call("move", 1.0, 0.0, 0.0), call("move", 0.0, 1.0, 0.0)]
        total = total - np.array([1.0, 1.0])
        n -= 2
    else:
        raise SolverError(f"unknown strategy {strategy!r}")
    # n - 1 translation-only steps covering part of the way, then the final corrective move
    if n > 1:
        frac = float(rng.uniform(0.4, 0.9))
        for step in _splits(total * frac, n - 1, rng):
            actions.append(call("move", float(step[0]), float(step[1]), 0.0))
        total = total * (1 - frac)
    actions.append(call("move", float(total[0]), float(total[1]), float(dth)))
    return SolverPlan(actions, strategy, opts.seed)
