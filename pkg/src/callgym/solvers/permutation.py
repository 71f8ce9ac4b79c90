"""Solvers for Jigsaw, Zoom-In and Video Unshuffle."""

from __future__ import annotations

from ..envs.image_tasks import Jigsaw, PermutationTask
from .base import SolverError, SolverOptions, SolverPlan, call, check_target, solver_rng


def reorder_payload(perm: list[int]) -> list[int]:
    """p with p[i] = the slot currently holding item i, so reorder(p) restores goal order."""
    where = {item: slot for slot, item in enumerate(perm)}
    return [where[i] for i in range(len(perm))]


def selection_swaps(perm: list[int]) -> list[tuple[int, int]]:
    perm = list(perm)
    out = []
    for i in range(len(perm)):
        if perm[i] != i:
            j = perm.index(i)
            out.append((i, j))
            perm[i], perm[j] = perm[j], perm[i]
    return out


def _slot(env: PermutationTask, k: int):
    if isinstance(env, Jigsaw):
        return divmod(k, env.params["nc"])
    return k


def solve_permutation(env: PermutationTask, opts: SolverOptions) -> SolverPlan:
    strategy = opts.strategy or "reorder"
    n = env.n_items
    identity = list(range(n))
    if strategy == "reorder":
        base = [call("reorder", *reorder_payload(env.perm))]
    elif strategy == "swap":
        base = [call("swap", _slot(env, i), _slot(env, j)) for i, j in selection_swaps(env.perm)]
    else:
        raise SolverError(f"unknown strategy {strategy!r}")
    target = check_target(opts, len(base))
    rng = solver_rng(env, opts, strategy)
    actions = []
    if target is not None and target > len(base):
        extra = target - len(base)
        if extra % 2:
            actions.append(call("reorder", *identity))
        for _ in range(extra // 2):
            i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
            actions += [call("swap", _slot(env, i), _slot(env, j))] * 2
    return SolverPlan(actions + base, strategy, opts.seed)
