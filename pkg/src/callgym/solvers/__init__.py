"""Oracle solvers: one entry point dispatching on the environment id."""

from __future__ import annotations

from ..core import Environment
from .base import SolverError, SolverOptions, SolverPlan, verify_plan
from .continuous import solve_colorization, solve_mr2d, solve_mr3d
from .grid import solve_maze2d, solve_maze3d, solve_patch, solve_sliding
from .matchstick import solve_equation, solve_rotation
from .permutation import solve_permutation

_SOLVERS = {
    "maze2d": solve_maze2d,
    "maze3d": solve_maze3d,
    "sliding_block": solve_sliding,
    "patch_reassembly": solve_patch,
    "matchstick_equation": solve_equation,
    "matchstick_rotation": solve_rotation,
    "mental_rotation_2d": solve_mr2d,
    "mental_rotation_3d": solve_mr3d,
    "colorization": solve_colorization,
    "jigsaw": solve_permutation,
    "zoom_in": solve_permutation,
    "video_unshuffle": solve_permutation,
}

STRATEGIES: dict[str, tuple[str, ...]] = {
    "maze2d": ("bfs",),
    "maze3d": ("bfs",),
    "sliding_block": ("bfs",),
    "patch_reassembly": ("backtrack",),
    "matchstick_equation": ("bfs", "dfs", "sos"),
    "matchstick_rotation": ("3_moves", "probe_then_solve"),
    "mental_rotation_2d": ("split",),
    "mental_rotation_3d": ("solve_only", "rotate_then_solve"),
    "colorization": ("incremental",),
    "jigsaw": ("reorder", "swap"),
    "zoom_in": ("reorder", "swap"),
    "video_unshuffle": ("reorder", "swap"),
}

DEFAULTS = {env_id: names[0] for env_id, names in STRATEGIES.items()}


def solve(env: Environment, opts: SolverOptions | None = None) -> SolverPlan:
    """Plan from the current state of ``env``; ``env`` itself is not modified."""
    opts = opts or SolverOptions()
    try:
        fn = _SOLVERS[env.env_id]
    except KeyError:
        raise SolverError(f"no solver for {env.env_id!r}") from None
    strategy = opts.strategy or DEFAULTS[env.env_id]
    if strategy not in STRATEGIES[env.env_id]:
        raise SolverError(f"unknown strategy {strategy!r} for {env.env_id}; "
                          f"choose from {', '.join(STRATEGIES[env.env_id])}")
    return fn(env, SolverOptions(strategy, opts.target_steps, opts.seed))


# strategies whose untargeted plan is not the shortest they can produce
_FLOORS = {"3_moves": 1, "split": 1, "probe_then_solve": 3, "rotate_then_solve": 15}


def min_steps(env: Environment, strategy: str | None = None) -> int:
    """Smallest ``target_steps`` the strategy accepts (stop not counted)."""
    strategy = strategy or DEFAULTS[env.env_id]
    if strategy in _FLOORS:
        return _FLOORS[strategy]
    if strategy in ("dfs", "sos"):
        strategy = "bfs"
    return solve(env, SolverOptions(strategy)).steps


__all__ = ["DEFAULTS", "STRATEGIES", "SolverError", "SolverOptions", "SolverPlan",
           "min_steps", "solve", "verify_plan"]
