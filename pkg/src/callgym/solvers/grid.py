"""Solvers for the grid tasks: both mazes, Sliding Block and Patch Reassembly."""

from __future__ import annotations

from ..envs.maze import DIRS, Maze2D, Maze3D, path_directions, shortest_path, turn_plan
from ..envs.patch import PatchReassembly
from ..envs.sliding import OUT_OF_BOUNDS, SlidingBlock, bidirectional_bfs, neighbors, slide
from .base import SolverError, SolverOptions, SolverPlan, call, check_target, insert_pairs, solver_rng


def _maze_dirs(env) -> list[int]:
    path = shortest_path(env.wall, env.agent, env.target)
    if path is None:  # pragma: no cover - generation guarantees connectivity
        raise SolverError("target unreachable")
    return path_directions(path)


def solve_maze2d(env: Maze2D, opts: SolverOptions) -> SolverPlan:
    """Shortest path; padding adds move/back pairs and, for odd counts, one wall bump."""
    dirs = _maze_dirs(env)
    target = check_target(opts, len(dirs))
    rng = solver_rng(env, opts, "bfs")
    cells = [env.agent]
    for d in dirs:
        cells.append((cells[-1][0] + DIRS[d][0], cells[-1][1] + DIRS[d][1]))

    def open_dirs(cell):
        return [d for d in range(4) if not env.wall[cell[0] + DIRS[d][0], cell[1] + DIRS[d][1]]]

    def wall_dirs(cell):
        return [d for d in range(4) if env.wall[cell[0] + DIRS[d][0], cell[1] + DIRS[d][1]]]

    seq = list(dirs)
    if target is not None and target > len(dirs):
        extra = target - len(dirs)
        bump = None
        if extra % 2:
            spots = [k for k, c in enumerate(cells) if wall_dirs(c)]
            if not spots:  # pragma: no cover - every perfect-maze path touches a wall
                raise SolverError("no wall to bump into for odd padding")
            k = spots[int(rng.integers(len(spots)))]
            ws = wall_dirs(cells[k])
            bump = (k, ws[int(rng.integers(len(ws)))])
        seq = insert_pairs(
            dirs, list(range(len(cells))),
            lambda k: [(d, (d + 2) % 4) for d in open_dirs(cells[k])],
            extra // 2, rng, single=bump,
        )
    return SolverPlan([call("move", d) for d in seq], "bfs", opts.seed)


def solve_maze3d(env: Maze3D, opts: SolverOptions) -> SolverPlan:
    """Turn/move plan; padding adds left/right turn pairs and one trailing turn when odd."""
    base = turn_plan(env.heading, _maze_dirs(env))
    target = check_target(opts, len(base))
    rng = solver_rng(env, opts, "bfs")
    seq = list(base)
    if target is not None and target > len(base):
        extra = target - len(base)
        seq = insert_pairs(base, list(range(len(base) + 1)),
                           lambda k: [(("turn", 0), ("turn", 1)), (("turn", 1), ("turn", 0))],
                           extra // 2, rng)
        if extra % 2:
            # heading does not matter for success, so a last turn is harmless
            seq.append(("turn", int(rng.integers(3))))
    return SolverPlan([call(name, arg) for name, arg in seq], "bfs", opts.seed)


def solve_sliding(env: SlidingBlock, opts: SolverOptions) -> SolverPlan:
    """Shortest slide sequence; padding adds back-and-forth pairs and a blocked move when odd."""
    path = bidirectional_bfs(env.board, env.target)
    fallback = False
    if path is None:
        if env.board != env.initial_board:  # pragma: no cover
            raise SolverError("search budget exhausted away from the generated start")
        path = [(b, (d + 2) % 4) for b, d in reversed(env.shuffle_moves)]
        fallback = True
    target = check_target(opts, len(path))
    rng = solver_rng(env, opts, "bfs")
    boards = [env.board]
    for b, d in path:
        boards.append(slide(boards[-1], b, d))
    seq = list(path)
    if target is not None and target > len(path):
        extra = target - len(path)
        blocked = None
        if extra % 2:
            # a move off the board edge is always available and changes nothing
            k = int(rng.integers(len(boards)))
            board = boards[k]
            moves = [(b, d) for b in sorted(set(board) - {-1}) for d in range(4)
                     if slide(board, b, d) == OUT_OF_BOUNDS]
            blocked = (k, moves[int(rng.integers(len(moves)))])
        seq = insert_pairs(path, list(range(len(boards))),
                           lambda k: [((b, d), (b, (d + 2) % 4)) for (b, d), _ in neighbors(boards[k])],
                           extra // 2, rng, single=blocked)
    return SolverPlan([call("move", b, d) for b, d in seq], "bfs", opts.seed, {"fallback": fallback})


# -- Patch Reassembly -------------------------------------------------------------------


def exact_tiling(env: PatchReassembly, fixed: dict[int, tuple[int, int]]) -> dict[int, tuple[int, int]] | None:
    """Anchors for every patch not in ``fixed`` so the grid is covered exactly.

    Backtracking on the most constrained uncovered cell.
    """
    rows, cols = env.rows, env.cols
    occ = {}
    for p, a in fixed.items():
        for cell in env.cells_of(p, a):
            occ[cell] = p
    free = [p for p in range(env.n_patches) if p not in fixed]
    sol: dict[int, tuple[int, int]] = {}

    def options(cell, patches):
        out = []
        for p in patches:
            for dr, dc in env.shapes[p]:
                a = (cell[0] - dr, cell[1] - dc)
                if all(0 <= r < rows and 0 <= c < cols and (r, c) not in occ for r, c in env.cells_of(p, a)):
                    out.append((p, a))
        return out

    def rec(patches) -> bool:
        if not patches:
            return len(occ) == rows * cols
        best = None
        for r in range(rows):
            for c in range(cols):
                if (r, c) in occ:
                    continue
                opts = options((r, c), patches)
                if not opts:
                    return False
                if best is None or len(opts) < len(best):
                    best = opts
                    if len(opts) == 1:
                        break
            if best is not None and len(best) == 1:
                break
        if best is None:
            return False
        for p, a in best:
            cells = env.cells_of(p, a)
            for cell in cells:
                occ[cell] = p
            sol[p] = a
            if rec([q for q in patches if q != p]):
                return True
            del sol[p]
            for cell in cells:
                del occ[cell]
        return False

    total = sum(len(env.shapes[p]) for p in free) + len(occ)
    if total != rows * cols:
        return None
    return dict(sol) if rec(free) else None


def solve_patch(env: PatchReassembly, opts: SolverOptions) -> SolverPlan:
    """Backtracking tiling; padding uses mistake-and-correct placements."""
    fixed = {p: a for p, a in enumerate(env.placed) if a is not None}
    removals: list[int] = []
    sol = exact_tiling(env, fixed)
    if sol is None:
        removals = sorted(fixed)
        sol = exact_tiling(env, {})
        if sol is None:  # pragma: no cover - the generating partition always tiles
            raise SolverError("no exact tiling")
    order = sorted(sol)
    base = [call("remove", p) for p in removals] + [call("place", p, *sol[p]) for p in order]
    target = check_target(opts, len(base))
    if target is None or target == len(base):
        return SolverPlan(base, "backtrack", opts.seed)
    rng = solver_rng(env, opts, "backtrack")
    sim = env.clone()
    for p in removals:
        sim.placed[p] = None
    extra = target - len(base)
    # spread mistakes over the correct placements
    counts = [0] * len(order)
    for _ in range(extra):
        counts[int(rng.integers(len(order)))] += 1
    actions = [call("remove", p) for p in removals]
    leftover = 0
    for p, n_mistakes in zip(order, counts):
        for _ in range(n_mistakes):
            right = sol[p]
            wrong = [(r, c) for r in range(sim.rows) for c in range(sim.cols)
                     if (r, c) != right and (r, c) != sim.placed[p] and sim.fits(p, (r, c))]
            if not wrong:
                leftover += 1
                continue
            a = wrong[int(rng.integers(len(wrong)))]
            actions.append(call("place", p, *a))
            sim.placed[p] = a
        actions.append(call("place", p, *sol[p]))
        sim.placed[p] = sol[p]
    # fallback: remove and re-place pairs, then one rejected placement for odd leftovers
    while leftover >= 2:
        p = order[int(rng.integers(len(order)))]
        actions += [call("remove", p), call("place", p, *sol[p])]
        leftover -= 2
    if leftover:
        p = order[int(rng.integers(len(order)))]
        actions.append(call("place", p, *_blocked_anchor(sim, p)))
    return SolverPlan(actions, "backtrack", opts.seed)


def _blocked_anchor(env: PatchReassembly, p: int) -> tuple[int, int]:
    """An in-range anchor where patch p does not fit (grid is full, so any other anchor)."""
    for r in range(env.rows):
        for c in range(env.cols):
            if (r, c) != env.placed[p] and not env.fits(p, (r, c)):
                return (r, c)
    raise SolverError("no rejected placement available")  # pragma: no cover
