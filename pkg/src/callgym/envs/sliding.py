"""Sliding Block: a 4-wide, 5-tall board of polyomino blocks with two gaps."""

from __future__ import annotations

from collections import deque
from functools import lru_cache

import numpy as np

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import CELL_PX, Canvas, CharGrid, compose_side_by_side
from ..rng import stream
from .maze import DIRS

ROWS, COLS = 5, 4
EMPTY = -1
MAX_BLOCKS = 10
BLOCKED = "blocked: cells occupied"
OUT_OF_BOUNDS = "blocked: out of bounds"
NO_SUCH_BLOCK = "no such block"

Board = tuple  # 20 ints, row-major, EMPTY for gaps


def block_cells(board: Board) -> dict[int, list[int]]:
    cells: dict[int, list[int]] = {}
    for i, v in enumerate(board):
        if v != EMPTY:
            cells.setdefault(v, []).append(i)
    return cells


def slide(board: Board, b: int, d: int, cells: list[int] | None = None) -> Board | str:
    """Board after sliding block ``b`` one cell in direction ``d``, or a reason."""
    if cells is None:
        cells = [i for i, v in enumerate(board) if v == b]
        if not cells:
            return NO_SUCH_BLOCK
    dr, dc = DIRS[d]
    dest = []
    for i in cells:
        r, c = divmod(i, COLS)
        r, c = r + dr, c + dc
        if not (0 <= r < ROWS and 0 <= c < COLS):
            return OUT_OF_BOUNDS
        j = r * COLS + c
        if board[j] != EMPTY and board[j] != b:
            return BLOCKED
        dest.append(j)
    out = list(board)
    for i in cells:
        out[i] = EMPTY
    for j in dest:
        out[j] = b
    return tuple(out)


def neighbors(board: Board):
    """Yield ((block, direction), next_board) for every legal slide."""
    for b, cells in block_cells(board).items():
        for d in range(4):
            nxt = slide(board, b, d, cells)
            if not isinstance(nxt, str):
                yield (b, d), nxt


def random_tiling(rng: np.random.Generator) -> Board:
    """Cover all but two cells with connected polyominoes of size 1-4."""
    while True:
        empties = rng.choice(ROWS * COLS, size=2, replace=False)
        taken = set(int(e) for e in empties)
        blocks: list[list[int]] = []
        for start in rng.permutation(ROWS * COLS):
            start = int(start)
            if start in taken:
                continue
            size = int(rng.choice([1, 2, 3, 4], p=[0.45, 0.35, 0.15, 0.05]))
            cells = [start]
            taken.add(start)
            while len(cells) < size:
                frontier = []
                for i in cells:
                    r, c = divmod(i, COLS)
                    for dr, dc in DIRS:
                        rr, cc = r + dr, c + dc
                        j = rr * COLS + cc
                        if 0 <= rr < ROWS and 0 <= cc < COLS and j not in taken and j not in frontier:
                            frontier.append(j)
                if not frontier:
                    break
                j = frontier[int(rng.integers(len(frontier)))]
                cells.append(j)
                taken.add(j)
            blocks.append(cells)
        if len(blocks) > MAX_BLOCKS:
            continue
        if not any(True for _ in neighbors(_label(blocks))):
            continue
        return _label(blocks)


def _label(blocks: list[list[int]]) -> Board:
    labels = [EMPTY] * (ROWS * COLS)
    for bid, cells in enumerate(sorted(blocks, key=min)):
        for i in cells:
            labels[i] = bid
    return tuple(labels)


def shuffle_board(target: Board, sm: int, rng: np.random.Generator) -> tuple[Board, list[tuple[int, int]]]:
    board, last, moves = target, None, []
    for _ in range(sm):
        options = [(m, nxt) for m, nxt in neighbors(board)
                   if last is None or m != (last[0], (last[1] + 2) % 4)]
        if not options:
            options = list(neighbors(board))
        m, board = options[int(rng.integers(len(options)))]
        moves.append(m)
        last = m
    return board, moves


@lru_cache(maxsize=512)
def bidirectional_bfs(start: Board, goal: Board, budget: int = 500_000):
    """Shortest slide sequence from start to goal, or None over budget.

    Slides are reversible (the inverse of (b, d) is (b, d+2)), so the search
    grows frontiers from both ends and joins them.
    """
    if start == goal:
        return []
    fwd = {start: None}
    bwd = {goal: None}
    fq, bq = [start], [goal]
    expanded = 0
    while fq and bq:
        grow_fwd = len(fq) <= len(bq)
        q, seen, other = (fq, fwd, bwd) if grow_fwd else (bq, bwd, fwd)
        nxt_q = []
        meet = None
        for node in q:
            expanded += 1
            for m, nb in neighbors(node):
                if nb in seen:
                    continue
                seen[nb] = (node, m)
                if nb in other:
                    meet = nb
                    break
                nxt_q.append(nb)
            if meet is not None:
                break
        if meet is not None:
            return _join(fwd, bwd, meet)
        if expanded > budget:
            return None
        if grow_fwd:
            fq = nxt_q
        else:
            bq = nxt_q
    return None


def _join(fwd, bwd, meet):
    path = []
    node = meet
    while fwd[node] is not None:
        prev, m = fwd[node]
        path.append(m)
        node = prev
    path.reverse()
    node = meet
    while bwd[node] is not None:
        prev, (b, d) = bwd[node]
        # the backward tree stored prev -> node via (b, d); walking toward goal reverses it
        path.append((b, (d + 2) % 4))
        node = prev
    return path


@register
class SlidingBlock(Environment):
    env_id = "sliding_block"
    title = "Sliding Block"
    text_capable = True
    params_spec = (
        Param("sm", "int", 1, 10_000, "number of shuffle moves"),
        Param("ms", "int", 1, 999, "maximum optimal solution length"),
    )
    presets = {"easy": {"sm": 30, "ms": 19}, "hard": {"sm": 90, "ms": 29}}

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        for _ in range(10_000):
            target = random_tiling(rng)
            board, moves = shuffle_board(target, params["sm"], rng)
            if board == target:
                continue
            plan = bidirectional_bfs(board, target)
            length = len(plan) if plan is not None else len(moves)
            if length <= params["ms"]:
                break
        else:  # pragma: no cover
            raise ConfigError("could not generate a sliding-block instance within ms")
        self.board = board
        self.initial_board = board
        self.target = target
        self.shuffle_moves = moves
        self.n_blocks = max(target) + 1

    def schemas(self):
        return [
            PayloadSchema(
                "move",
                (Arg("block", "int", 0, self.n_blocks - 1), Arg("direction", "int", 0, 3)),
                "slide block b one cell; d is 0=up, 1=right, 2=down, 3=left",
                "move(b, d)",
            )
        ]

    def describe_task(self) -> str:
        return (
            f"A {COLS}-wide, {ROWS}-tall board holds numbered blocks and two empty cells. "
            "The left board shows the target arrangement and the right board the current one. "
            "In the text view digits are block ids and '.' marks an empty cell. "
            "A block slides one cell at a time if every cell it moves into is empty. "
            "Rearrange the current board to match the target exactly, then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        b, d = call.payload
        nxt = slide(self.board, b, d)
        if isinstance(nxt, str):
            return nxt
        self.board = nxt
        return EXECUTED

    def success(self) -> bool:
        return self.board == self.target

    def ascii(self) -> CharGrid:
        return sliding_ascii(self.target, self.board)

    def render(self) -> Canvas:
        return compose_side_by_side(
            [board_canvas(self.target), board_canvas(self.board)], ["TARGET", "CURRENT"], gap_px=16
        )

    def solved_copy(self):
        env = self.clone()
        env.board = env.target
        return env

    def state_dict(self) -> dict:
        return {"board": list(self.board), "target": list(self.target)}

    def __deepcopy__(self, memo):
        # boards are tuples and the shuffle log is append-free: a shallow copy is a full copy
        out = self.__class__.__new__(self.__class__)
        out.__dict__.update(self.__dict__)
        return out


def _row(board: Board, r: int) -> str:
    return "".join("." if v == EMPTY else str(v) for v in board[r * COLS:(r + 1) * COLS])


def sliding_ascii(target: Board, board: Board) -> CharGrid:
    rows = ["Target Current", "-" * (2 * COLS + 3)]
    for r in range(ROWS):
        rows.append(f"{_row(target, r)} | {_row(board, r)}")
    return CharGrid.padded(rows)


def parse_sliding_ascii(text: str) -> tuple[Board, Board]:
    """Inverse of :func:`sliding_ascii`: (target, current)."""
    lines = text.split("\n")[2:2 + ROWS]
    target, board = [], []
    for line in lines:
        left, right = line.rstrip().split(" | ")
        target += [EMPTY if ch == "." else int(ch) for ch in left]
        board += [EMPTY if ch == "." else int(ch) for ch in right]
    return tuple(target), tuple(board)


PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 200, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 200, 200), (240, 50, 230), (150, 190, 60), (170, 110, 40),
]
GAP_RGB = (245, 245, 245)
GRID_RGB = (20, 20, 20)


def board_canvas(board: Board) -> Canvas:
    cv = Canvas(COLS * CELL_PX, ROWS * CELL_PX, GAP_RGB)
    for i, v in enumerate(board):
        r, c = divmod(i, COLS)
        x0, y0 = c * CELL_PX, r * CELL_PX
        if v == EMPTY:
            continue
        cv.rect(x0, y0, x0 + CELL_PX, y0 + CELL_PX, PALETTE[v % len(PALETTE)])
    # borders between different blocks
    for i, v in enumerate(board):
        r, c = divmod(i, COLS)
        x0, y0 = c * CELL_PX, r * CELL_PX
        if c + 1 == COLS or board[i + 1] != v:
            cv.rect(x0 + CELL_PX - 2, y0, x0 + CELL_PX, y0 + CELL_PX, GRID_RGB)
        if c == 0:
            cv.rect(x0, y0, x0 + 2, y0 + CELL_PX, GRID_RGB)
        if r + 1 == ROWS or board[i + COLS] != v:
            cv.rect(x0, y0 + CELL_PX - 2, x0 + CELL_PX, y0 + CELL_PX, GRID_RGB)
        if r == 0:
            cv.rect(x0, y0, x0 + CELL_PX, y0 + 2, GRID_RGB)
    for bid, cells in block_cells(board).items():
        r, c = divmod(min(cells), COLS)
        cv.text(c * CELL_PX + 11, r * CELL_PX + 9, str(bid), (0, 0, 0), 2)
    return cv
