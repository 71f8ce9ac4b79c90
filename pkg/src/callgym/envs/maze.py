"""Maze 2D (top-down) and Maze 3D (first-person corridor view)."""

from __future__ import annotations

from collections import deque

import numpy as np

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import CELL_PX, VIEW_3D, Canvas, CharGrid
from ..rng import stream

# direction d: 0 up/north, 1 right/east, 2 down/south, 3 left/west
DIRS = ((-1, 0), (0, 1), (1, 0), (0, -1))
DIR_NAMES = ("up", "right", "down", "left")
HEADINGS = "NESW"
WALL_MSG = "Cannot move into a wall."

WALL_CH, FREE_CH, AGENT_CH, TARGET_CH = "#", " ", "A", "T"


def carve_maze(mw: int, mh: int, rng: np.random.Generator) -> np.ndarray:
    """Perfect maze by randomized depth-first carving.

    Returns a boolean wall grid of shape (mh + 2, mw + 2).  Lattice cells sit
    at odd coordinates; the outer ring is wall.
    """
    if mw % 2 == 0 or mh % 2 == 0 or mw < 5 or mh < 5:
        raise ConfigError(f"maze dimensions must be odd and >= 5, got {mw}x{mh}")
    wall = np.ones((mh + 2, mw + 2), dtype=bool)
    start = (1 + 2 * int(rng.integers((mh + 1) // 2)), 1 + 2 * int(rng.integers((mw + 1) // 2)))
    wall[start] = False
    stack = [start]
    while stack:
        r, c = stack[-1]
        options = []
        for dr, dc in DIRS:
            nr, nc = r + 2 * dr, c + 2 * dc
            if 1 <= nr <= mh and 1 <= nc <= mw and wall[nr, nc]:
                options.append((nr, nc, dr, dc))
        if not options:
            stack.pop()
            continue
        nr, nc, dr, dc = options[int(rng.integers(len(options)))]
        wall[r + dr, c + dc] = False
        wall[nr, nc] = False
        stack.append((nr, nc))
    return wall


def bfs_distances(wall: np.ndarray, src: tuple[int, int]) -> dict:
    dist = {src: 0}
    q = deque([src])
    while q:
        r, c = q.popleft()
        for dr, dc in DIRS:
            n = (r + dr, c + dc)
            if not wall[n] and n not in dist:
                dist[n] = dist[(r, c)] + 1
                q.append(n)
    return dist


def shortest_path(wall: np.ndarray, src, dst) -> list[tuple[int, int]] | None:
    """Cell path from src to dst inclusive (breadth-first search)."""
    prev = {src: None}
    q = deque([src])
    while q:
        cur = q.popleft()
        if cur == dst:
            break
        r, c = cur
        for dr, dc in DIRS:
            n = (r + dr, c + dc)
            if not wall[n] and n not in prev:
                prev[n] = cur
                q.append(n)
    if dst not in prev:
        return None
    path = [dst]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return path[::-1]


def path_directions(path) -> list[int]:
    out = []
    for (r0, c0), (r1, c1) in zip(path, path[1:]):
        out.append(DIRS.index((r1 - r0, c1 - c0)))
    return out


def turn_plan(heading: int, dirs: list[int]) -> list[tuple[str, int]]:
    """Turn/move actions that follow ``dirs`` starting from ``heading``."""
    plan = []
    for d in dirs:
        delta = (d - heading) % 4
        if delta == 1:
            plan.append(("turn", 1))
        elif delta == 3:
            plan.append(("turn", 0))
        elif delta == 2:
            plan.append(("turn", 2))
        plan.append(("move", 0))
        heading = d
    return plan


class MazeBase(Environment):
    text_capable = False
    params_spec = (
        Param("mw", "int", 5, 51, "maze width (odd)"),
        Param("mh", "int", 5, 51, "maze height (odd)"),
        Param("ms", "int", 1, 999, "maximum optimal solution length"),
    )

    @classmethod
    def check_params(cls, p):
        if p["mw"] % 2 == 0 or p["mh"] % 2 == 0:
            raise ConfigError("parameter out of range: maze dimensions must be odd")

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        mw, mh = params["mw"], params["mh"]
        min_dist = (mw + mh + 1) // 2
        for _ in range(1000):
            wall = carve_maze(mw, mh, rng)
            free = [tuple(int(v) for v in x) for x in np.argwhere(~wall)]
            order = rng.permutation(len(free))
            heading = int(rng.integers(4))
            found = False
            for i in order[:16]:
                agent = free[int(i)]
                dist = bfs_distances(wall, agent)
                cands = sorted(
                    cell for cell, d in dist.items()
                    if d >= min_dist and self._plan_length(wall, agent, cell, heading, d) <= params["ms"]
                )
                if cands:
                    target = cands[int(rng.integers(len(cands)))]
                    found = True
                    break
            if found:
                break
        else:  # pragma: no cover - parameters make placement impossible
            raise ConfigError("cannot place agent and target under the requested constraints")
        self.wall = wall
        self.agent = agent
        self.target = target
        self.heading = heading

    def _plan_length(self, wall, agent, target, heading, dist) -> int:
        return dist

    def success(self) -> bool:
        return self.agent == self.target

    def _try_move(self, d: int) -> str:
        dr, dc = DIRS[d]
        n = (self.agent[0] + dr, self.agent[1] + dc)
        if self.wall[n]:
            return WALL_MSG
        self.agent = n
        return EXECUTED

    def state_dict(self) -> dict:
        return {
            "wall": ["".join("#" if w else "." for w in row) for row in self.wall],
            "agent": list(self.agent),
            "target": list(self.target),
            "heading": self.heading,
        }

    def solved_copy(self):
        env = self.clone()
        env.agent = env.target
        return env


@register
class Maze2D(MazeBase):
    env_id = "maze2d"
    title = "Maze 2D"
    text_capable = True
    presets = {
        "easy": {"mw": 9, "mh": 9, "ms": 19},
        "hard": {"mw": 11, "mh": 11, "ms": 29},
    }

    def schemas(self):
        return [
            PayloadSchema(
                "move",
                (Arg("direction", "int", 0, 3),),
                "move the agent one cell; d is 0=up, 1=right, 2=down, 3=left",
                "move(d)",
            )
        ]

    def describe_task(self) -> str:
        return (
            "You control an agent in a top-down maze. Walls are dark, corridors are light, "
            "the agent is the red circle and the target is the green square. "
            "In the text view walls are '#', corridors are spaces, the agent is 'A' and the target is 'T'. "
            "Move the agent onto the target, then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        return self._try_move(call.payload[0])

    def ascii(self) -> CharGrid:
        return maze_ascii(self.wall, self.agent, self.target)

    def render(self) -> Canvas:
        return maze_render(self.wall, self.agent, self.target)


def maze_ascii(wall, agent, target) -> CharGrid:
    h, w = wall.shape
    rows = ["#" * (w + 2)]
    for r in range(h):
        line = ["#"]
        for c in range(w):
            if (r, c) == agent:
                line.append(AGENT_CH)
            elif (r, c) == target:
                line.append(TARGET_CH)
            else:
                line.append(WALL_CH if wall[r, c] else FREE_CH)
        line.append("#")
        rows.append("".join(line))
    rows.append("#" * (w + 2))
    return CharGrid(rows)


def parse_maze_ascii(text: str):
    """Inverse of :func:`maze_ascii`: (wall grid, agent, target)."""
    rows = text.split("\n")[1:-1]
    rows = [r[1:-1] for r in rows]
    wall = np.array([[ch == WALL_CH for ch in r] for r in rows], dtype=bool)
    agent = target = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            if ch == AGENT_CH:
                agent = (r, c)
            elif ch == TARGET_CH:
                target = (r, c)
    if target is None:
        target = agent
    return wall, agent, target


WALL_RGB = (40, 44, 52)
FLOOR_RGB = (236, 236, 228)
AGENT_RGB = (220, 40, 40)
TARGET_RGB = (40, 170, 70)


def maze_render(wall, agent, target) -> Canvas:
    h, w = wall.shape
    cv = Canvas(w * CELL_PX, h * CELL_PX, FLOOR_RGB)
    for r, c in np.argwhere(wall):
        cv.rect(c * CELL_PX, r * CELL_PX, (c + 1) * CELL_PX, (r + 1) * CELL_PX, WALL_RGB)
    tr, tc = target
    m = CELL_PX // 6
    cv.rect(tc * CELL_PX + m, tr * CELL_PX + m, (tc + 1) * CELL_PX - m, (tr + 1) * CELL_PX - m, TARGET_RGB)
    ar, ac = agent
    cv.disc((ac + 0.5) * CELL_PX, (ar + 0.5) * CELL_PX, CELL_PX * 0.33, AGENT_RGB)
    return cv


@register
class Maze3D(MazeBase):
    env_id = "maze3d"
    title = "Maze 3D"
    presets = {
        "easy": {"mw": 7, "mh": 7, "ms": 19},
        "hard": {"mw": 9, "mh": 9, "ms": 29},
    }

    def _plan_length(self, wall, agent, target, heading, dist) -> int:
        return len(turn_plan(heading, path_directions(shortest_path(wall, agent, target))))

    def schemas(self):
        return [
            PayloadSchema("move", (Arg("direction", "int", 0, 0),), "step one cell forward (the only valid argument is 0)", "move(0)"),
            PayloadSchema(
                "turn",
                (Arg("direction", "int", 0, 2),),
                "turn in place; d is 0=left (90 degrees), 1=right (90 degrees), 2=around (180 degrees)",
                "turn(d)",
            ),
        ]

    def describe_task(self) -> str:
        return (
            "You see a first-person view from inside a maze. Grey surfaces are walls; "
            "gaps in the side walls are openings to side corridors. The target is a green panel "
            "on the floor, visible when it is in your line of sight (up to 6 cells ahead). "
            "Walk onto the target cell, then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        if call.name == "turn":
            self.heading = (self.heading + (3, 1, 2)[call.payload[0]]) % 4
            return EXECUTED
        return self._try_move(self.heading)

    def render(self) -> Canvas:
        return corridor_view(self.wall, self.agent, self.heading, self.target)

    def solved_copy(self):
        env = super().solved_copy()
        for d in range(4):
            dr, dc = DIRS[d]
            if not env.wall[env.target[0] + dr, env.target[1] + dc]:
                env.heading = d
                break
        return env


CEIL_RGB = (150, 170, 200)
GROUND_RGB = (120, 100, 80)
SIDE_RGB = (170, 170, 170)
EDGE_RGB = (30, 30, 30)
VIEW_DEPTH = 6


def _frame(i: int, w: int, h: int):
    """Screen rectangle of the cross-section ``i`` cells ahead (i >= 1)."""
    hw, hh = w / 2.0 / i, h / 2.0 / i
    return (w / 2.0 - hw, h / 2.0 - hh, w / 2.0 + hw, h / 2.0 + hh)


def corridor_view(wall, agent, heading, target) -> Canvas:
    """One-point-perspective view along ``heading`` with flat colors."""
    w, h = VIEW_3D
    cv = Canvas(w, h, CEIL_RGB)
    cv.rect(0, h // 2, w, h, GROUND_RGB)
    fr, fc = DIRS[heading]
    lr, lc = DIRS[(heading + 3) % 4]
    rr, rc = DIRS[(heading + 1) % 4]
    if tuple(agent) == tuple(target):
        cv.rect(0, h - h // 8, w, h, TARGET_RGB)
    for k in range(1, VIEW_DEPTH + 1):
        cell = (agent[0] + k * fr, agent[1] + k * fc)
        nl, nt, nr, nb = _frame(k, w, h)
        if wall[cell]:
            cv.rect(round(nl), round(nt), round(nr), round(nb), SIDE_RGB)
            _outline(cv, nl, nt, nr, nb)
            break
        fl, ft, frr, fb = _frame(k + 1, w, h)
        left = (cell[0] + lr, cell[1] + lc)
        right = (cell[0] + rr, cell[1] + rc)
        if wall[left]:
            cv.polygon([(nl, nt), (fl, ft), (fl, fb), (nl, nb)], SIDE_RGB)
            cv.line(round(nl), round(nt), round(fl), round(ft), EDGE_RGB)
            cv.line(round(nl), round(nb) - 1, round(fl), round(fb) - 1, EDGE_RGB)
        else:
            cv.rect(round(nl), round(ft), round(fl), round(fb), SIDE_RGB)
            _outline(cv, nl, ft, fl, fb)
        if wall[right]:
            cv.polygon([(nr, nt), (frr, ft), (frr, fb), (nr, nb)], SIDE_RGB)
            cv.line(round(nr) - 1, round(nt), round(frr) - 1, round(ft), EDGE_RGB)
            cv.line(round(nr) - 1, round(nb) - 1, round(frr) - 1, round(fb) - 1, EDGE_RGB)
        else:
            cv.rect(round(frr), round(ft), round(nr), round(fb), SIDE_RGB)
            _outline(cv, frr, ft, nr, fb)
        if cell == tuple(target):
            pw = (frr - fl) * 0.6
            cx = w / 2.0
            cv.rect(round(cx - pw / 2), round(fb - (nb - fb) * 0.5), round(cx + pw / 2), round(fb), TARGET_RGB)
    return cv


def _outline(cv: Canvas, x0, y0, x1, y1):
    x0, y0, x1, y1 = round(x0), round(y0), round(x1) - 1, round(y1) - 1
    if x1 <= x0 or y1 <= y0:
        return
    cv.line(x0, y0, x1, y0, EDGE_RGB)
    cv.line(x0, y1, x1, y1, EDGE_RGB)
    cv.line(x0, y0, x0, y1, EDGE_RGB)
    cv.line(x1, y0, x1, y1, EDGE_RGB)
