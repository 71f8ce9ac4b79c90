"""Patch Reassembly: tile a grid exactly with the given polyomino patches."""

from __future__ import annotations

import numpy as np

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import CELL_PX, Canvas, CharGrid
from ..rng import stream
from .maze import DIRS
from .sliding import PALETTE

CANNOT_PLACE = "cannot place: overlap or out of bounds"
NOT_ON_GRID = "patch not on grid"
PARKED_HEADER = "--- Parked Patches ---"
ID_CHARS = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"

Shape = tuple  # sorted ((dr, dc), ...) relative to the anchor, anchor first


def normalize(cells) -> tuple[tuple[int, int], Shape]:
    """(anchor, offsets) where the anchor is the topmost-then-leftmost cell."""
    cells = sorted(cells)
    ar, ac = cells[0]
    return (ar, ac), tuple((r - ar, c - ac) for r, c in cells)


def partition_grid(rows: int, cols: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Split the grid into ``n`` connected regions by multi-source random growth."""
    owner = np.full((rows, cols), -1, dtype=np.int64)
    seeds = rng.choice(rows * cols, size=n, replace=False)
    for k, s in enumerate(seeds):
        owner[divmod(int(s), cols)] = k
    left = rows * cols - n
    while left:
        k = int(rng.integers(n))
        frontier = []
        for r, c in zip(*np.nonzero(owner == k)):
            for dr, dc in DIRS:
                rr, cc = r + dr, c + dc
                if 0 <= rr < rows and 0 <= cc < cols and owner[rr, cc] == -1:
                    frontier.append((int(rr), int(cc)))
        if not frontier:
            continue
        frontier = sorted(set(frontier))
        owner[frontier[int(rng.integers(len(frontier)))]] = k
        left -= 1
    return owner


@register
class PatchReassembly(Environment):
    env_id = "patch_reassembly"
    title = "Patch Reassembly"
    text_capable = True
    params_spec = (
        Param("gs", "pair", 2, 20, "grid size (rows, cols)"),
        Param("np", "int", 2, 36, "number of patches"),
    )
    presets = {
        "easy": {"gs": (6, 6), "np": 5},
        "hard": {"gs": (8, 8), "np": 6},
    }

    @classmethod
    def check_params(cls, p):
        if p["np"] > p["gs"][0] * p["gs"][1]:
            raise ConfigError("parameter out of range: np exceeds the number of grid cells")

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        self.rows, self.cols = params["gs"]
        owner = partition_grid(self.rows, self.cols, params["np"], rng)
        regions = []
        for k in range(params["np"]):
            cells = [(int(r), int(c)) for r, c in zip(*np.nonzero(owner == k))]
            regions.append(normalize(cells))
        regions.sort()
        self.home = [anchor for anchor, _ in regions]
        self.shapes = [shape for _, shape in regions]
        self.placed: list[tuple[int, int] | None] = [None] * len(regions)
        self.placed[0] = self.home[0]

    @property
    def n_patches(self) -> int:
        return len(self.shapes)

    def schemas(self):
        return [
            PayloadSchema(
                "place",
                (
                    Arg("patch", "int", 0, self.n_patches - 1),
                    Arg("row", "int", 0, self.rows - 1),
                    Arg("col", "int", 0, self.cols - 1),
                ),
                "put patch p on the grid with its anchor cell at (row r, column c); "
                "a patch already on the grid is moved",
                "place(p, r, c)",
            ),
            PayloadSchema("remove", (Arg("patch", "int", 0, self.n_patches - 1),),
                          "take patch p off the grid and park it", "remove(p)"),
        ]

    def describe_task(self) -> str:
        return (
            f"A {self.rows}x{self.cols} grid must be tiled exactly by {self.n_patches} patches "
            "(no gaps, no overlaps). Placed patches appear on the grid; parked patches are shown "
            "separately. Each patch has an anchor: its topmost cell, leftmost among ties. In the "
            "image the anchor is the cell that shows the patch's id number; in the text view the "
            "anchor cell of each parked patch is marked with a '*' instead of its id. Rows and "
            "columns are numbered from 0 at the top-left. Cover every cell, then call stop()."
        )

    def cells_of(self, p: int, anchor) -> list[tuple[int, int]]:
        ar, ac = anchor
        return [(ar + dr, ac + dc) for dr, dc in self.shapes[p]]

    def occupancy(self, skip: int | None = None) -> dict:
        occ = {}
        for p, anchor in enumerate(self.placed):
            if anchor is not None and p != skip:
                for cell in self.cells_of(p, anchor):
                    occ[cell] = p
        return occ

    def fits(self, p: int, anchor, occ=None) -> bool:
        occ = self.occupancy(skip=p) if occ is None else occ
        for r, c in self.cells_of(p, anchor):
            if not (0 <= r < self.rows and 0 <= c < self.cols) or (r, c) in occ:
                return False
        return True

    def apply(self, call: ActionCall) -> str:
        if call.name == "place":
            p, r, c = call.payload
            if not self.fits(p, (r, c)):
                return CANNOT_PLACE
            self.placed[p] = (r, c)
            return EXECUTED
        (p,) = call.payload
        if self.placed[p] is None:
            return NOT_ON_GRID
        self.placed[p] = None
        return EXECUTED

    def success(self) -> bool:
        return len(self.occupancy()) == self.rows * self.cols

    def solved_copy(self):
        env = self.clone()
        env.placed = list(env.home)
        return env

    def state_dict(self) -> dict:
        return {
            "gs": [self.rows, self.cols],
            "shapes": [[list(o) for o in s] for s in self.shapes],
            "placed": [list(a) if a is not None else None for a in self.placed],
        }

    def ascii(self) -> CharGrid:
        return patch_ascii(self.rows, self.cols, self.shapes, self.placed)

    def render(self) -> Canvas:
        return patch_render(self.rows, self.cols, self.shapes, self.placed)


def _label_width(rows: int) -> int:
    return len(str(rows - 1))


def patch_ascii(rows, cols, shapes, placed) -> CharGrid:
    lw = _label_width(rows)
    grid = [["."] * cols for _ in range(rows)]
    for p, anchor in enumerate(placed):
        if anchor is not None:
            for dr, dc in shapes[p]:
                grid[anchor[0] + dr][anchor[1] + dc] = ID_CHARS[p]
    lines = [" " * (lw + 2) + "".join(f"{c:>2} " for c in range(cols))]
    lines.append(" " * (lw + 1) + "-" * (3 * cols))
    for r in range(rows):
        lines.append(f"{r:>{lw}} |" + "".join(f" {ch} " for ch in grid[r]))
    lines += ["", PARKED_HEADER]
    for p, anchor in enumerate(placed):
        if anchor is not None:
            continue
        lines += ["", f"Patch {ID_CHARS[p]}:"]
        min_dc = min(dc for _, dc in shapes[p])
        h = max(dr for dr, _ in shapes[p]) + 1
        w = max(dc for _, dc in shapes[p]) - min_dc + 1
        box = [[" "] * w for _ in range(h)]
        for dr, dc in shapes[p]:
            box[dr][dc - min_dc] = "*" if (dr, dc) == (0, 0) else ID_CHARS[p]
        lines += ["  " + "".join(row) for row in box]
    return CharGrid.padded(lines)


def parse_patch_ascii(text: str):
    """Inverse of :func:`patch_ascii`.

    Returns (rows, cols, placed_shapes, parked_shapes) where placed_shapes
    maps id -> (anchor, shape) and parked_shapes maps id -> shape.
    """
    lines = text.split("\n")
    header_idx = next(i for i, l in enumerate(lines) if l.strip() == PARKED_HEADER)
    grid_lines = [l for l in lines[2:header_idx] if l.strip()]
    cells: dict[int, list] = {}
    cols = 0
    for r, line in enumerate(grid_lines):
        body = line.split("|", 1)[1]
        row = [body[3 * k + 1] for k in range(len(body.rstrip() + " ") // 3)]
        cols = len(row)
        for c, ch in enumerate(row):
            if ch != ".":
                cells.setdefault(ID_CHARS.index(ch), []).append((r, c))
    placed = {p: normalize(cs) for p, cs in cells.items()}
    parked = {}
    i = header_idx + 1
    while i < len(lines):
        line = lines[i].rstrip()
        if line.startswith("Patch "):
            p = ID_CHARS.index(line[len("Patch "):-1])
            i += 1
            box = []
            while i < len(lines) and lines[i].strip():
                box.append(lines[i][2:])
                i += 1
            star = next((r, row.index("*")) for r, row in enumerate(box) if "*" in row)
            offs = sorted(
                (r - star[0], c - star[1])
                for r, row in enumerate(box) for c, ch in enumerate(row) if ch not in " "
            )
            parked[p] = tuple(offs)
        else:
            i += 1
    return len(grid_lines), cols, placed, parked


EMPTY_RGB = (235, 235, 235)
LINE_RGB = (120, 120, 120)
TRAY_PX = 16


def patch_render(rows, cols, shapes, placed) -> Canvas:
    """Grid on top, parking tray underneath with one slot per patch id."""
    gw, gh = cols * CELL_PX, rows * CELL_PX
    slots = []
    x, y, line_h = 0, 0, 0
    width = max(gw, 320)
    for p, shape in enumerate(shapes):
        min_dc = min(dc for _, dc in shape)
        w = (max(dc for _, dc in shape) - min_dc + 1) * TRAY_PX
        h = (max(dr for dr, _ in shape) + 1) * TRAY_PX + 12
        if x and x + w > width:
            x, y, line_h = 0, y + line_h + 8, 0
        slots.append((x, y, min_dc))
        x += w + 12
        line_h = max(line_h, h)
    tray_h = y + line_h
    cv = Canvas(width, gh + 12 + tray_h + 4, (255, 255, 255))
    cv.rect(0, 0, gw, gh, EMPTY_RGB)
    for p, anchor in enumerate(placed):
        if anchor is None:
            continue
        color = PALETTE[p % len(PALETTE)]
        for dr, dc in shapes[p]:
            r, c = anchor[0] + dr, anchor[1] + dc
            cv.rect(c * CELL_PX, r * CELL_PX, (c + 1) * CELL_PX, (r + 1) * CELL_PX, color)
        cv.text(anchor[1] * CELL_PX + 11, anchor[0] * CELL_PX + 9, ID_CHARS[p], (0, 0, 0), 2)
    for k in range(rows + 1):
        cv.rect(0, min(k * CELL_PX, gh - 1), gw, min(k * CELL_PX, gh - 1) + 1, LINE_RGB)
    for k in range(cols + 1):
        cv.rect(min(k * CELL_PX, gw - 1), 0, min(k * CELL_PX, gw - 1) + 1, gh, LINE_RGB)
    oy = gh + 12
    for p, (sx, sy, min_dc) in enumerate(slots):
        if placed[p] is not None:
            continue
        color = PALETTE[p % len(PALETTE)]
        for dr, dc in shapes[p]:
            px, py = sx + (dc - min_dc) * TRAY_PX, oy + sy + 12 + dr * TRAY_PX
            cv.rect(px, py, px + TRAY_PX - 1, py + TRAY_PX - 1, color)
        ax, ay = sx + (0 - min_dc) * TRAY_PX, oy + sy + 12
        cv.text(ax + 5, ay + 4, ID_CHARS[p], (0, 0, 0), 1)
        cv.text(sx, oy + sy + 2, f"P{ID_CHARS[p]}", (0, 0, 0), 1)
    return cv
