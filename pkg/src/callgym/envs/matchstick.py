"""Matchstick Equation and Matchstick Rotation."""

from __future__ import annotations

import math
from collections import deque

import numpy as np

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import IMAGE_PX, Canvas, CharGrid
from ..rng import stream

# -- seven-segment codebook ----------------------------------------------------
# digit segments: 0 top, 1 upper-right, 2 lower-right, 3 bottom,
#                 4 lower-left, 5 upper-left, 6 middle
# operator slots: 0 horizontal bar, 1 vertical bar, 2 '\' diagonal, 3 '/' diagonal
# equals slots:   0 upper bar, 1 lower bar

DIGITS = {
    0: frozenset({0, 1, 2, 3, 4, 5}),
    1: frozenset({1, 2}),
    2: frozenset({0, 1, 6, 4, 3}),
    3: frozenset({0, 1, 6, 2, 3}),
    4: frozenset({5, 6, 1, 2}),
    5: frozenset({0, 5, 6, 2, 3}),
    6: frozenset({0, 5, 6, 4, 2, 3}),
    7: frozenset({0, 1, 2}),
    8: frozenset(range(7)),
    9: frozenset({0, 1, 2, 3, 5, 6}),
}
OPERATORS = {"-": frozenset({0}), "+": frozenset({0, 1}), "*": frozenset({2, 3})}
EQUALS = frozenset({0, 1})

SLOTS = {"digit": 7, "op": 4, "eq": 2}
CODEBOOK = {
    "digit": {v: str(k) for k, v in DIGITS.items()},
    "op": {v: k for k, v in OPERATORS.items()},
    "eq": {EQUALS: "="},
}

NO_STICK = "no stick at source"
OCCUPIED = "destination occupied"
NOTHING_TO_UNDO = "nothing to undo"
BAD_SLOT = "no such stick slot at destination"

Move = tuple  # (i, s, j, t)


def decode(classes, segs) -> str | None:
    """Text of the statement, or None when some glyph is unrecognised."""
    out = []
    for cls, s in zip(classes, segs):
        ch = CODEBOOK[cls].get(s)
        if ch is None:
            return None
        out.append(ch)
    return "".join(out)


def statement_true(text: str | None) -> bool:
    if text is None or text.count("=") != 1:
        return False
    left, right = text.split("=")
    for op in "+-*":
        if op in left:
            a, b = left.split(op)
            break
    else:
        return False
    nums = [a, b, right]
    if any(not n or (len(n) > 1 and n[0] == "0") for n in nums):
        return False
    a, b, c = (int(n) for n in nums)
    return {"+": a + b, "-": a - b, "*": a * b}[op] == c


def equation_valid(classes, segs) -> bool:
    return statement_true(decode(classes, segs))


def layout(a: int, op: str, b: int, c: int):
    classes, segs = [], []
    for ch in f"{a}{op}{b}={c}":
        if ch.isdigit():
            classes.append("digit")
            segs.append(DIGITS[int(ch)])
        elif ch == "=":
            classes.append("eq")
            segs.append(EQUALS)
        else:
            classes.append("op")
            segs.append(OPERATORS[ch])
    return tuple(classes), tuple(segs)


def all_moves(classes, segs):
    """Every legal single-stick relocation (i, s, j, t)."""
    sources = [(i, s) for i, ss in enumerate(segs) for s in sorted(ss)]
    dests = [(j, t) for j, cls in enumerate(classes) for t in range(SLOTS[cls]) if t not in segs[j]]
    return [(i, s, j, t) for i, s in sources for j, t in dests]


def apply_move(segs, m: Move):
    i, s, j, t = m
    out = list(segs)
    out[i] = out[i] - {s}
    out[j] = out[j] | {t}
    return tuple(out)


def invalid_positions(classes, segs) -> int:
    return sum(1 for cls, s in zip(classes, segs) if s not in CODEBOOK[cls])


def _finishing_moves(classes, segs):
    """Single moves after which every glyph is recognised.

    A move touches at most two positions, so both ends must land on codebook
    glyphs and every untouched position must already be valid.
    """
    bad = [k for k, (cls, s) in enumerate(zip(classes, segs)) if s not in CODEBOOK[cls]]
    if len(bad) > 2:
        return
    removals, additions = [], []
    for i, (cls, s) in enumerate(zip(classes, segs)):
        for x in s:
            if (s - {x}) in CODEBOOK[cls]:
                removals.append((i, x))
        for t in range(SLOTS[cls]):
            if t not in s and (s | {t}) in CODEBOOK[cls]:
                additions.append((i, t))
        for x in s:
            for t in range(SLOTS[cls]):
                if t not in s and (s - {x} | {t}) in CODEBOOK[cls]:
                    if all(k == i for k in bad):
                        yield (i, x, i, t)
    for i, x in removals:
        for j, t in additions:
            if i != j and all(k in (i, j) for k in bad):
                yield (i, x, j, t)


def shortest_fix(classes, segs, max_depth: int, first_moves=None) -> list[Move] | None:
    """Breadth-first search for the shortest move list making the equation true.

    Depth-limited; a node with more unrecognised glyphs than two per remaining
    move is pruned, and the final level only tries moves that can finish.
    """
    if equation_valid(classes, segs):
        return []
    frontier = [(segs, [])]
    seen = {segs}
    for depth in range(1, max_depth + 1):
        remaining = max_depth - depth
        nxt = []
        for state, path in frontier:
            if invalid_positions(classes, state) > 2 * (remaining + 1):
                continue
            for m in _finishing_moves(classes, state):
                if equation_valid(classes, apply_move(state, m)):
                    return path + [m]
            if remaining == 0:
                continue
            for m in all_moves(classes, state) if first_moves is None or path else first_moves:
                s2 = apply_move(state, m)
                if s2 in seen or invalid_positions(classes, s2) > 2 * remaining:
                    continue
                seen.add(s2)
                nxt.append((s2, path + [m]))
        frontier = nxt
    return None


def sample_equation(rng: np.random.Generator):
    op = "+-*"[int(rng.integers(3))]
    while True:
        a, b = (int(v) for v in rng.integers(0, 100, size=2))
        if op == "*" and a * b > 999:
            continue
        c = {"+": a + b, "-": a - b, "*": a * b}[op]
        if c >= 0:
            return a, op, b, c


@register
class MatchstickEquation(Environment):
    env_id = "matchstick_equation"
    title = "Matchstick Equation"
    text_capable = True
    params_spec = (Param("bm", "int", 1, 2, "number of break moves"),)
    presets = {"easy": {"bm": 1}, "hard": {"bm": 2}}

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        bm = params["bm"]
        while True:
            self.truth = sample_equation(rng)
            classes, segs = layout(*self.truth)
            for _ in range(bm):
                moves = all_moves(classes, segs)
                segs = apply_move(segs, moves[int(rng.integers(len(moves)))])
            if equation_valid(classes, segs):
                continue
            fix = shortest_fix(classes, segs, bm)
            if fix is not None and len(fix) == bm:
                break
        self.classes = classes
        self.segs = segs
        self.history: list[Move] = []

    @property
    def n_positions(self) -> int:
        return len(self.classes)

    def schemas(self):
        n = self.n_positions
        return [
            PayloadSchema(
                "move",
                (Arg("i", "int", 0, n - 1), Arg("s", "int", 0, 6),
                 Arg("j", "int", 0, n - 1), Arg("t", "int", 0, 6)),
                "take the stick in slot s of position i and put it into the empty slot t of position j",
                "move([i, s, j, t])",
            ),
            PayloadSchema("undo", (), "revert the most recent move", "undo()"),
        ]

    def describe_task(self) -> str:
        return (
            "The picture shows an equation A op B = C built from matchsticks; it is currently "
            f"false. Positions are numbered 0 to {self.n_positions - 1} from left to right (only "
            "glyph positions are numbered). Move sticks one at a time so the equation becomes "
            "true, then call stop(). Every position must show a valid glyph.\n"
            "Digit slots (seven segments):\n"
            "   -0-\n  5   1\n   -6-\n  4   2\n   -3-\n"
            "Operator slots: 0 horizontal bar, 1 vertical bar, 2 '\\' diagonal, 3 '/' diagonal "
            "('-' is {0}, '+' is {0,1}, 'x' is {2,3}).\n"
            "Equals slots: 0 upper bar, 1 lower bar.\n"
            "Multi-digit numbers may not start with 0."
        )

    def apply(self, call: ActionCall) -> str:
        if call.name == "undo":
            if not self.history:
                return NOTHING_TO_UNDO
            i, s, j, t = self.history.pop()
            self.segs = apply_move(self.segs, (j, t, i, s))
            return EXECUTED
        i, s, j, t = call.payload
        if s not in self.segs[i]:
            return NO_STICK
        if t >= SLOTS[self.classes[j]]:
            return BAD_SLOT
        if t in self.segs[j]:
            return OCCUPIED
        self.segs = apply_move(self.segs, (i, s, j, t))
        self.history.append((i, s, j, t))
        return EXECUTED

    def success(self) -> bool:
        return equation_valid(self.classes, self.segs)

    def solved_copy(self):
        env = self.clone()
        env.segs = layout(*self.truth)[1]
        env.history = []
        return env

    def stick_count(self) -> int:
        return sum(len(s) for s in self.segs)

    def state_dict(self) -> dict:
        return {"classes": list(self.classes), "segs": [sorted(s) for s in self.segs]}

    def ascii(self) -> CharGrid:
        return equation_ascii(self.classes, self.segs)

    def render(self) -> Canvas:
        return equation_render(self.classes, self.segs)


GLYPH_W = 6


def _glyph_rows(cls: str, s) -> list[str]:
    g = [[" "] * GLYPH_W for _ in range(6)]

    def put(r, c, text):
        for k, ch in enumerate(text):
            g[r][c + k] = ch

    if cls == "digit":
        if 0 in s:
            put(0, 1, "---")
        if 6 in s:
            put(2, 1, "---")
        if 3 in s:
            put(5, 1, "---")
        for seg, col, rows in ((5, 0, (1, 2)), (1, 4, (1, 2)), (4, 0, (3, 4)), (2, 4, (3, 4))):
            if seg in s:
                for r in rows:
                    g[r][col] = "|"
    elif cls == "eq":
        if 0 in s:
            put(1, 1, "---")
        if 1 in s:
            put(4, 1, "---")
    else:
        if 0 in s:
            put(2, 1, "---")
        if 2 in s:
            g[1][1], g[3][3] = "\\", "\\"
        if 3 in s:
            g[1][3], g[3][1] = "/", "/"
        if 1 in s:
            g[1][2] = g[3][2] = "|"
        centre = "|" if 1 in s else "/" if 3 in s else "\\" if 2 in s else g[2][2]
        g[2][2] = centre
    return ["".join(row) for row in g]


def equation_ascii(classes, segs) -> CharGrid:
    rows = [""] * 6
    for cls, s in zip(classes, segs):
        for r, line in enumerate(_glyph_rows(cls, s)):
            rows[r] += line
    footer = "".join(f"{k:^{GLYPH_W}}" for k in range(len(classes)))
    return CharGrid.padded(rows + [footer])


def parse_equation_ascii(text: str, classes) -> tuple[frozenset, ...]:
    """Recover segment sets from an ASCII frame given the position classes."""
    lines = text.split("\n")
    out = []
    for k, cls in enumerate(classes):
        g = [line[k * GLYPH_W:(k + 1) * GLYPH_W].ljust(GLYPH_W) for line in lines[:6]]
        s = set()
        if cls == "digit":
            checks = {0: g[0][2] == "-", 6: g[2][2] == "-", 3: g[5][2] == "-",
                      5: g[1][0] == "|", 1: g[1][4] == "|", 4: g[3][0] == "|", 2: g[3][4] == "|"}
        elif cls == "eq":
            checks = {0: g[1][2] == "-", 1: g[4][2] == "-"}
        else:
            checks = {0: g[2][1] == "-", 1: g[1][2] == "|", 2: g[1][1] == "\\", 3: g[1][3] == "/"}
        s = frozenset(seg for seg, on in checks.items() if on)
        out.append(s)
    return tuple(out)


# raster layout: one 56x120 cell per position
EQ_W, EQ_H = 560, 160
SLOT_W = 56
STICK = 30
THICK = 6
STICK_RGB = (196, 120, 40)
HEAD_RGB = (200, 30, 30)
BG_RGB = (250, 248, 240)


def _bar(cv: Canvas, x0, y0, x1, y1):
    """Thick stick from (x0, y0) to (x1, y1) with a red head at the end."""
    dx, dy = x1 - x0, y1 - y0
    n = math.hypot(dx, dy)
    px, py = -dy / n * THICK / 2, dx / n * THICK / 2
    cv.polygon([(x0 + px, y0 + py), (x1 + px, y1 + py), (x1 - px, y1 - py), (x0 - px, y0 - py)], STICK_RGB)
    cv.disc(x1, y1, THICK * 0.6, HEAD_RGB)


def equation_render(classes, segs) -> Canvas:
    cv = Canvas(EQ_W, EQ_H, BG_RGB)
    x_off = (EQ_W - SLOT_W * len(classes)) // 2
    top = 30
    for k, (cls, s) in enumerate(zip(classes, segs)):
        x = x_off + k * SLOT_W + (SLOT_W - STICK) // 2
        if cls == "digit":
            pts = {
                0: (x + 4, top, x + STICK - 4, top),
                6: (x + 4, top + STICK, x + STICK - 4, top + STICK),
                3: (x + 4, top + 2 * STICK, x + STICK - 4, top + 2 * STICK),
                5: (x, top + 4, x, top + STICK - 4),
                1: (x + STICK, top + 4, x + STICK, top + STICK - 4),
                4: (x, top + STICK + 4, x, top + 2 * STICK - 4),
                2: (x + STICK, top + STICK + 4, x + STICK, top + 2 * STICK - 4),
            }
        elif cls == "eq":
            pts = {0: (x + 2, top + STICK - 7, x + STICK - 2, top + STICK - 7),
                   1: (x + 2, top + STICK + 7, x + STICK - 2, top + STICK + 7)}
        else:
            cy = top + STICK
            pts = {0: (x + 2, cy, x + STICK - 2, cy),
                   1: (x + STICK // 2, cy - STICK // 2 + 2, x + STICK // 2, cy + STICK // 2 - 2),
                   2: (x + 4, cy - STICK // 2 + 4, x + STICK - 4, cy + STICK // 2 - 4),
                   3: (x + STICK - 4, cy - STICK // 2 + 4, x + 4, cy + STICK // 2 - 4)}
        for seg in sorted(s):
            _bar(cv, *pts[seg])
        label = str(k)
        cv.text(x_off + k * SLOT_W + (SLOT_W - 6 * len(label) * 2) // 2 + 1, EQ_H - 30, label, (60, 60, 60), 2)
    return cv


# -- Matchstick Rotation ----------------------------------------------------------

STICK_LEN = 90
MARGIN = 70


def angle_dist(a: float, b: float) -> float:
    d = abs(a - b) % 360.0
    return min(d, 360.0 - d)


def signed_delta(a: float, b: float) -> float:
    """Smallest signed rotation taking angle a to angle b."""
    d = (b - a + 180.0) % 360.0 - 180.0
    return d


@register
class MatchstickRotation(Environment):
    env_id = "matchstick_rotation"
    title = "Matchstick Rotation"
    params_spec = (
        Param("sr", "interval", 1e-3, 100.0, "hidden scale range"),
        Param("pt", "float", 0.0, IMAGE_PX, "position tolerance (pixels)"),
        Param("at", "float", 0.0, 180.0, "angular tolerance (degrees)"),
    )
    presets = {
        "easy": {"sr": (0.5, 2.0), "pt": 10.0, "at": 15.0},
        "hard": {"sr": (0.5, 2.0), "pt": 5.0, "at": 10.0},
    }

    @classmethod
    def check_params(cls, p):
        if p["sr"][0] <= 0:
            raise ConfigError("parameter out of range: sr must be positive")

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        lo, hi = MARGIN, IMAGE_PX - MARGIN
        while True:
            cur = [float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)), float(rng.uniform(0, 360))]
            tgt = [float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)), float(rng.uniform(0, 360))]
            if math.dist(cur[:2], tgt[:2]) > params["pt"] and angle_dist(cur[2], tgt[2]) > params["at"]:
                break
        self.current = tuple(cur)
        self.target = tuple(tgt)
        self.scale = float(rng.uniform(*params["sr"]))

    def schemas(self):
        return [
            PayloadSchema(
                "move",
                (Arg("dx", "real", -1000, 1000), Arg("dy", "real", -1000, 1000),
                 Arg("dtheta", "real", -360, 360)),
                "translate the stick by (dx, dy) in unknown movement units (x right, y down) and "
                "rotate it by dtheta degrees (counter-clockwise positive)",
                "move([dx, dy, dtheta])",
            )
        ]

    def describe_task(self) -> str:
        return (
            f"A matchstick with a red head lies on a {IMAGE_PX}x{IMAGE_PX} canvas. A grey outline "
            "shows the target pose. Move and rotate the stick onto the outline so the head ends "
            "where the outline's marked head is. Translation units map to pixels by an unknown "
            f"fixed scale; rotation is in degrees. Success needs the centre within "
            f"{self.params['pt']:g} px and the heading within {self.params['at']:g} degrees of "
            "the target; then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        dx, dy, dth = (float(v) for v in call.payload)
        x, y, th = self.current
        x = min(max(x + self.scale * dx, 0.0), float(IMAGE_PX))
        y = min(max(y + self.scale * dy, 0.0), float(IMAGE_PX))
        self.current = (x, y, (th + dth) % 360.0)
        return EXECUTED

    def position_error(self) -> float:
        return math.dist(self.current[:2], self.target[:2])

    def angle_error(self) -> float:
        return angle_dist(self.current[2], self.target[2])

    def success(self) -> bool:
        return self.position_error() <= self.params["pt"] and self.angle_error() <= self.params["at"]

    def solved_copy(self):
        env = self.clone()
        env.current = env.target
        return env

    def state_dict(self) -> dict:
        return {"current": list(self.current), "target": list(self.target), "scale": self.scale}

    def render(self) -> Canvas:
        return rotation_render(self.current, self.target)


GHOST_RGB = (150, 150, 150)


def _stick_ends(pose):
    x, y, th = pose
    r = math.radians(th)
    hx, hy = math.cos(r) * STICK_LEN / 2, -math.sin(r) * STICK_LEN / 2
    return (x - hx, y - hy), (x + hx, y + hy)


def _stick_poly(pose, half_w):
    (x0, y0), (x1, y1) = _stick_ends(pose)
    n = STICK_LEN
    px, py = -(y1 - y0) / n * half_w, (x1 - x0) / n * half_w
    return [(x0 + px, y0 + py), (x1 + px, y1 + py), (x1 - px, y1 - py), (x0 - px, y0 - py)]


def rotation_render(current, target) -> Canvas:
    cv = Canvas(IMAGE_PX, IMAGE_PX, BG_RGB)
    poly = _stick_poly(target, 6)
    for a, b in zip(poly, poly[1:] + poly[:1]):
        cv.line(round(a[0]), round(a[1]), round(b[0]), round(b[1]), GHOST_RGB)
    hx, hy = _stick_ends(target)[1]
    cv.disc(hx, hy, 7, GHOST_RGB)
    cv.disc(hx, hy, 5, BG_RGB)
    cv.polygon(_stick_poly(current, 4), STICK_RGB)
    hx, hy = _stick_ends(current)[1]
    cv.disc(hx, hy, 6, HEAD_RGB)
    return cv
