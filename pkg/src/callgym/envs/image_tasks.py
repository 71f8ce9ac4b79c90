"""Image-backed tasks: Jigsaw, Zoom-In Puzzle, Video Unshuffle, Colorization and Mental Rotation 2D.

Each task runs on a user-supplied image (or frame sequence) when an asset
directory is given, and on a deterministic synthetic test card otherwise.
"""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path

import numpy as np
from PIL import Image

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import IMAGE_PX, Canvas, compose_side_by_side, resize_nearest, rotate_nearest
from ..rng import stream

NOT_A_PERMUTATION = "payload is not a permutation"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
TILE_PX = 128
STRIP_GAP = 8

# -- assets ---------------------------------------------------------------------


def square_crop(arr: np.ndarray, size: int = IMAGE_PX) -> np.ndarray:
    """Centre-crop to a square, then scale to ``size`` by nearest neighbour."""
    h, w = arr.shape[:2]
    side = min(h, w)
    y0, x0 = (h - side) // 2, (w - side) // 2
    return np.ascontiguousarray(resize_nearest(arr[y0:y0 + side, x0:x0 + side], size, size))


@lru_cache(maxsize=64)
def _load_image(path: str) -> np.ndarray:
    with Image.open(path) as im:
        arr = square_crop(np.asarray(im.convert("RGB")))
    arr.setflags(write=False)
    return arr


def image_files(assets: str | None) -> list[Path]:
    if not assets:
        return []
    root = Path(assets)
    if not root.is_dir():
        raise ConfigError(f"asset directory not found: {assets}")
    return sorted(p for p in root.iterdir()
                  if p.suffix.lower() in IMAGE_SUFFIXES and not p.name.startswith("frame_"))


def frame_files(assets: str | None) -> list[Path]:
    if not assets:
        return []
    root = Path(assets)
    if not root.is_dir():
        raise ConfigError(f"asset directory not found: {assets}")
    return sorted(p for p in root.iterdir() if p.name.startswith("frame_") and p.suffix.lower() == ".png")


def pick_image(assets: str | None, rng: np.random.Generator) -> tuple[str, np.ndarray]:
    """(source descriptor, 448x448 RGB array) chosen by ``rng``."""
    files = image_files(assets)
    if files:
        path = files[int(rng.integers(len(files)))]
        return str(path.name), _load_image(str(path))
    card_seed = int(rng.integers(2**63))
    return f"synthetic:{card_seed}", synth_test_card(card_seed).pixels


_SHAPE_COLORS = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (0, 128, 128), (128, 0, 0),
]


@lru_cache(maxsize=32)
def _card(seed: int) -> np.ndarray:
    rng = stream(seed, "test-card")
    n = IMAGE_PX
    c0 = rng.integers(40, 200, size=3)
    c1 = rng.integers(40, 200, size=3)
    t = (np.arange(n)[:, None] + np.arange(n)[None, :]) / (2 * n - 2)
    bg = (c0[None, None, :] * (1 - t[..., None]) + c1[None, None, :] * t[..., None]).astype(np.uint8)
    # faint 16 px grid so every zoom level keeps visible structure
    bg[::16] //= 2
    bg[:, ::16] //= 2
    cv = Canvas.from_array(bg)
    for _ in range(int(rng.integers(6, 11))):
        color = _SHAPE_COLORS[int(rng.integers(len(_SHAPE_COLORS)))]
        x, y = (float(v) for v in rng.uniform(40, n - 40, size=2))
        r = float(rng.uniform(20, 70))
        kind = int(rng.integers(3))
        if kind == 0:
            cv.rect(int(x - r), int(y - r * 0.6), int(x + r), int(y + r * 0.6), color)
        elif kind == 1:
            cv.disc(x, y, r * 0.8, color)
        else:
            a = float(rng.uniform(0, 2 * math.pi))
            pts = [(x + r * math.cos(a + k * 2.1), y + r * math.sin(a + k * 2.1)) for k in range(3)]
            cv.polygon(pts, color)
    for _ in range(3):
        d = str(int(rng.integers(10)))
        x, y = (int(v) for v in rng.integers(20, n - 60, size=2))
        cv.text(x, y, d, (255, 255, 255), 6)
    # an "L" marker in the top-left corner breaks every rotational symmetry
    cv.rect(12, 12, 24, 72, (0, 0, 0))
    cv.rect(12, 60, 48, 72, (0, 0, 0))
    arr = cv.pixels
    arr.setflags(write=False)
    return arr


def synth_test_card(seed: int) -> Canvas:
    """Deterministic 448x448 test image: gridded gradient, 6-10 shapes and a few digits."""
    return Canvas.from_array(_card(int(seed)).copy())


# -- permutations ------------------------------------------------------------------


def is_permutation(p, n: int) -> bool:
    return len(p) == n and sorted(p) == list(range(n))


def shuffled(n: int, rng: np.random.Generator) -> list[int]:
    while True:
        p = [int(v) for v in rng.permutation(n)]
        if p != list(range(n)):
            return p


class PermutationTask(Environment):
    """Shared state for tasks whose answer is an ordering of items.

    ``perm[i]`` is the index of the original item shown in slot ``i``; the
    goal arrangement is the identity (items are stored in goal order).
    """

    uses_assets = True
    items: list[np.ndarray]
    perm: list[int]

    @property
    def n_items(self) -> int:
        return len(self.perm)

    @property
    def goal(self) -> list[int]:
        return list(range(self.n_items))

    def _reorder_schema(self) -> PayloadSchema:
        n = self.n_items
        return PayloadSchema(
            "reorder",
            tuple(Arg(f"p{k}", "int", 0, n - 1) for k in range(n)),
            "rearrange everything at once: slot i receives the item currently in slot p[i]; "
            f"p must list each of 0..{n - 1} exactly once",
            "reorder([p0, p1, ...])",
        )

    def swap_slots(self, i: int, j: int) -> None:
        self.perm[i], self.perm[j] = self.perm[j], self.perm[i]

    def apply(self, call: ActionCall) -> str:
        if call.name == "reorder":
            p = list(call.payload)
            if not is_permutation(p, self.n_items):
                return NOT_A_PERMUTATION
            self.perm = [self.perm[k] for k in p]
            return EXECUTED
        i, j = (self.slot_index(v) for v in call.payload)
        self.swap_slots(i, j)
        return EXECUTED

    def slot_index(self, v) -> int:
        return v

    def success(self) -> bool:
        return self.perm == self.goal

    def solved_copy(self):
        env = self.clone()
        env.perm = env.goal
        return env

    def state_dict(self) -> dict:
        return {"source": self.source, "perm": list(self.perm), "params": _plain(self.params)}

    def strip(self) -> Canvas:
        tiles = [Canvas.from_array(resize_nearest(self.items[k], TILE_PX, TILE_PX)) for k in self.perm]
        return compose_side_by_side(tiles, [str(i) for i in range(self.n_items)], STRIP_GAP, scale=2)

    def __deepcopy__(self, memo):
        # items are immutable arrays: share them between copies
        cls = self.__class__
        out = cls.__new__(cls)
        for k, v in self.__dict__.items():
            if k == "items":
                out.items = v
            elif isinstance(v, list):
                out.__dict__[k] = list(v)
            elif isinstance(v, dict):
                out.__dict__[k] = dict(v)
            else:
                out.__dict__[k] = v
        return out


def _plain(params: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@register
class Jigsaw(PermutationTask):
    env_id = "jigsaw"
    title = "Jigsaw"
    params_spec = (
        Param("nr", "int", 1, 8, "number of rows"),
        Param("nc", "int", 1, 8, "number of columns"),
    )
    presets = {"easy": {"nr": 2, "nc": 2}, "hard": {"nr": 3, "nc": 3}}

    @classmethod
    def check_params(cls, p):
        if p["nr"] * p["nc"] < 2:
            raise ConfigError("parameter out of range: jigsaw needs at least two tiles")

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        self.source, img = pick_image(assets, stream(seed, self.env_id, "asset"))
        nr, nc = params["nr"], params["nc"]
        self.th, self.tw = IMAGE_PX // nr, IMAGE_PX // nc
        self.items = [_freeze(img[r * self.th:(r + 1) * self.th, c * self.tw:(c + 1) * self.tw])
                      for r in range(nr) for c in range(nc)]
        self.perm = shuffled(nr * nc, rng)

    def schemas(self):
        nr, nc = self.params["nr"], self.params["nc"]
        return [
            PayloadSchema(
                "swap",
                (Arg("a", "pair", 0, nr - 1, 0, nc - 1), Arg("b", "pair", 0, nr - 1, 0, nc - 1)),
                "exchange the tiles at (row r1, column c1) and (row r2, column c2)",
                "swap((r1, c1), (r2, c2))",
            ),
            self._reorder_schema(),
        ]

    def slot_index(self, v) -> int:
        return v[0] * self.params["nc"] + v[1]

    def describe_task(self) -> str:
        nr, nc = self.params["nr"], self.params["nc"]
        return (
            f"The image has been cut into a {nr}x{nc} grid of tiles and shuffled. Slots are "
            "numbered row-major from the top-left (slot = row * columns + column); rows and "
            "columns count from 0. Restore the original picture, then call stop()."
        )

    def render(self) -> Canvas:
        nr, nc = self.params["nr"], self.params["nc"]
        out = np.empty((nr * self.th, nc * self.tw, 3), dtype=np.uint8)
        for slot, k in enumerate(self.perm):
            r, c = divmod(slot, nc)
            out[r * self.th:(r + 1) * self.th, c * self.tw:(c + 1) * self.tw] = self.items[k]
        return Canvas.from_array(out)


def zoom_rects(zv, zg, zs, mz, nest, rng) -> list[tuple[float, float, float]]:
    """Square crops (x0, y0, side) from widest to narrowest."""
    rects = [(0.0, 0.0, float(IMAGE_PX))]
    z = 1.0
    for k in range(1, zv):
        f = zg + float(rng.uniform(0, zs))
        z = max(mz, z * f) if k == 1 else z * f
        side = IMAGE_PX / z
        if nest:
            px, py, ps = rects[-1]
            cx = px + ps / 2 + float(rng.uniform(-0.5, 0.5)) * (ps - side)
            cy = py + ps / 2 + float(rng.uniform(-0.5, 0.5)) * (ps - side)
            x0 = min(max(cx - side / 2, px), px + ps - side)
            y0 = min(max(cy - side / 2, py), py + ps - side)
        else:
            x0, y0 = (float(v) for v in rng.uniform(0, IMAGE_PX - side, size=2))
        rects.append((x0, y0, side))
    return rects


@register
class ZoomIn(PermutationTask):
    env_id = "zoom_in"
    title = "Zoom-In Puzzle"
    params_spec = (
        Param("zv", "int", 2, 8, "number of views"),
        Param("zg", "float", 1.05, 4.0, "zoom gap between consecutive views"),
        Param("zs", "float", 0.0, 2.0, "zoom variability"),
        Param("mz", "float", 1.0, 8.0, "minimum zoom of the first zoomed view"),
        Param("nest", "bool", doc="each crop lies inside the previous one"),
    )
    presets = {
        "easy": {"zv": 4, "zg": 1.4, "zs": 0.3, "mz": 1.3, "nest": True},
        "hard": {"zv": 5, "zg": 1.4, "zs": 0.3, "mz": 1.3, "nest": True},
    }

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        self.source, img = pick_image(assets, stream(seed, self.env_id, "asset"))
        self.rects = zoom_rects(params["zv"], params["zg"], params["zs"], params["mz"], params["nest"], rng)
        self.items = []
        for x0, y0, side in self.rects:
            a, b = int(round(y0)), int(round(x0))
            s = max(1, int(round(side)))
            self.items.append(_freeze(resize_nearest(img[a:a + s, b:b + s], TILE_PX, TILE_PX)))
        self.perm = shuffled(params["zv"], rng)

    def schemas(self):
        n = self.n_items
        return [
            PayloadSchema("swap", (Arg("i", "int", 0, n - 1), Arg("j", "int", 0, n - 1)),
                          "exchange the views in slots i and j", "swap(i, j)"),
            self._reorder_schema(),
        ]

    def describe_task(self) -> str:
        return (
            f"The strip shows {self.n_items} views of one image at different zoom levels, shuffled. "
            "Arrange them from the widest view (slot 0) to the most zoomed-in view (last slot), "
            "so each view zooms further into the previous one, then call stop()."
        )

    def render(self) -> Canvas:
        return self.strip()


def synthetic_frames(seed: int, count: int = 32) -> list[np.ndarray]:
    """Dusk falls over a test card while a ball drops and a bar fills up."""
    base = _card(int(stream(seed, "video-card").integers(2**63)))
    small = resize_nearest(base, TILE_PX * 2, TILE_PX * 2).astype(np.float32)
    frames = []
    n = small.shape[0]
    for k in range(count):
        t = k / (count - 1)
        cv = Canvas.from_array(np.rint(small * (1.0 - 0.4 * t)).astype(np.uint8))
        cy = 34 + (n - 80) * t * t
        cv.disc(n * 0.7, cy, 26, (250, 250, 250))
        cv.disc(n * 0.7, cy, 20, (220, 30, 30))
        cv.rect(10, n - 18, 10 + int((n - 20) * t) + 1, n - 8, (20, 20, 20))
        frames.append(_freeze(cv.pixels))
    return frames


def mean_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(a.astype(np.int16) - b.astype(np.int16)).mean())


@register
class VideoUnshuffle(PermutationTask):
    env_id = "video_unshuffle"
    title = "Video Unshuffle"
    params_spec = (
        Param("nf", "int", 2, 10, "number of frames"),
        Param("ss", "str", doc="sampling strategy", choices=("uniform", "random")),
        Param("mfd", "float", 0.0, 255.0, "minimum mean absolute difference between consecutive frames"),
    )
    presets = {
        "easy": {"nf": 4, "ss": "uniform", "mfd": 5.0},
        "hard": {"nf": 5, "ss": "uniform", "mfd": 5.0},
    }

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        files = frame_files(assets)
        if files:
            frames = [_load_image(str(p)) for p in files]
            self.source = f"frames:{len(files)}"
        else:
            frames = synthetic_frames(seed)
            self.source = "synthetic"
        nf, total = params["nf"], len(frames)
        if total < nf:
            raise ConfigError(f"need at least {nf} frames, found {total}")
        for _ in range(200):
            if params["ss"] == "uniform":
                span = total - 1
                step = span / (nf - 1)
                idx = [int(round(k * step)) for k in range(nf)]
            else:
                idx = sorted(int(v) for v in rng.choice(total, size=nf, replace=False))
            chosen = [frames[k] for k in idx]
            if all(mean_abs_diff(a, b) >= params["mfd"] for a, b in zip(chosen, chosen[1:])):
                break
        else:
            raise ConfigError("cannot select frames satisfying mfd")
        self.frame_index = idx
        self.items = [_freeze(resize_nearest(f, TILE_PX, TILE_PX)) for f in chosen]
        self.perm = shuffled(nf, rng)

    schemas = ZoomIn.schemas

    def describe_task(self) -> str:
        return (
            f"The strip shows {self.n_items} frames of a short video in shuffled order. Put them "
            "in chronological order, earliest in slot 0, then call stop()."
        )

    def render(self) -> Canvas:
        return self.strip()


# -- colour and rotation ---------------------------------------------------------------


def rgb_to_hsv(arr: np.ndarray) -> np.ndarray:
    """Float HSV with hue in degrees [0, 360) and saturation/value in [0, 1]."""
    rgb = arr.astype(np.float32) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx, mn = rgb.max(-1), rgb.min(-1)
    delta = mx - mn
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(mx == r, ((g - b) / safe) % 6.0,
                 np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = np.where(delta > 0, h * 60.0, 0.0)
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([h, s, mx], axis=-1).astype(np.float32)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0] % 360.0, hsv[..., 1], hsv[..., 2]
    c = v * s
    hp = h / 60.0
    x = c * (1 - np.abs(hp % 2 - 1))
    z = np.zeros_like(c)
    sector = np.floor(hp).astype(np.int64) % 6
    choices = [
        np.stack([c, x, z], -1), np.stack([x, c, z], -1), np.stack([z, c, x], -1),
        np.stack([z, x, c], -1), np.stack([x, z, c], -1), np.stack([c, z, x], -1),
    ]
    out = np.zeros(hsv.shape, dtype=np.float32)
    for k, ch in enumerate(choices):
        out[sector == k] = ch[sector == k]
    out += (v - c)[..., None]
    return np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8)


@lru_cache(maxsize=16)
def _hsv_of(source: str, assets: str | None) -> np.ndarray:
    img = _lookup_image(source, assets)
    out = rgb_to_hsv(img)
    out.setflags(write=False)
    return out


def _lookup_image(source: str, assets: str | None) -> np.ndarray:
    if source.startswith("synthetic:"):
        return _card(int(source.split(":", 1)[1]))
    return _load_image(str(Path(assets) / source))


def wrap180(a: float) -> float:
    """Map an angle to [-180, 180)."""
    return (a + 180.0) % 360.0 - 180.0


def _signed_uniform(rng, lo: float, hi: float) -> float:
    mag = float(rng.uniform(lo, hi))
    return mag if rng.integers(2) else -mag


def colorize(hsv: np.ndarray, hue: float, sat: float) -> np.ndarray:
    out = hsv.copy()
    out[..., 0] = (out[..., 0] + hue) % 360.0
    out[..., 1] = np.clip(out[..., 1] + sat / 100.0, 0.0, 1.0)
    return hsv_to_rgb(out)


@register
class Colorization(Environment):
    env_id = "colorization"
    title = "Colorization"
    uses_assets = True
    params_spec = (Param("ar", "float", 0.0, 60.0, "accuracy radius for hue (degrees) and saturation (points)"),)
    presets = {"easy": {"ar": 11.0}, "hard": {"ar": 16.0}}

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        self.source, _ = pick_image(assets, stream(seed, self.env_id, "asset"))
        ar = params["ar"]
        self.hue = wrap180(_signed_uniform(rng, min(ar + 10, 180.0), 180.0))
        self.sat = _signed_uniform(rng, min(ar + 10, 60.0), 60.0)

    def schemas(self):
        return [
            PayloadSchema("rotate", (Arg("theta", "real", -360, 360),),
                          "shift the hue of every pixel by theta degrees", "rotate(theta)"),
            PayloadSchema("saturate", (Arg("delta", "real", -100, 100),),
                          "add delta percentage points to the saturation of every pixel", "saturate(delta)"),
        ]

    def describe_task(self) -> str:
        return (
            "The colours of a photo have been distorted by a hue rotation and a saturation "
            "change. Use rotate and saturate to restore natural colours. Success needs both the "
            f"hue and the saturation within {self.params['ar']:g} (degrees / points) of the "
            "original; then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        (v,) = call.payload
        if call.name == "rotate":
            self.hue = wrap180(self.hue + float(v))
        else:
            self.sat = min(max(self.sat + float(v), -100.0), 100.0)
        return EXECUTED

    def success(self) -> bool:
        ar = self.params["ar"]
        return abs(self.hue) <= ar and abs(self.sat) <= ar

    def solved_copy(self):
        env = self.clone()
        env.hue, env.sat = 0.0, 0.0
        return env

    def state_dict(self) -> dict:
        return {"source": self.source, "hue": self.hue, "sat": self.sat}

    def render(self) -> Canvas:
        if self.hue == 0.0 and self.sat == 0.0:
            return Canvas.from_array(_lookup_image(self.source, self.assets).copy())
        return Canvas.from_array(colorize(_hsv_of(self.source, self.assets), self.hue, self.sat))


MR2D_PX = 224
MR2D_BG = (128, 128, 128)


def wrap_residual(a: float) -> float:
    """Map an angle to (-180, 180]."""
    r = wrap180(a)
    return 180.0 if r == -180.0 else r


@register
class MentalRotation2D(Environment):
    env_id = "mental_rotation_2d"
    title = "Mental Rotation 2D"
    uses_assets = True
    params_spec = (Param("at", "float", 0.0, 180.0, "angular tolerance (degrees)"),)
    presets = {"easy": {"at": 10.0}, "hard": {"at": 5.0}}

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        self.source, img = pick_image(assets, stream(seed, self.env_id, "asset"))
        self.residual = wrap_residual(_signed_uniform(rng, min(params["at"] + 10, 180.0), 180.0))

    def schemas(self):
        return [PayloadSchema("rotate", (Arg("theta", "real", -360, 360),),
                              "rotate the left image by theta degrees (counter-clockwise positive)",
                              "rotate(theta)")]

    def describe_task(self) -> str:
        return (
            "Left: the current image, rotated by an unknown angle. Right: the image upright. "
            "Rotate the left image until it matches the right one (within "
            f"{self.params['at']:g} degrees), then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        self.residual = wrap_residual(self.residual + float(call.payload[0]))
        return EXECUTED

    def success(self) -> bool:
        return abs(self.residual) <= self.params["at"]

    def solved_copy(self):
        env = self.clone()
        env.residual = 0.0
        return env

    def state_dict(self) -> dict:
        return {"source": self.source, "residual": self.residual}

    def render(self) -> Canvas:
        upright = _small(self.source, self.assets)
        cur, valid = rotate_nearest(upright, self.residual)
        if valid is not None:
            cur = cur.copy()
            cur[~valid] = MR2D_BG
        return compose_side_by_side([Canvas.from_array(cur), Canvas.from_array(upright.copy())],
                                    ["CURRENT", "TARGET"], gap_px=16, scale=2)


@lru_cache(maxsize=16)
def _small(source: str, assets: str | None) -> np.ndarray:
    return _freeze(resize_nearest(_lookup_image(source, assets), MR2D_PX, MR2D_PX))
