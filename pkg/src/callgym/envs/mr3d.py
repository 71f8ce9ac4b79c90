"""Mental Rotation 3D with procedurally generated polycube snakes."""

from __future__ import annotations

import math
from itertools import permutations, product

import numpy as np

from ..actions import ActionCall, Arg, PayloadSchema
from ..core import EXECUTED, ConfigError, Environment, Param, register
from ..render import Canvas, compose_side_by_side
from ..rng import stream

AXES = np.eye(3, dtype=np.int64)


def polycube(ns: int, lr: tuple[int, int], rng: np.random.Generator, budget: int = 1000) -> list[tuple[int, int, int]]:
    """Self-avoiding chain of ``ns`` straight runs, consecutive runs orthogonal.

    A run of length L spans L cubes and shares its first cube with the end of
    the previous run.
    """
    for _ in range(budget):
        cells = [(0, 0, 0)]
        seen = {cells[0]}
        prev_axis = None
        ok = True
        for _seg in range(ns):
            axis = int(rng.choice([a for a in range(3) if a != prev_axis]))
            step = AXES[axis] * (1 if rng.integers(2) else -1)
            length = int(rng.integers(lr[0], lr[1] + 1))
            for _k in range(length - 1):
                nxt = tuple(int(v) for v in np.asarray(cells[-1]) + step)
                if nxt in seen:
                    ok = False
                    break
                cells.append(nxt)
                seen.add(nxt)
            if not ok:
                break
            prev_axis = axis
        if ok:
            return cells
    raise ConfigError("polycube generation budget exhausted")


def cube_rotations() -> list[np.ndarray]:
    """The 24 proper rotations of the cube as integer matrices."""
    out = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            m = np.zeros((3, 3), dtype=np.int64)
            for r, (c, s) in enumerate(zip(perm, signs)):
                m[r, c] = s
            if round(np.linalg.det(m)) == 1:
                out.append(m)
    return out


_CUBE_ROTS = cube_rotations()


def _canon(cells: np.ndarray) -> frozenset:
    cells = cells - cells.min(axis=0)
    return frozenset(map(tuple, cells.tolist()))


def is_symmetric(cells) -> bool:
    """True when some non-identity lattice rotation maps the shape to itself."""
    arr = np.asarray(cells, dtype=np.int64)
    base = _canon(arr)
    for m in _CUBE_ROTS:
        if (m == np.eye(3, dtype=np.int64)).all():
            continue
        if _canon(arr @ m.T) == base:
            return True
    return False


def rot_x(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(deg: float) -> np.ndarray:
    t = math.radians(deg)
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def orthonormalize(r: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(r)
    out = u @ vt
    if np.linalg.det(out) < 0:  # pragma: no cover - only under gross numerical drift
        u[:, -1] *= -1
        out = u @ vt
    return out


def compose(current: np.ndarray, dy: float, dp: float, dr: float) -> np.ndarray:
    """Intrinsic yaw (body z), then pitch (body y), then roll (body x)."""
    return orthonormalize(current @ rot_z(dy) @ rot_y(dp) @ rot_x(dr))


def geodesic_deg(a: np.ndarray, b: np.ndarray) -> float:
    c = (np.trace(a.T @ b) - 1.0) / 2.0
    return math.degrees(math.acos(min(1.0, max(-1.0, c))))


def zyx_angles(r: np.ndarray) -> tuple[float, float, float]:
    """(yaw, pitch, roll) in degrees with r = Rz(yaw) Ry(pitch) Rx(roll)."""
    sp = -r[2, 0]
    pitch = math.degrees(math.asin(min(1.0, max(-1.0, sp))))
    if abs(sp) < 1 - 1e-9:
        yaw = math.degrees(math.atan2(r[1, 0], r[0, 0]))
        roll = math.degrees(math.atan2(r[2, 1], r[2, 2]))
    else:  # gimbal lock: fold roll into yaw
        roll = 0.0
        yaw = math.degrees(math.atan2(-r[0, 1], r[1, 1]))
    return yaw, pitch, roll


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


@register
class MentalRotation3D(Environment):
    env_id = "mental_rotation_3d"
    title = "Mental Rotation 3D (Cube)"
    params_spec = (
        Param("ns", "int", 2, 10, "number of segments"),
        Param("lr", "pair", 2, 8, "segment length range (cubes)"),
        Param("at", "float", 0.0, 180.0, "angular tolerance (degrees)"),
    )
    presets = {
        "easy": {"ns": 4, "lr": (2, 4), "at": 15.0},
        "hard": {"ns": 6, "lr": (2, 4), "at": 15.0},
    }

    @classmethod
    def check_params(cls, p):
        if p["lr"][0] > p["lr"][1]:
            raise ConfigError("parameter out of range: lr must be (min, max)")

    def __init__(self, params, seed, assets=None):
        super().__init__(params, seed, assets)
        rng = stream(seed, self.env_id, "generate")
        for _ in range(1000):
            cells = polycube(params["ns"], params["lr"], rng)
            if not is_symmetric(cells):
                break
        else:  # pragma: no cover
            raise ConfigError("could not generate an asymmetric polycube")
        self.cells = cells
        while True:
            self.current = random_rotation(rng)
            self.target = random_rotation(rng)
            if geodesic_deg(self.current, self.target) > params["at"]:
                break

    def schemas(self):
        return [
            PayloadSchema(
                "rotate",
                (Arg("yaw", "real", -360, 360), Arg("pitch", "real", -360, 360), Arg("roll", "real", -360, 360)),
                "rotate the left object about its own axes: first yaw about its z axis, then "
                "pitch about its y axis, then roll about its x axis (degrees)",
                "rotate([dy, dp, dr])",
            )
        ]

    def describe_task(self) -> str:
        return (
            "Left: a 3D object made of cubes in its current orientation. Right: the same object in "
            "the target orientation. Rotate the left object until its orientation is within "
            f"{self.params['at']:g} degrees of the target, then call stop()."
        )

    def apply(self, call: ActionCall) -> str:
        dy, dp, dr = (float(v) for v in call.payload)
        self.current = compose(self.current, dy, dp, dr)
        return EXECUTED

    def angle_error(self) -> float:
        return geodesic_deg(self.current, self.target)

    def success(self) -> bool:
        return self.angle_error() <= self.params["at"]

    def solved_copy(self):
        env = self.clone()
        env.current = env.target.copy()
        return env

    def state_dict(self) -> dict:
        return {
            "cells": [list(c) for c in self.cells],
            "current": np.round(self.current, 12).tolist(),
            "target": np.round(self.target, 12).tolist(),
        }

    def render(self) -> Canvas:
        return compose_side_by_side(
            [render_polycube(self.cells, self.current), render_polycube(self.cells, self.target)],
            ["CURRENT", "TARGET"], gap_px=16, scale=2,
        )


VIEW_PX = 240
BG_RGB = (235, 235, 240)
BASE_RGB = np.array([70, 130, 220], dtype=np.float64)
EDGE_RGB = (25, 35, 60)
LIGHT = np.array([0.4, -0.6, 0.7]) / np.linalg.norm([0.4, -0.6, 0.7])
# camera: screen x right, screen y down, depth toward the viewer is +z
CAMERA = rot_x(-25) @ rot_y(30)

_FACES = []  # (normal, 4 corner offsets) for a unit cube centred at the origin
for axis in range(3):
    for sign in (1, -1):
        n = np.zeros(3)
        n[axis] = sign
        u = np.zeros(3)
        u[(axis + 1) % 3] = 0.5
        v = np.zeros(3)
        v[(axis + 2) % 3] = 0.5
        c = n * 0.5
        _FACES.append((n, np.array([c - u - v, c + u - v, c + u + v, c - u + v])))


def render_polycube(cells, rotation: np.ndarray) -> Canvas:
    """Orthographic, painter's-algorithm render with Lambertian shading."""
    pts = np.asarray(cells, dtype=np.float64)
    centre = pts.mean(axis=0)
    radius = max(np.linalg.norm(pts - centre, axis=1).max() + 0.9, 1.0)
    scale = (VIEW_PX / 2 - 8) / radius
    m = CAMERA @ rotation
    occupied = {tuple(c) for c in cells}
    faces = []
    for cell in cells:
        for n, corners in _FACES:
            if tuple(int(v) for v in np.asarray(cell) + n) in occupied:
                continue  # internal face
            wn = m @ n
            if wn[2] <= 1e-9:
                continue  # faces away from the camera
            world = (corners + np.asarray(cell, dtype=np.float64) - centre) @ m.T
            depth = world[:, 2].mean()
            shade = 0.35 + 0.65 * max(0.0, float(wn @ LIGHT))
            faces.append((depth, world, shade))
    faces.sort(key=lambda f: f[0])
    cv = Canvas(VIEW_PX, VIEW_PX, BG_RGB)
    half = VIEW_PX / 2
    for _depth, world, shade in faces:
        poly = [(half + p[0] * scale, half - p[1] * scale) for p in world]
        cv.polygon(poly, tuple(int(v) for v in np.clip(BASE_RGB * shade, 0, 255)))
        for a, b in zip(poly, poly[1:] + poly[:1]):
            cv.line(round(a[0]), round(a[1]), round(b[0]), round(b[1]), EDGE_RGB)
    return cv
