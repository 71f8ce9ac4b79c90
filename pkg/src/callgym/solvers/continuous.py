"""Solvers for the continuous-control tasks: both mental rotations and Colorization."""

from __future__ import annotations

import math

from ..envs.image_tasks import Colorization, MentalRotation2D
from ..envs.mr3d import MentalRotation3D, zyx_angles
from .base import SolverError, SolverOptions, SolverPlan, call, check_target, solver_rng

HUE_STEP = 60.0
SAT_STEP = 30.0


def _split_scalar(total: float, pieces: int, rng) -> list[float]:
    """``pieces`` same-sign parts summing to ``total``; the last is the exact remainder."""
    if pieces == 1:
        return [total]
    w = rng.uniform(0.5, 1.5, size=pieces)
    w = w / w.sum()
    parts = [float(total * wi) for wi in w[:-1]]
    parts.append(total - sum(parts))
    return parts


def solve_mr2d(env: MentalRotation2D, opts: SolverOptions) -> SolverPlan:
    strategy = opts.strategy or "split"
    if strategy != "split":
        raise SolverError(f"unknown strategy {strategy!r}")
    rng = solver_rng(env, opts, strategy)
    n = check_target(opts, 1) or int(rng.integers(1, 4))
    parts = _split_scalar(-env.residual, n, rng)
    return SolverPlan([call("rotate", p) for p in parts], strategy, opts.seed)


def solve_mr3d(env: MentalRotation3D, opts: SolverOptions) -> SolverPlan:
    strategy = opts.strategy or "solve_only"
    if strategy == "solve_only":
        yaw, pitch, roll = zyx_angles(env.current.T @ env.target)
        n = check_target(opts, 1)
        if n is None or n == 1:
            return SolverPlan([call("rotate", yaw, pitch, roll)], strategy, opts.seed)
        # one axis per step keeps each rotation exact; beyond three, split the yaw
        rng = solver_rng(env, opts, strategy)
        if n == 2:
            return SolverPlan([call("rotate", yaw, pitch, 0.0), call("rotate", 0.0, 0.0, roll)],
                              strategy, opts.seed)
        actions = [call("rotate", yp, 0.0, 0.0) for yp in _split_scalar(yaw, n - 2, rng)]
        actions += [call("rotate", 0.0, pitch, 0.0), call("rotate", 0.0, 0.0, roll)]
        return SolverPlan(actions, strategy, opts.seed)
    if strategy == "rotate_then_solve":
        target = check_target(opts, 15)
        yaw, pitch, roll = zyx_angles(env.current.T @ env.target)
        actions = []
        # a full turn about an axis in four quarter steps is the identity, then the exact fix
        for k, angle in enumerate((yaw, pitch, roll)):
            quarter = [0.0, 0.0, 0.0]
            quarter[k] = 90.0
            actions += [call("rotate", *quarter)] * 4
            fix = [0.0, 0.0, 0.0]
            fix[k] = angle
            actions.append(call("rotate", *fix))
        if target is not None and target > 15:
            rng = solver_rng(env, opts, strategy)
            extra = target - 15
            pad = [call("rotate", 0.0, 0.0, 0.0)] if extra % 2 else []
            for _ in range(extra // 2):
                d = [0.0, 0.0, 0.0]
                d[int(rng.integers(3))] = float(rng.uniform(10.0, 90.0))
                pad += [call("rotate", *d), call("rotate", *(-v for v in d))]
            actions = pad + actions
        return SolverPlan(actions, strategy, opts.seed)
    raise SolverError(f"unknown strategy {strategy!r}")


def _increments(total: float, cap: float) -> list[float]:
    n = max(1, math.ceil(abs(total) / cap - 1e-9))
    return [total / n] * n


def solve_colorization(env: Colorization, opts: SolverOptions) -> SolverPlan:
    """Bounded hue and saturation increments toward the original colours."""
    strategy = opts.strategy or "incremental"
    if strategy != "incremental":
        raise SolverError(f"unknown strategy {strategy!r}")
    rng = solver_rng(env, opts, strategy)
    ar = env.params["ar"]
    hue = [] if abs(env.hue) <= ar else _increments(-env.hue, HUE_STEP)
    sat = [] if abs(env.sat) <= ar else _increments(-env.sat, SAT_STEP)
    minimum = len(hue) + len(sat)
    target = check_target(opts, minimum)
    extra = 0 if target is None else target - minimum
    pairs: list[tuple[str, float]] = []
    if extra and minimum == 0:
        # already within tolerance: cancelling pairs, plus one zero rotation when odd
        for _ in range(extra // 2):
            d = float(rng.uniform(5.0, HUE_STEP))
            pairs += [("rotate", d), ("rotate", -d)]
        if extra % 2:
            pairs.append(("rotate", 0.0))
        return SolverPlan([call(n, v) for n, v in pairs], strategy, opts.seed)
    # otherwise split existing increments into more, smaller pieces
    hue_n, sat_n = len(hue), len(sat)
    for _ in range(extra):
        if hue_n and (not sat_n or rng.integers(2)):
            hue_n += 1
        else:
            sat_n += 1
    # equal pieces never exceed the caps since there are at least as many as before
    seq = [("rotate", -env.hue / hue_n)] * hue_n if hue_n else []
    seq += [("saturate", -env.sat / sat_n)] * sat_n if sat_n else []
    return SolverPlan([call(n, v) for n, v in seq], strategy, opts.seed)
