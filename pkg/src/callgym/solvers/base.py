"""Plan containers, padding helpers and replay verification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..actions import ActionCall, canonical_repr
from ..core import Environment, Episode, EpisodeConfig
from ..rng import stream


class SolverError(ValueError):
    """Raised when a plan cannot be produced under the requested options."""


@dataclass(frozen=True)
class SolverOptions:
    strategy: str | None = None
    target_steps: int | None = None
    seed: int = 0


@dataclass
class SolverPlan:
    actions: list[ActionCall]
    strategy: str
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.actions or self.actions[-1].name != "stop":
            self.actions = [*self.actions, ActionCall("stop")]

    @property
    def steps(self) -> int:
        """Number of non-stop actions."""
        return len(self.actions) - 1

    def texts(self) -> list[str]:
        return [canonical_repr(a) for a in self.actions]


def call(name: str, *args) -> ActionCall:
    return ActionCall(name, args)


def solver_rng(env: Environment, opts: SolverOptions, strategy: str) -> np.random.Generator:
    return stream(int(opts.seed), "solver", env.env_id, strategy, env.state_hash())


def check_target(opts: SolverOptions, minimum: int) -> int | None:
    if opts.target_steps is None:
        return None
    if opts.target_steps < minimum:
        raise SolverError(f"target_steps={opts.target_steps} is below the minimal plan length {minimum}")
    return opts.target_steps


def insert_pairs(base: list, slots: list[int], pair_at, count: int, rng, single=None) -> list:
    """Insert ``count`` reversible pairs into ``base``.

    ``slots`` lists the gap indices (0..len(base)) where a pair may go and
    ``pair_at(k)`` returns the candidate pairs for gap k.  ``single`` is an
    optional (gap, action) for one extra net-zero action.
    """
    extra: dict[int, list] = {}
    if single is not None:
        extra[single[0]] = [single[1]]
    for _ in range(count):
        k = slots[int(rng.integers(len(slots)))]
        options = pair_at(k)
        a, b = options[int(rng.integers(len(options)))]
        extra.setdefault(k, []).extend([a, b])
    out = []
    for k in range(len(base) + 1):
        out.extend(extra.get(k, []))
        if k < len(base):
            out.append(base[k])
    return out


def verify_plan(env: Environment, plan: SolverPlan | list, max_steps: int | None = None) -> bool:
    """Replay ``plan`` through the step engine from a copy of ``env``; True on reward 1."""
    actions = plan.actions if isinstance(plan, SolverPlan) else list(plan)
    texts = [a if isinstance(a, str) else canonical_repr(a) for a in actions]
    budget = max_steps if max_steps is not None else max(1, len(texts))
    cfg = EpisodeConfig(env.env_id, difficulty=None, params=dict(env.params), seed=env.seed,
                        max_steps=budget, assets=env.assets)
    ep = Episode(cfg)
    ep.reset(env=env)
    out = None
    for text in texts:
        if ep.finished:
            return False
        out = ep.step(text)
    return out is not None and out.terminated and out.reward == 1
