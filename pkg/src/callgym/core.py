"""Episode lifecycle and the generic step function shared by every task."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, ClassVar

from .actions import STOP, ActionCall, ParseError, PayloadSchema, describe, extract_action, validate
from .render import Canvas, CharGrid, ascii_frame, encode_png

INVALID_FORMAT = "invalid format"
INVALID_ACTION = "invalid action"
EXECUTED = "executed"

DEFAULT_MAX_STEPS = {"easy": 20, "hard": 30}


class ConfigError(ValueError):
    """Operator mistake in an episode configuration (never agent feedback)."""


class EpisodeFinished(RuntimeError):
    """Raised when stepping an episode that already terminated or truncated."""


# -- parameters -------------------------------------------------------------------


@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # int | float | bool | str | pair | interval
    lo: float | None = None
    hi: float | None = None
    doc: str = ""
    choices: tuple = ()

    def coerce(self, value):
        bad = ConfigError(f"parameter out of range: {self.name}={value!r}")
        try:
            if self.kind == "int":
                if isinstance(value, bool) or float(value) != int(float(value)):
                    raise bad
                value = int(float(value))
            elif self.kind == "float":
                value = float(value)
                if not math.isfinite(value):
                    raise bad
            elif self.kind == "bool":
                if isinstance(value, str):
                    if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                        raise bad
                    value = value.lower() in ("1", "true", "yes")
                else:
                    value = bool(value)
            elif self.kind == "str":
                value = str(value)
                if self.choices and value not in self.choices:
                    raise bad
                return value
            elif self.kind in ("pair", "interval"):
                if isinstance(value, str):
                    value = [v for v in value.replace("(", "").replace(")", "").split(",") if v.strip()]
                value = tuple(value)
                if len(value) != 2:
                    raise bad
                cast = int if self.kind == "pair" else float
                value = tuple(cast(float(v)) for v in value)
                if self.kind == "pair" and any(float(v) != int(v) for v in value):
                    raise bad
                if self.kind == "interval" and not value[0] <= value[1]:
                    raise bad
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise bad from None
        items = value if isinstance(value, tuple) else (value,)
        for v in items:
            if isinstance(v, bool):
                continue
            if (self.lo is not None and v < self.lo) or (self.hi is not None and v > self.hi):
                raise bad
        return value


# -- observations and records -------------------------------------------------------


class Observation:
    """What the agent sees after a turn.

    Built eagerly from a canvas or text, or deferred from an environment
    snapshot so that episodes nobody looks at never pay for rendering.
    """

    __slots__ = ("_image", "_text", "_source", "_text_mode", "feedback", "steps_remaining")

    def __init__(self, image: Canvas | None = None, text_view: str | None = None,
                 feedback: str = "", steps_remaining: int = 0):
        if image is None and text_view is None:
            raise ValueError("observation needs an image or a text view")
        self._image, self._text, self._source, self._text_mode = image, text_view, None, text_view is not None
        self.feedback, self.steps_remaining = feedback, steps_remaining

    @classmethod
    def deferred(cls, env: "Environment", text_mode: bool, feedback: str, steps_remaining: int) -> "Observation":
        obs = cls.__new__(cls)
        obs._image = obs._text = None
        obs._source, obs._text_mode = env.clone(), text_mode
        obs.feedback, obs.steps_remaining = feedback, steps_remaining
        return obs

    def _materialize(self) -> None:
        if self._source is None:
            return
        if self._text_mode:
            self._text = ascii_frame(self._source.ascii())
        else:
            self._image = self._source.render()
        self._source = None

    @property
    def image(self) -> Canvas | None:
        self._materialize()
        return self._image

    @property
    def text_view(self) -> str | None:
        self._materialize()
        return self._text

    @property
    def is_text(self) -> bool:
        return self._text_mode

    def png(self) -> bytes | None:
        return encode_png(self.image) if self.image is not None else None

    def __repr__(self) -> str:
        kind = "text" if self._text_mode else "image"
        return f"Observation({kind}, feedback={self.feedback!r}, steps_remaining={self.steps_remaining})"


@dataclass
class StepOutcome:
    observation: Observation
    reward: int
    terminated: bool
    truncated: bool
    info: dict = field(default_factory=dict)


@dataclass
class TurnRecord:
    observation: Observation
    raw_action: str
    parsed: ActionCall | None
    feedback: str
    outcome: str  # "invalid_format" | "invalid_action" | "applied"


@dataclass
class EpisodeConfig:
    env_id: str
    difficulty: str | None = "easy"
    params: dict = field(default_factory=dict)
    seed: int = 0
    max_steps: int | None = None
    feedback_enabled: bool = True
    text_mode: bool = False
    goal_observation: bool = False
    history_window: int | None = None  # None = unbounded
    assets: str | None = None

    _FIELDS: ClassVar[tuple[str, ...]] = (
        "env_id", "difficulty", "seed", "max_steps", "feedback_enabled",
        "text_mode", "goal_observation", "history_window", "assets",
    )

    @property
    def step_budget(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return DEFAULT_MAX_STEPS.get(self.difficulty or "easy", 20)

    def to_json(self) -> dict:
        """Flat key-value form: config fields plus parameter overrides."""
        out: dict[str, Any] = {k: getattr(self, k) for k in self._FIELDS}
        if out["history_window"] is None:
            out["history_window"] = "inf"
        for k, v in self.params.items():
            if k in out:
                raise ConfigError(f"parameter name collides with config field: {k}")
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_json(cls, doc: dict) -> "EpisodeConfig":
        doc = dict(doc)
        kw = {k: doc.pop(k) for k in cls._FIELDS if k in doc}
        if kw.get("history_window") in ("inf", "unbounded"):
            kw["history_window"] = None
        return cls(params=doc, **kw)


def build_history(turns, window: int | None) -> list[TurnRecord]:
    """Most recent ``window`` turn records; ``None`` keeps all of them."""
    if hasattr(turns, "turns"):
        turns = turns.turns
    if window is None or window == math.inf:
        return list(turns)
    if int(window) != window or window < 1:
        raise ValueError(f"history window must be a positive integer, got {window!r}")
    return list(turns[-int(window):])


@dataclass
class Trajectory:
    instruction: str
    env_id: str
    seed: int
    params: dict
    config: EpisodeConfig
    initial_state_hash: str
    goal: Observation | None = None
    turns: list[TurnRecord] = field(default_factory=list)
    reward: int = 0
    terminated: bool = False
    truncated: bool = False
    final_observation: Observation | None = None
    meta: dict = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.reward == 1


# -- environments -----------------------------------------------------------------------


class Environment:
    """Base class for a task.  Subclasses own their state and transitions."""

    env_id: ClassVar[str] = ""
    title: ClassVar[str] = ""
    text_capable: ClassVar[bool] = False
    uses_assets: ClassVar[bool] = False
    params_spec: ClassVar[tuple[Param, ...]] = ()
    presets: ClassVar[dict[str, dict]] = {}

    def __init__(self, params: dict, seed: int, assets: str | None = None):
        self.params = params
        self.seed = seed
        self.assets = assets

    # subclasses override ---------------------------------------------------
    def schemas(self) -> list[PayloadSchema]:
        raise NotImplementedError

    def describe_task(self) -> str:
        raise NotImplementedError

    def apply(self, call: ActionCall) -> str:
        raise NotImplementedError

    def success(self) -> bool:
        raise NotImplementedError

    def render(self) -> Canvas:
        raise NotImplementedError

    def ascii(self) -> CharGrid:
        raise NotImplementedError(f"{self.env_id} has no text view")

    def solved_copy(self) -> "Environment | None":
        """A copy of this environment in its solved configuration."""
        return None

    def state_dict(self) -> dict:
        raise NotImplementedError

    # shared ----------------------------------------------------------------
    @classmethod
    def resolve_params(cls, difficulty: str | None, overrides: dict) -> dict:
        if difficulty is not None and difficulty not in cls.presets:
            raise ConfigError(f"unknown difficulty {difficulty!r}")
        base = dict(cls.presets.get(difficulty or "easy", {}))
        specs = {p.name: p for p in cls.params_spec}
        for k, v in overrides.items():
            if k not in specs:
                raise ConfigError(f"unknown parameter for {cls.env_id}: {k}")
            base[k] = v
        out = {}
        for name, spec in specs.items():
            if name not in base:
                raise ConfigError(f"missing parameter {name}")
            out[name] = spec.coerce(base[name])
        cls.check_params(out)
        return out

    @classmethod
    def check_params(cls, params: dict) -> None:
        """Cross-parameter constraints; raise ConfigError."""

    def schema_map(self) -> dict[str, PayloadSchema]:
        return {s.name: s for s in [*self.schemas(), STOP]}

    def state_hash(self) -> str:
        doc = {"env_id": self.env_id, "state": self.state_dict()}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def clone(self) -> "Environment":
        return copy.deepcopy(self)


def _jsonable(o):
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(type(o))


REGISTRY: dict[str, type[Environment]] = {}


def register(cls: type[Environment]) -> type[Environment]:
    REGISTRY[cls.env_id] = cls
    return cls


def env_class(env_id: str) -> type[Environment]:
    from . import envs  # noqa: F401  (populates the registry)

    try:
        return REGISTRY[env_id]
    except KeyError:
        raise ConfigError(f"unknown environment: {env_id}") from None


def env_ids() -> list[str]:
    from . import envs  # noqa: F401

    return list(REGISTRY)


def make_env(config: EpisodeConfig) -> Environment:
    cls = env_class(config.env_id)
    params = cls.resolve_params(config.difficulty, config.params)
    if config.text_mode and not cls.text_capable:
        raise ConfigError(f"{config.env_id} has no text mode")
    if not 0 <= int(config.seed) < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if config.max_steps is not None and config.max_steps < 1:
        raise ConfigError("max_steps must be >= 1")
    return cls(params, int(config.seed), assets=config.assets)


ACTION_FORMAT_HELP = (
    "Reply with exactly one action per turn. Write it either as a Python-style tuple, "
    "e.g. ('move', (2,)) or ('stop',), or as a call, e.g. move(2) or stop(). "
    "If your reply contains several actions, only the last one is used. "
    "Numbers may be negative or decimal; use integers where an integer is required."
)


def assemble_instruction(env: Environment, max_steps: int, text_mode: bool) -> str:
    view = "an ASCII text rendering" if text_mode else "an image"
    return (
        f"Task: {env.title}\n\n{env.describe_task()}\n\n"
        f"Available actions:\n{describe([*env.schemas(), STOP])}\n\n"
        f"{ACTION_FORMAT_HELP}\n\n"
        f"Each turn you receive {view} of the current state and feedback on your previous action, "
        f"including the number of remaining steps. You have at most {max_steps} steps. "
        "The episode is scored only when you call stop()."
    )


def observe(env: Environment, text_mode: bool, feedback: str, steps_remaining: int) -> Observation:
    """Snapshot ``env``; pixels or text are produced on first access."""
    return Observation.deferred(env, text_mode, feedback, steps_remaining)


def compose_feedback(env_feedback: str, steps_remaining: int, enabled: bool) -> str:
    tail = f"Steps remaining: {steps_remaining}"
    if not enabled or not env_feedback:
        return tail
    return f"{env_feedback}\n{tail}"


class Episode:
    """Single-owner state machine for one episode."""

    def __init__(self, config: EpisodeConfig):
        self.config = config
        self.env: Environment | None = None
        self.trajectory: Trajectory | None = None
        self.current: Observation | None = None

    @property
    def finished(self) -> bool:
        t = self.trajectory
        return t is not None and (t.terminated or t.truncated)

    @property
    def steps_remaining(self) -> int:
        return self.config.step_budget - len(self.trajectory.turns)

    def reset(self, env: Environment | None = None) -> tuple[str, Observation]:
        """Generate the task from the seed (or adopt a copy of ``env``)."""
        cfg = self.config
        self.env = make_env(cfg) if env is None else env.clone()
        instruction = assemble_instruction(self.env, cfg.step_budget, cfg.text_mode)
        goal = self.goal_observation() if cfg.goal_observation else None
        if goal is not None:
            if goal.is_text:
                instruction += "\n\nGoal state (what the solved task looks like):\n" + goal.text_view
            else:
                instruction += "\n\nAn image of the solved goal state is attached."
        first = observe(self.env, cfg.text_mode, compose_feedback("", cfg.step_budget, cfg.feedback_enabled), cfg.step_budget)
        self.current = first
        self.trajectory = Trajectory(
            instruction=instruction,
            env_id=cfg.env_id,
            seed=int(cfg.seed),
            params=dict(self.env.params),
            config=cfg,
            initial_state_hash=self.env.state_hash(),
            goal=goal,
        )
        return instruction, first

    def goal_observation(self) -> Observation | None:
        solved = self.env.solved_copy()
        if solved is None:
            return None
        cfg = self.config
        return observe(solved, cfg.text_mode, "", cfg.step_budget)

    def step(self, raw_action: str) -> StepOutcome:
        if self.trajectory is None:
            raise EpisodeFinished("episode not reset")
        if self.finished:
            raise EpisodeFinished("episode already finished")
        cfg, env = self.config, self.env
        shown = self.current
        reward, terminated = 0, False
        parsed = extract_action(raw_action)
        if isinstance(parsed, ParseError):
            outcome, env_fb, call = "invalid_format", INVALID_FORMAT, None
        else:
            call = parsed
            verdict = validate(call, env.schema_map())
            if verdict is not True:
                outcome, env_fb = "invalid_action", f"{INVALID_ACTION}: {verdict.reason}"
            else:
                outcome = "applied"
                if call.name == "stop":
                    terminated = True
                    env_fb = EXECUTED
                    reward = 1 if env.success() else 0
                else:
                    env_fb = env.apply(call)
        remaining = cfg.step_budget - len(self.trajectory.turns) - 1
        truncated = not terminated and remaining <= 0
        feedback = compose_feedback(env_fb, remaining, cfg.feedback_enabled)
        obs = observe(env, cfg.text_mode, feedback, remaining)
        t = self.trajectory
        t.turns.append(TurnRecord(shown, raw_action, call, feedback, outcome))
        t.reward, t.terminated, t.truncated = reward, terminated, truncated
        if terminated or truncated:
            t.final_observation = obs
        self.current = obs
        return StepOutcome(obs, reward, terminated, truncated, {"outcome": outcome, "env_feedback": env_fb})


def start(config: EpisodeConfig) -> Episode:
    ep = Episode(config)
    ep.reset()
    return ep


def reset(config: EpisodeConfig) -> tuple[Episode, str, Observation]:
    ep = Episode(config)
    instruction, first = ep.reset()
    return ep, instruction, first


def goal_observation(episode: Episode) -> Observation | None:
    return episode.goal_observation()
