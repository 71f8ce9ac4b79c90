"""HTTP service exposing tasks, live episodes and the solvers."""

from __future__ import annotations

import base64
import itertools
import threading
from typing import Any, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .core import ConfigError, Episode, EpisodeConfig, EpisodeFinished, Observation, make_env
from .harness import env_catalog
from .solvers import SolverError, SolverOptions, solve, verify_plan


class EpisodeRequest(BaseModel):
    env_id: str
    difficulty: Literal["easy", "hard"] | None = "easy"
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    max_steps: int | None = Field(default=None, ge=1)
    feedback_enabled: bool = True
    text_mode: bool = False
    goal_observation: bool = False
    history_window: int | None = Field(default=None, ge=1)

    def config(self, assets: str | None) -> EpisodeConfig:
        return EpisodeConfig(self.env_id, self.difficulty, dict(self.params), self.seed, self.max_steps,
                             self.feedback_enabled, self.text_mode, self.goal_observation,
                             self.history_window, assets)


class SolveRequest(EpisodeRequest):
    strategy: str | None = None
    target_steps: int | None = Field(default=None, ge=0)
    verify: bool = True


class ObservationView(BaseModel):
    image_png_b64: str | None = None
    text_view: str | None = None
    feedback: str
    steps_remaining: int


class EpisodeView(BaseModel):
    episode_id: int
    instruction: str
    observation: ObservationView
    goal: ObservationView | None = None


class StepRequest(BaseModel):
    raw: str


class StepView(BaseModel):
    observation: ObservationView
    reward: int
    terminated: bool
    truncated: bool
    outcome: str
    env_feedback: str


class TurnView(BaseModel):
    raw_action: str
    outcome: str
    feedback: str


class TrajectoryView(BaseModel):
    env_id: str
    seed: int
    initial_state_hash: str
    reward: int
    terminated: bool
    truncated: bool
    turns: list[TurnView]


class PlanView(BaseModel):
    strategy: str
    actions: list[str]
    steps: int
    verified: bool | None


def observation_view(obs: Observation) -> ObservationView:
    if obs.is_text:
        return ObservationView(text_view=obs.text_view, feedback=obs.feedback, steps_remaining=obs.steps_remaining)
    return ObservationView(image_png_b64=base64.b64encode(obs.png()).decode("ascii"),
                           feedback=obs.feedback, steps_remaining=obs.steps_remaining)


def create_app(assets: str | None = None) -> FastAPI:
    app = FastAPI(title="callgym")
    episodes: dict[int, Episode] = {}
    ids = itertools.count(1)
    lock = threading.Lock()

    def get(eid: int) -> Episode:
        with lock:
            ep = episodes.get(eid)
        if ep is None:
            raise HTTPException(404, f"no episode {eid}")
        return ep

    @app.get("/envs")
    def list_envs() -> list[dict]:
        return env_catalog(assets)

    @app.post("/episodes", response_model=EpisodeView)
    def create_episode(req: EpisodeRequest):
        ep = Episode(req.config(assets))
        try:
            instruction, first = ep.reset()
        except ConfigError as e:
            raise HTTPException(422, str(e)) from e
        with lock:
            eid = next(ids)
            episodes[eid] = ep
        goal = ep.trajectory.goal
        return EpisodeView(episode_id=eid, instruction=instruction, observation=observation_view(first),
                           goal=observation_view(goal) if goal is not None else None)

    @app.post("/episodes/{eid}/step", response_model=StepView)
    def step(eid: int, req: StepRequest):
        ep = get(eid)
        try:
            out = ep.step(req.raw)
        except EpisodeFinished as e:
            raise HTTPException(409, str(e)) from e
        return StepView(observation=observation_view(out.observation), reward=out.reward,
                        terminated=out.terminated, truncated=out.truncated,
                        outcome=out.info["outcome"], env_feedback=out.info["env_feedback"])

    @app.get("/episodes/{eid}/trajectory", response_model=TrajectoryView)
    def trajectory(eid: int):
        t = get(eid).trajectory
        return TrajectoryView(env_id=t.env_id, seed=t.seed, initial_state_hash=t.initial_state_hash,
                              reward=t.reward, terminated=t.terminated, truncated=t.truncated,
                              turns=[TurnView(raw_action=r.raw_action, outcome=r.outcome, feedback=r.feedback)
                                     for r in t.turns])

    @app.delete("/episodes/{eid}")
    def close_episode(eid: int) -> dict:
        get(eid)
        with lock:
            episodes.pop(eid, None)
        return {"closed": eid}

    @app.post("/solve", response_model=PlanView)
    def solve_task(req: SolveRequest):
        cfg = req.config(assets)
        try:
            env = make_env(cfg)
            plan = solve(env, SolverOptions(req.strategy, req.target_steps, req.seed))
        except (ConfigError, SolverError) as e:
            raise HTTPException(422, str(e)) from e
        verified = verify_plan(env, plan, cfg.step_budget) if req.verify else None
        return PlanView(strategy=plan.strategy, actions=plan.texts(), steps=plan.steps, verified=verified)

    return app
