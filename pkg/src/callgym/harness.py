"""Episode runner, agents, batch evaluation, SFT export and the line-delimited wire protocol."""

from __future__ import annotations

import base64
import json
import logging
import os
import selectors
import shlex
import socket
import subprocess
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .actions import STOP, Arg, PayloadSchema, canonical_repr, make_call
from .core import (
    ConfigError, Episode, EpisodeConfig, Observation, Trajectory, TurnRecord, build_history, env_class,
    env_ids, make_env,
)
from .rng import stream
from .solvers import SolverOptions, solve

log = logging.getLogger(__name__)

DEFAULT_EPISODES = 70
AGENT_TIMEOUT_S = 120.0
RANDOM_STOP_P = 0.05


def env_catalog(assets: str | None = None) -> list[dict]:
    """Ids, parameters, presets and action signatures of every registered task."""
    out = []
    for env_id in env_ids():
        cls = env_class(env_id)
        sample = make_env(EpisodeConfig(env_id, "easy", seed=0, assets=assets))
        out.append({
            "env_id": env_id,
            "title": cls.title,
            "text_mode": cls.text_capable,
            "params": [{"name": p.name, "kind": p.kind, "lo": p.lo, "hi": p.hi, "doc": p.doc,
                        **({"choices": list(p.choices)} if p.choices else {})} for p in cls.params_spec],
            "presets": {d: {k: list(v) if isinstance(v, tuple) else v for k, v in pre.items()}
                        for d, pre in cls.presets.items()},
            "actions": [s.signature for s in sample.schemas()] + [STOP.signature],
        })
    return out


# -- agents ---------------------------------------------------------------------------


class Agent:
    """Receives the instruction, a window of past turns and the current observation; returns raw text."""

    def begin(self, episode: Episode) -> None:
        pass

    def act(self, instruction: str, history: list[TurnRecord], observation: Observation) -> str:
        raise NotImplementedError

    def end(self, trajectory: Trajectory) -> None:
        pass


class SolverAgent(Agent):
    """Plays the oracle plan for the episode's initial state."""

    def __init__(self, strategy: str | None = None, target_steps: int | None = None):
        self.strategy, self.target_steps = strategy, target_steps
        self._queue: list[str] = []
        self.plan = None

    def begin(self, episode):
        opts = SolverOptions(self.strategy, self.target_steps, episode.config.seed)
        self.plan = solve(episode.env, opts)
        self._queue = self.plan.texts()

    def act(self, instruction, history, observation):
        return self._queue.pop(0) if self._queue else "stop()"


class ScriptedAgent(Agent):
    """Replays a fixed list of raw action strings, then stops."""

    def __init__(self, actions: Iterable[str]):
        self.actions = list(actions)
        self._k = 0

    def begin(self, episode):
        self._k = 0

    def act(self, instruction, history, observation):
        if self._k >= len(self.actions):
            return "stop()"
        self._k += 1
        return self.actions[self._k - 1]


def random_payload(schema: PayloadSchema, rng) -> list:
    def one(a: Arg):
        if a.kind == "real":
            return float(rng.uniform(a.lo, a.hi))
        if a.kind == "pair":
            lo2 = a.lo if a.lo2 is None else a.lo2
            hi2 = a.hi if a.hi2 is None else a.hi2
            return (int(rng.integers(a.lo, a.hi + 1)), int(rng.integers(lo2, hi2 + 1)))
        return int(rng.integers(a.lo, a.hi + 1))

    return [one(a) for a in schema.args]


class RandomAgent(Agent):
    """Uniformly random schema-valid actions; stops with a fixed probability each turn."""

    def __init__(self, stop_p: float = RANDOM_STOP_P):
        self.stop_p = stop_p
        self._rng = None
        self._schemas: list[PayloadSchema] = []

    def begin(self, episode):
        self._rng = stream(episode.config.seed, "agent", "random")
        self._schemas = [s for s in episode.env.schemas() if s.name != STOP.name]

    def act(self, instruction, history, observation):
        rng = self._rng
        if not self._schemas or rng.random() < self.stop_p:
            return "stop()"
        schema = self._schemas[int(rng.integers(len(self._schemas)))]
        return canonical_repr(make_call(schema.name, *random_payload(schema, rng)))


# -- wire protocol ----------------------------------------------------------------------


class TransportError(RuntimeError):
    """The agent connection failed; the episode ends truncated."""


class Channel:
    """Line-delimited UTF-8 JSON over a byte stream, with read deadlines."""

    def __init__(self):
        self._buf = b""

    def _send_bytes(self, data: bytes) -> None:
        raise NotImplementedError

    def _recv_bytes(self, timeout: float) -> bytes | None:
        """Up to a chunk of bytes, b"" on EOF, None on timeout."""
        raise NotImplementedError

    def close(self) -> None:
        pass

    def send(self, msg: dict) -> None:
        try:
            self._send_bytes((json.dumps(msg, separators=(",", ":")) + "\n").encode())
        except OSError as e:
            raise TransportError(f"send failed: {e}") from e

    def recv_line(self, timeout: float) -> str | None:
        """One line without its newline, or None when the deadline passes."""
        deadline = time.monotonic() + timeout
        while b"\n" not in self._buf:
            left = deadline - time.monotonic()
            if left <= 0:
                return None
            chunk = self._recv_bytes(left)
            if chunk is None:
                return None
            if chunk == b"":
                raise TransportError("connection closed by agent")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8", errors="replace").rstrip("\r")


class SocketChannel(Channel):
    def __init__(self, sock: socket.socket):
        super().__init__()
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0) -> "SocketChannel":
        try:
            return cls(socket.create_connection((host, port), timeout=timeout))
        except OSError as e:
            raise TransportError(f"cannot connect to {host}:{port}: {e}") from e

    def _send_bytes(self, data):
        self.sock.sendall(data)

    def _recv_bytes(self, timeout):
        self.sock.settimeout(timeout)
        try:
            return self.sock.recv(65536)
        except socket.timeout:
            return None
        except OSError as e:
            raise TransportError(f"receive failed: {e}") from e

    def close(self):
        try:
            self.sock.close()
        except OSError:  # pragma: no cover
            pass


class ProcessChannel(Channel):
    """Talks to a child process over its standard streams."""

    def __init__(self, argv: list[str]):
        super().__init__()
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise TransportError(f"cannot start agent {argv!r}: {e}") from e
        self._sel = selectors.DefaultSelector()
        self._sel.register(self.proc.stdout, selectors.EVENT_READ)

    def _send_bytes(self, data):
        self.proc.stdin.write(data)
        self.proc.stdin.flush()

    def _recv_bytes(self, timeout):
        if not self._sel.select(timeout):
            return None
        return os.read(self.proc.stdout.fileno(), 65536)

    def close(self):
        self._sel.close()
        for stream_ in (self.proc.stdin, self.proc.stdout):
            try:
                stream_.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover
            self.proc.kill()
            self.proc.wait()


def view_fields(obs: Observation, prefix: str = "") -> dict:
    if obs.is_text:
        return {f"{prefix}text_view": obs.text_view}
    return {f"{prefix}image_png_b64": base64.b64encode(obs.png()).decode("ascii")}


def turn_message(episode: Episode, history: list[TurnRecord], first: bool) -> dict:
    obs = episode.current
    msg: dict = {"type": "turn"}
    if first:
        msg["instruction"] = episode.trajectory.instruction
        goal = episode.trajectory.goal
        if goal is not None:
            msg.update(view_fields(goal, "goal_"))
    msg.update(view_fields(obs))
    msg["feedback"] = obs.feedback
    msg["steps_remaining"] = obs.steps_remaining
    msg["history"] = [
        {"action": t.raw_action, "feedback": t.feedback, **view_fields(t.observation)} for t in history
    ]
    return msg


def parse_reply(line: str) -> str:
    """Agent reply to raw action text; anything that is not a well-formed action message passes through."""
    try:
        doc = json.loads(line)
    except ValueError:
        return line
    if isinstance(doc, dict) and doc.get("type") == "action" and isinstance(doc.get("raw"), str):
        return doc["raw"]
    return line


class ExternalAgent(Agent):
    """An agent on the other end of a channel, one connection per episode.

    ``opener`` makes a fresh channel for each episode.  A reply that misses the
    deadline becomes an empty action, which the step engine rejects as
    invalid format.
    """

    def __init__(self, opener: Callable[[], Channel], timeout: float = AGENT_TIMEOUT_S):
        self.opener, self.timeout = opener, timeout
        self.channel: Channel | None = None
        self._episode: Episode | None = None
        self._first = True

    def begin(self, episode):
        self._episode, self._first = episode, True
        self.channel = self.opener()

    def act(self, instruction, history, observation):
        self.channel.send(turn_message(self._episode, history, self._first))
        self._first = False
        line = self.channel.recv_line(self.timeout)
        if line is None:
            log.warning("agent timed out after %.0f s", self.timeout)
            return ""
        return parse_reply(line)

    def end(self, trajectory):
        if self.channel is None:
            return
        try:
            self.channel.send({"type": "done", "reward": trajectory.reward,
                               "terminated": trajectory.terminated, "truncated": trajectory.truncated})
        except TransportError:
            pass
        finally:
            self.channel.close()
            self.channel = None


def parse_address(addr: str) -> Callable[[], Channel]:
    """``stdio:<command line>`` or ``tcp:<host>:<port>`` to a channel factory."""
    kind, _, rest = addr.partition(":")
    if kind == "stdio" and rest:
        argv = shlex.split(rest)
        return lambda: ProcessChannel(argv)
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if host and port.isdigit():
            return lambda: SocketChannel.connect(host, int(port))
    raise ConfigError(f"bad agent address {addr!r}; use stdio:<command> or tcp:<host>:<port>")


def make_agent(spec: str) -> Agent:
    """``solver[:strategy]``, ``random``, ``scripted:a;b;...`` (or ``scripted:@file``), ``external:<addr>``."""
    kind, _, rest = spec.partition(":")
    if kind == "solver":
        return SolverAgent(rest or None)
    if kind == "random" and not rest:
        return RandomAgent()
    if kind == "scripted":
        if rest.startswith("@"):
            lines = Path(rest[1:]).read_text().splitlines()
        else:
            lines = rest.split(";")
        # a bare name such as "stop" means the no-argument call
        return ScriptedAgent([f"{s}()" if s.isidentifier() else s for s in (x.strip() for x in lines) if s])
    if kind == "external":
        return ExternalAgent(parse_address(rest))
    raise ConfigError(f"unknown agent {spec!r}")


# -- running episodes -------------------------------------------------------------------


def run_episode(config: EpisodeConfig, agent: Agent) -> Trajectory:
    ep = Episode(config)
    instruction, _ = ep.reset()
    traj = ep.trajectory
    try:
        agent.begin(ep)
        while not ep.finished:
            history = build_history(traj, config.history_window)
            raw = agent.act(instruction, history, ep.current)
            ep.step(raw if isinstance(raw, str) else str(raw))
    except TransportError as e:
        log.warning("episode %s/%s truncated: %s", config.env_id, config.seed, e)
        traj.truncated = True
        traj.meta["transport_error"] = str(e)
    finally:
        agent.end(traj)
    plan = getattr(agent, "plan", None)
    if plan is not None:
        traj.meta["strategy"] = plan.strategy
    return traj


def make_configs(env_id: str, difficulty: str | None = "easy", params: dict | None = None, seed: int = 0,
                 episodes: int = DEFAULT_EPISODES, **toggles) -> list[EpisodeConfig]:
    """Episode configs with seeds ``seed + index``."""
    return [EpisodeConfig(env_id, difficulty, dict(params or {}), seed + k, **toggles) for k in range(episodes)]


@dataclass(frozen=True)
class EpisodeResult:
    env_id: str
    difficulty: str | None
    seed: int
    reward: int
    steps: int
    terminated: bool
    truncated: bool
    initial_state_hash: str


@dataclass
class TaskSummary:
    episodes: int
    successes: int
    success_rate: float
    mean_steps: float | None  # over successful episodes
    step_histogram: dict[int, int]


@dataclass
class EvalSummary:
    tasks: dict[str, TaskSummary]
    results: list[EpisodeResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "tasks": {k: {**asdict(v), "step_histogram": {str(s): n for s, n in v.step_histogram.items()}}
                      for k, v in self.tasks.items()},
            "episodes": [asdict(r) for r in self.results],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def table(self) -> str:
        rows = [f"{'task':<34} {'episodes':>8} {'success':>8} {'mean steps':>10}"]
        for key, t in self.tasks.items():
            mean = "-" if t.mean_steps is None else f"{t.mean_steps:.2f}"
            rows.append(f"{key:<34} {t.episodes:>8} {t.success_rate:>8.2f} {mean:>10}")
        return "\n".join(rows)


def task_key(env_id: str, difficulty: str | None) -> str:
    return f"{env_id}/{difficulty or 'custom'}"


def summarize(results: Iterable[EpisodeResult]) -> EvalSummary:
    """Aggregate per task; input order does not matter."""
    results = sorted(results, key=lambda r: (r.env_id, str(r.difficulty), r.seed))
    groups: dict[str, list[EpisodeResult]] = {}
    for r in results:
        groups.setdefault(task_key(r.env_id, r.difficulty), []).append(r)
    tasks = {}
    for key in sorted(groups):
        rs = groups[key]
        wins = [r for r in rs if r.reward == 1]
        tasks[key] = TaskSummary(
            episodes=len(rs),
            successes=len(wins),
            success_rate=len(wins) / len(rs),
            mean_steps=(sum(r.steps for r in wins) / len(wins)) if wins else None,
            step_histogram=dict(sorted(Counter(r.steps for r in rs).items())),
        )
    return EvalSummary(tasks, results)


def _result(config: EpisodeConfig, traj: Trajectory) -> EpisodeResult:
    return EpisodeResult(config.env_id, config.difficulty, int(config.seed), traj.reward, len(traj.turns),
                         traj.terminated, traj.truncated, traj.initial_state_hash)


def _run_one(args) -> EpisodeResult:
    config, agent_spec = args
    agent = make_agent(agent_spec) if isinstance(agent_spec, str) else agent_spec()
    return _result(config, run_episode(config, agent))


def run_batch(configs: list[EpisodeConfig], agent: str | Callable[[], Agent],
              parallelism: int = 1) -> EvalSummary:
    """Run independent episodes; ``agent`` is a spec string or a picklable factory."""
    if not configs:
        raise ValueError("run_batch needs at least one episode config")
    jobs = [(c, agent) for c in configs]
    if parallelism <= 1:
        return summarize(map(_run_one, jobs))
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return summarize(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * parallelism))))


# -- SFT export ---------------------------------------------------------------------------


@dataclass
class ExportReport:
    written: int = 0
    dropped_failed: int = 0
    dropped_overlap: int = 0


def load_manifest(path: str | os.PathLike | None) -> set[str]:
    """Initial-state hashes, one per line (blank lines and ``#`` comments ignored)."""
    if path is None:
        return set()
    lines = Path(path).read_text().splitlines()
    return {s.strip() for s in lines if s.strip() and not s.startswith("#")}


def _user_content(obs: Observation, image_ref: str | None, text: str) -> list[dict]:
    parts = []
    if obs.is_text:
        parts.append({"type": "text", "text": obs.text_view})
    else:
        parts.append({"type": "image", "path": image_ref})
    if text:
        parts.append({"type": "text", "text": text})
    return parts


def sft_record(traj: Trajectory, image_dir: Path, stem: str) -> dict:
    """One chat record; images are written under ``image_dir`` and referenced relative to its parent."""

    def save(obs: Observation, name: str) -> str | None:
        if obs.is_text:
            return None
        (image_dir / name).write_bytes(obs.png())
        return f"{image_dir.name}/{name}"

    messages: list[dict] = [{"role": "system", "content": traj.instruction}]
    if traj.goal is not None and not traj.goal.is_text:
        messages.append({"role": "user", "content": _user_content(traj.goal, save(traj.goal, f"{stem}_goal.png"),
                                                                  "Goal state.")})
    for k, turn in enumerate(traj.turns):
        obs = turn.observation
        messages.append({"role": "user", "content": _user_content(obs, save(obs, f"{stem}_{k:02d}.png"),
                                                                  obs.feedback)})
        messages.append({"role": "assistant", "content": turn.raw_action})
    return {
        "id": stem,
        "messages": messages,
        "metadata": {
            "env_id": traj.env_id,
            "params": json.loads(json.dumps(traj.params, default=list)),
            "seed": traj.seed,
            "difficulty": traj.config.difficulty,
            "strategy": traj.meta.get("strategy"),
            "initial_state_hash": traj.initial_state_hash,
            "reward": traj.reward,
            "steps": len(traj.turns),
            "config": traj.config.to_json(),
        },
    }


def export_sft(trajectories: Iterable[Trajectory], test_manifest: set[str], out_dir: str | os.PathLike,
               filename: str = "sft.jsonl") -> ExportReport:
    """Write successful, non-test trajectories as JSON lines with PNGs in ``images/``."""
    out = Path(out_dir)
    images = out / "images"
    try:
        images.mkdir(parents=True, exist_ok=True)
        sink = open(out / filename, "w", encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write SFT export to {out}: {e}") from e
    report = ExportReport()
    with sink:
        for traj in trajectories:
            if traj.reward != 1:
                report.dropped_failed += 1
                continue
            if traj.initial_state_hash in test_manifest:
                report.dropped_overlap += 1
                continue
            stem = f"{traj.env_id}_{traj.seed}_{report.written:05d}"
            sink.write(json.dumps(sft_record(traj, images, stem), sort_keys=True) + "\n")
            report.written += 1
    return report


def replay_record(record: dict) -> int:
    """Reward obtained by replaying a record's assistant turns through a fresh episode."""
    cfg = EpisodeConfig.from_json(record["metadata"]["config"])
    actions = [m["content"] for m in record["messages"] if m["role"] == "assistant"]
    return run_episode(cfg, ScriptedAgent(actions)).reward


# -- serving -----------------------------------------------------------------------------


def serve_tcp(configs: Iterable[EpisodeConfig], host: str = "127.0.0.1", port: int = 0,
              on_listen: Callable[[int], None] | None = None, timeout: float = AGENT_TIMEOUT_S,
              ) -> list[Trajectory]:
    """Listen for agents; each accepted connection plays the next episode."""
    out = []
    with socket.create_server((host, port)) as server:
        if on_listen is not None:
            on_listen(server.getsockname()[1])
        for cfg in configs:
            conn, _ = server.accept()
            agent = ExternalAgent(lambda c=conn: SocketChannel(c), timeout)
            out.append(run_episode(cfg, agent))
    return out
