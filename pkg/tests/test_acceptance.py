"""End-to-end acceptance checks, one test per criterion.

A one-line PASS/FAIL summary per criterion is printed at the end of the run
by the hook in conftest.py.
"""

from __future__ import annotations

import base64
import hashlib
import json
import random
import re
import subprocess
import sys
import time
from collections import deque

import numpy as np
import pytest

from callgym.actions import canonical_repr, make_call
from callgym.core import EpisodeConfig, Episode, make_env
from callgym.envs.matchstick import parse_equation_ascii
from callgym.envs.maze import parse_maze_ascii
from callgym.envs.patch import parse_patch_ascii
from callgym.envs.sliding import COLS, EMPTY, ROWS, parse_sliding_ascii
from callgym.harness import (
    ExternalAgent, ProcessChannel, RandomAgent, ScriptedAgent, SolverAgent, export_sft, make_configs,
    random_payload, replay_record, run_batch, run_episode, turn_message,
)
from callgym.render import ascii_frame, encode_png
from callgym.solvers import STRATEGIES, SolverOptions, min_steps, solve, verify_plan

from conftest import ALL_ENVS, TEXT_ENVS

OUTCOMES = {"invalid_format", "invalid_action", "applied"}


# -- independent oracles -----------------------------------------------------------------


def brute_maze_distance(wall, src, dst) -> int:
    seen = {src: 0}
    q = deque([src])
    while q:
        r, c = q.popleft()
        if (r, c) == dst:
            return seen[(r, c)]
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if not wall[nr][nc] and (nr, nc) not in seen:
                seen[(nr, nc)] = seen[(r, c)] + 1
                q.append((nr, nc))
    raise AssertionError("target unreachable")


def brute_sliding_distance(start, goal) -> int:
    def successors(board):
        for b in set(board) - {EMPTY}:
            cells = [i for i, v in enumerate(board) if v == b]
            for dr, dc in ((-1, 0), (0, 1), (1, 0), (0, -1)):
                dest = []
                for i in cells:
                    r, c = divmod(i, COLS)
                    r, c = r + dr, c + dc
                    if not (0 <= r < ROWS and 0 <= c < COLS) or board[r * COLS + c] not in (EMPTY, b):
                        break
                    dest.append(r * COLS + c)
                else:
                    out = list(board)
                    for i in cells:
                        out[i] = EMPTY
                    for j in dest:
                        out[j] = b
                    yield tuple(out)

    seen = {start: 0}
    q = deque([start])
    while q:
        s = q.popleft()
        if s == goal:
            return seen[s]
        for n in successors(s):
            if n not in seen:
                seen[n] = seen[s] + 1
                q.append(n)
    raise AssertionError("goal unreachable")


# -- 1 -----------------------------------------------------------------------------------


def test_01_solver_completeness():
    start = time.perf_counter()
    failures = []
    for env_id in ALL_ENVS:
        for difficulty, limit in (("easy", 20), ("hard", 30)):
            summary = run_batch(make_configs(env_id, difficulty, seed=0, episodes=100), "solver")
            task = summary.tasks[f"{env_id}/{difficulty}"]
            if task.success_rate != 1.0 or max(task.step_histogram) > limit:
                failures.append((env_id, difficulty, task.success_rate, max(task.step_histogram)))
    elapsed = time.perf_counter() - start
    assert not failures, failures
    assert elapsed < 300, f"took {elapsed:.0f} s"


# -- 2 -----------------------------------------------------------------------------------


def fuzz_strings(env, rng: random.Random, count: int):
    schemas = env.schemas()
    names = [s.name for s in schemas] + ["stop", "undo", "move", "Move", "", "rotate"]
    np_rng = np.random.default_rng(rng.randrange(2**32))
    junk = ["(", ")", "[", "]", ",", "'", '"', "\\", "\n", "1e999", "nan", "-", "é", "\x00", "()", "((", "{}"]
    for _ in range(count):
        kind = rng.randrange(6)
        if kind == 0:
            yield "".join(chr(rng.randrange(1, 0x250)) for _ in range(rng.randrange(0, 40)))
        elif kind == 1:
            s = schemas[rng.randrange(len(schemas))]
            yield canonical_repr(make_call(s.name, *random_payload(s, np_rng))) if s.args else f"{s.name}()"
        elif kind == 2:
            args = [rng.choice([rng.randint(-10**6, 10**6), rng.uniform(-1e4, 1e4), "x", None, [1, 2], (3,)])
                    for _ in range(rng.randrange(0, 5))]
            yield f"{rng.choice(names)}({', '.join(map(repr, args))})"
        elif kind == 3:
            yield f"think first... {rng.choice(names)}({rng.randint(-5, 40)}) " + rng.choice(junk)
        elif kind == 4:
            yield "".join(rng.choice(junk + names) for _ in range(rng.randrange(1, 12)))
        else:
            yield repr((rng.choice(names), tuple(rng.randint(-3, 12) for _ in range(rng.randrange(0, 5)))))


def test_02_step_engine_fuzz():
    for k, env_id in enumerate(ALL_ENVS):
        rng = random.Random(k)
        cfg = EpisodeConfig(env_id, "easy", seed=k, max_steps=10_000)
        ep = Episode(cfg)
        ep.reset()
        for text in fuzz_strings(ep.env, rng, 10_000):
            if ep.finished:
                ep.reset()
            out = ep.step(text)
            outcome = out.info["outcome"]
            assert outcome in OUTCOMES, (env_id, text)
            fb = out.info["env_feedback"]
            if outcome == "invalid_format":
                assert fb == "invalid format"
            elif outcome == "invalid_action":
                assert fb.startswith("invalid action: ")
            rec = ep.trajectory.turns[-1]
            is_stop = outcome == "applied" and rec.parsed.name == "stop"
            assert out.reward in (0, 1)
            if out.reward:
                assert is_stop, (env_id, text)
            assert out.terminated == is_stop


# -- 3 -----------------------------------------------------------------------------------


def test_03_bfs_optimality():
    for seed in range(50):
        env = make_env(EpisodeConfig("sliding_block", None, {"sm": 1 + seed % 8, "ms": 999}, seed=seed))
        assert solve(env).steps == brute_sliding_distance(env.board, env.target), seed
    sizes = [(5, 5), (7, 7), (9, 9), (5, 9), (9, 7)]
    for seed in range(50):
        mw, mh = sizes[seed % len(sizes)]
        env = make_env(EpisodeConfig("maze2d", None, {"mw": mw, "mh": mh, "ms": 999}, seed=seed))
        assert solve(env).steps == brute_maze_distance(env.wall, env.agent, env.target), seed


# -- 4 -----------------------------------------------------------------------------------


def test_04_padding_neutrality():
    rng = random.Random(2024)
    cases = [(env_id, strategy) for env_id in ALL_ENVS for strategy in STRATEGIES[env_id]]
    for k in range(200):
        env_id, strategy = cases[k % len(cases)]
        difficulty = rng.choice(["easy", "hard"])
        env = make_env(EpisodeConfig(env_id, difficulty, seed=rng.randrange(10_000)))
        budget = EpisodeConfig(env_id, difficulty).step_budget
        low = min_steps(env, strategy)
        target = rng.randint(low, budget - 1)
        plan = solve(env, SolverOptions(strategy, target, seed=k))
        assert plan.steps == target, (env_id, strategy, target)
        assert verify_plan(env, plan, target + 1), (env_id, strategy, target)


# -- 5 -----------------------------------------------------------------------------------

CONFIG_TABLE = [
    ("maze2d", "easy", {"mw": 9, "mh": 9}), ("maze2d", "hard", {"mw": 11, "mh": 11}),
    ("maze3d", "easy", {"mw": 7, "mh": 7}), ("maze3d", "hard", {"mw": 9, "mh": 9}),
    ("sliding_block", "easy", {"sm": 30}), ("sliding_block", "hard", {"sm": 90}),
    ("patch_reassembly", "easy", {"gs": (6, 6), "np": 5}), ("patch_reassembly", "hard", {"gs": (8, 8), "np": 6}),
    ("matchstick_equation", "easy", {"bm": 1}), ("matchstick_equation", "hard", {"bm": 2}),
    ("matchstick_rotation", "easy", {"pt": 10, "at": 15}), ("matchstick_rotation", "hard", {"pt": 5, "at": 10}),
    ("mental_rotation_2d", "easy", {"at": 10}), ("mental_rotation_2d", "hard", {"at": 5}),
    ("mental_rotation_3d", "easy", {"ns": 4}), ("mental_rotation_3d", "hard", {"ns": 6}),
    ("zoom_in", "easy", {"zv": 4}), ("zoom_in", "hard", {"zv": 5}),
    ("jigsaw", "easy", {"nr": 2, "nc": 2}), ("jigsaw", "hard", {"nr": 3, "nc": 3}),
    ("colorization", "easy", {"ar": 11}), ("colorization", "hard", {"ar": 16}),
    ("video_unshuffle", "easy", {"nf": 4}), ("video_unshuffle", "hard", {"nf": 5}),
]


def test_05_config_fidelity():
    covered = set()
    for env_id, difficulty, expected in CONFIG_TABLE:
        params = make_env(EpisodeConfig(env_id, difficulty, seed=0)).params
        for key, value in expected.items():
            assert params[key] == value, (env_id, difficulty, key, params[key])
        covered.add(env_id)
    assert covered == set(ALL_ENVS)


# -- 6 -----------------------------------------------------------------------------------


def scramble(env, rng):
    """Apply a few random schema-valid actions so the parsed state is not just the initial one."""
    np_rng = np.random.default_rng(rng.randrange(2**32))
    schemas = env.schemas()
    for _ in range(rng.randrange(0, 6)):
        s = schemas[rng.randrange(len(schemas))]
        env.apply(make_call(s.name, *random_payload(s, np_rng)))


def test_06_ascii_round_trip():
    for env_id in TEXT_ENVS:
        for seed in range(100):
            rng = random.Random(seed)
            env = make_env(EpisodeConfig(env_id, rng.choice(["easy", "hard"]), seed=seed))
            scramble(env, rng)
            text = ascii_frame(env.ascii())
            if env_id == "maze2d":
                wall, agent, target = parse_maze_ascii(text)
                assert np.array_equal(wall, env.wall) and agent == env.agent
                assert target == env.target or env.agent == env.target
            elif env_id == "sliding_block":
                assert parse_sliding_ascii(text) == (env.target, env.board)
            elif env_id == "patch_reassembly":
                rows, cols, placed, parked = parse_patch_ascii(text)
                assert (rows, cols) == (env.rows, env.cols)
                for p, anchor in enumerate(env.placed):
                    if anchor is None:
                        assert parked[p] == env.shapes[p]
                    else:
                        assert placed[p] == (anchor, env.shapes[p])
                assert len(placed) + len(parked) == env.n_patches
            else:
                assert parse_equation_ascii(text, env.classes) == env.segs


# -- 7 -----------------------------------------------------------------------------------

_HASH_SCRIPT = """
import hashlib, json
from callgym.core import EpisodeConfig, make_env, env_ids
from callgym.render import encode_png
print(json.dumps({f"{e}/{d}/{s}": hashlib.sha256(encode_png(make_env(EpisodeConfig(e, d, seed=s)).render())).hexdigest()
                  for e in env_ids() for d in ("easy", "hard") for s in (0, 1)}))
"""


def test_07_determinism():
    local = {f"{e}/{d}/{s}": hashlib.sha256(encode_png(make_env(EpisodeConfig(e, d, seed=s)).render())).hexdigest()
             for e in ALL_ENVS for d in ("easy", "hard") for s in (0, 1)}
    for hash_seed in ("1", "987"):
        out = subprocess.run([sys.executable, "-c", _HASH_SCRIPT], capture_output=True, text=True, check=True,
                             env={"PYTHONHASHSEED": hash_seed, "PATH": ""})
        assert json.loads(out.stdout) == local
    configs = [c for e in ALL_ENVS for c in make_configs(e, "easy", seed=3, episodes=4)]
    for agent in ("solver", "random"):
        one = run_batch(configs, agent, parallelism=1).dumps()
        eight = run_batch(configs, agent, parallelism=8).dumps()
        assert one == eight


# -- 8 -----------------------------------------------------------------------------------

_RECORDER = """
import json, sys
log = open(sys.argv[1], "a")
for line in sys.stdin:
    msg = json.loads(line)
    log.write(json.dumps(msg) + "\\n"); log.flush()
    if msg["type"] == "done":
        break
    n = sum(1 for _ in open(sys.argv[1])) - 1
    print(json.dumps({"type": "action", "raw": "stop()" if n >= 5 else "nonsense"}), flush=True)
"""


def test_08_toggles(tmp_path):
    step_only = re.compile(r"Steps remaining: \d+")
    for env_id in ALL_ENVS:
        traj = run_episode(EpisodeConfig(env_id, "easy", seed=1, feedback_enabled=False), RandomAgent(stop_p=0.1))
        mixed = run_episode(EpisodeConfig(env_id, "easy", seed=1, feedback_enabled=False),
                            ScriptedAgent(["garbage", "zap(1)"]))
        for t in traj.turns + mixed.turns:
            assert step_only.fullmatch(t.feedback), (env_id, t.feedback)
        assert step_only.fullmatch(traj.final_observation.feedback)

    script = tmp_path / "recorder.py"
    script.write_text(_RECORDER)
    log = tmp_path / "transcript.jsonl"
    agent = ExternalAgent(lambda: ProcessChannel([sys.executable, str(script), str(log)]), timeout=30)
    run_episode(EpisodeConfig("maze2d", "easy", seed=0, history_window=1), agent)
    turns = [json.loads(l) for l in log.read_text().splitlines() if json.loads(l)["type"] == "turn"]
    assert len(turns) == 6
    assert turns[0]["history"] == [] and all(len(m["history"]) == 1 for m in turns[1:])
    assert all(m["history"][0]["action"] == "nonsense" for m in turns[1:])

    for env_id in ALL_ENVS:
        text = env_id in TEXT_ENVS
        ep = Episode(EpisodeConfig(env_id, "easy", seed=2, goal_observation=True, text_mode=text))
        ep.reset()
        first = turn_message(ep, [], True)
        solved = ep.env.solved_copy()
        assert solved.success()
        if text:
            assert first["goal_text_view"] == ascii_frame(solved.ascii())
        else:
            assert base64.b64decode(first["goal_image_png_b64"]) == encode_png(solved.render())


# -- 9 -----------------------------------------------------------------------------------


def test_09_sft_filters(tmp_path):
    envs = ["maze2d", "sliding_block", "jigsaw", "matchstick_equation", "colorization"]
    wins = [run_episode(EpisodeConfig(envs[k % 5], "easy", seed=k, text_mode=k % 10 == 0), SolverAgent())
            for k in range(20)]
    fails = [run_episode(EpisodeConfig(envs[k % 5], "easy", seed=100 + k), ScriptedAgent(["stop()"]))
             for k in range(5)]
    assert all(t.reward == 1 for t in wins) and all(t.reward == 0 for t in fails)
    manifest = {wins[3].initial_state_hash, wins[9].initial_state_hash, wins[17].initial_state_hash}
    report = export_sft(wins[:10] + fails + wins[10:], manifest, tmp_path)
    assert (report.written, report.dropped_failed, report.dropped_overlap) == (17, 5, 3)
    records = [json.loads(l) for l in (tmp_path / "sft.jsonl").read_text().splitlines()]
    assert len(records) == 17
    assert all(r["metadata"]["initial_state_hash"] not in manifest for r in records)
    assert all(replay_record(r) == 1 for r in records)


# -- 10 ----------------------------------------------------------------------------------


def test_10_information_revealing_strategies():
    probes = ["('move', (1.0, 0.0, 0.0))", "('move', (0.0, 1.0, 0.0))"]
    for seed in range(100):
        difficulty = ("easy", "hard")[seed % 2]
        env = make_env(EpisodeConfig("matchstick_rotation", difficulty, seed=seed))
        plan = solve(env, SolverOptions("probe_then_solve"))
        texts = plan.texts()
        assert texts[:2] == probes and len(texts) >= 4
        last = plan.actions[-2].payload
        assert last[2] != 0.0
        assert verify_plan(env, plan, EpisodeConfig("matchstick_rotation", difficulty).step_budget)

    for seed in range(100):
        difficulty = ("easy", "hard")[seed % 2]
        env = make_env(EpisodeConfig("mental_rotation_3d", difficulty, seed=seed))
        plan = solve(env, SolverOptions("rotate_then_solve"))
        payloads = [a.payload for a in plan.actions[:-1]]
        for axis in range(3):
            quarter = tuple(90.0 if k == axis else 0.0 for k in range(3))
            block = payloads[5 * axis:5 * axis + 4]
            assert block == [quarter] * 4, (seed, axis)
        assert verify_plan(env, plan, EpisodeConfig("mental_rotation_3d", difficulty).step_budget)


# -- 11 ----------------------------------------------------------------------------------


def test_11_random_agent_floor():
    summary = run_batch(make_configs("maze2d", "easy", seed=0, episodes=200), "random")
    assert summary.tasks["maze2d/easy"].success_rate < 0.05
