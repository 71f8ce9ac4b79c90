from __future__ import annotations

import json
import socket
import sys
import textwrap
import threading

import pytest

from callgym.core import ConfigError, EpisodeConfig, Episode, make_env
from callgym.harness import (
    ExternalAgent, ProcessChannel, RandomAgent, ScriptedAgent, SolverAgent, env_catalog,
    export_sft, load_manifest, make_agent, make_configs, parse_address, parse_reply, replay_record,
    run_batch, run_episode, serve_tcp, summarize, turn_message,
)
from callgym.solvers import solve

from conftest import ALL_ENVS

AGENT_SCRIPT = textwrap.dedent("""
    import json, sys, time
    log = open(sys.argv[1], "a")
    mode = sys.argv[2]
    plan = sys.argv[3:]
    k = 0
    for line in sys.stdin:
        msg = json.loads(line)
        log.write(json.dumps(msg) + "\\n"); log.flush()
        if msg["type"] == "done":
            break
        if mode == "die":
            sys.exit(0)
        if mode == "sleep":
            time.sleep(5)
        reply = plan[k] if k < len(plan) else "stop()"
        k += 1
        if mode == "plain":
            print(reply, flush=True)
        else:
            print(json.dumps({"type": "action", "raw": reply}), flush=True)
""")


@pytest.fixture
def agent_script(tmp_path):
    path = tmp_path / "agent.py"
    path.write_text(AGENT_SCRIPT)
    log = tmp_path / "log.jsonl"

    def make(mode="json", plan=(), timeout=30.0):
        argv = [sys.executable, str(path), str(log), mode, *plan]
        return ExternalAgent(lambda: ProcessChannel(argv), timeout)

    make.log = log
    return make


def logged(path):
    return [json.loads(l) for l in path.read_text().splitlines()]


def test_catalog_lists_every_task():
    cat = env_catalog()
    assert sorted(e["env_id"] for e in cat) == sorted(ALL_ENVS)
    maze = next(e for e in cat if e["env_id"] == "maze2d")
    assert maze["presets"]["easy"] == {"mw": 9, "mh": 9, "ms": 19} and maze["text_mode"]


def test_make_agent_specs(tmp_path):
    assert isinstance(make_agent("solver"), SolverAgent)
    assert make_agent("solver:dfs").strategy == "dfs"
    assert isinstance(make_agent("random"), RandomAgent)
    assert make_agent("scripted:move(1); stop").actions == ["move(1)", "stop()"]
    f = tmp_path / "script.txt"
    f.write_text("move(2)\n\nstop()\n")
    assert make_agent(f"scripted:@{f}").actions == ["move(2)", "stop()"]
    assert isinstance(make_agent("external:tcp:localhost:9"), ExternalAgent)
    for bad in ("nobody", "random:x", "external:udp:1"):
        with pytest.raises(ConfigError):
            make_agent(bad)


def test_parse_address():
    with pytest.raises(ConfigError):
        parse_address("tcp:host:notaport")
    assert callable(parse_address("stdio:python3 agent.py"))


def test_parse_reply():
    assert parse_reply('{"type": "action", "raw": "move(1)"}') == "move(1)"
    assert parse_reply("move(1)") == "move(1)"
    assert parse_reply('{"type": "other"}') == '{"type": "other"}'
    assert parse_reply("[1, 2]") == "[1, 2]"


def test_solver_agent_records_strategy():
    traj = run_episode(EpisodeConfig("matchstick_equation", "easy", seed=0), make_agent("solver:sos"))
    assert traj.reward == 1 and traj.meta["strategy"] == "sos"


def test_scripted_agent_runs_out_into_stop():
    traj = run_episode(EpisodeConfig("maze2d", "easy", seed=0), ScriptedAgent(["nonsense"]))
    assert [t.raw_action for t in traj.turns] == ["nonsense", "stop()"]
    assert traj.terminated and traj.reward == 0


def test_random_agent_is_reproducible():
    cfg = EpisodeConfig("sliding_block", "easy", seed=5)
    a = [t.raw_action for t in run_episode(cfg, RandomAgent()).turns]
    b = [t.raw_action for t in run_episode(cfg, RandomAgent()).turns]
    assert a == b and a


def test_turn_message_fields():
    ep = Episode(EpisodeConfig("maze2d", "easy", seed=0, text_mode=True, goal_observation=True))
    ep.reset()
    first = turn_message(ep, [], True)
    assert {"instruction", "goal_text_view", "text_view", "feedback", "steps_remaining", "history"} <= set(first)
    ep.step("stopp")
    later = turn_message(ep, ep.trajectory.turns, False)
    assert "instruction" not in later and "goal_text_view" not in later
    assert later["history"][0]["action"] == "stopp" and later["steps_remaining"] == 19

    img = Episode(EpisodeConfig("jigsaw", "easy", seed=0))
    img.reset()
    assert "image_png_b64" in turn_message(img, [], True)


def test_stdio_agent_plays_solver_plan(agent_script):
    cfg = EpisodeConfig("maze2d", "easy", seed=2, history_window=2)
    plan = solve(make_env(cfg)).texts()
    traj = run_episode(cfg, agent_script(plan=plan))
    assert traj.reward == 1 and len(traj.turns) == len(plan)
    msgs = logged(agent_script.log)
    turns = [m for m in msgs if m["type"] == "turn"]
    assert "instruction" in turns[0] and all("instruction" not in m for m in turns[1:])
    assert all(len(m["history"]) <= 2 for m in turns)
    assert msgs[-1] == {"type": "done", "reward": 1, "terminated": True, "truncated": False}


def test_plain_text_replies_are_actions(agent_script):
    traj = run_episode(EpisodeConfig("maze2d", "easy", seed=2, max_steps=3), agent_script("plain", plan=["hello"]))
    assert [t.outcome for t in traj.turns] == ["invalid_format", "applied"]


def test_dropped_agent_truncates(agent_script):
    traj = run_episode(EpisodeConfig("maze2d", "easy", seed=0), agent_script("die"))
    assert traj.truncated and not traj.terminated and traj.reward == 0
    assert "transport_error" in traj.meta


def test_slow_agent_gets_invalid_format(agent_script):
    traj = run_episode(EpisodeConfig("maze2d", "easy", seed=0, max_steps=1), agent_script("sleep", timeout=0.3))
    assert traj.turns[0].raw_action == "" and traj.turns[0].outcome == "invalid_format"
    assert traj.truncated


def test_serve_tcp_round_trip():
    configs = make_configs("maze2d", "easy", seed=0, episodes=2)
    plans = [solve(make_env(c)).texts() for c in configs]
    ports = []
    ready = threading.Event()
    result = {}

    def server():
        result["trajs"] = serve_tcp(configs, on_listen=lambda p: (ports.append(p), ready.set()), timeout=10)

    t = threading.Thread(target=server)
    t.start()
    assert ready.wait(10)
    for plan in plans:
        with socket.create_connection(("127.0.0.1", ports[0])) as s:
            f = s.makefile("rw")
            k = 0
            while True:
                msg = json.loads(f.readline())
                if msg["type"] == "done":
                    assert msg["reward"] == 1
                    break
                f.write(json.dumps({"type": "action", "raw": plan[k]}) + "\n")
                f.flush()
                k += 1
    t.join(10)
    assert [tr.reward for tr in result["trajs"]] == [1, 1]


def test_batch_summary_and_order_insensitivity():
    configs = make_configs("maze2d", "easy", seed=0, episodes=4) + make_configs("jigsaw", "hard", seed=0, episodes=3)
    summary = run_batch(configs, "solver")
    assert summary.tasks["maze2d/easy"].episodes == 4 and summary.tasks["jigsaw/hard"].success_rate == 1.0
    assert summarize(reversed(summary.results)).dumps() == summary.dumps()
    assert "maze2d/easy" in summary.table()
    with pytest.raises(ValueError):
        run_batch([], "solver")


def test_random_batch_scores_low():
    summary = run_batch(make_configs("maze2d", "easy", episodes=10), "random")
    assert summary.tasks["maze2d/easy"].success_rate < 0.5


def test_sft_export_filters_and_replays(tmp_path):
    wins = [run_episode(c, SolverAgent()) for c in make_configs("maze2d", "easy", episodes=3)]
    text_wins = [run_episode(c, SolverAgent()) for c in make_configs("sliding_block", "easy", episodes=1,
                                                                       text_mode=True)]
    fails = [run_episode(c, ScriptedAgent(["stop()"])) for c in make_configs("maze2d", "easy", seed=50, episodes=2)]
    manifest_file = tmp_path / "manifest.txt"
    manifest_file.write_text(f"# held out\n{wins[0].initial_state_hash}\n")
    report = export_sft(wins + text_wins + fails, load_manifest(manifest_file), tmp_path / "out")
    assert (report.written, report.dropped_failed, report.dropped_overlap) == (3, 2, 1)
    records = [json.loads(l) for l in (tmp_path / "out" / "sft.jsonl").read_text().splitlines()]
    for rec in records:
        assert rec["messages"][0]["role"] == "system"
        roles = [m["role"] for m in rec["messages"][1:]]
        assert roles == ["user", "assistant"] * (len(roles) // 2)
        assert replay_record(rec) == 1
        for m in rec["messages"]:
            for part in m["content"] if isinstance(m["content"], list) else []:
                if part["type"] == "image":
                    assert (tmp_path / "out" / part["path"]).read_bytes().startswith(b"\x89PNG")
    assert load_manifest(None) == set()
