from __future__ import annotations

import json

import pytest

from callgym.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list(capsys):
    code, out, _ = run(capsys, "list", "--json")
    assert code == 0 and len(json.loads(out)) == 12
    code, out, _ = run(capsys, "list")
    assert "maze2d" in out and "actions:" in out


def test_solve_verify(capsys):
    code, out, _ = run(capsys, "solve", "--env", "maze2d", "--seed", "4", "--verify")
    lines = out.strip().splitlines()
    assert code == 0 and lines[-1] == "plan verified: reward 1" and lines[-2] == "('stop',)"


def test_solve_with_target(capsys):
    code, out, _ = run(capsys, "solve", "--env", "jigsaw", "--strategy", "swap", "--target-steps", "9", "--verify")
    assert code == 0 and len(out.strip().splitlines()) == 11


def test_solve_errors(capsys):
    assert run(capsys, "solve", "--env", "maze2d", "--strategy", "astar")[0] == 2
    assert run(capsys, "solve", "--env", "maze2d", "--target-steps", "0")[0] == 2
    assert run(capsys, "solve", "--env", "nope")[0] == 1
    assert run(capsys, "solve", "--env", "maze2d", "--param", "mw")[0] == 1


def test_difficulty_and_params_exclusive(capsys):
    code, _, err = run(capsys, "solve", "--env", "maze2d", "--difficulty", "hard", "--param", "mw=7")
    assert code == 1 and "mutually exclusive" in err
    code, out, _ = run(capsys, "solve", "--env", "maze2d", "--param", "mw=7", "--param", "mh=7",
                       "--param", "ms=30", "--verify")
    assert code == 0


def test_argparse_errors_exit_1():
    with pytest.raises(SystemExit) as e:
        main(["solve"])
    assert e.value.code == 1


def test_rollout_writes_frames(tmp_path, capsys):
    code, out, _ = run(capsys, "rollout", "--env", "maze2d", "--text-mode", "--out", str(tmp_path))
    summary = json.loads(out)
    assert code == 0 and summary["reward"] == 1
    doc = json.loads((tmp_path / "trajectory.json").read_text())
    assert len(doc["turns"]) == summary["steps"]
    assert (tmp_path / "frame_00.txt").exists() and (tmp_path / f"frame_{summary['steps']:02d}.txt").exists()


def test_rollout_scripted_image(tmp_path, capsys):
    code, out, _ = run(capsys, "rollout", "--env", "colorization", "--agent", "scripted:stop", "--out", str(tmp_path))
    assert code == 0 and json.loads(out)["reward"] == 0
    assert (tmp_path / "frame_00.png").read_bytes().startswith(b"\x89PNG")


def test_eval_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "eval", "--env", "maze2d,jigsaw", "--episodes", "3", "--json", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == 0 and set(doc["tasks"]) == {"maze2d/easy", "jigsaw/easy"}
    assert all(t["success_rate"] == 1.0 for t in doc["tasks"].values())
    assert len((tmp_path / "manifest.txt").read_text().split()) == 6
    assert json.loads((tmp_path / "summary.json").read_text()) == doc
    code, out, _ = run(capsys, "eval", "--env", "maze2d", "--episodes", "2")
    assert out.startswith("task")
    assert run(capsys, "eval", "--env", "maze2d,bogus", "--episodes", "1")[0] == 1


def test_export_sft_respects_manifest(tmp_path, capsys):
    run(capsys, "eval", "--env", "maze2d", "--episodes", "2", "--out", str(tmp_path / "test"))
    code, out, _ = run(capsys, "export-sft", "--env", "maze2d", "--episodes", "5",
                       "--test-manifest", str(tmp_path / "test" / "manifest.txt"), "--out", str(tmp_path / "sft"))
    report = json.loads(out)
    assert code == 0 and (report["written"], report["dropped_overlap"]) == (3, 2)


def test_render(tmp_path, capsys):
    code, out, _ = run(capsys, "render", "--env", "sliding_block", "--text-mode")
    assert code == 0 and out.startswith("Target Current")
    assert run(capsys, "render", "--env", "jigsaw")[0] == 1
    target = tmp_path / "x.png"
    assert run(capsys, "render", "--env", "jigsaw", "--out", str(target))[0] == 0
    assert target.read_bytes().startswith(b"\x89PNG")


def test_text_mode_unsupported(capsys):
    code, _, err = run(capsys, "render", "--env", "jigsaw", "--text-mode")
    assert code == 1 and "text mode" in err
