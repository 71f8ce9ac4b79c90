"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .core import ConfigError, EpisodeConfig, env_ids, make_env, observe
from .harness import (
    DEFAULT_EPISODES, EvalSummary, ExportReport, env_catalog, export_sft, load_manifest, make_agent,
    make_configs, run_batch, run_episode, serve_tcp,
)
from .solvers import SolverError, SolverOptions, solve, verify_plan

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
HISTORY_CHOICES = ("1", "2", "4", "inf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *, many_envs: bool = False, episodes: bool = False) -> None:
    help_env = "task id, comma-separated ids, or 'all'" if many_envs else "task id"
    p.add_argument("--env", required=True, help=help_env)
    p.add_argument("--difficulty", choices=("easy", "hard"), help="preset (default easy)")
    p.add_argument("--param", action="append", default=[], metavar="K=V", help="explicit parameter (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    if episodes:
        p.add_argument("--episodes", type=int, default=DEFAULT_EPISODES)
    p.add_argument("--max-steps", type=int, help="override the step budget")
    p.add_argument("--history-window", choices=HISTORY_CHOICES, default="inf")
    p.add_argument("--no-feedback", action="store_true", help="hide environment feedback text")
    p.add_argument("--text-mode", action="store_true", help="ASCII observations")
    p.add_argument("--goal-obs", action="store_true", help="show the solved state up front")
    p.add_argument("--assets", default=os.environ.get("VISGYM_ASSETS"), help="image directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="callgym", description="Visual decision-making tasks with function-call actions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("list", help="tasks, parameters and actions")
    p.add_argument("--json", action="store_true")
    p.add_argument("--assets", default=os.environ.get("VISGYM_ASSETS"))

    p = sub.add_parser("rollout", help="play one episode and dump its trajectory")
    _common(p)
    p.add_argument("--agent", default="solver")
    p.add_argument("--out", help="directory for trajectory.json and frames")

    p = sub.add_parser("solve", help="print a solver plan")
    _common(p)
    p.add_argument("--strategy")
    p.add_argument("--target-steps", type=int)
    p.add_argument("--verify", action="store_true", help="replay the plan through the step engine")

    p = sub.add_parser("eval", help="run a batch of episodes and summarise")
    _common(p, many_envs=True, episodes=True)
    p.add_argument("--agent", default="solver")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out", help="directory for summary.json and manifest.txt")
    p.add_argument("--json", action="store_true", help="print the JSON summary instead of the table")

    p = sub.add_parser("export-sft", help="solver trajectories as filtered chat records")
    _common(p, many_envs=True, episodes=True)
    p.add_argument("--agent", default="solver")
    p.add_argument("--test-manifest", help="file of initial-state hashes to exclude")
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="serve episodes to external agents")
    _common(p, episodes=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7070)
    p.add_argument("--http", action="store_true", help="run the HTTP service instead of the line protocol")
    p.add_argument("--out", help="directory for trajectory summaries")

    p = sub.add_parser("render", help="write the initial observation")
    _common(p)
    p.add_argument("--out", help="output file (.png or .txt); ASCII goes to stdout when omitted")
    return parser


def parse_params(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--param expects K=V, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _env_list(spec: str) -> list[str]:
    names = env_ids() if spec == "all" else [s.strip() for s in spec.split(",") if s.strip()]
    unknown = [n for n in names if n not in env_ids()]
    if unknown:
        raise UsageError(f"unknown environment(s): {', '.join(unknown)}")
    return names


def _toggles(args) -> dict:
    return {
        "max_steps": args.max_steps,
        "feedback_enabled": not args.no_feedback,
        "text_mode": args.text_mode,
        "goal_observation": args.goal_obs,
        "history_window": None if args.history_window == "inf" else int(args.history_window),
        "assets": args.assets,
    }


def _difficulty(args) -> str | None:
    if args.param and args.difficulty:
        raise UsageError("--difficulty and --param are mutually exclusive")
    return None if args.param else (args.difficulty or "easy")


def config_from_args(args, env_id: str | None = None, seed: int | None = None) -> EpisodeConfig:
    return EpisodeConfig(env_id or args.env, _difficulty(args), parse_params(args.param),
                         args.seed if seed is None else seed, **_toggles(args))


def _batch_configs(args) -> list[EpisodeConfig]:
    out = []
    for env_id in _env_list(args.env):
        out += make_configs(env_id, _difficulty(args), parse_params(args.param), args.seed, args.episodes,
                            **_toggles(args))
    return out


def _print_json(doc) -> None:
    print(json.dumps(doc, sort_keys=True, indent=2))


# -- subcommands -------------------------------------------------------------------------


def cmd_list(args) -> int:
    catalog = env_catalog(args.assets)
    if args.json:
        _print_json(catalog)
        return EXIT_OK
    for e in catalog:
        print(f"{e['env_id']}  ({e['title']}{', text mode' if e['text_mode'] else ''})")
        for d, pre in e["presets"].items():
            print(f"  {d}: " + ", ".join(f"{k}={v}" for k, v in pre.items()))
        print("  actions: " + "; ".join(e["actions"]))
    return EXIT_OK


def _write_observation(obs, path: Path) -> None:
    if obs.is_text:
        path.with_suffix(".txt").write_text(obs.text_view + "\n")
    else:
        path.with_suffix(".png").write_bytes(obs.png())


def cmd_rollout(args) -> int:
    cfg = config_from_args(args)
    traj = run_episode(cfg, make_agent(args.agent))
    summary = {
        "env_id": traj.env_id, "seed": traj.seed, "reward": traj.reward, "steps": len(traj.turns),
        "terminated": traj.terminated, "truncated": traj.truncated,
        "initial_state_hash": traj.initial_state_hash,
        "turns": [{"action": t.raw_action, "outcome": t.outcome, "feedback": t.feedback} for t in traj.turns],
        "config": cfg.to_json(),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for k, t in enumerate(traj.turns):
            _write_observation(t.observation, out / f"frame_{k:02d}")
        if traj.final_observation is not None:
            _write_observation(traj.final_observation, out / f"frame_{len(traj.turns):02d}")
        (out / "trajectory.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    _print_json({k: v for k, v in summary.items() if k != "turns"})
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    env = make_env(cfg)
    plan = solve(env, SolverOptions(args.strategy, args.target_steps, args.seed))
    for text in plan.texts():
        print(text)
    if args.verify:
        if verify_plan(env, plan, cfg.step_budget):
            print("plan verified: reward 1")
        else:
            print("plan verification failed: reward 0", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_eval(args) -> int:
    configs = _batch_configs(args)
    summary: EvalSummary = run_batch(configs, args.agent, args.parallelism)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(summary.dumps() + "\n")
        hashes = sorted({r.initial_state_hash for r in summary.results})
        (out / "manifest.txt").write_text("".join(h + "\n" for h in hashes))
    if args.json:
        print(summary.dumps())
    else:
        print(summary.table())
    return EXIT_OK


def cmd_export_sft(args) -> int:
    manifest = load_manifest(args.test_manifest)
    agent = make_agent(args.agent)
    trajectories = (run_episode(cfg, agent) for cfg in _batch_configs(args))
    report: ExportReport = export_sft(trajectories, manifest, args.out)
    _print_json({"written": report.written, "dropped_failed": report.dropped_failed,
                 "dropped_overlap": report.dropped_overlap, "out": str(Path(args.out) / "sft.jsonl")})
    return EXIT_OK


def cmd_serve(args) -> int:
    if args.http:
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(args.assets), host=args.host, port=args.port)
        return EXIT_OK
    _env_list(args.env)
    configs = make_configs(args.env, _difficulty(args), parse_params(args.param), args.seed, args.episodes,
                           **_toggles(args))

    def announce(port):
        print(f"listening on {args.host}:{port}", file=sys.stderr, flush=True)

    trajectories = serve_tcp(configs, args.host, args.port, announce)
    results = [{"seed": t.seed, "reward": t.reward, "steps": len(t.turns), "truncated": t.truncated}
               for t in trajectories]
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "served.json").write_text(json.dumps(results, indent=2) + "\n")
    _print_json(results)
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = config_from_args(args)
    obs = observe(make_env(cfg), cfg.text_mode, "", cfg.step_budget)
    if args.out:
        path = Path(args.out)
        if obs.is_text:
            path.write_text(obs.text_view + "\n")
        else:
            path.write_bytes(obs.png())
        print(str(path))
    elif obs.is_text:
        print(obs.text_view)
    else:
        raise UsageError("image observations need --out FILE.png")
    return EXIT_OK


COMMANDS = {
    "list": cmd_list, "rollout": cmd_rollout, "solve": cmd_solve, "eval": cmd_eval,
    "export-sft": cmd_export_sft, "serve": cmd_serve, "render": cmd_render,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as e:
        print(f"callgym: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, OSError, RuntimeError) as e:
        print(f"callgym: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
