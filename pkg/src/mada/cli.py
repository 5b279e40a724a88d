"""Command line entry points.

`mada study run` drives the plain round loop, `mada run` drives the full
agent workflow with the control API attached, `mada ctl` is a thin client
for that API, `mada baseline` runs the multistart descent reference, and
`mada tools serve` exposes any tool server over stdio for external clients.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from urllib.error import HTTPError
from urllib.request import Request, urlopen


def _load_config(path: str):
    from .design import load_config

    return load_config(path)


def _print_result(result) -> None:
    print(f"study {result.study}: {result.stop_reason} after "
          f"{len(result.rounds)} rounds, {result.eval_count} evaluations")
    if result.incumbent is not None:
        design = ", ".join(f"{v:.6g}" for v in result.incumbent.design)
        print(f"incumbent: objective {result.incumbent.objective:.6g} "
              f"at [{design}] (eval {result.incumbent.eval_index})")
    else:
        print("incumbent: none (no finite evaluation)")


def cmd_study_run(args) -> int:
    from .design import run_study

    config = _load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    result = run_study(config, study_name=args.name, out_dir=args.out)
    _print_result(result)
    return 0


def cmd_study_replay(args) -> int:
    from .design import replay_trace

    replay = replay_trace(args.trace)
    print(f"trace {args.trace}: {replay.rounds_completed} rounds, "
          f"{replay.eval_count} evaluations, stop reason {replay.stop_reason}")
    if replay.incumbent is not None:
        print(f"incumbent: objective {replay.incumbent['objective']:.6g} "
              f"at eval {replay.incumbent['eval_index']}")
    return 0


def cmd_baseline(args) -> int:
    from .design import analytic_surrogate_objective, baseline_multistart

    config = _load_config(args.config)
    if config.backend.get("kind") != "surrogate":
        print("baseline descent needs a surrogate study config", file=sys.stderr)
        return 2
    runs = baseline_multistart(
        analytic_surrogate_objective(), config.space, args.starts,
        seed=args.seed if args.seed is not None else config.seed,
        csv_path=args.csv, max_iters=args.max_iters)
    converged = sum(1 for r in runs if r.converged)
    best = min(runs, key=lambda r: r.objective)
    print(f"{len(runs)} starts: {converged} gradient-converged, "
          f"best objective {best.objective:.3e} ({best.run_id}, "
          f"{best.evaluations} evaluations)")
    if args.csv:
        print(f"convergence histories written to {args.csv}")
    return 0


def cmd_run(args) -> int:
    from .orchestrator import Orchestrator, serve_control_api

    config = _load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    orchestrator = Orchestrator(config, study_name=args.name, out_dir=args.out)
    server = None
    if args.serve is not None:
        server = serve_control_api(orchestrator, host=args.host, port=args.serve)
        print(f"control API on {server.url}")
    try:
        orchestrator.start()
        result = orchestrator.join()
        _print_result(result)
        if server is not None and args.hold:
            print("study finished; serving snapshots until interrupted")
            try:
                while True:
                    import time

                    time.sleep(0.5)
            except KeyboardInterrupt:
                pass
        return 0
    finally:
        if server is not None:
            server.stop()
        orchestrator.close()


def cmd_ctl(args) -> int:
    url = args.url.rstrip("/")
    if args.action == "status":
        request = Request(url + "/study")
    else:
        command: dict = {"type": args.action.replace("-", "_")}
        if args.action == "set-bounds":
            if not args.lower or not args.upper:
                print("set-bounds needs --lower and --upper", file=sys.stderr)
                return 2
            command["lower"] = args.lower
            command["upper"] = args.upper
        request = Request(url + "/command", data=json.dumps(command).encode(),
                          headers={"Content-Type": "application/json"},
                          method="POST")
    try:
        with urlopen(request, timeout=args.timeout) as response:
            print(json.dumps(json.loads(response.read()), indent=2))
        return 0
    except HTTPError as exc:
        print(json.dumps(json.loads(exc.read()), indent=2), file=sys.stderr)
        return 1


def cmd_tools_serve(args) -> int:
    from .mcp import serve_stdio

    if args.server == "geometry":
        from .geokit.server import build_geometry_server

        server = build_geometry_server()
    elif args.server == "surrogate":
        from .surrogate import build_surrogate_server

        server = build_surrogate_server()
    elif args.server == "sim":
        from .simbackend import build_sim_server

        server = build_sim_server()
    else:
        from .scheduler import Scheduler, build_scheduler_server
        from .simbackend import scheduler_registry

        scheduler = Scheduler(node_count=args.nodes, registry=scheduler_registry())
        server = build_scheduler_server(scheduler)
    serve_stdio(server)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mada",
                                     description="Multi-agent design exploration.")
    sub = parser.add_subparsers(dest="command", required=True)

    study = sub.add_parser("study", help="plain round-loop studies")
    study_sub = study.add_subparsers(dest="study_command", required=True)
    run_p = study_sub.add_parser("run", help="run a study from a config file")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--name", default="study")
    run_p.add_argument("--out", default=None)
    run_p.set_defaults(func=cmd_study_run)
    replay_p = study_sub.add_parser("replay", help="reconstruct a study from its trace")
    replay_p.add_argument("trace")
    replay_p.set_defaults(func=cmd_study_replay)

    baseline_p = sub.add_parser("baseline", help="multistart descent reference")
    baseline_p.add_argument("--config", required=True)
    baseline_p.add_argument("--starts", type=int, default=100)
    baseline_p.add_argument("--seed", type=int, default=None)
    baseline_p.add_argument("--csv", default=None)
    baseline_p.add_argument("--max-iters", type=int, default=200)
    baseline_p.set_defaults(func=cmd_baseline)

    run_wf = sub.add_parser("run", help="run the agent workflow, optionally served")
    run_wf.add_argument("--config", required=True)
    run_wf.add_argument("--seed", type=int, default=None)
    run_wf.add_argument("--name", default="study")
    run_wf.add_argument("--out", default=None)
    run_wf.add_argument("--serve", type=int, default=None, metavar="PORT")
    run_wf.add_argument("--host", default="127.0.0.1")
    run_wf.add_argument("--hold", action=argparse.BooleanOptionalAction, default=True,
                        help="keep serving after the study finishes")
    run_wf.set_defaults(func=cmd_run)

    ctl = sub.add_parser("ctl", help="send expert commands to a served workflow")
    ctl.add_argument("action", choices=["pause", "resume", "stop", "set-bounds",
                                        "approve-round", "status"])
    ctl.add_argument("--url", default="http://127.0.0.1:8765")
    ctl.add_argument("--lower", type=float, nargs="+", default=None)
    ctl.add_argument("--upper", type=float, nargs="+", default=None)
    ctl.add_argument("--timeout", type=float, default=10.0)
    ctl.set_defaults(func=cmd_ctl)

    tools = sub.add_parser("tools", help="tool servers")
    tools_sub = tools.add_subparsers(dest="tools_command", required=True)
    serve_p = tools_sub.add_parser("serve", help="serve one tool server over stdio")
    serve_p.add_argument("server", choices=["geometry", "surrogate", "sim", "scheduler"])
    serve_p.add_argument("--nodes", type=int, default=4)
    serve_p.set_defaults(func=cmd_tools_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
