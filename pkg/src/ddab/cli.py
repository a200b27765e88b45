"""Command line entry point.

Subcommands: run, bound-table, verify, gadget-gen, replay, serve. Data
artifacts (CSV tables, verdict JSON, traces) are byte-deterministic for
fixed seeds; wall-clock metadata goes to a separate sidecar file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ddab.adversary import strategy_from_spec
from ddab.engine import (
    ATTACKER_WIN,
    GameConfig,
    ReplayCorruptionError,
    replay,
    run_parallel_subgames,
)
from ddab.gadgets import GadgetSpec, build_gadget, desk_corpus
from ddab.graph import EnvironmentError_, InputError, environment_from_dict, environment_to_dict
from ddab.policy import required_assets, required_units
from ddab.state import rational, rational_str
from ddab.verifier import (
    ATTACKER_WINS,
    MUTATIONS,
    SAFE_CLOSED,
    StateBudgetExceeded,
    verify_necessity,
    verify_sufficiency,
)

log = logging.getLogger("ddab")

EXIT_OK = 0
EXIT_GOLDEN_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_ATTACKER_WIN = 10


class ConfigError(ValueError):
    pass


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _load_environment_field(value, base: Path):
    if isinstance(value, str):
        return environment_from_dict(_read_json(str((base / value).resolve())))
    if isinstance(value, dict):
        return environment_from_dict(value)
    raise ConfigError("'environment' must be an inline object or a file path")


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_sidecar(out_dir: Path, command: str, args: dict) -> None:
    """Wall-clock and invocation details live here, never in data files."""
    sidecar = {
        "command": command,
        "args": {k: str(v) for k, v in sorted(args.items())},
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    _write_text(out_dir / "run_meta.json", json.dumps(sidecar, indent=2) + "\n")


# -- run -----------------------------------------------------------------------


def game_config_from_file(path: str, *, trace_path: str | None, trace_advantages: bool) -> tuple[GameConfig, dict]:
    doc = _read_json(path)
    base = Path(path).parent
    for key in ("environment", "k", "X", "Y", "strategy"):
        if key not in doc:
            raise ConfigError(f"run config missing {key!r}")
    env = _load_environment_field(doc["environment"], base)
    try:
        strategy = strategy_from_spec(doc["strategy"], env)
        cfg = GameConfig(
            env=env,
            k=int(doc["k"]),
            defender_total=rational(doc["X"]),
            attacker_total=rational(doc["Y"]),
            strategy=strategy,
            max_steps=doc.get("max_steps"),
            trace_path=trace_path or doc.get("trace"),
            trace_advantages=trace_advantages,
        )
    except (InputError, EnvironmentError_, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg, doc


def _centers_trajectory(trace_records: list[dict]) -> dict[str, list]:
    out: dict[str, list] = {}
    for record in trace_records:
        if record.get("type") == "phase" and record.get("phase") == "defender":
            for label, centers in record["platoon_centers"].items():
                out.setdefault(label, []).append(centers)
    return out


def cmd_run(args) -> int:
    out_dir = Path(args.out) if args.out else None
    trace_path = str(out_dir / "trace.jsonl") if out_dir else None
    try:
        cfg, doc = game_config_from_file(
            args.config, trace_path=trace_path, trace_advantages=args.trace_advantages
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outcome = run_parallel_subgames(cfg)
    result = {
        "result": outcome.result,
        "steps": outcome.steps,
        "win_step": outcome.win_step,
        "witness": outcome.witness,
        "trace": cfg.trace_path,
    }
    print(json.dumps(result, sort_keys=True))
    if out_dir:
        _write_sidecar(out_dir, "run", vars(args))
    expected = doc.get("expected")
    if expected:
        problems = []
        if "result" in expected and expected["result"] != outcome.result:
            problems.append(f"result {outcome.result} != expected {expected['result']}")
        if "platoon_centers" in expected and cfg.trace_path:
            from ddab.engine import read_trace

            got = _centers_trajectory(read_trace(cfg.trace_path))
            want = {k: [list(x) for x in v] for k, v in expected["platoon_centers"].items()}
            if {k: v for k, v in got.items() if k in want} != want:
                problems.append(f"platoon trajectory {got} != expected {want}")
        if problems:
            print("golden mismatch: " + "; ".join(problems), file=sys.stderr)
            return EXIT_GOLDEN_MISMATCH
    return EXIT_ATTACKER_WIN if outcome.result == ATTACKER_WIN else EXIT_OK


# -- bound-table ------------------------------------------------------------------


def bound_table_rows(path_len: int, k_max: int) -> list[tuple[int, int, str]]:
    rows = []
    saturated_at = None
    for k in range(0, k_max + 1):
        units = required_units(path_len, k)
        note = ""
        if units == 3 and saturated_at is None:
            saturated_at = k
        if saturated_at is not None and k >= saturated_at:
            note = "saturated: one platoon covers the path"
        rows.append((k, units, note))
    return rows


def cmd_bound_table(args) -> int:
    if args.path_len < 3:
        print("path length must be at least 3", file=sys.stderr)
        return EXIT_CONFIG
    rows = bound_table_rows(args.path_len, args.k_max)
    lines = ["k,required_defender_assets,note"]
    lines += [f"{k},{units},{note}" for k, units, note in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        out = Path(args.out)
        _write_text(out, text)
        _write_sidecar(out.parent, "bound-table", vars(args))
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def _verify_instance(
    instance_id: str, corpus_seed: int, out_dir: str | None, mutation: str | None = None
) -> dict:
    from ddab.gadgets import corpus_by_id

    inst = corpus_by_id(desk_corpus(corpus_seed))[instance_id]
    bound = required_units(inst.path_len, inst.k)
    verdict: dict = {
        "instance": inst.id,
        "kind": inst.kind,
        "path_len": inst.path_len,
        "k": inst.k,
        "X": bound,
        "nodes": len(inst.env.graph.nodes),
    }
    policy_step = MUTATIONS[mutation] if mutation else None
    try:
        result = verify_sufficiency(inst.env, inst.k, bound, policy_step=policy_step)
    except StateBudgetExceeded as exc:
        verdict.update(verdict="INCONCLUSIVE", explored_states=exc.explored)
        return verdict
    verdict.update(verdict=result.verdict, explored_states=result.explored_states)
    if inst.gadget is not None:
        witness_name = f"witness-{inst.id}.jsonl"
        trace_path = str(Path(out_dir) / witness_name) if out_dir else None
        necessity = verify_necessity(inst.gadget, bound - 1, trace_path=trace_path)
        verdict["necessity_verdict"] = necessity.verdict
        verdict["necessity_X"] = bound - 1
        verdict["witness_trace_path"] = witness_name if out_dir else None
        policy = necessity.policy_outcome
        verdict["witness_win_step"] = policy.win_step if policy else None
        if trace_path and policy and policy.result == ATTACKER_WIN:
            replayed = replay(trace_path)
            verdict["witness_replay_matches"] = (
                replayed.result == policy.result and replayed.win_step == policy.win_step
            )
    return verdict


def _bracket_ok(verdict: dict) -> bool:
    if verdict["verdict"] != SAFE_CLOSED:
        return False
    if "necessity_verdict" in verdict:
        if verdict["necessity_verdict"] != ATTACKER_WINS:
            return False
        if verdict.get("witness_trace_path") and not verdict.get("witness_replay_matches"):
            return False
    return True


def cmd_verify(args) -> int:
    if args.corpus == "default":
        instances = desk_corpus(args.seed)
    else:
        doc = _read_json(args.corpus)
        if not doc.get("instances"):
            print("corpus spec lists no instances", file=sys.stderr)
            return EXIT_CONFIG
        # Restrict the default corpus to the ids named by the file.
        wanted = set(doc["instances"])
        instances = [i for i in desk_corpus(args.seed) if i.id in wanted]
        if not instances:
            print("corpus spec matched no instances", file=sys.stderr)
            return EXIT_CONFIG
    out_dir = args.out
    ids = sorted(i.id for i in instances)
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            verdicts = list(
                pool.map(
                    _verify_instance,
                    ids,
                    [args.seed] * len(ids),
                    [out_dir] * len(ids),
                    [args.mutation] * len(ids),
                )
            )
    else:
        verdicts = [_verify_instance(i, args.seed, out_dir, args.mutation) for i in ids]
    verdicts.sort(key=lambda v: v["instance"])
    failures = [v for v in verdicts if v["verdict"] not in (SAFE_CLOSED, "INCONCLUSIVE")]
    inconclusive = [v for v in verdicts if v["verdict"] == "INCONCLUSIVE"]
    bracket_failures = [v for v in verdicts if v["verdict"] != "INCONCLUSIVE" and not _bracket_ok(v)]
    report = {
        "instances": len(verdicts),
        "safe_closed": sum(1 for v in verdicts if v["verdict"] == SAFE_CLOSED),
        "bracket_failures": [v["instance"] for v in bracket_failures],
        "inconclusive": [v["instance"] for v in inconclusive],
        "verdicts": verdicts,
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_dir:
        _write_text(Path(out_dir) / "verify_report.json", text)
        _write_sidecar(Path(out_dir), "verify", vars(args))
    sys.stdout.write(text if not out_dir else f"verified {len(verdicts)} instances\n")
    for v in verdicts:
        status = "ok" if _bracket_ok(v) else v["verdict"]
        log.info("instance %s: %s", v["instance"], status)
    if inconclusive:
        return EXIT_INCONCLUSIVE
    if failures or bracket_failures:
        return EXIT_GOLDEN_MISMATCH
    return EXIT_OK


# -- gadget-gen -------------------------------------------------------------------


def cmd_gadget_gen(args) -> int:
    try:
        spec = GadgetSpec(
            path_len=args.path_len,
            k=args.k,
            alpha=args.alpha,
            chain_len=args.chain_len,
            outer_ring=args.ring,
        )
        env = build_gadget(spec)
    except InputError as exc:
        print(f"invalid gadget: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    doc = environment_to_dict(env)
    doc["gadget"] = {
        "alpha": spec.alpha,
        "k": spec.k,
        "required_assets": rational_str(required_assets(spec.path_len, spec.k, 1)),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- replay ------------------------------------------------------------------------


def cmd_replay(args) -> int:
    try:
        outcome = replay(args.trace)
    except (ReplayCorruptionError, FileNotFoundError, InputError) as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return EXIT_GOLDEN_MISMATCH
    print(
        json.dumps(
            {
                "result": outcome.result,
                "steps": outcome.steps,
                "win_step": outcome.win_step,
                "witness": outcome.witness,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


# -- serve --------------------------------------------------------------------------


def cmd_serve(args) -> int:
    from ddab.server import serve_forever

    serve_forever(host=args.host, port=args.port, ui_dir=args.ui_dir)
    return EXIT_OK


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddab",
        description="Path-guarding games on graphs: engine, defense policy, verifier.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="play one configured game")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="directory for trace + sidecar")
    p.add_argument("--trace-advantages", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bound-table", help="required assets per sensing distance")
    p.add_argument("--path-len", type=int, required=True)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound_table)

    p = sub.add_parser("verify", help="run the sufficiency/necessity bracket suite")
    p.add_argument("--corpus", default="default", help="'default' or a JSON file naming instance ids")
    p.add_argument("--out", help="directory for verdicts and witness traces")
    p.add_argument("--seed", type=int, default=987)
    p.add_argument("--jobs", type=int, default=0, help="0 = available parallelism")
    p.add_argument(
        "--mutation",
        choices=sorted(MUTATIONS),
        default=None,
        help="negative control: run the bracket against a crippled defender rule",
    )
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gadget-gen", help="emit a worst-case gadget environment")
    p.add_argument("--path-len", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=int, required=True)
    p.add_argument("--chain-len", type=int, default=None)
    p.add_argument("--ring", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gadget_gen)

    p = sub.add_parser("replay", help="re-execute and check a trace")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="serve the interactive play protocol")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--ui-dir", default=None, help="static UI bundle directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("DDAB_LOG", "WARNING").upper())
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
