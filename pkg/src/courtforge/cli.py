"""Command line interface: train, eval, sweep, ablate, analyze.

Config resolution is layered: built-in defaults, then a key=value config
file, then repeated --set overrides. Every successful run writes a
manifest of the fully resolved configuration (itself a loadable config
file) so results can be reproduced from the output directory alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .agent import VARIANT_DUELING, VARIANT_VANILLA, Agent
from .evaluation import (
    DEFAULT_SWEEP_SKILLS,
    defensive_bias_report,
    emit_report,
    evaluate,
    load_match_logs,
    report_payload,
    reports_from_logs,
    run_matches,
    save_match_logs,
    skill_sweep,
)
from .match import ValidationError
from .nn import CheckpointError
from .training import (
    TrainConfig,
    apply_config_entries,
    config_hash,
    config_text,
    train,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

OUT_ENV_VAR = "COURTFORGE_OUT"


class _Parser(argparse.ArgumentParser):
    # Flag errors should surface as validation failures, not argparse's exit(2).
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="courtforge", description="Tennis strategy RL workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, checkpoint=False):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./runs)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config override, repeatable",
        )
        if checkpoint:
            p.add_argument("--checkpoint", required=True, help="agent checkpoint to load")

    p_train = sub.add_parser("train", help="train an agent")
    add_common(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint at one skill")
    add_common(p_eval, checkpoint=True)
    p_eval.add_argument("--skill", type=float, default=0.50)
    p_eval.add_argument("--matches", type=int, default=100)

    p_sweep = sub.add_parser("sweep", help="evaluate a checkpoint across skills")
    add_common(p_sweep, checkpoint=True)
    p_sweep.add_argument("--skill", type=float, default=None, help="single skill instead of the sweep list")
    p_sweep.add_argument("--matches", type=int, default=50)

    p_ablate = sub.add_parser("ablate", help="train and compare both agent variants")
    add_common(p_ablate)
    p_ablate.add_argument("--skill", type=float, default=0.50)
    p_ablate.add_argument("--matches", type=int, default=100)

    p_analyze = sub.add_parser("analyze", help="recompute reports from stored match logs")
    p_analyze.add_argument("logs", nargs="+", help="match log files (.jsonl)")
    p_analyze.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./runs)")

    return parser


def resolve_out_dir(args) -> Path:
    out = getattr(args, "out", None) or os.environ.get(OUT_ENV_VAR) or "runs"
    return Path(out)


def read_config_file(path) -> dict:
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValidationError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                entries[key.strip()] = value.strip()
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}")
    return entries


def parse_overrides(pairs) -> dict:
    entries = {}
    for pair in pairs:
        if "=" not in pair:
            raise ValidationError(f"--set expects KEY=VALUE, got {pair!r}")
        key, value = pair.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def resolve_config(config_path, overrides, seed=None, out_dir=None) -> TrainConfig:
    """Defaults, then the config file, then --set overrides, then direct flags."""
    config = TrainConfig()
    entries = {}
    if config_path:
        entries.update(read_config_file(config_path))
    entries.update(parse_overrides(overrides))
    config = apply_config_entries(config, entries)
    if seed is not None:
        config = replace(config, seed=seed)
    if out_dir is not None:
        config = replace(config, out_dir=str(out_dir))
    config.check()
    return config


def write_manifest(out_dir: Path, command: str, body: str, digest: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# courtforge {command} manifest\n")
        fh.write(f"# config_hash: {digest}\n")
        fh.write(body)
    return path


def _manifest_for_params(params: dict) -> tuple:
    body = "".join(f"{key}={value}\n" for key, value in sorted(params.items()))
    return body, hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]


def _load_agent(path) -> tuple:
    if not Path(path).exists():
        raise ValidationError(f"checkpoint not found: {path}")
    return Agent.load(path)


def _agent_meta(header: dict, checkpoint) -> dict:
    return {
        "variant": header.get("config", {}).get("variant", "unknown"),
        "episode": header.get("episode"),
        "config_hash": header.get("config_hash"),
        "checkpoint": str(checkpoint),
    }


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_train(args) -> int:
    out_dir = resolve_out_dir(args)
    config = resolve_config(args.config, args.overrides, args.seed, out_dir)
    write_manifest(out_dir, "train", config_text(config), config_hash(config))
    result = train(config)
    if result.metrics:
        last = result.metrics[-1]
        print(
            f"trained {len(result.metrics)} episodes; "
            f"rolling win rate {last.rolling_win_rate:.3f}"
        )
    else:
        print("trained 0 episodes")
    if result.checkpoint_path is not None:
        print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics: {out_dir / 'metrics.csv'}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    out_dir = resolve_out_dir(args)
    seed = args.seed if args.seed is not None else 0
    agent, header = _load_agent(args.checkpoint)
    params = {
        "checkpoint": args.checkpoint,
        "skill": args.skill,
        "matches": args.matches,
        "seed": seed,
    }
    body, digest = _manifest_for_params(params)
    write_manifest(out_dir, "eval", body, digest)
    records = run_matches(agent, args.skill, args.matches, seed)
    from .evaluation import aggregate_report

    report = aggregate_report(records)
    meta = _agent_meta(header, args.checkpoint)
    save_match_logs(records, out_dir / "match_logs.jsonl")
    emit_report([report], out_dir / "report.json", "json", meta)
    emit_report([report], out_dir / "report.csv", "csv", meta)
    print(
        f"skill {args.skill:.2f}: win rate {report.win_rate:.3f} "
        f"({report.wins}/{report.matches}), mean reward {report.reward_mean:.2f}, "
        f"mean length {report.length_mean:.1f}"
    )
    print(f"report: {out_dir / 'report.json'}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    out_dir = resolve_out_dir(args)
    seed = args.seed if args.seed is not None else 0
    agent, header = _load_agent(args.checkpoint)
    skills = (args.skill,) if args.skill is not None else DEFAULT_SWEEP_SKILLS
    params = {
        "checkpoint": args.checkpoint,
        "skills": ",".join(f"{s:.2f}" for s in skills),
        "matches": args.matches,
        "seed": seed,
    }
    body, digest = _manifest_for_params(params)
    write_manifest(out_dir, "sweep", body, digest)
    reports, records = skill_sweep(agent, skills, args.matches, seed)
    meta = _agent_meta(header, args.checkpoint)
    save_match_logs(records, out_dir / "match_logs.jsonl")
    emit_report(reports, out_dir / "report.json", "json", meta)
    emit_report(reports, out_dir / "report.csv", "csv", meta)
    bias = defensive_bias_report(reports)
    with open(out_dir / "defensive_bias.json", "w", encoding="utf-8") as fh:
        json.dump(bias, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for report in reports:
        serve = f"{report.serve_win_pct:.3f}" if report.serve_win_pct is not None else "n/a"
        print(
            f"skill {report.skill:.2f}: win rate {report.win_rate:.3f}, "
            f"mean length {report.length_mean:.1f}, serve point win {serve}"
        )
    print(f"report: {out_dir / 'report.json'}")
    return EXIT_OK


def _cmd_ablate(args) -> int:
    out_dir = resolve_out_dir(args)
    base = resolve_config(args.config, args.overrides, args.seed, out_dir)
    write_manifest(out_dir, "ablate", config_text(base), config_hash(base))
    results = {}
    for variant in (VARIANT_DUELING, VARIANT_VANILLA):
        config = replace(
            base,
            agent=replace(base.agent, variant=variant),
            out_dir=str(out_dir / variant),
        )
        print(f"training {variant} ...")
        outcome = train(config)
        report = evaluate(outcome.agent, args.skill, args.matches, seed=base.seed)
        results[variant] = report
        print(
            f"{variant}: win rate {report.win_rate:.3f} "
            f"({report.wins}/{report.matches}) at skill {args.skill:.2f}"
        )
    gap = results[VARIANT_DUELING].win_rate - results[VARIANT_VANILLA].win_rate
    payload = {
        "version": 1,
        "skill": args.skill,
        "matches": args.matches,
        "seed": base.seed,
        "config_hash": config_hash(base),
        VARIANT_DUELING: results[VARIANT_DUELING].to_dict(),
        VARIANT_VANILLA: results[VARIANT_VANILLA].to_dict(),
        "win_rate_gap": gap,
    }
    with open(out_dir / "ablation.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"win rate gap (dueling - vanilla): {gap:+.3f}")
    print(f"ablation report: {out_dir / 'ablation.json'}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    out_dir = resolve_out_dir(args)
    records = []
    for path in args.logs:
        if not Path(path).exists():
            raise ValidationError(f"match log not found: {path}")
        records.extend(load_match_logs(path))
    if not records:
        raise ValidationError("no match records in the given logs")
    reports = reports_from_logs(records)
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_report(reports, out_dir / "report.json", "json", {"source": "match-logs"})
    emit_report(reports, out_dir / "report.csv", "csv")
    bias = defensive_bias_report(reports)
    with open(out_dir / "defensive_bias.json", "w", encoding="utf-8") as fh:
        json.dump(bias, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for report in reports:
        print(
            f"skill {report.skill:.2f}: {report.matches} matches, "
            f"win rate {report.win_rate:.3f}"
        )
    print(f"report: {out_dir / 'report.json'}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "ablate": _cmd_ablate,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (ValidationError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
