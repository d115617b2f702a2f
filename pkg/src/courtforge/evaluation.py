"""Greedy match evaluation, skill sweeps, and tactical usage reports.

Evaluation plays full matches with exploration off and aggregates per
match logs: outcomes, rewards, lengths, per-point server and winner, and
action usage split by phase. Match logs persist as JSON lines so reports
can be recomputed later without replaying anything.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .actions import ACTION_BY_NAME, ACTIONS, Phase, action_name
from .agent import select_action
from .match import MatchConfig, TennisMatchEnv, ValidationError
from .rewards import DEFAULT_REWARDS, RewardConfig

DEFAULT_SWEEP_SKILLS = (0.35, 0.40, 0.45, 0.50, 0.55)

# Reference defensive-play shares from the original experiments, used only
# for informational deltas in the bias report (never asserted).
REFERENCE_DEFENSIVE_SHARES = {
    0.35: (0.951, 0.605),
    0.40: (0.946, 0.634),
    0.45: (0.945, 0.624),
    0.50: (0.937, 0.636),
    0.55: (0.943, 0.607),
}

REPORT_VERSION = 1


@dataclass
class MatchRecord:
    match_index: int
    skill: float
    win: bool
    truncated: bool
    reward: float
    steps: int
    points: list = field(default_factory=list)  # (server_is_agent, agent_won_point)
    action_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "match": self.match_index,
            "skill": self.skill,
            "win": self.win,
            "truncated": self.truncated,
            "reward": self.reward,
            "steps": self.steps,
            "points": [[bool(s), bool(w)] for s, w in self.points],
            "actions": dict(self.action_counts),
        }

    @staticmethod
    def from_dict(data: dict) -> "MatchRecord":
        return MatchRecord(
            match_index=int(data["match"]),
            skill=float(data["skill"]),
            win=bool(data["win"]),
            truncated=bool(data["truncated"]),
            reward=float(data["reward"]),
            steps=int(data["steps"]),
            points=[(bool(s), bool(w)) for s, w in data["points"]],
            action_counts={k: int(v) for k, v in data["actions"].items()},
        )


@dataclass
class EvalReport:
    skill: float
    matches: int
    wins: int
    win_rate: float
    reward_mean: float
    reward_std: float
    length_mean: float
    truncated: int
    serve_points: int
    serve_points_won: int
    serve_win_pct: Optional[float]
    return_points: int
    return_points_won: int
    return_win_pct: Optional[float]
    action_counts: dict
    phase_proportions: dict

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def play_match(
    agent,
    skill: float,
    rng: np.random.Generator,
    match_index: int = 0,
    best_of: int = 3,
    max_steps: int = 750,
    rewards: RewardConfig = DEFAULT_REWARDS,
) -> MatchRecord:
    """One full match under the greedy policy; returns its log."""
    env = TennisMatchEnv(
        MatchConfig(
            opponent_skill=skill, best_of=best_of, max_steps=max_steps, rewards=rewards
        ),
        rng=rng,
    )
    vec = env.reset()
    greedy_rng = np.random.default_rng(0)  # untouched at epsilon 0
    points = []
    counts: Counter = Counter()
    total_reward = 0.0
    steps = 0
    while True:
        action = select_action(agent.q_values(vec), env.valid_actions(), 0.0, greedy_rng)
        counts[action_name(action)] += 1
        result = env.step(action)
        total_reward += result.reward
        steps += 1
        if "point_winner" in result.info:
            points.append(
                (result.info["server"] == "agent", result.info["point_winner"] == "agent")
            )
        vec = result.state_vec
        if result.done:
            return MatchRecord(
                match_index=match_index,
                skill=skill,
                win=result.info["winner"] == "agent",
                truncated=bool(result.info.get("truncated", False)),
                reward=total_reward,
                steps=steps,
                points=points,
                action_counts=dict(counts),
            )


def _skill_offset(skill: float) -> int:
    return int(round(skill * 1000))


def run_matches(
    agent,
    skill: float,
    n_matches: int,
    seed: int,
    best_of: int = 3,
    max_steps: int = 750,
    rewards: RewardConfig = DEFAULT_REWARDS,
) -> list:
    """Independent matches with per-match RNG streams derived from the master seed."""
    if n_matches < 1:
        raise ValidationError(f"n_matches must be positive, got {n_matches}")
    records = []
    for index in range(n_matches):
        rng = np.random.default_rng(
            np.random.SeedSequence((seed, _skill_offset(skill), index))
        )
        records.append(
            play_match(
                agent,
                skill,
                rng,
                match_index=index,
                best_of=best_of,
                max_steps=max_steps,
                rewards=rewards,
            )
        )
    return records


def serve_return_stats(records) -> tuple:
    """Point win fractions on serve and on return; None when never in that role."""
    serve_total = serve_won = return_total = return_won = 0
    for record in records:
        for server_is_agent, agent_won in record.points:
            if server_is_agent:
                serve_total += 1
                serve_won += int(agent_won)
            else:
                return_total += 1
                return_won += int(agent_won)
    serve_pct = serve_won / serve_total if serve_total else None
    return_pct = return_won / return_total if return_total else None
    return serve_pct, return_pct, serve_total, serve_won, return_total, return_won


def aggregate_report(records) -> EvalReport:
    """Fold match logs for one skill level into a report."""
    if not records:
        raise ValidationError("cannot aggregate an empty record list")
    skills = {record.skill for record in records}
    if len(skills) != 1:
        raise ValidationError(f"records span multiple skills {sorted(skills)}")
    rewards = np.array([record.reward for record in records], dtype=np.float64)
    lengths = np.array([record.steps for record in records], dtype=np.float64)
    wins = sum(record.win for record in records)
    serve_pct, return_pct, serve_total, serve_won, return_total, return_won = (
        serve_return_stats(records)
    )
    counts: Counter = Counter()
    for record in records:
        counts.update(record.action_counts)
    proportions: dict = {}
    for phase in Phase:
        phase_actions = [a.name for a in ACTIONS if a.phase is phase]
        total = sum(counts.get(name, 0) for name in phase_actions)
        if total:
            proportions[phase.value] = {
                name: counts.get(name, 0) / total for name in phase_actions
            }
    return EvalReport(
        skill=records[0].skill,
        matches=len(records),
        wins=wins,
        win_rate=wins / len(records),
        reward_mean=float(rewards.mean()),
        reward_std=float(rewards.std()),
        length_mean=float(lengths.mean()),
        truncated=sum(record.truncated for record in records),
        serve_points=serve_total,
        serve_points_won=serve_won,
        serve_win_pct=serve_pct,
        return_points=return_total,
        return_points_won=return_won,
        return_win_pct=return_pct,
        action_counts={name: counts.get(name, 0) for name in sorted(ACTION_BY_NAME)},
        phase_proportions=proportions,
    )


def evaluate(
    agent,
    skill: float,
    n_matches: int,
    seed: int,
    best_of: int = 3,
    max_steps: int = 750,
    rewards: RewardConfig = DEFAULT_REWARDS,
) -> EvalReport:
    """Greedy evaluation at one skill level."""
    return aggregate_report(
        run_matches(agent, skill, n_matches, seed, best_of, max_steps, rewards)
    )


def skill_sweep(
    agent,
    skills=DEFAULT_SWEEP_SKILLS,
    n_matches: int = 50,
    seed: int = 0,
    best_of: int = 3,
    max_steps: int = 750,
    rewards: RewardConfig = DEFAULT_REWARDS,
):
    """Evaluate across opponent skills; returns (reports, all match records)."""
    reports = []
    records = []
    for skill in skills:
        skill_records = run_matches(agent, skill, n_matches, seed, best_of, max_steps, rewards)
        records.extend(skill_records)
        reports.append(aggregate_report(skill_records))
    return reports, records


# ---------------------------------------------------------------------------
# defensive play shares
# ---------------------------------------------------------------------------


def defensive_bias_report(reports) -> dict:
    """Share of blocks among returns and lobs among rally shots, per skill.

    Reference shares are attached as informational deltas where a matching
    skill level exists; nothing here is a pass/fail judgement.
    """
    out = {}
    for report in reports:
        counts = report.action_counts
        returns = sum(counts.get(a.name, 0) for a in ACTIONS if a.phase is Phase.RETURN)
        rallies = sum(counts.get(a.name, 0) for a in ACTIONS if a.phase is Phase.RALLY)
        block_share = counts.get("return_block", 0) / returns if returns else None
        lob_share = counts.get("defensive_lob", 0) / rallies if rallies else None
        entry = {
            "return_block_share": block_share,
            "defensive_lob_share": lob_share,
            "reference_return_block_share": None,
            "reference_defensive_lob_share": None,
            "return_block_delta": None,
            "defensive_lob_delta": None,
        }
        reference = REFERENCE_DEFENSIVE_SHARES.get(round(report.skill, 2))
        if reference is not None:
            ref_block, ref_lob = reference
            entry["reference_return_block_share"] = ref_block
            entry["reference_defensive_lob_share"] = ref_lob
            if block_share is not None:
                entry["return_block_delta"] = block_share - ref_block
            if lob_share is not None:
                entry["defensive_lob_delta"] = lob_share - ref_lob
        out[f"{report.skill:.2f}"] = entry
    return out


# ---------------------------------------------------------------------------
# report and log files
# ---------------------------------------------------------------------------


def report_payload(reports, agent_meta: Optional[dict] = None) -> dict:
    return {
        "version": REPORT_VERSION,
        "agent_meta": dict(agent_meta or {}),
        "per_skill": [report.to_dict() for report in sorted(reports, key=lambda r: r.skill)],
    }


def emit_report(reports, path, fmt: str = "json", agent_meta: Optional[dict] = None) -> None:
    """Write reports as a JSON document or a flat (skill, metric, value) CSV."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report_payload(reports, agent_meta), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("skill,metric,value\n")
            for report in sorted(reports, key=lambda r: r.skill):
                for metric, value in _flat_metrics(report):
                    fh.write(f"{report.skill:.4f},{metric},{_csv_value(value)}\n")
    else:
        raise ValidationError(f"unknown report format {fmt!r}")


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _flat_metrics(report: EvalReport):
    for name in (
        "matches",
        "wins",
        "win_rate",
        "reward_mean",
        "reward_std",
        "length_mean",
        "truncated",
        "serve_points",
        "serve_points_won",
        "serve_win_pct",
        "return_points",
        "return_points_won",
        "return_win_pct",
    ):
        yield name, getattr(report, name)
    for action, count in sorted(report.action_counts.items()):
        yield f"count.{action}", count
    for phase, mapping in sorted(report.phase_proportions.items()):
        for action, share in sorted(mapping.items()):
            yield f"share.{phase}.{action}", share


def read_report_csv(path) -> dict:
    """Parse a flat report CSV back into {(skill, metric): value}."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "skill,metric,value":
            raise ValidationError(f"unexpected report CSV header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            skill_text, metric, value_text = line.split(",", 2)
            value = None if value_text == "" else float(value_text)
            out[(skill_text, metric)] = value
    return out


def save_match_logs(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True))
            fh.write("\n")


def load_match_logs(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(MatchRecord.from_dict(json.loads(line)))
    return records


def reports_from_logs(records) -> list:
    """Recompute per-skill reports from stored match logs."""
    by_skill: dict = {}
    for record in records:
        by_skill.setdefault(record.skill, []).append(record)
    return [aggregate_report(group) for _, group in sorted(by_skill.items())]
