"""Episode loop: curriculum difficulty, exploration decay, logging, checkpoints.

Training is deterministic for a fixed seed. The network is initialised
from one seed-derived stream, and every episode draws three fresh child
streams (environment, action selection, replay sampling) keyed by the
master seed and the episode index, so a run resumed from a checkpoint
replays exactly as an unbroken one.
"""

from __future__ import annotations

import csv
import hashlib
import json
from collections import deque
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .agent import Agent, AgentConfig
from .match import MatchConfig, TennisMatchEnv, ValidationError
from .rewards import RewardConfig

ROLLING_WINDOW = 100

DEFAULT_SCHEDULE = ((0, 0.40), (400, 0.44), (800, 0.47), (1200, 0.50))


@dataclass
class TrainConfig:
    episodes: int = 1500
    max_steps: int = 750
    best_of: int = 3
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.01
    epsilon_decay: float = 0.9975
    seed: int = 1
    schedule: tuple = DEFAULT_SCHEDULE
    checkpoint_every: int = 100
    eval_every: int = 0
    eval_matches: int = 20
    out_dir: Optional[str] = "runs"
    agent: AgentConfig = field(default_factory=AgentConfig)
    rewards: RewardConfig = field(default_factory=RewardConfig)

    def check(self) -> None:
        if self.episodes < 0:
            raise ValidationError(f"episodes must be >= 0, got {self.episodes}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be positive, got {self.max_steps}")
        if self.best_of not in (1, 3):
            raise ValidationError(f"best_of must be 1 or 3, got {self.best_of}")
        if not 0.0 < self.epsilon_decay < 1.0:
            raise ValidationError(f"epsilon_decay must be in (0, 1), got {self.epsilon_decay}")
        if not 0.0 <= self.epsilon_floor <= self.epsilon_start:
            raise ValidationError(
                f"epsilon_floor {self.epsilon_floor} must be in [0, epsilon_start]"
            )
        if self.epsilon_start > 1.0:
            raise ValidationError(f"epsilon_start must be <= 1, got {self.epsilon_start}")
        if not self.schedule:
            raise ValidationError("schedule must have at least one phase")
        starts = [ep for ep, _ in self.schedule]
        if starts[0] != 0:
            raise ValidationError("first schedule phase must start at episode 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValidationError("schedule phase starts must be strictly increasing")
        bounds = MatchConfig()
        for _, skill in self.schedule:
            if not bounds.skill_min <= skill <= bounds.skill_max:
                raise ValidationError(
                    f"schedule skill {skill} outside [{bounds.skill_min}, {bounds.skill_max}]"
                )
        if self.checkpoint_every < 0 or self.eval_every < 0:
            raise ValidationError("checkpoint_every/eval_every must be >= 0")
        if self.eval_matches < 1:
            raise ValidationError("eval_matches must be positive")
        self.agent.check()


def curriculum_skill(schedule, episode: int) -> float:
    """Skill of the last phase whose start is at or before the episode."""
    skill = schedule[0][1]
    for start, phase_skill in schedule:
        if episode >= start:
            skill = phase_skill
        else:
            break
    return skill


def epsilon_at(config: TrainConfig, episode: int) -> float:
    """Exploration rate for an episode: exponential decay down to the floor."""
    return max(config.epsilon_floor, config.epsilon_start * config.epsilon_decay**episode)


@dataclass
class EpisodeMetrics:
    episode: int
    skill: float
    epsilon: float
    reward: float
    steps: int
    win: bool
    mean_loss: float
    rolling_win_rate: float


METRIC_COLUMNS = [f.name for f in fields(EpisodeMetrics)]


@dataclass
class TrainResult:
    agent: Agent
    metrics: list
    checkpoint_path: Optional[Path]
    start_episode: int = 0


def _episode_streams(seed: int, episode: int):
    children = np.random.SeedSequence((seed, 1, episode)).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def run_episode(agent: Agent, env: TennisMatchEnv, epsilon: float, act_rng, learn_rng):
    """Play one match, learning after every step once the buffer is warm."""
    vec = env.reset()
    total_reward = 0.0
    losses = []
    steps = 0
    while True:
        action = agent.act(vec, env.valid_actions(), epsilon, act_rng)
        result = env.step(action)
        agent.buffer.push(vec, action, result.reward, result.state_vec, result.done)
        loss = agent.learn_step(learn_rng)
        if loss is not None:
            losses.append(loss)
        total_reward += result.reward
        steps += 1
        vec = result.state_vec
        if result.done:
            return total_reward, steps, result.info, losses


def train(
    config: TrainConfig,
    resume_from=None,
    log: Optional[Callable[[EpisodeMetrics], None]] = None,
) -> TrainResult:
    """Run the training loop; returns the agent, per-episode metrics, and checkpoint path."""
    config.check()
    out = Path(config.out_dir) if config.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    recent = deque(maxlen=ROLLING_WINDOW)
    start_episode = 0
    if resume_from is not None:
        agent, header = Agent.load(resume_from, expected_variant=config.agent.variant)
        if agent.config != config.agent:
            raise ValidationError("checkpoint agent config does not match the train config")
        start_episode = int(header.get("episode", 0))
        recent.extend(bool(w) for w in header.get("recent_wins", []))
    else:
        init_rng = np.random.default_rng(np.random.SeedSequence((config.seed, 0)))
        agent = Agent(config.agent, init_rng)

    def checkpoint_extra():
        return {"recent_wins": [int(w) for w in recent], "config_hash": config_hash(config)}

    metrics: list[EpisodeMetrics] = []
    for episode in range(start_episode, config.episodes):
        skill = curriculum_skill(config.schedule, episode)
        epsilon = epsilon_at(config, episode)
        env_rng, act_rng, learn_rng = _episode_streams(config.seed, episode)
        env = TennisMatchEnv(
            MatchConfig(
                opponent_skill=skill,
                best_of=config.best_of,
                max_steps=config.max_steps,
                rewards=config.rewards,
            ),
            rng=env_rng,
        )
        total_reward, steps, info, losses = run_episode(agent, env, epsilon, act_rng, learn_rng)
        win = info["winner"] == "agent"
        recent.append(win)
        if (episode + 1) % config.agent.target_update_episodes == 0:
            agent.hard_update_target()
        row = EpisodeMetrics(
            episode=episode,
            skill=skill,
            epsilon=epsilon,
            reward=total_reward,
            steps=steps,
            win=win,
            mean_loss=float(np.mean(losses)) if losses else 0.0,
            rolling_win_rate=sum(recent) / len(recent),
        )
        metrics.append(row)
        if log is not None:
            log(row)
        done_count = episode + 1
        if out is not None and config.checkpoint_every and done_count < config.episodes:
            if done_count % config.checkpoint_every == 0:
                agent.save(
                    out / f"agent_ep{done_count:05d}.ckpt",
                    episode=done_count,
                    extra=checkpoint_extra(),
                )
        if out is not None and config.eval_every and done_count % config.eval_every == 0:
            _periodic_eval(agent, config, skill, done_count, out)

    checkpoint_path = None
    if out is not None and config.episodes > start_episode:
        checkpoint_path = out / "agent_final.ckpt"
        agent.save(checkpoint_path, episode=config.episodes, extra=checkpoint_extra())
    if out is not None:
        save_metrics(metrics, out / "metrics.csv")
    return TrainResult(agent, metrics, checkpoint_path, start_episode)


def _periodic_eval(agent: Agent, config: TrainConfig, skill: float, episode: int, out: Path):
    from .evaluation import evaluate

    report = evaluate(
        agent,
        skill,
        config.eval_matches,
        seed=int(np.random.SeedSequence((config.seed, 2, episode)).generate_state(1)[0]),
        best_of=config.best_of,
        max_steps=config.max_steps,
        rewards=config.rewards,
    )
    with open(out / f"eval_ep{episode:05d}.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)


def load_checkpoint(path, expected_variant: Optional[str] = None):
    """Open an agent checkpoint; returns (agent, header dict)."""
    return Agent.load(path, expected_variant=expected_variant)


# ---------------------------------------------------------------------------
# metrics files
# ---------------------------------------------------------------------------


def save_metrics(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.episode,
                    repr(row.skill),
                    repr(row.epsilon),
                    repr(row.reward),
                    row.steps,
                    int(row.win),
                    repr(row.mean_loss),
                    repr(row.rolling_win_rate),
                ]
            )


def load_metrics(path) -> list:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRIC_COLUMNS:
            raise ValidationError(f"unexpected metrics columns {reader.fieldnames}")
        for record in reader:
            rows.append(
                EpisodeMetrics(
                    episode=int(record["episode"]),
                    skill=float(record["skill"]),
                    epsilon=float(record["epsilon"]),
                    reward=float(record["reward"]),
                    steps=int(record["steps"]),
                    win=bool(int(record["win"])),
                    mean_loss=float(record["mean_loss"]),
                    rolling_win_rate=float(record["rolling_win_rate"]),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# flat config schema (shared with the command line)
# ---------------------------------------------------------------------------

# key -> (sub-config attribute or "", field name)
CONFIG_FIELDS: dict[str, tuple[str, str]] = {}
for _f in fields(TrainConfig):
    if _f.name not in ("agent", "rewards"):
        CONFIG_FIELDS[_f.name] = ("", _f.name)
for _f in fields(AgentConfig):
    CONFIG_FIELDS[_f.name] = ("agent", _f.name)
for _f in fields(RewardConfig):
    CONFIG_FIELDS[_f.name] = ("rewards", _f.name)


def format_schedule(schedule) -> str:
    return ",".join(f"{start}:{skill}" for start, skill in schedule)


def parse_schedule(text: str):
    phases = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            start_text, skill_text = chunk.split(":")
            phases.append((int(start_text), float(skill_text)))
        except ValueError as exc:
            raise ValidationError(f"bad schedule phase {chunk!r}, expected start:skill") from exc
    if not phases:
        raise ValidationError("schedule must have at least one phase")
    return tuple(phases)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return format_schedule(value)
    if value is None:
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _parse_value(key: str, text: str, current):
    target_type = type(current)
    try:
        if key == "schedule":
            return parse_schedule(text)
        if key == "out_dir":
            return text or None
        if target_type is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"expected true/false, got {text!r}")
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ValidationError(f"bad value for {key!r}: {exc}") from exc


def config_items(config: TrainConfig) -> list:
    """Sorted (key, text value) pairs covering every field."""
    items = []
    for key, (section, name) in CONFIG_FIELDS.items():
        holder = getattr(config, section) if section else config
        items.append((key, _format_value(getattr(holder, name))))
    return sorted(items)


def config_text(config: TrainConfig) -> str:
    return "\n".join(f"{key}={value}" for key, value in config_items(config)) + "\n"


def config_hash(config: TrainConfig) -> str:
    return hashlib.sha256(config_text(config).encode("utf-8")).hexdigest()[:12]


def apply_config_entries(config: TrainConfig, entries: dict) -> TrainConfig:
    """New TrainConfig with the given flat key=value entries applied."""
    unknown = sorted(k for k in entries if k not in CONFIG_FIELDS)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    top: dict = {}
    agent: dict = {}
    rewards: dict = {}
    for key, text in entries.items():
        section, name = CONFIG_FIELDS[key]
        holder = getattr(config, section) if section else config
        value = _parse_value(key, text, getattr(holder, name))
        {"": top, "agent": agent, "rewards": rewards}[section][name] = value
    out = replace(config, **top) if top else config
    if agent:
        out = replace(out, agent=replace(out.agent, **agent))
    if rewards:
        out = replace(out, rewards=replace(out.rewards, **rewards))
    return out
