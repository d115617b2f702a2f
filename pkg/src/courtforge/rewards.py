"""Reward model for point events.

Won points earn a base reward plus additive bonuses for pressure points,
breaks, holds, long rallies, and aggressive winners. Lost points carry a
fixed penalty softened slightly when the agent was at least playing an
aggressive shot. Every continuing shot earns a small positive reward, and
episodes cut off at the step limit take an extra penalty on the final step.
"""

from dataclasses import dataclass

from .actions import AGGRESSIVE_ACTIONS
from .dynamics import PointEvent


@dataclass(frozen=True)
class RewardConfig:
    point_win: float = 1.0
    point_loss: float = -1.0
    critical_bonus: float = 0.7
    break_bonus: float = 0.8
    hold_bonus: float = 0.3
    long_rally_bonus: float = 0.4
    long_rally_shots: int = 6
    aggressive_bonus: float = 0.4
    aggressive_loss_offset: float = 0.2
    continuation: float = 0.05
    truncation_penalty: float = -2.0


DEFAULT_REWARDS = RewardConfig()


@dataclass(frozen=True)
class RewardContext:
    """What happened on the shot that ended (or continued) the point.

    ``rally_len`` is the number of shots already played in the point when
    the action was taken. The game-point and break-point flags describe
    the point as it stood before the outcome; the hold and break flags are
    set only when the point actually concluded a game.
    """

    event: PointEvent
    action: int
    rally_len: int
    is_game_point: bool = False
    is_break_point: bool = False
    held_serve: bool = False
    broke_serve: bool = False


def point_won_reward(ctx: RewardContext, config: RewardConfig = DEFAULT_REWARDS) -> float:
    reward = config.point_win
    if ctx.is_game_point or ctx.is_break_point:
        reward += config.critical_bonus
    if ctx.broke_serve:
        reward += config.break_bonus
    if ctx.held_serve:
        reward += config.hold_bonus
    if ctx.rally_len > config.long_rally_shots:
        reward += config.long_rally_bonus
    if ctx.action in AGGRESSIVE_ACTIONS:
        reward += config.aggressive_bonus
    return reward


def point_lost_reward(ctx: RewardContext, config: RewardConfig = DEFAULT_REWARDS) -> float:
    reward = config.point_loss
    if ctx.action in AGGRESSIVE_ACTIONS:
        reward += config.aggressive_loss_offset
    return reward


def continuation_reward(config: RewardConfig = DEFAULT_REWARDS) -> float:
    return config.continuation


def truncation_penalty(config: RewardConfig = DEFAULT_REWARDS) -> float:
    return config.truncation_penalty


def step_reward(ctx: RewardContext, config: RewardConfig = DEFAULT_REWARDS) -> float:
    """Reward for one resolved shot, before any truncation penalty."""
    if ctx.event is PointEvent.AGENT_WINS:
        return point_won_reward(ctx, config)
    if ctx.event is PointEvent.AGENT_LOSES:
        return point_lost_reward(ctx, config)
    return continuation_reward(config)
