"""Tennis strategy reinforcement learning: simulator, agent, training, analytics."""

from .actions import ACTIONS, AGGRESSIVE_ACTIONS, Phase
from .agent import Agent, AgentConfig, ReplayBuffer, select_action
from .dynamics import (
    BASE_OUTCOMES,
    OutcomeTriple,
    PointEvent,
    contextual_outcome,
    sample_outcome,
)
from .evaluation import EvalReport, evaluate, skill_sweep
from .match import (
    MatchConfig,
    MatchState,
    StepResult,
    TennisMatchEnv,
    encode_state,
    valid_actions,
)
from .rewards import RewardConfig, RewardContext
from .training import TrainConfig, curriculum_skill, epsilon_at, train

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "AGGRESSIVE_ACTIONS",
    "Agent",
    "AgentConfig",
    "BASE_OUTCOMES",
    "EvalReport",
    "MatchConfig",
    "MatchState",
    "OutcomeTriple",
    "Phase",
    "PointEvent",
    "ReplayBuffer",
    "RewardConfig",
    "RewardContext",
    "StepResult",
    "TennisMatchEnv",
    "TrainConfig",
    "contextual_outcome",
    "curriculum_skill",
    "encode_state",
    "epsilon_at",
    "evaluate",
    "sample_outcome",
    "select_action",
    "skill_sweep",
    "train",
    "valid_actions",
]
