"""Tactical action catalogue shared by the match engine, dynamics, and rewards."""

from dataclasses import dataclass
from enum import Enum


class Phase(Enum):
    SERVE = "serve"
    RETURN = "return"
    RALLY = "rally"


@dataclass(frozen=True)
class Action:
    id: int
    name: str
    phase: Phase


ACTIONS: tuple[Action, ...] = (
    Action(0, "serve_flat_wide", Phase.SERVE),
    Action(1, "serve_flat_T", Phase.SERVE),
    Action(2, "serve_kick_body", Phase.SERVE),
    Action(3, "return_aggressive", Phase.RETURN),
    Action(4, "return_neutral", Phase.RETURN),
    Action(5, "return_block", Phase.RETURN),
    Action(6, "rally_aggressive", Phase.RALLY),
    Action(7, "rally_neutral", Phase.RALLY),
    Action(8, "approach_net", Phase.RALLY),
    Action(9, "defensive_lob", Phase.RALLY),
)

N_ACTIONS = len(ACTIONS)

ACTION_BY_NAME = {a.name: a for a in ACTIONS}

SERVE_ACTIONS = frozenset(a.id for a in ACTIONS if a.phase is Phase.SERVE)
RETURN_ACTIONS = frozenset(a.id for a in ACTIONS if a.phase is Phase.RETURN)
RALLY_ACTIONS = frozenset(a.id for a in ACTIONS if a.phase is Phase.RALLY)

# High-risk shot choices; these drive the aggressive reward bonus and offset.
AGGRESSIVE_ACTIONS = frozenset({0, 1, 3, 6, 8})


def action_name(action_id: int) -> str:
    return ACTIONS[action_id].name


def action_phase(action_id: int) -> Phase:
    return ACTIONS[action_id].phase
