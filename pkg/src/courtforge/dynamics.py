"""Shot outcome model: base probabilities, context modifiers, and fatigue.

Each shot resolves to one of three events (agent wins the point, agent
loses the point, rally continues) drawn from a per-action base triple
scaled by the match context. Fatigue accumulates per shot and recovers
a fixed amount between points.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .actions import (
    ACTION_BY_NAME,
    ACTIONS,
    N_ACTIONS,
    RETURN_ACTIONS,
    SERVE_ACTIONS,
)


class PointEvent(Enum):
    AGENT_WINS = "agent_wins"
    AGENT_LOSES = "agent_loses"
    CONTINUE = "continue"


@dataclass(frozen=True)
class OutcomeTriple:
    """Probabilities that a shot wins the point, loses it, or keeps it going."""

    p_win: float
    p_lose: float
    p_cont: float

    def check(self) -> None:
        total = self.p_win + self.p_lose + self.p_cont
        if min(self.p_win, self.p_lose, self.p_cont) < 0.0 or abs(total - 1.0) > 1e-9:
            raise ValueError(f"invalid outcome triple {self}")


# Continuation stored explicitly so each column round-trips exactly.
_BASE_ROWS = {
    "serve_flat_wide": (0.42, 0.13, 0.45),
    "serve_flat_T": (0.40, 0.12, 0.48),
    "serve_kick_body": (0.28, 0.08, 0.64),
    "return_aggressive": (0.20, 0.18, 0.62),
    "return_neutral": (0.14, 0.10, 0.76),
    "return_block": (0.09, 0.06, 0.85),
    "rally_aggressive": (0.16, 0.15, 0.69),
    "rally_neutral": (0.09, 0.07, 0.84),
    "approach_net": (0.14, 0.13, 0.73),
    "defensive_lob": (0.06, 0.05, 0.89),
}

BASE_OUTCOMES: dict[int, OutcomeTriple] = {
    ACTION_BY_NAME[name].id: OutcomeTriple(*row) for name, row in _BASE_ROWS.items()
}

# Per-shot fatigue cost of each action.
_INTENSITY_ROWS = {
    "serve_flat_wide": 0.022,
    "serve_flat_T": 0.022,
    "serve_kick_body": 0.018,
    "return_aggressive": 0.024,
    "return_neutral": 0.020,
    "return_block": 0.016,
    "rally_aggressive": 0.028,
    "rally_neutral": 0.020,
    "approach_net": 0.030,
    "defensive_lob": 0.018,
}

ACTION_INTENSITY: dict[int, float] = {
    ACTION_BY_NAME[name].id: v for name, v in _INTENSITY_ROWS.items()
}

FATIGUE_BASE_INCREMENT = 0.020
FATIGUE_RALLY_COEFF = 0.002
FATIGUE_RECOVERY = 0.025
FATIGUE_MAX = 1.0

PROBABILITY_CEILING = 0.95


@dataclass(frozen=True)
class DynamicsTables:
    """Outcome and fatigue tables; defaults may be overridden from text files."""

    outcomes: dict[int, OutcomeTriple]
    intensities: dict[int, float]
    rally_coeff: float = FATIGUE_RALLY_COEFF
    recovery: float = FATIGUE_RECOVERY
    base_increment: float = FATIGUE_BASE_INCREMENT

    @staticmethod
    def default() -> "DynamicsTables":
        return DynamicsTables(dict(BASE_OUTCOMES), dict(ACTION_INTENSITY))

    def check(self) -> None:
        for aid in range(N_ACTIONS):
            if aid not in self.outcomes:
                raise ValueError(f"outcome table missing action {aid}")
            self.outcomes[aid].check()
            if aid not in self.intensities:
                raise ValueError(f"intensity table missing action {aid}")
            if self.intensities[aid] < 0.0:
                raise ValueError(f"negative intensity for action {aid}")


DEFAULT_TABLES = DynamicsTables.default()


@dataclass(frozen=True)
class ContextModifiers:
    """Multiplicative factors applied to the base triple for one shot."""

    skill_factor: float
    fatigue_factor: float
    pressure_factor: float
    rally_factor: float


def skill_factor(skill: float) -> float:
    return 1.0 - 0.5 * (skill - 0.5)


def fatigue_factor(f_p: float, f_o: float) -> float:
    return 1.0 - 0.3 * (f_p - f_o)


def pressure_factor(p_pts: int, o_pts: int) -> float:
    return 0.95 if p_pts >= 3 and o_pts >= 3 else 1.0


def rally_factor(rally_len: int) -> float:
    if rally_len > 15:
        return 0.95
    if rally_len > 8:
        return 0.98
    return 1.0


def context_modifiers(state, skill: float) -> ContextModifiers:
    """Modifiers for the current state of a match against a given opponent skill."""
    return ContextModifiers(
        skill_factor=skill_factor(skill),
        fatigue_factor=fatigue_factor(state.f_p, state.f_o),
        pressure_factor=pressure_factor(state.p_pts, state.o_pts),
        rally_factor=rally_factor(state.rally_len),
    )


def contextual_outcome(
    action: int, state, skill: float, tables: DynamicsTables = DEFAULT_TABLES
) -> OutcomeTriple:
    """Base triple for the action scaled by the match context.

    Win probability is scaled by all four modifiers; loss probability is
    scaled by the mirrored skill and fatigue factors. Both are capped at
    0.95, and if they jointly exceed 1 they are rescaled proportionally
    so the continuation probability is 0.
    """
    base = tables.outcomes[action]
    m = context_modifiers(state, skill)
    p_win = base.p_win * m.skill_factor * m.fatigue_factor * m.pressure_factor * m.rally_factor
    p_lose = base.p_lose * (2.0 - m.skill_factor) * (2.0 - m.fatigue_factor)
    p_win = min(max(p_win, 0.0), PROBABILITY_CEILING)
    p_lose = min(max(p_lose, 0.0), PROBABILITY_CEILING)
    total = p_win + p_lose
    if total > 1.0:
        p_win /= total
        p_lose /= total
    p_cont = max(0.0, 1.0 - p_win - p_lose)
    return OutcomeTriple(p_win, p_lose, p_cont)


def sample_outcome(triple: OutcomeTriple, rng) -> PointEvent:
    """Draw one point event from the triple using the caller's RNG stream."""
    triple.check()
    u = rng.random()
    if u < triple.p_win:
        return PointEvent.AGENT_WINS
    if u < triple.p_win + triple.p_lose:
        return PointEvent.AGENT_LOSES
    return PointEvent.CONTINUE


# ---------------------------------------------------------------------------
# fatigue
# ---------------------------------------------------------------------------


def update_fatigue(
    fatigue: float, action: int, rally_len: int, tables: DynamicsTables = DEFAULT_TABLES
) -> float:
    """One shot's fatigue cost: action intensity plus a rally-length term."""
    alpha = tables.intensities.get(action, tables.base_increment)
    return min(FATIGUE_MAX, fatigue + alpha + tables.rally_coeff * rally_len)


def recover_fatigue(fatigue: float, tables: DynamicsTables = DEFAULT_TABLES) -> float:
    """Between-point recovery, floored at zero."""
    return max(0.0, fatigue - tables.recovery)


# ---------------------------------------------------------------------------
# court position bookkeeping
# ---------------------------------------------------------------------------


def advance_tactical_state(state, action: int, rng) -> None:
    """Update court positions and ball depth for one executed action.

    Serves and returns start a fresh point pattern: both players at the
    baseline, neutral depth. Net approaches move the agent forward, lobs
    push deep and drag the opponent back, and aggressive rally shots land
    either short or deep at random.
    """
    if action in SERVE_ACTIONS or action in RETURN_ACTIONS:
        state.pos_p = 0
        state.pos_o = 0
        state.ball_depth = 1
    elif action == ACTION_BY_NAME["approach_net"].id:
        state.pos_p = 2
    elif action == ACTION_BY_NAME["defensive_lob"].id:
        state.ball_depth = 2
        state.pos_o = 0
    elif action == ACTION_BY_NAME["rally_aggressive"].id:
        state.ball_depth = 0 if rng.random() < 0.5 else 2
    # rally_neutral leaves positions unchanged


# ---------------------------------------------------------------------------
# table overrides
# ---------------------------------------------------------------------------


def _data_lines(path) -> list[list[str]]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(line.split())
    return rows


def load_outcome_table(path, base: dict[int, OutcomeTriple] | None = None) -> dict[int, OutcomeTriple]:
    """Read outcome rows ("name p_win p_lose [p_cont]") over the defaults."""
    table = dict(base if base is not None else BASE_OUTCOMES)
    for row in _data_lines(path):
        if len(row) not in (3, 4):
            raise ValueError(f"bad outcome row {row!r}: expected name p_win p_lose [p_cont]")
        name = row[0]
        if name not in ACTION_BY_NAME:
            raise ValueError(f"unknown action {name!r} in outcome table")
        p_win, p_lose = float(row[1]), float(row[2])
        p_cont = float(row[3]) if len(row) == 4 else 1.0 - p_win - p_lose
        triple = OutcomeTriple(p_win, p_lose, p_cont)
        triple.check()
        table[ACTION_BY_NAME[name].id] = triple
    return table


def load_intensity_table(path, base: dict[int, float] | None = None) -> dict[int, float]:
    """Read intensity rows ("name alpha") over the defaults."""
    table = dict(base if base is not None else ACTION_INTENSITY)
    for row in _data_lines(path):
        if len(row) != 2:
            raise ValueError(f"bad intensity row {row!r}: expected name alpha")
        name = row[0]
        if name not in ACTION_BY_NAME:
            raise ValueError(f"unknown action {name!r} in intensity table")
        value = float(row[1])
        if value < 0.0:
            raise ValueError(f"negative intensity for {name!r}")
        table[ACTION_BY_NAME[name].id] = value
    return table


def tables_with_overrides(
    outcome_path=None, intensity_path=None, tables: DynamicsTables = DEFAULT_TABLES
) -> DynamicsTables:
    out = tables
    if outcome_path is not None:
        out = replace(out, outcomes=load_outcome_table(outcome_path, tables.outcomes))
    if intensity_path is not None:
        out = replace(out, intensities=load_intensity_table(intensity_path, tables.intensities))
    out.check()
    return out
