"""Match state, tennis scoring rules, state encoding, and the episodic environment.

A match is simulated one agent shot at a time. The agent always chooses
the next action (serve, return, or rally shot depending on the phase);
the opponent's influence is folded into the outcome probabilities. Full
scoring is modelled: games with deuce and advantage, tiebreaks at 6-6,
and best-of-one or best-of-three matches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .actions import RALLY_ACTIONS, RETURN_ACTIONS, SERVE_ACTIONS, action_name, action_phase
from .dynamics import (
    DEFAULT_TABLES,
    DynamicsTables,
    PointEvent,
    advance_tactical_state,
    contextual_outcome,
    recover_fatigue,
    sample_outcome,
    update_fatigue,
)
from .rewards import (
    DEFAULT_REWARDS,
    RewardConfig,
    RewardContext,
    continuation_reward,
    point_lost_reward,
    point_won_reward,
    truncation_penalty,
)

STATE_DIM = 18

GAMES_PER_SET = 6
TIEBREAK_TARGET = 7


class ValidationError(ValueError):
    """A config or input value violates its documented contract."""


class InvalidActionError(RuntimeError):
    """An action was played outside its phase."""


class MatchOverError(RuntimeError):
    """step() was called on a finished episode."""


@dataclass
class MatchConfig:
    opponent_skill: float = 0.50
    best_of: int = 3
    max_steps: int = 750
    seed: Optional[int] = None
    normalize: bool = True
    skill_min: float = 0.35
    skill_max: float = 0.60
    rewards: RewardConfig = field(default_factory=lambda: DEFAULT_REWARDS)
    tables: DynamicsTables = field(default_factory=lambda: DEFAULT_TABLES)

    def check(self) -> None:
        if not self.skill_min <= self.opponent_skill <= self.skill_max:
            raise ValidationError(
                f"opponent_skill {self.opponent_skill} outside "
                f"[{self.skill_min}, {self.skill_max}]"
            )
        if self.best_of not in (1, 3):
            raise ValidationError(f"best_of must be 1 or 3, got {self.best_of}")
        if self.max_steps < 1:
            raise ValidationError(f"max_steps must be positive, got {self.max_steps}")

    @property
    def sets_to_win(self) -> int:
        return math.ceil(self.best_of / 2)


@dataclass
class MatchState:
    """Scoreboard plus within-point context for one live match.

    Point counters run 0..4 with 4 encoding advantage; tiebreak points are
    tracked separately in ``tb_p``/``tb_o``. ``serving`` is the server of
    the current point (it rotates inside a tiebreak), ``rally_len`` counts
    shots already played in the current point, and positions run baseline
    0 / mid 1 / net 2 with ball depth short 0 / neutral 1 / deep 2.
    """

    p_pts: int = 0
    o_pts: int = 0
    p_games: int = 0
    o_games: int = 0
    p_sets: int = 0
    o_sets: int = 0
    serving: bool = True
    deuce: bool = False
    adv_p: bool = False
    adv_o: bool = False
    tiebreak: bool = False
    f_p: float = 0.0
    f_o: float = 0.0
    rally_len: int = 0
    pos_p: int = 0
    pos_o: int = 0
    ball_depth: int = 1
    step_count: int = 0
    tb_p: int = 0
    tb_o: int = 0
    tb_first_server: bool = True
    set_history: list = field(default_factory=list)

    @property
    def ad_side(self) -> bool:
        """True when the next point is played from the ad court (odd point of the game)."""
        if self.tiebreak:
            return (self.tb_p + self.tb_o) % 2 == 1
        return (self.p_pts + self.o_pts) % 2 == 1


def valid_actions(state: MatchState) -> frozenset:
    """Action ids playable right now: serves or returns on the first shot, rally shots after."""
    if state.rally_len > 0:
        return RALLY_ACTIONS
    return SERVE_ACTIONS if state.serving else RETURN_ACTIONS


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

# Scale for each encoded field; flags and fatigue are already in [0, 1].
_NORM_SCALE = np.array(
    [4.0, 4.0, 7.0, 7.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 20.0, 2.0, 2.0, 2.0]
)


def encode_state(state: MatchState) -> np.ndarray:
    """Raw 18-dim feature vector, fixed field order."""
    return np.array(
        [
            state.p_pts,
            state.o_pts,
            state.p_games,
            state.o_games,
            state.p_sets,
            state.o_sets,
            float(state.serving),
            float(state.deuce),
            float(state.adv_p),
            float(state.adv_o),
            float(state.tiebreak),
            state.f_p,
            state.f_o,
            float(state.ad_side),
            state.rally_len,
            state.pos_p,
            state.pos_o,
            state.ball_depth,
        ],
        dtype=np.float64,
    )


def normalize_state_vec(vec: np.ndarray) -> np.ndarray:
    """Scale a raw encoding into [0, 1] per field; rally length clamps at 20 shots."""
    out = vec / _NORM_SCALE
    out[14] = min(out[14], 1.0)
    return out


def valid_actions_from_vec(vec) -> frozenset:
    """Valid action set recovered from an encoded state (raw or normalized)."""
    if vec[14] > 0:
        return RALLY_ACTIONS
    return SERVE_ACTIONS if vec[6] > 0.5 else RETURN_ACTIONS


# ---------------------------------------------------------------------------
# scoring
# ---------------------------------------------------------------------------


def game_point_for(state: MatchState, agent: bool) -> bool:
    """True if the given side wins the current game (or tiebreak) by taking this point."""
    if state.tiebreak:
        mine, theirs = (state.tb_p, state.tb_o) if agent else (state.tb_o, state.tb_p)
        return mine + 1 >= TIEBREAK_TARGET and mine + 1 - theirs >= 2
    mine, theirs = (state.p_pts, state.o_pts) if agent else (state.o_pts, state.p_pts)
    return mine == 4 or (mine == 3 and theirs < 3)


def match_winner(state: MatchState, sets_to_win: int = 2) -> Optional[str]:
    if state.p_sets >= sets_to_win:
        return "agent"
    if state.o_sets >= sets_to_win:
        return "opponent"
    return None


def apply_point_outcome(state: MatchState, agent_won: bool, sets_to_win: int = 2) -> MatchState:
    """Score one completed point, in place.

    Advances point, game, set, and tiebreak counters, rotates the server,
    applies between-point fatigue recovery to both players, and resets the
    rally counter. Returns the same state object.
    """
    state.f_p = recover_fatigue(state.f_p)
    state.f_o = recover_fatigue(state.f_o)
    state.rally_len = 0
    if state.tiebreak:
        _apply_tiebreak_point(state, agent_won, sets_to_win)
    else:
        _apply_regular_point(state, agent_won, sets_to_win)
    return state


def _apply_regular_point(state: MatchState, agent_won: bool, sets_to_win: int) -> None:
    winner_pts, loser_pts = (
        (state.p_pts, state.o_pts) if agent_won else (state.o_pts, state.p_pts)
    )
    if winner_pts == 4 or (winner_pts == 3 and loser_pts < 3):
        _win_game(state, agent_won, sets_to_win)
        return
    if winner_pts == 3 and loser_pts == 3:
        winner_pts = 4  # deuce -> advantage
    elif winner_pts == 3 and loser_pts == 4:
        loser_pts = 3  # advantage cancelled, back to deuce
    else:
        winner_pts += 1
    if agent_won:
        state.p_pts, state.o_pts = winner_pts, loser_pts
    else:
        state.o_pts, state.p_pts = winner_pts, loser_pts
    state.deuce = state.p_pts == 3 and state.o_pts == 3
    state.adv_p = state.p_pts == 4
    state.adv_o = state.o_pts == 4


def _apply_tiebreak_point(state: MatchState, agent_won: bool, sets_to_win: int) -> None:
    if agent_won:
        state.tb_p += 1
    else:
        state.tb_o += 1
    mine, theirs = (state.tb_p, state.tb_o) if agent_won else (state.tb_o, state.tb_p)
    if mine >= TIEBREAK_TARGET and mine - theirs >= 2:
        if agent_won:
            state.p_games += 1
        else:
            state.o_games += 1
        _win_set(state, agent_won, from_tiebreak=True)
        return
    played = state.tb_p + state.tb_o
    state.serving = _tiebreak_server(state.tb_first_server, played)


def _tiebreak_server(first_server: bool, points_played: int) -> bool:
    # One opening serve, then service changes hands every two points.
    if points_played == 0:
        return first_server
    return first_server if ((points_played - 1) // 2) % 2 == 1 else not first_server


def _win_game(state: MatchState, agent_won: bool, sets_to_win: int) -> None:
    if agent_won:
        state.p_games += 1
    else:
        state.o_games += 1
    state.p_pts = 0
    state.o_pts = 0
    state.deuce = False
    state.adv_p = False
    state.adv_o = False
    state.serving = not state.serving
    games_w, games_l = (
        (state.p_games, state.o_games) if agent_won else (state.o_games, state.p_games)
    )
    if games_w >= GAMES_PER_SET and games_w - games_l >= 2:
        _win_set(state, agent_won)
    elif state.p_games == GAMES_PER_SET and state.o_games == GAMES_PER_SET:
        state.tiebreak = True
        state.tb_p = 0
        state.tb_o = 0
        state.tb_first_server = state.serving


def _win_set(state: MatchState, agent_won: bool, from_tiebreak: bool = False) -> None:
    if from_tiebreak:
        # The tiebreak counts as one service game for the rotation.
        state.serving = not state.tb_first_server
        state.tiebreak = False
        state.tb_p = 0
        state.tb_o = 0
    state.set_history.append((state.p_games, state.o_games))
    if agent_won:
        state.p_sets += 1
    else:
        state.o_sets += 1
    state.p_games = 0
    state.o_games = 0
    state.p_pts = 0
    state.o_pts = 0
    state.deuce = False
    state.adv_p = False
    state.adv_o = False


def resolve_truncation(state: MatchState, sets_to_win: int = 2) -> str:
    """Winner label for a match cut off at the step limit.

    Sets decide first, then games in the current set, then points in the
    current game (tiebreak points while in one). A dead tie goes to the
    opponent.
    """
    if match_winner(state, sets_to_win) is not None:
        raise ValidationError("match already decided; truncation resolution not applicable")
    if state.p_sets != state.o_sets:
        return "agent" if state.p_sets > state.o_sets else "opponent"
    if state.p_games != state.o_games:
        return "agent" if state.p_games > state.o_games else "opponent"
    p_pts, o_pts = (state.tb_p, state.tb_o) if state.tiebreak else (state.p_pts, state.o_pts)
    if p_pts != o_pts:
        return "agent" if p_pts > o_pts else "opponent"
    return "opponent"


# ---------------------------------------------------------------------------
# notation
# ---------------------------------------------------------------------------

_POINT_NAMES = ("0", "15", "30", "40", "Ad")


def point_score(state: MatchState) -> str:
    """Current game score in tennis notation ("40-30", "Ad-40", tiebreak "5-3")."""
    if state.tiebreak:
        return f"{state.tb_p}-{state.tb_o}"
    return f"{_POINT_NAMES[state.p_pts]}-{_POINT_NAMES[state.o_pts]}"


def score_line(state: MatchState) -> str:
    """Full scoreboard snapshot, agent first, with a * marking the server."""
    server = "*" if state.serving else ""
    return (
        f"sets {state.p_sets}-{state.o_sets} games {state.p_games}-{state.o_games} "
        f"{point_score(state)}{server}"
    )


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------


@dataclass
class StepResult:
    state_vec: np.ndarray
    reward: float
    done: bool
    info: dict


class TennisMatchEnv:
    """Episodic tennis match against a fixed-skill opponent.

    Each ``step`` plays one agent shot. Rewards follow the point-event
    reward model; an episode that reaches the step limit without a decided
    match is truncated with a penalty and a winner resolved from the
    scoreboard. Each instance owns its RNG stream and is single-threaded.
    """

    def __init__(self, config: MatchConfig = None, rng: np.random.Generator = None):
        self.config = config if config is not None else MatchConfig()
        self.config.check()
        if rng is not None:
            self.rng = rng
        else:
            self.rng = np.random.default_rng(self.config.seed)
        self.state = MatchState()
        self._done = True

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """Start a fresh match (agent serves first) and return its encoding."""
        self.config.check()
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = MatchState(serving=True)
        self._done = False
        return self._observe()

    @property
    def done(self) -> bool:
        return self._done

    def valid_actions(self) -> frozenset:
        return valid_actions(self.state)

    def _observe(self) -> np.ndarray:
        vec = encode_state(self.state)
        if self.config.normalize:
            vec = normalize_state_vec(vec)
        return vec

    def step(self, action: int) -> StepResult:
        if self._done:
            raise MatchOverError("episode is over; call reset() before stepping")
        state = self.state
        allowed = valid_actions(state)
        if action not in allowed:
            raise InvalidActionError(
                f"action {action} ({action_name(action)}, {action_phase(action).value}) "
                f"not playable now; valid: {sorted(allowed)}"
            )

        triple = contextual_outcome(action, state, self.config.opponent_skill, self.config.tables)
        event = sample_outcome(triple, self.rng)

        # Context of the point before anything is applied.
        serving_before = state.serving
        gp_agent = game_point_for(state, agent=True)
        gp_opp = game_point_for(state, agent=False)
        rally_before = state.rally_len

        # Both players spend the same effort on the exchange.
        state.f_p = update_fatigue(state.f_p, action, rally_before, self.config.tables)
        state.f_o = update_fatigue(state.f_o, action, rally_before, self.config.tables)
        advance_tactical_state(state, action, self.rng)
        state.step_count += 1

        info: dict = {"server": "agent" if serving_before else "opponent"}
        if event is PointEvent.CONTINUE:
            state.rally_len += 1
            reward = continuation_reward(self.config.rewards)
            label = "continue"
        else:
            agent_won = event is PointEvent.AGENT_WINS
            ctx = RewardContext(
                event=event,
                action=action,
                rally_len=rally_before,
                is_game_point=gp_agent if serving_before else gp_opp,
                is_break_point=gp_opp if serving_before else gp_agent,
                held_serve=agent_won and serving_before and gp_agent,
                broke_serve=agent_won and not serving_before and gp_agent,
            )
            reward = point_won_reward(ctx, self.config.rewards) if agent_won else point_lost_reward(
                ctx, self.config.rewards
            )
            apply_point_outcome(state, agent_won, self.config.sets_to_win)
            label = "agent_point_win" if agent_won else "agent_point_loss"
            info["point_winner"] = "agent" if agent_won else "opponent"

        winner = match_winner(state, self.config.sets_to_win)
        done = winner is not None
        truncated = False
        if not done and state.step_count >= self.config.max_steps:
            truncated = True
            done = True
            reward += truncation_penalty(self.config.rewards)
            winner = resolve_truncation(state, self.config.sets_to_win)
            label = "truncated"

        self._done = done
        info["event"] = label
        info["score"] = score_line(state)
        if done:
            info["winner"] = winner
            info["truncated"] = truncated
        return StepResult(self._observe(), reward, done, info)
