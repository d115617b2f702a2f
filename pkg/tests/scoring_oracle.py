"""Independent tennis scorer used as a test oracle.

Implements scoring from the rulebook definition with raw point counts (a
game ends at four or more points with a two-point lead) instead of the
engine's 0..4 advantage encoding, so agreement between the two is a real
cross-check rather than a mirror of the same code.
"""

from dataclasses import dataclass, field


@dataclass
class OracleMatch:
    """Raw-count tennis scorer for one match; player 'a' is the agent."""

    best_of: int = 3
    a_pts: int = 0
    b_pts: int = 0
    a_games: int = 0
    b_games: int = 0
    a_sets: int = 0
    b_sets: int = 0
    server_a: bool = True
    tiebreak: bool = False
    tb_a: int = 0
    tb_b: int = 0
    tb_opener_a: bool = True
    winner: str | None = None
    set_scores: list = field(default_factory=list)

    @property
    def sets_needed(self) -> int:
        return self.best_of // 2 + 1

    def point(self, a_won: bool) -> None:
        assert self.winner is None, "point played after the match ended"
        if self.tiebreak:
            self._tiebreak_point(a_won)
        else:
            self._game_point(a_won)

    # -- internals ----------------------------------------------------------

    def _game_point(self, a_won: bool) -> None:
        if a_won:
            self.a_pts += 1
        else:
            self.b_pts += 1
        hi = max(self.a_pts, self.b_pts)
        if hi >= 4 and abs(self.a_pts - self.b_pts) >= 2:
            self._game(self.a_pts > self.b_pts)

    def _game(self, a_won: bool) -> None:
        if a_won:
            self.a_games += 1
        else:
            self.b_games += 1
        self.a_pts = 0
        self.b_pts = 0
        self.server_a = not self.server_a
        hi = max(self.a_games, self.b_games)
        lo = min(self.a_games, self.b_games)
        if hi >= 6 and hi - lo >= 2:
            self._set(self.a_games > self.b_games)
        elif self.a_games == 6 and self.b_games == 6:
            self.tiebreak = True
            self.tb_a = 0
            self.tb_b = 0
            self.tb_opener_a = self.server_a

    def _tiebreak_point(self, a_won: bool) -> None:
        if a_won:
            self.tb_a += 1
        else:
            self.tb_b += 1
        hi = max(self.tb_a, self.tb_b)
        if hi >= 7 and abs(self.tb_a - self.tb_b) >= 2:
            a_took = self.tb_a > self.tb_b
            if a_took:
                self.a_games += 1
            else:
                self.b_games += 1
            self.server_a = not self.tb_opener_a
            self.tiebreak = False
            self.tb_a = 0
            self.tb_b = 0
            self._set(a_took)
            return
        played = self.tb_a + self.tb_b
        if ((played - 1) // 2) % 2 == 1:
            self.server_a = self.tb_opener_a
        else:
            self.server_a = not self.tb_opener_a

    def _set(self, a_won: bool) -> None:
        self.set_scores.append((self.a_games, self.b_games))
        if a_won:
            self.a_sets += 1
        else:
            self.b_sets += 1
        self.a_games = 0
        self.b_games = 0
        if self.a_sets >= self.sets_needed:
            self.winner = "agent"
        elif self.b_sets >= self.sets_needed:
            self.winner = "opponent"

    # -- views for comparison -----------------------------------------------

    def encoded_points(self) -> tuple:
        """Raw in-game counts mapped onto the engine's 0..4 advantage scheme."""
        a, b = self.a_pts, self.b_pts
        if a >= 3 and b >= 3:
            if a == b:
                return 3, 3
            return (4, 3) if a > b else (3, 4)
        return a, b


def truncation_winner(
    p_sets: int,
    o_sets: int,
    p_games: int,
    o_games: int,
    p_pts: int,
    o_pts: int,
) -> str:
    """Tier comparison for an unfinished match: sets, then games, then points."""
    for mine, theirs in ((p_sets, o_sets), (p_games, o_games), (p_pts, o_pts)):
        if mine != theirs:
            return "agent" if mine > theirs else "opponent"
    return "opponent"
