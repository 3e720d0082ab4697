"""Recursive solver for the sequential chicken crossing game.

A vehicle and a pedestrian approach a shared collision point on fixed
crossing paths.  Distance along each path is quantized into boxes and time
into turns; each turn both agents simultaneously pick SLOW (advance 1 box)
or FAST (advance 2 boxes).  The state ``(y, x)`` holds the vehicle's and
pedestrian's remaining boxes to the collision point.  If both agents are
ever inside the two-box crash window ``{0, 1}`` on the same turn they
collide; the window is two boxes wide so a FAST move cannot jump over it.

Utilities are measured in seconds of journey time, all costs:

* every turn charges ``-turn_cost`` to each agent that has not yet passed
  the collision point (position > -1);
* a crash is terminal and worth ``-crash_cost`` to both, with no further
  time charges;
* an agent at position <= -1 has passed and accrues nothing further; an
  unopposed agent continues FAST, paying ``turn_cost * ceil((pos+1)/2)``.

The value of a non-terminal state is the Nash value of its 2x2 stage game
over the successor values.  Stage games are solved by support enumeration;
when a game has the chicken structure (two pure equilibria plus one mixed)
the mixed equilibrium is selected, which is the unique symmetric solution
for symmetric states.  States whose outcome is forced (for example both
agents one move from the crash window, where every joint move crashes)
have stage games with equilibrium continua; the recursion resolves those
with a fixed convention (see ``solve_stage_game``) while the public
stage-game solver reports them as :class:`DegenerateGameError` by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import NamedTuple, Optional

__all__ = [
    "Action",
    "ACTIONS",
    "GameState",
    "GameParams",
    "UtilityPair",
    "PayoffMatrix",
    "Equilibrium",
    "EquilibriumKind",
    "DegenerateGameError",
    "BoardBoundsError",
    "crash",
    "is_terminal",
    "terminal_value",
    "build_stage_matrix",
    "solve_stage_game",
    "game_value",
    "policy",
    "yield_curve_model",
    "cumulative_no_yield",
    "clear_cache",
]


class Action(Enum):
    """Speed choice for one turn. SLOW advances 1 box, FAST advances 2."""

    SLOW = "SLOW"
    FAST = "FAST"

    @property
    def displacement(self) -> int:
        return 1 if self is Action.SLOW else 2


#: Canonical action order used to index 2x2 matrices: [SLOW, FAST].
ACTIONS = (Action.SLOW, Action.FAST)


class EquilibriumKind(Enum):
    MIXED = "MIXED"
    PURE = "PURE"


class DegenerateGameError(ValueError):
    """Raised when a stage game has a continuum of equilibria (or an
    otherwise ambiguous equilibrium structure) and no selection rule was
    requested.

    ``indifferent_players`` names the players ("vehicle", "pedestrian")
    whose own action never changes their own payoff, when that is the
    source of the degeneracy.  ``state`` is attached when the error
    surfaces from the game-value recursion.
    """

    def __init__(
        self,
        message: str,
        indifferent_players: tuple[str, ...] = (),
        state: "Optional[GameState]" = None,
    ):
        self.indifferent_players = indifferent_players
        self.state = state
        suffix = f" [players: {', '.join(indifferent_players)}]" if indifferent_players else ""
        suffix += f" at state {tuple(state)}" if state is not None else ""
        super().__init__(message + suffix)

    def at_state(self, state: "GameState") -> "DegenerateGameError":
        return DegenerateGameError(self.args[0].split(" [")[0], self.indifferent_players, state)


class BoardBoundsError(ValueError):
    """State lies outside the board bounds configured in GameParams."""


class UtilityPair(NamedTuple):
    """Expected utilities (seconds, costs are negative) for both players."""

    u_vehicle: float
    u_pedestrian: float

    def swapped(self) -> "UtilityPair":
        return UtilityPair(self.u_pedestrian, self.u_vehicle)


class GameState(NamedTuple):
    """Integer box distances to the collision point (vehicle y, pedestrian x).

    Positions from -2 upward are representable: a FAST move from box 0
    lands at -2.  Anything at or below -1 has passed the collision point.
    """

    y: int
    x: int


@dataclass(frozen=True)
class GameParams:
    """Model parameters.

    crash_cost is the positive magnitude C of the crash penalty (the
    applied utility is -C).  turn_cost is the per-turn time charge.
    max_y/max_x bound the board; queries beyond them are rejected.
    """

    crash_cost: float = 3.0
    turn_cost: float = 1.0
    max_y: int = 64
    max_x: int = 64

    def __post_init__(self) -> None:
        if not (math.isfinite(self.crash_cost) and self.crash_cost > 0):
            raise ValueError(f"crash_cost must be finite and > 0, got {self.crash_cost}")
        if not (math.isfinite(self.turn_cost) and self.turn_cost > 0):
            raise ValueError(f"turn_cost must be finite and > 0, got {self.turn_cost}")
        if self.max_y < 2 or self.max_x < 2:
            raise ValueError("board bounds must be at least 2 boxes")


@dataclass(frozen=True)
class PayoffMatrix:
    """2x2 stage payoff matrix indexed [vehicle action][pedestrian action]."""

    entries: tuple[tuple[UtilityPair, UtilityPair], tuple[UtilityPair, UtilityPair]]

    def __post_init__(self) -> None:
        for row in self.entries:
            for pair in row:
                if not (math.isfinite(pair[0]) and math.isfinite(pair[1])):
                    raise ValueError("payoff entries must be finite")

    def entry(self, vehicle: Action, pedestrian: Action) -> UtilityPair:
        return self.entries[ACTIONS.index(vehicle)][ACTIONS.index(pedestrian)]

    def vehicle_payoffs(self) -> tuple[float, float, float, float]:
        """(ss, sf, fs, ff) with the first index the vehicle's action."""
        e = self.entries
        return (e[0][0][0], e[0][1][0], e[1][0][0], e[1][1][0])

    def pedestrian_payoffs(self) -> tuple[float, float, float, float]:
        e = self.entries
        return (e[0][0][1], e[0][1][1], e[1][0][1], e[1][1][1])


@dataclass(frozen=True)
class Equilibrium:
    """Strategy pair (probability of SLOW per player) and its value."""

    p_vehicle_slow: float
    p_pedestrian_slow: float
    value: UtilityPair
    kind: EquilibriumKind

    @property
    def p_vehicle_fast(self) -> float:
        return 1.0 - self.p_vehicle_slow

    @property
    def p_pedestrian_fast(self) -> float:
        return 1.0 - self.p_pedestrian_slow


def crash(state: GameState) -> bool:
    """True when both agents sit inside the two-box crash window {0, 1}."""
    return 0 <= state.y <= 1 and 0 <= state.x <= 1


def _has_passed(pos: int) -> bool:
    return pos <= -1


def _fast_transit_cost(pos: int, turn_cost: float) -> float:
    # Turns needed to move from pos to <= -1 at 2 boxes per turn, each
    # charged while the agent is still at a position > -1.
    return turn_cost * math.ceil((pos + 1) / 2)


def terminal_value(state: GameState, params: GameParams) -> Optional[UtilityPair]:
    """Value of a terminal state, or None when a stage game must be played.

    Crash beats everything else; after one agent passes the contest is
    over and the remaining agent's deterministic FAST run is priced in
    closed form.
    """
    if crash(state):
        return UtilityPair(-params.crash_cost, -params.crash_cost)
    vehicle_passed = _has_passed(state.y)
    pedestrian_passed = _has_passed(state.x)
    if vehicle_passed and pedestrian_passed:
        return UtilityPair(0.0, 0.0)
    if vehicle_passed:
        return UtilityPair(0.0, -_fast_transit_cost(state.x, params.turn_cost))
    if pedestrian_passed:
        return UtilityPair(-_fast_transit_cost(state.y, params.turn_cost), 0.0)
    return None


def is_terminal(state: GameState, params: GameParams | None = None) -> bool:
    return crash(state) or _has_passed(state.y) or _has_passed(state.x)


def _check_bounds(state: GameState, params: GameParams) -> None:
    if state.y > params.max_y or state.x > params.max_x:
        raise BoardBoundsError(
            f"state {tuple(state)} outside board bounds ({params.max_y}, {params.max_x})"
        )


# ---------------------------------------------------------------------------
# 2x2 bimatrix solving.
#
# Payoffs are handled as flat 4-tuples (ss, sf, fs, ff); the first letter is
# the vehicle's action, the second the pedestrian's.


def _clamp01(v: float) -> float:
    # + 0.0 normalizes IEEE negative zero.
    return min(max(v, 0.0), 1.0) + 0.0


def _expected(payoffs, p: float, q: float) -> float:
    # Grouped so mirrored payoffs with p == q produce bitwise-equal results
    # (keeps symmetric states exactly symmetric through the recursion).
    ss, sf, fs, ff = payoffs
    return (p * q * ss + (1 - p) * (1 - q) * ff) + (p * (1 - q) * sf + (1 - p) * q * fs)


def _deviation_gain(a, b, p: float, q: float) -> float:
    """Largest gain either player gets from a unilateral pure deviation."""
    ev = _expected(a, p, q)
    ep = _expected(b, p, q)
    a_ss, a_sf, a_fs, a_ff = a
    b_ss, b_sf, b_fs, b_ff = b
    gain_v = max(q * a_ss + (1 - q) * a_sf, q * a_fs + (1 - q) * a_ff) - ev
    gain_p = max(p * b_ss + (1 - p) * b_fs, p * b_sf + (1 - p) * b_ff) - ep
    return max(gain_v, gain_p)


def _pure_equilibria(a, b, tol: float) -> list[tuple[int, int]]:
    """Cells (i, j) from which no player has a strictly profitable deviation."""
    found = []
    for i in (0, 1):
        for j in (0, 1):
            own = a[2 * i + j]
            dev = a[2 * (1 - i) + j]
            if dev > own + tol:
                continue
            own_p = b[2 * i + j]
            dev_p = b[2 * i + (1 - j)]
            if dev_p > own_p + tol:
                continue
            found.append((i, j))
    return found


def _indifference_mix(a, b, tol: float):
    """Full-support candidate (p, q) from the indifference equations.

    q makes the vehicle indifferent between its rows, p makes the
    pedestrian indifferent between its columns.  Returns None when either
    linear equation is singular.
    """
    a_ss, a_sf, a_fs, a_ff = a
    b_ss, b_sf, b_fs, b_ff = b
    den_q = (a_ss - a_fs) + (a_ff - a_sf)
    den_p = (b_ss - b_sf) + (b_ff - b_fs)
    if abs(den_q) <= tol or abs(den_p) <= tol:
        return None
    q = (a_ff - a_sf) / den_q
    p = (b_ff - b_fs) / den_p
    return (p, q)


def _strict_dominant_vehicle(a, tol: float) -> Optional[int]:
    if a[0] > a[2] + tol and a[1] > a[3] + tol:
        return 0
    if a[2] > a[0] + tol and a[3] > a[1] + tol:
        return 1
    return None


def _strict_dominant_pedestrian(b, tol: float) -> Optional[int]:
    if b[0] > b[1] + tol and b[2] > b[3] + tol:
        return 0
    if b[1] > b[0] + tol and b[3] > b[2] + tol:
        return 1
    return None


def _resolve_degenerate(a, b, tol: float):
    """Canonical strategy pair for a degenerate stage game.

    Convention, in order:

    1. If both players are indifferent over all four cells the state's
       outcome is fully forced; both mix uniformly (1/2, 1/2).  This is the
       symmetric limit the yield probability approaches near the crash
       window.
    2. Otherwise pin strictly dominant actions, then best responses to
       pinned opponents.  A player left indifferent is pinned by the
       opponent's payoff (prefer the action that is weakly better for the
       opponent, strictly somewhere), and finally defaults to FAST, which
       is the deterministic continuation once the symmetric contest is
       broken.

    Returns (p, q) or None when no convention applies.
    """
    veh_flat = max(a) - min(a) <= tol
    ped_flat = max(b) - min(b) <= tol
    if veh_flat and ped_flat:
        return (0.5, 0.5)

    veh_pin = _strict_dominant_vehicle(a, tol)
    ped_pin = _strict_dominant_pedestrian(b, tol)

    def pin_vehicle_against(j: int) -> int:
        diff = a[j] - a[2 + j]
        if diff > tol:
            return 0
        if diff < -tol:
            return 1
        opp = b[j] - b[2 + j]
        if opp > tol:
            return 0
        return 1

    def pin_pedestrian_against(i: int) -> int:
        diff = b[2 * i] - b[2 * i + 1]
        if diff > tol:
            return 0
        if diff < -tol:
            return 1
        opp = a[2 * i] - a[2 * i + 1]
        if opp > tol:
            return 0
        return 1

    if veh_pin is None and ped_pin is None:
        # No dominance anywhere.  If one player's own action is globally
        # irrelevant, pick its row/column by the opponent's payoffs.
        veh_rows_flat = abs(a[0] - a[2]) <= tol and abs(a[1] - a[3]) <= tol
        ped_cols_flat = abs(b[0] - b[1]) <= tol and abs(b[2] - b[3]) <= tol
        if veh_rows_flat:
            better_s = b[0] >= b[2] - tol and b[1] >= b[3] - tol
            strictly = b[0] > b[2] + tol or b[1] > b[3] + tol
            veh_pin = 0 if (better_s and strictly) else 1
        elif ped_cols_flat:
            better_s = a[0] >= a[1] - tol and a[2] >= a[3] - tol
            strictly = a[0] > a[1] + tol or a[2] > a[3] + tol
            ped_pin = 0 if (better_s and strictly) else 1
        else:
            veh_pin = 1
    if veh_pin is None:
        veh_pin = pin_vehicle_against(ped_pin)
    if ped_pin is None:
        ped_pin = pin_pedestrian_against(veh_pin)
    return (1.0 - float(veh_pin), 1.0 - float(ped_pin))


def _indifferent_player_names(a, b, tol: float) -> tuple[str, ...]:
    names = []
    if abs(a[0] - a[2]) <= tol and abs(a[1] - a[3]) <= tol:
        names.append("vehicle")
    if abs(b[0] - b[1]) <= tol and abs(b[2] - b[3]) <= tol:
        names.append("pedestrian")
    return tuple(names)


def _solve_bimatrix(a, b, degenerate: str) -> tuple[float, float]:
    """Select an equilibrium (p_vehicle_slow, p_pedestrian_slow).

    Selection policy: a unique equilibrium is returned as-is; the chicken
    structure (two pure plus one mixed equilibrium) selects the mixed one.
    Degenerate structures raise DegenerateGameError when
    ``degenerate='error'`` and fall back to the documented convention when
    ``degenerate='resolve'``.
    """
    scale = max(1.0, *(abs(v) for v in a), *(abs(v) for v in b))
    tol = 1e-12 * scale

    pures = _pure_equilibria(a, b, tol)
    mix = _indifference_mix(a, b, tol)
    interior = None
    boundary = None
    if mix is not None:
        p, q = mix
        if 1e-12 < p < 1 - 1e-12 and 1e-12 < q < 1 - 1e-12:
            interior = (p, q)
        elif -1e-9 <= p <= 1 + 1e-9 and -1e-9 <= q <= 1 + 1e-9:
            clamped = (_clamp01(p), _clamp01(q))
            if _deviation_gain(a, b, *clamped) <= 1e-9 * scale:
                boundary = clamped

    if interior is not None and len(pures) in (0, 2):
        return interior
    if interior is None and len(pures) == 1:
        i, j = pures[0]
        return (1.0 - float(i), 1.0 - float(j))

    if degenerate == "error":
        names = _indifferent_player_names(a, b, tol)
        if names:
            raise DegenerateGameError(
                "degenerate stage game: continuum of equilibria", names
            )
        raise DegenerateGameError(
            f"ambiguous equilibrium structure ({len(pures)} pure, "
            f"mixed={'yes' if interior else 'no'})"
        )

    if interior is not None:
        # Non-generic knife edge (one weak pure plus the interior mixed);
        # the mixed point is the continuity selection.
        return interior
    veh_flat = max(a) - min(a) <= tol
    ped_flat = max(b) - min(b) <= tol
    if not (veh_flat and ped_flat) and boundary is not None:
        # The indifference solution collapsed onto the boundary of the
        # strategy square (for example the mixed branch hits probability 0
        # when the crash cost no longer outweighs yielding).  Selecting it
        # keeps the solution continuous in the parameters and symmetric at
        # symmetric states.
        return boundary
    resolved = _resolve_degenerate(a, b, tol)
    if resolved is None or _deviation_gain(a, b, *resolved) > 1e-9 * scale:
        names = _indifferent_player_names(a, b, tol)
        raise DegenerateGameError("unresolvable degenerate stage game", names)
    return resolved


def _equilibrium_from_strategies(a, b, p: float, q: float) -> Equilibrium:
    p = _clamp01(p)
    q = _clamp01(q)
    value = UtilityPair(_expected(a, p, q), _expected(b, p, q))
    kind = EquilibriumKind.PURE if p in (0.0, 1.0) and q in (0.0, 1.0) else EquilibriumKind.MIXED
    return Equilibrium(p, q, value, kind)


def solve_stage_game(matrix: PayoffMatrix, degenerate: str = "error") -> Equilibrium:
    """Solve one 2x2 stage game.

    ``degenerate`` selects what happens on equilibrium continua: ``"error"``
    raises :class:`DegenerateGameError` naming the indifferent player(s);
    ``"resolve"`` applies the canonical convention used inside the
    game-value recursion (uniform mixing under total indifference, FAST
    defaults once the contest is decided).
    """
    if degenerate not in ("error", "resolve"):
        raise ValueError(f"degenerate must be 'error' or 'resolve', got {degenerate!r}")
    a = matrix.vehicle_payoffs()
    b = matrix.pedestrian_payoffs()
    p, q = _solve_bimatrix(a, b, degenerate)
    return _equilibrium_from_strategies(a, b, p, q)


# ---------------------------------------------------------------------------
# Recursive game value.


def _stage_cost(pos: int, turn_cost: float) -> float:
    return -turn_cost if pos > -1 else 0.0


@lru_cache(maxsize=None)
def _solve_state(state: GameState, params: GameParams) -> tuple[UtilityPair, Optional[Equilibrium]]:
    """Memoized (value, stage equilibrium) for a state.

    Terminal states carry no equilibrium.  The memo key deliberately
    excludes any turn index: dynamics and costs are time-homogeneous.
    lru_cache is internally synchronized, so concurrent queries are safe.
    """
    tv = terminal_value(state, params)
    if tv is not None:
        return tv, None
    matrix = _build_matrix_unchecked(state, params)
    a = matrix.vehicle_payoffs()
    b = matrix.pedestrian_payoffs()
    try:
        p, q = _solve_bimatrix(a, b, degenerate="resolve")
    except DegenerateGameError as err:
        raise err.at_state(state) from None
    eq = _equilibrium_from_strategies(a, b, p, q)
    return eq.value, eq


def _build_matrix_unchecked(state: GameState, params: GameParams) -> PayoffMatrix:
    cost_v = _stage_cost(state.y, params.turn_cost)
    cost_p = _stage_cost(state.x, params.turn_cost)
    rows = []
    for a_v in ACTIONS:
        row = []
        for a_p in ACTIONS:
            succ = GameState(state.y - a_v.displacement, state.x - a_p.displacement)
            value, _ = _solve_state(succ, params)
            row.append(UtilityPair(cost_v + value.u_vehicle, cost_p + value.u_pedestrian))
        rows.append(tuple(row))
    return PayoffMatrix((rows[0], rows[1]))


def build_stage_matrix(state: GameState, params: GameParams) -> PayoffMatrix:
    """Stage payoff matrix at a non-terminal state.

    Each entry charges the per-turn time cost to every agent still short of
    the collision point and adds the successor state's game value.
    """
    state = GameState(*state)
    if terminal_value(state, params) is not None:
        raise ValueError(f"state {tuple(state)} is terminal; no stage game is played")
    _check_bounds(state, params)
    return _build_matrix_unchecked(state, params)


def game_value(state: GameState, params: GameParams) -> UtilityPair:
    """Expected utilities for both players under equilibrium play."""
    state = GameState(*state)
    _check_bounds(state, params)
    value, _ = _solve_state(state, params)
    return value


def policy(state: GameState, params: GameParams) -> Equilibrium:
    """Stage equilibrium at a state.

    Terminal states return a PURE equilibrium with both SLOW probabilities
    zero: no decision remains and any leftover travel happens at FAST.
    """
    state = GameState(*state)
    _check_bounds(state, params)
    value, eq = _solve_state(state, params)
    if eq is None:
        return Equilibrium(0.0, 0.0, value, EquilibriumKind.PURE)
    return eq


def yield_curve_model(params: GameParams, k_max: int) -> list[tuple[int, float]]:
    """Model yield probabilities at symmetric states.

    Returns ``[(k, p_yield)]`` for k = 2..k_max where p_yield is the
    pedestrian's SLOW probability at state (k, k): both agents perceive
    their times to collision as equal. Ascending in k.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    return [(k, policy(GameState(k, k), params).p_pedestrian_slow) for k in range(2, k_max + 1)]


def cumulative_no_yield(curve: list[tuple[int, float]]) -> list[tuple[int, float]]:
    """Survival transform of a yield curve.

    Input must be sorted by strictly descending k with probabilities in
    [0, 1].  Output gives S(k), the probability of reaching bin k without a
    prior yield (assuming the other agent never yields): S(k_max) = 1 and
    S(k) = S(k+1) * (1 - p_yield(k+1)).
    """
    if not curve:
        return []
    ks = [k for k, _ in curve]
    if any(k_next >= k_prev for k_prev, k_next in zip(ks, ks[1:])):
        raise ValueError("curve must be sorted by strictly descending k")
    for _, p in curve:
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"yield probability {p} outside [0, 1]")
    out = [(curve[0][0], 1.0)]
    survival = 1.0
    for (k_prev, p_prev), (k, _) in zip(curve, curve[1:]):
        survival *= 1.0 - p_prev
        out.append((k, survival))
    return out


def clear_cache() -> None:
    """Drop all memoized state solutions (mainly for benchmarks and tests)."""
    _solve_state.cache_clear()
