"""Discrete-turn episodes, continuous crossings, and outcome statistics.

Discrete episodes play the box game directly: both agents draw SLOW/FAST
from per-state policies each turn until they crash or both pass.  The
continuous simulator advances metric positions in 0.5 s controller steps,
driving the real controller for the vehicle side, and implements the
experimenter feedback protocol that moves the vehicle's start point closer
after a pedestrian win and further after a loss.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import yaml

from seqchicken.controller import (
    ControllerSnapshot,
    GameInfo,
    ScenarioGeometry,
    TrackPoint,
    controller_step,
    intersect_paths,
    ConstantVelocityModel,
    point_at_arc,
    quantize_distance,
)
from seqchicken.game import (
    Action,
    GameParams,
    GameState,
    UtilityPair,
    crash,
    policy,
)
from seqchicken.records import CrossingRecord, Outcome
from seqchicken.validation import as_generator, check_positive

__all__ = [
    "Episode",
    "OutcomeStats",
    "Scenario",
    "CrossingEngine",
    "StatePolicy",
    "play_discrete_episode",
    "monte_carlo_stats",
    "run_crossing",
    "experimenter_feedback_update",
    "self_play_session",
    "optimal_vehicle_policy",
    "optimal_pedestrian_policy",
    "always_fast",
    "always_slow",
    "noisy",
    "WALKERS",
    "load_scenario",
]

#: A per-state policy maps a GameState to the probability of playing SLOW.
StatePolicy = Callable[[GameState], float]


@dataclass(frozen=True)
class Episode:
    """One discrete game play-out."""

    turns: tuple[tuple[int, GameState, Action, Action], ...]
    outcome: Outcome
    realized_utilities: UtilityPair


@dataclass(frozen=True)
class OutcomeStats:
    n: int
    crash_rate: float
    pedestrian_win_rate: float
    vehicle_win_rate: float
    mean_utilities: UtilityPair
    se_utilities: UtilityPair
    se_crash_rate: float
    se_pedestrian_win_rate: float


def optimal_vehicle_policy(params: GameParams) -> StatePolicy:
    return lambda state: policy(state, params).p_vehicle_slow


def optimal_pedestrian_policy(params: GameParams) -> StatePolicy:
    return lambda state: policy(state, params).p_pedestrian_slow


def always_fast(state: GameState) -> float:
    return 0.0


def always_slow(state: GameState) -> float:
    return 1.0


def noisy(base: StatePolicy, eps: float) -> StatePolicy:
    """Blend a policy with uniform play: p' = (1-eps) p + eps/2."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must be in [0, 1]")
    return lambda state: (1.0 - eps) * base(state) + 0.5 * eps


def _draw(p_slow: float, rng) -> Action:
    if not 0.0 <= p_slow <= 1.0:
        raise ValueError(f"policy returned probability {p_slow} outside [0, 1]")
    return Action.SLOW if rng.random() < p_slow else Action.FAST


def play_discrete_episode(
    params: GameParams,
    y0: int,
    x0: int,
    vehicle_policy: StatePolicy,
    pedestrian_policy: StatePolicy,
    rng,
) -> Episode:
    """Play one episode from (y0, x0) to crash or both-passed.

    Utilities follow the solver's cost convention: each turn charges the
    turn cost to every agent still short of the collision point; a crash is
    terminal and adds the crash penalty for both with no further charges.
    """
    rng = as_generator(rng)
    state = GameState(int(y0), int(x0))
    if state.y <= -1 and state.x <= -1:
        raise ValueError("both agents already passed; no episode to play")
    u_v = 0.0
    u_p = 0.0
    passed_turn_v = 0 if state.y <= -1 else None
    passed_turn_p = 0 if state.x <= -1 else None
    turns: list[tuple[int, GameState, Action, Action]] = []
    t = 0
    while True:
        if crash(state):
            u_v -= params.crash_cost
            u_p -= params.crash_cost
            outcome = Outcome.CRASH
            break
        if state.y <= -1 and state.x <= -1:
            assert passed_turn_v != passed_turn_p, "simultaneous pass is unreachable"
            outcome = (
                Outcome.VEHICLE_FIRST
                if passed_turn_v < passed_turn_p
                else Outcome.PEDESTRIAN_FIRST
            )
            break
        if state.y > -1:
            u_v -= params.turn_cost
        if state.x > -1:
            u_p -= params.turn_cost
        a_v = _draw(vehicle_policy(state), rng)
        a_p = _draw(pedestrian_policy(state), rng)
        turns.append((t, state, a_v, a_p))
        state = GameState(state.y - a_v.displacement, state.x - a_p.displacement)
        t += 1
        if passed_turn_v is None and state.y <= -1:
            passed_turn_v = t
        if passed_turn_p is None and state.x <= -1:
            passed_turn_p = t
    return Episode(tuple(turns), outcome, UtilityPair(u_v, u_p))


def monte_carlo_stats(params: GameParams, y0: int, x0: int, n: int, rng) -> OutcomeStats:
    """Aggregate n optimal-policy episodes from a fixed start state."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    vehicle = optimal_vehicle_policy(params)
    pedestrian = optimal_pedestrian_policy(params)
    crashes = 0
    ped_wins = 0
    sums = np.zeros(2)
    sq_sums = np.zeros(2)
    for _ in range(n):
        episode = play_discrete_episode(params, y0, x0, vehicle, pedestrian, rng)
        if episode.outcome is Outcome.CRASH:
            crashes += 1
        elif episode.outcome is Outcome.PEDESTRIAN_FIRST:
            ped_wins += 1
        u = np.array(episode.realized_utilities)
        sums += u
        sq_sums += u * u
    means = sums / n
    if n > 1:
        variances = np.maximum(sq_sums / n - means**2, 0.0) * n / (n - 1)
        se = np.sqrt(variances / n)
    else:
        se = np.zeros(2)
    crash_rate = crashes / n
    ped_rate = ped_wins / n
    return OutcomeStats(
        n=n,
        crash_rate=crash_rate,
        pedestrian_win_rate=ped_rate,
        vehicle_win_rate=1.0 - crash_rate - ped_rate,
        mean_utilities=UtilityPair(*means),
        se_utilities=UtilityPair(*se),
        se_crash_rate=math.sqrt(crash_rate * (1 - crash_rate) / n),
        se_pedestrian_win_rate=math.sqrt(ped_rate * (1 - ped_rate) / n),
    )


def experimenter_feedback_update(
    current_start: float,
    outcome: Outcome,
    delta: float = 0.25,
    bounds: tuple[float, float] = (2.0, 8.0),
) -> float:
    """Adjust the vehicle start after a crossing.

    The experimenter starts the vehicle closer after a pedestrian win and
    further after a loss; a crash leaves the start unchanged.  Clamped to
    bounds so the feedback loop stays inside the test track.
    """
    check_positive("delta", delta)
    lo, hi = bounds
    if not lo < hi:
        raise ValueError(f"invalid bounds {bounds}")
    if outcome is Outcome.PEDESTRIAN_FIRST:
        current_start -= delta
    elif outcome is Outcome.VEHICLE_FIRST:
        current_start += delta
    return min(max(current_start, lo), hi)


# ---------------------------------------------------------------------------
# Continuous crossings.


@dataclass(frozen=True)
class Scenario:
    """Continuous-crossing scenario: geometry plus protocol settings.

    The pedestrian walks a straight line through the collision point; the
    start distance is drawn uniformly from [ped_start_min_m,
    ped_start_max_m] per crossing.  The vehicle starts car_start_m from the
    collision point and is moved by the experimenter feedback protocol
    within car_start_bounds_m.
    """

    geometry: ScenarioGeometry = field(default_factory=ScenarioGeometry)
    ucrash: float = 3.0
    turn_cost: float = 1.0
    ped_start_min_m: float = 6.0
    ped_start_max_m: float = 8.0
    car_start_m: float = 4.3
    feedback_delta_m: float = 0.25
    car_start_bounds_m: tuple[float, float] = (2.0, 8.0)
    crossings_total: int = 20
    step_s: float = 0.5
    turn_timeout_s: Optional[float] = None

    def __post_init__(self) -> None:
        check_positive("ucrash", self.ucrash)
        check_positive("turn_cost", self.turn_cost)
        check_positive("car_start_m", self.car_start_m)
        check_positive("step_s", self.step_s)
        if not 0 < self.ped_start_min_m <= self.ped_start_max_m:
            raise ValueError("pedestrian start range must be positive and ordered")
        if self.crossings_total < 1:
            raise ValueError("crossings_total must be >= 1")

    def params(self) -> GameParams:
        """Game parameters with board bounds sized to the scenario."""
        geom = self.geometry
        max_car = max(self.car_start_m, self.car_start_bounds_m[1])
        max_y = math.ceil(max_car / geom.car_box) + 4
        max_x = math.ceil(self.ped_start_max_m / geom.ped_box) + 4
        return GameParams(
            crash_cost=self.ucrash,
            turn_cost=self.turn_cost,
            max_y=max(64, max_y),
            max_x=max(64, max_x),
        )

    def draw_ped_start(self, rng) -> float:
        if self.ped_start_min_m == self.ped_start_max_m:
            return self.ped_start_min_m
        return float(rng.uniform(self.ped_start_min_m, self.ped_start_max_m))


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read a scenario from a flat key-value YAML file.

    Geometry keys match ScenarioGeometry fields (vehicle_path as a list of
    [x, y] pairs); the remaining keys match Scenario fields.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ValueError(f"scenario file {path} must hold a key-value mapping")
    geom_fields = set(ScenarioGeometry.__dataclass_fields__)
    geom_kwargs = {}
    scen_kwargs = {}
    for key, value in raw.items():
        if key in geom_fields:
            if key == "vehicle_path":
                value = tuple((float(p[0]), float(p[1])) for p in value)
            geom_kwargs[key] = value
        elif key in Scenario.__dataclass_fields__ and key != "geometry":
            if key == "car_start_bounds_m":
                value = (float(value[0]), float(value[1]))
            scen_kwargs[key] = value
        else:
            raise ValueError(f"unknown scenario key {key!r}")
    return Scenario(geometry=ScenarioGeometry(**geom_kwargs), **scen_kwargs)


#: A walker picks the pedestrian's action for one step given the step's
#: game info (which includes the stage equilibrium when interesting).
Walker = Callable[[GameInfo, np.random.Generator], Action]


def fast_walker(info: GameInfo, rng) -> Action:
    return Action.FAST


def cautious_walker(info: GameInfo, rng) -> Action:
    return Action.SLOW if info.interesting else Action.FAST


def model_walker(info: GameInfo, rng) -> Action:
    if info.interesting and info.equilibrium is not None:
        return Action.SLOW if rng.random() < info.equilibrium.p_pedestrian_slow else Action.FAST
    return Action.FAST


def noisy_model_walker(eps: float) -> Walker:
    def walker(info: GameInfo, rng) -> Action:
        if info.interesting and info.equilibrium is not None:
            p = (1.0 - eps) * info.equilibrium.p_pedestrian_slow + 0.5 * eps
            return Action.SLOW if rng.random() < p else Action.FAST
        return Action.FAST

    return walker


WALKERS: dict[str, Walker] = {
    "fast": fast_walker,
    "cautious": cautious_walker,
    "model": model_walker,
    "noisy-model": noisy_model_walker(0.1),
}


class CrossingEngine:
    """Stepper for one continuous crossing.

    Holds metric positions (meters to the collision point along each
    agent's path), drives the vehicle controller each 0.5 s step, and
    applies both agents' speed modulations.  The vehicle's action for the
    pending turn is decided in :meth:`prepare_turn` before the pedestrian's
    action is supplied to :meth:`apply_turn`, which makes the simultaneous
    game honest over a sequential wire.

    A crash is both agents simultaneously inside their crash-region arc
    windows [-box, 2*box).  The crossing ends on a crash or once both
    agents are past the collision point (position < 0); the winner is
    whoever crossed the point first (sub-step times are interpolated, and
    a crash is checked before the pass rule so a co-occupancy on the far
    side of the point still counts as a crash).
    """

    MAX_STEPS = 100_000

    def __init__(
        self,
        scenario: Scenario,
        session_id: str,
        crossing_id: int,
        ped_start_m: float,
        car_start_m: Optional[float],
        rng,
        params: Optional[GameParams] = None,
    ):
        check_positive("ped_start_m", ped_start_m)
        if car_start_m is not None:
            check_positive("car_start_m", car_start_m)
        self.scenario = scenario
        self.geometry = scenario.geometry
        self.params = params if params is not None else scenario.params()
        self.session_id = session_id
        self.crossing_id = crossing_id
        self.rng = as_generator(rng)
        self.t = 0.0
        self.ped_pos = float(ped_start_m)
        self.car_pos = None if car_start_m is None else float(car_start_m)
        self.ped_start = float(ped_start_m)
        self.records: list[CrossingRecord] = []
        self.winner: Optional[Outcome] = None
        self._ped_passed_t: Optional[float] = None
        self._car_passed_t: Optional[float] = None
        self._steps = 0
        self._pending: Optional[GameInfo] = None
        self._prep_lock = threading.Lock()

        geom = self.geometry
        # The pedestrian crosses the vehicle path on a straight line; locate
        # the collision point once from the nominal full-speed ray.
        probe = ConstantVelocityModel(
            origin=(0.0, ped_start_m), velocity=(0.0, -geom.pedestrian_fast_speed), t0=0.0
        )
        hit = intersect_paths(probe, geom)
        if hit is None:
            raise ValueError("pedestrian line never crosses the vehicle path")
        self._collision_point = hit.point
        self._intersection_arc = hit.vehicle_distance
        if self.car_pos is not None and self.car_pos > self._intersection_arc:
            raise ValueError(
                f"car start {self.car_pos} m exceeds path length to the "
                f"intersection ({self._intersection_arc} m)"
            )
        self._ped_dir = (0.0, -1.0)
        # Track history seeded with one pre-roll sample so the trajectory
        # fit has two points from the first step.
        pre = self._ped_world(self.ped_pos + geom.pedestrian_fast_speed * scenario.step_s)
        self._track: list[TrackPoint] = [TrackPoint(-scenario.step_s, pre)]
        self._observe()

    def _ped_world(self, pos: float) -> tuple[float, float]:
        cx, cy = self._collision_point
        return (cx - self._ped_dir[0] * pos, cy - self._ped_dir[1] * pos)

    def _observe(self) -> None:
        self._track.append(TrackPoint(self.t, self._ped_world(self.ped_pos)))
        del self._track[:-10]

    @property
    def done(self) -> bool:
        return self.winner is not None

    def prepare_turn(self) -> GameInfo:
        """Run the controller for the pending turn, committing the vehicle action.

        Idempotent until the turn is applied; safe against a concurrent
        state reader (the commitment and its random draw happen once).
        """
        if self.done:
            raise RuntimeError("crossing already finished")
        with self._prep_lock:
            if self._pending is not None:
                return self._pending
            if self.car_pos is None:
                self._pending = GameInfo(interesting=False, speed_multiplier=1.0, note="no vehicle")
                return self._pending
            pose = point_at_arc(self.geometry.vehicle_path, self._intersection_arc - self.car_pos)
            snapshot = ControllerSnapshot(
                t=self.t,
                vehicle_pose=pose,
                commanded_speed=self.geometry.vehicle_fast_speed,
                ped_tracks=(tuple(self._track),),
            )
            self._pending = controller_step(snapshot, self.geometry, self.params, self.rng).info
            return self._pending

    def apply_turn(self, ped_action: Optional[Action], auto: bool = False) -> CrossingRecord:
        """Advance one step with the committed vehicle action and the given
        pedestrian action (None walks FAST and logs no action)."""
        info = self.prepare_turn()
        self._pending = None
        geom = self.geometry
        step = self.scenario.step_s

        ped_mult = 0.5 if ped_action is Action.SLOW else 1.0
        ped_speed = geom.pedestrian_fast_speed * ped_mult
        car_speed = None
        if self.car_pos is not None:
            car_speed = geom.vehicle_fast_speed * info.speed_multiplier

        record = CrossingRecord(
            session_id=self.session_id,
            crossing_id=self.crossing_id,
            t=self.t,
            ped_pos_m=self.ped_pos,
            car_pos_m=self.car_pos,
            ped_box=quantize_distance(self.ped_pos, geom.ped_box),
            car_box=None if self.car_pos is None else quantize_distance(self.car_pos, geom.car_box),
            interesting=info.interesting,
            ped_action=ped_action,
            car_action=info.vehicle_action,
            speed_multiplier=info.speed_multiplier,
            winner=None,
            auto=auto,
        )
        self.records.append(record)

        prev_ped = self.ped_pos
        prev_car = self.car_pos
        self.ped_pos -= ped_speed * step
        if self.car_pos is not None:
            self.car_pos -= car_speed * step
        self.t += step
        self._steps += 1
        self._observe()

        if self._ped_passed_t is None and self.ped_pos < 0.0:
            frac = prev_ped / (ped_speed * step)
            self._ped_passed_t = self.t - step + frac * step
        if self.car_pos is not None and self._car_passed_t is None and self.car_pos < 0.0:
            frac = prev_car / (car_speed * step)
            self._car_passed_t = self.t - step + frac * step

        in_ped_window = -geom.ped_box <= self.ped_pos < 2 * geom.ped_box
        in_car_window = (
            self.car_pos is not None and -geom.car_box <= self.car_pos < 2 * geom.car_box
        )
        if in_ped_window and in_car_window:
            self._finish(Outcome.CRASH)
        elif self._ped_passed_t is not None and (
            self.car_pos is None or self._car_passed_t is not None
        ):
            if self.car_pos is None or self._ped_passed_t <= self._car_passed_t:
                self._finish(Outcome.PEDESTRIAN_FIRST)
            else:
                self._finish(Outcome.VEHICLE_FIRST)
        elif self._steps >= self.MAX_STEPS:
            raise RuntimeError("crossing failed to terminate")
        return self.records[-1]

    def _finish(self, outcome: Outcome) -> None:
        self.winner = outcome
        self.records[-1] = replace(self.records[-1], winner=outcome)


def run_crossing(
    scenario: Scenario,
    walker: Union[str, Walker],
    rng,
    ped_start_m: Optional[float] = None,
    car_start_m: Optional[float] = None,
    session_id: str = "sim",
    crossing_id: int = 0,
    no_vehicle: bool = False,
) -> list[CrossingRecord]:
    """Simulate one crossing; returns its step records (winner on the last).

    ``walker`` picks the pedestrian's action each step ("fast", "cautious",
    "model", "noisy-model", or a callable).  ``no_vehicle`` runs the
    pedestrian unopposed.
    """
    rng = as_generator(rng)
    if isinstance(walker, str):
        walker = WALKERS[walker]
    ped_start = ped_start_m if ped_start_m is not None else scenario.draw_ped_start(rng)
    car_start = None if no_vehicle else (car_start_m if car_start_m is not None else scenario.car_start_m)
    engine = CrossingEngine(scenario, session_id, crossing_id, ped_start, car_start, rng)
    while not engine.done:
        info = engine.prepare_turn()
        action = walker(info, rng)
        engine.apply_turn(action)
    return engine.records


def self_play_session(
    scenario: Scenario,
    rng,
    walker: Union[str, Walker] = "model",
    session_id: str = "selfplay",
    n_crossings: Optional[int] = None,
) -> list[CrossingRecord]:
    """Run a full session of crossings with feedback-adjusted car starts."""
    rng = as_generator(rng)
    n = n_crossings if n_crossings is not None else scenario.crossings_total
    car_start = scenario.car_start_m
    records: list[CrossingRecord] = []
    for crossing_id in range(n):
        rows = run_crossing(
            scenario,
            walker,
            rng,
            car_start_m=car_start,
            session_id=session_id,
            crossing_id=crossing_id,
        )
        records.extend(rows)
        outcome = rows[-1].winner
        car_start = experimenter_feedback_update(
            car_start, outcome, scenario.feedback_delta_m, scenario.car_start_bounds_m
        )
    return records
