"""Vehicle speed-controller emulation.

Mirrors the on-vehicle game-playing controller: predict the pedestrian's
straight-line trajectory from recent track points, intersect it with the
vehicle's planned path, compare FAST-speed arrival times at the
intersection, and, when the state is interesting (arrival times closer
than the time to pass one another), quantize both distances into boxes and
sample the vehicle's action from the stage equilibrium.  The controller
only modulates speed (x0.5 for SLOW); it never alters the planned path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from seqchicken.game import (
    Action,
    DegenerateGameError,
    BoardBoundsError,
    Equilibrium,
    GameParams,
    GameState,
    policy,
)
from seqchicken.validation import as_generator, check_non_negative, check_positive

__all__ = [
    "TrackPoint",
    "ConstantVelocityModel",
    "ScenarioGeometry",
    "PathIntersection",
    "GameInfo",
    "ControllerSnapshot",
    "StepCommand",
    "TrackFitError",
    "InsufficientTrackError",
    "DegenerateTrackError",
    "fit_constant_velocity",
    "intersect_paths",
    "time_to_point",
    "is_interesting",
    "quantize_distance",
    "project_onto_path",
    "point_at_arc",
    "controller_step",
]

logger = logging.getLogger(__name__)

Point = tuple[float, float]


class TrackFitError(ValueError):
    pass


class InsufficientTrackError(TrackFitError):
    pass


class DegenerateTrackError(TrackFitError):
    pass


class TrackPoint(tuple):
    """Timestamped 2D position (t, (x, y)) from the pedestrian tracker."""

    def __new__(cls, t: float, position: Point):
        return super().__new__(cls, (float(t), (float(position[0]), float(position[1]))))

    @property
    def t(self) -> float:
        return self[0]

    @property
    def position(self) -> Point:
        return self[1]


@dataclass(frozen=True)
class ConstantVelocityModel:
    """Straight-line kinematic prediction: position(t) = origin + velocity*(t-t0)."""

    origin: Point
    velocity: Point
    t0: float

    def __post_init__(self) -> None:
        values = (*self.origin, *self.velocity, self.t0)
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"prediction has non-finite components: {values}")

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)

    def position_at(self, t: float) -> Point:
        dt = t - self.t0
        return (self.origin[0] + self.velocity[0] * dt, self.origin[1] + self.velocity[1] * dt)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Crossing-scene geometry and quantization settings.

    Box sizes make both agents cover about two boxes per second at their
    FAST speeds.  ``pass_clearance_time`` is the time for one agent to
    completely pass the other; when omitted it is derived from the agent
    footprints at the slower FAST speed.
    """

    vehicle_path: tuple[Point, ...] = ((-9.0, 0.0), (3.0, 0.0))
    vehicle_fast_speed: float = 0.2
    pedestrian_fast_speed: float = 0.4
    ped_box: float = 0.2
    car_box: float = 0.08
    vehicle_footprint: float = 1.6
    pedestrian_footprint: float = 0.5
    pass_clearance_time: Optional[float] = None

    def __post_init__(self) -> None:
        check_positive("vehicle_fast_speed", self.vehicle_fast_speed)
        check_positive("pedestrian_fast_speed", self.pedestrian_fast_speed)
        check_positive("ped_box", self.ped_box)
        check_positive("car_box", self.car_box)
        check_positive("vehicle_footprint", self.vehicle_footprint)
        check_positive("pedestrian_footprint", self.pedestrian_footprint)
        if len(self.vehicle_path) < 2:
            raise ValueError("vehicle_path needs at least 2 vertices")
        object.__setattr__(
            self, "vehicle_path", tuple((float(p[0]), float(p[1])) for p in self.vehicle_path)
        )
        if self.pass_clearance_time is not None:
            check_positive("pass_clearance_time", self.pass_clearance_time)

    @property
    def t_pass(self) -> float:
        if self.pass_clearance_time is not None:
            return self.pass_clearance_time
        return (self.vehicle_footprint + self.pedestrian_footprint) / min(
            self.vehicle_fast_speed, self.pedestrian_fast_speed
        )


@dataclass(frozen=True)
class PathIntersection:
    point: Point
    pedestrian_distance: float  # along the predicted ray from its origin
    vehicle_distance: float  # along the vehicle path from its first vertex


@dataclass(frozen=True)
class GameInfo:
    """One controller step's game record.

    interesting=False implies multiplier 1.0 and no sampled action.
    """

    interesting: bool
    speed_multiplier: float
    state: Optional[GameState] = None
    equilibrium: Optional[Equilibrium] = None
    vehicle_action: Optional[Action] = None
    note: str = ""

    def __post_init__(self) -> None:
        if self.speed_multiplier not in (0.5, 1.0):
            raise ValueError(f"speed multiplier must be 0.5 or 1.0, got {self.speed_multiplier}")
        if not self.interesting and (self.speed_multiplier != 1.0 or self.vehicle_action):
            raise ValueError("a non-interesting step cannot modulate speed or sample an action")


@dataclass(frozen=True)
class ControllerSnapshot:
    """Latest cached messages visible to one controller update."""

    t: float
    vehicle_pose: Point
    commanded_speed: float
    ped_tracks: tuple[tuple[TrackPoint, ...], ...] = ()


@dataclass(frozen=True)
class StepCommand:
    speed_command: float
    info: GameInfo


def fit_constant_velocity(
    track: Sequence[TrackPoint], window: int = 10
) -> ConstantVelocityModel:
    """Least-squares straight-line fit over the last ``window`` track points."""
    points = list(track)[-window:]
    if len(points) < 2:
        raise InsufficientTrackError(f"need >= 2 track points, got {len(points)}")
    ts = np.array([p.t for p in points])
    if ts.max() - ts.min() <= 0.0:
        raise DegenerateTrackError("track has zero time span")
    xs = np.array([p.position[0] for p in points])
    ys = np.array([p.position[1] for p in points])
    t0 = float(ts[-1])
    shifted = ts - t0
    denom = float((shifted**2).sum()) - float(shifted.sum()) ** 2 / len(points)
    sx = float((shifted * xs).sum()) - float(shifted.sum()) * float(xs.sum()) / len(points)
    sy = float((shifted * ys).sum()) - float(shifted.sum()) * float(ys.sum()) / len(points)
    vx = sx / denom
    vy = sy / denom
    ox = float(xs.mean()) - vx * float(shifted.mean())
    oy = float(ys.mean()) - vy * float(shifted.mean())
    return ConstantVelocityModel(origin=(ox, oy), velocity=(vx, vy), t0=t0)


def _segment_lengths(path: Sequence[Point]) -> list[float]:
    return [math.dist(a, b) for a, b in zip(path, path[1:])]


def intersect_paths(
    ped: ConstantVelocityModel, geom: ScenarioGeometry
) -> Optional[PathIntersection]:
    """First forward intersection of the pedestrian ray with the vehicle path.

    "First" means smallest pedestrian travel distance.  Parallel segments
    and collinear overlaps yield no unique intersection and are skipped
    (logged); if nothing intersects, returns None.
    """
    speed = ped.speed
    if speed <= 0.0:
        raise ValueError("pedestrian prediction has zero speed")
    ox, oy = ped.origin
    dx, dy = ped.velocity[0] / speed, ped.velocity[1] / speed
    best: Optional[PathIntersection] = None
    arc = 0.0
    for (ax, ay), (bx, by) in zip(geom.vehicle_path, geom.vehicle_path[1:]):
        sx, sy = bx - ax, by - ay
        seg_len = math.hypot(sx, sy)
        denom = dx * sy - dy * sx
        if abs(denom) < 1e-12:
            cross = (ax - ox) * dy - (ay - oy) * dx
            if abs(cross) < 1e-12:
                logger.warning("collinear path overlap; no unique intersection")
            arc += seg_len
            continue
        # Solve origin + r*d == a + u*s for ray parameter r and segment u.
        r = ((ax - ox) * sy - (ay - oy) * sx) / denom
        u = ((ax - ox) * dy - (ay - oy) * dx) / denom
        if r >= 0.0 and -1e-12 <= u <= 1.0 + 1e-12:
            u = min(max(u, 0.0), 1.0)
            candidate = PathIntersection(
                point=(ox + r * dx, oy + r * dy),
                pedestrian_distance=r,
                vehicle_distance=arc + u * seg_len,
            )
            if best is None or candidate.pedestrian_distance < best.pedestrian_distance:
                best = candidate
        arc += seg_len
    return best


def time_to_point(distance: float, fast_speed: float) -> float:
    """Arrival time at a point ``distance`` away when moving at FAST speed."""
    check_non_negative("distance", distance)
    check_positive("fast_speed", fast_speed)
    return distance / fast_speed


def is_interesting(t_vehicle: float, t_pedestrian: float, t_pass: float) -> bool:
    """True when the FAST arrival times differ by less than the passing time."""
    return abs(t_vehicle - t_pedestrian) < t_pass


def quantize_distance(distance_m: float, box_m: float) -> int:
    """Box index for an along-path distance: floor(d/box), clamped to >= -2."""
    check_positive("box_m", box_m)
    return max(math.floor(distance_m / box_m), -2)


def project_onto_path(path: Sequence[Point], pose: Point) -> float:
    """Arc-length position of the closest point on the polyline to ``pose``."""
    best_d2 = math.inf
    best_arc = 0.0
    arc = 0.0
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        sx, sy = bx - ax, by - ay
        seg_len2 = sx * sx + sy * sy
        if seg_len2 == 0.0:
            continue
        u = ((pose[0] - ax) * sx + (pose[1] - ay) * sy) / seg_len2
        u = min(max(u, 0.0), 1.0)
        px, py = ax + u * sx, ay + u * sy
        d2 = (pose[0] - px) ** 2 + (pose[1] - py) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best_arc = arc + u * math.sqrt(seg_len2)
        arc += math.sqrt(seg_len2)
    return best_arc


def point_at_arc(path: Sequence[Point], arc: float) -> Point:
    """Point on the polyline at a given arc length (clamped to the ends)."""
    if arc <= 0.0:
        return path[0]
    remaining = arc
    for (ax, ay), (bx, by) in zip(path, path[1:]):
        seg_len = math.dist((ax, ay), (bx, by))
        if remaining <= seg_len:
            f = remaining / seg_len if seg_len > 0 else 0.0
            return (ax + f * (bx - ax), ay + f * (by - ay))
        remaining -= seg_len
    return path[-1]


_NOT_INTERESTING = GameInfo(interesting=False, speed_multiplier=1.0)


def controller_step(
    snapshot: ControllerSnapshot,
    geom: ScenarioGeometry,
    params: GameParams,
    rng,
) -> StepCommand:
    """One 0.5 s controller update.

    With no usable pedestrian track, or at a non-interesting state, the
    commanded speed passes through unchanged.  At an interesting state the
    stage game is evaluated at the quantized box distances and the
    vehicle's action is sampled from its equilibrium SLOW probability:
    SLOW multiplies the speed by 0.5, FAST leaves it unchanged.  Solver
    failures never escape; they fail safe to the 0.5 multiplier.
    """
    rng = as_generator(rng)

    def command(info: GameInfo) -> StepCommand:
        return StepCommand(snapshot.commanded_speed * info.speed_multiplier, info)

    tracks = snapshot.ped_tracks
    if len(tracks) > 1:
        logger.warning("%d pedestrian tracks; keeping the first, rejecting the rest", len(tracks))
    track = tracks[0] if tracks else ()
    if len(track) < 2:
        return command(_NOT_INTERESTING)
    try:
        prediction = fit_constant_velocity(track)
    except TrackFitError as err:
        logger.warning("track fit failed (%s); treating as no pedestrian", err)
        return command(_NOT_INTERESTING)
    if prediction.speed <= 1e-9:
        return command(GameInfo(False, 1.0, note="pedestrian stationary"))

    crossing = intersect_paths(prediction, geom)
    if crossing is None:
        return command(GameInfo(False, 1.0, note="paths do not cross"))

    vehicle_arc = project_onto_path(geom.vehicle_path, snapshot.vehicle_pose)
    vehicle_dist = crossing.vehicle_distance - vehicle_arc
    if vehicle_dist < 0.0:
        return command(GameInfo(False, 1.0, note="vehicle past intersection"))

    t_vehicle = time_to_point(vehicle_dist, geom.vehicle_fast_speed)
    t_ped = time_to_point(crossing.pedestrian_distance, geom.pedestrian_fast_speed)
    if not is_interesting(t_vehicle, t_ped, geom.t_pass):
        return command(GameInfo(False, 1.0, note="arrival times clear"))

    state = GameState(
        quantize_distance(vehicle_dist, geom.car_box),
        quantize_distance(crossing.pedestrian_distance, geom.ped_box),
    )
    try:
        equilibrium = policy(state, params)
    except (DegenerateGameError, BoardBoundsError) as err:
        logger.warning("solver failed at %s (%s); failing safe to SLOW", tuple(state), err)
        return command(
            GameInfo(True, 0.5, state=state, vehicle_action=Action.SLOW, note="fail-safe")
        )
    action = Action.SLOW if rng.random() < equilibrium.p_vehicle_slow else Action.FAST
    multiplier = 0.5 if action is Action.SLOW else 1.0
    return command(
        GameInfo(True, multiplier, state=state, equilibrium=equilibrium, vehicle_action=action)
    )
