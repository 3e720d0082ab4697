"""Controller emulation: trajectory fit, intersection, quantization, stepping."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqchicken.controller import (
    ConstantVelocityModel,
    ControllerSnapshot,
    DegenerateTrackError,
    InsufficientTrackError,
    ScenarioGeometry,
    TrackPoint,
    controller_step,
    fit_constant_velocity,
    intersect_paths,
    is_interesting,
    point_at_arc,
    project_onto_path,
    quantize_distance,
    time_to_point,
)
from seqchicken.game import Action, GameParams

from oracles import least_squares_line

GEOM = ScenarioGeometry()


def track(*points):
    return tuple(TrackPoint(t, p) for t, p in points)


class TestFitConstantVelocity:
    def test_two_points(self):
        model = fit_constant_velocity(track((0.0, (0.0, 0.0)), (1.0, (0.4, 0.0))))
        assert model.velocity == pytest.approx((0.4, 0.0), abs=1e-12)
        assert model.origin == pytest.approx((0.4, 0.0), abs=1e-12)
        assert model.t0 == 1.0

    def test_single_point_is_insufficient(self):
        with pytest.raises(InsufficientTrackError):
            fit_constant_velocity(track((0.0, (1.0, 1.0))))

    def test_zero_time_span(self):
        with pytest.raises(DegenerateTrackError):
            fit_constant_velocity(track((1.0, (0.0, 0.0)), (1.0, (1.0, 0.0))))

    def test_noisy_points_match_closed_form(self):
        rng = np.random.default_rng(5)
        ts = np.arange(10) * 0.5
        xs = 0.3 + 0.4 * ts + rng.normal(0, 0.01, 10)
        ys = 5.0 - 0.2 * ts + rng.normal(0, 0.01, 10)
        model = fit_constant_velocity(track(*zip(ts, zip(xs, ys))))
        ax, bx = least_squares_line(ts, xs)
        ay, by = least_squares_line(ts, ys)
        assert model.velocity == pytest.approx((bx, by), abs=1e-9)
        assert model.position_at(0.0) == pytest.approx((ax, ay), abs=1e-9)

    def test_window_uses_last_points_only(self):
        # A kink outside the window must not influence the fit.
        pts = [(float(t), (10.0 - t, 0.0)) for t in range(5)]
        pts += [(float(5 + t), (5.0 + 2.0 * t, 0.0)) for t in range(10)]
        model = fit_constant_velocity(track(*pts), window=10)
        assert model.velocity[0] == pytest.approx(2.0, abs=1e-9)


class TestIntersectPaths:
    def test_perpendicular_crossing(self):
        geom = ScenarioGeometry(vehicle_path=((-5.0, 0.0), (5.0, 0.0)))
        ped = ConstantVelocityModel(origin=(0.0, 5.0), velocity=(0.0, -1.0), t0=0.0)
        hit = intersect_paths(ped, geom)
        assert hit is not None
        assert hit.point == pytest.approx((0.0, 0.0), abs=1e-12)
        assert hit.pedestrian_distance == pytest.approx(5.0)
        assert hit.vehicle_distance == pytest.approx(5.0)

    def test_parallel_paths_miss(self):
        geom = ScenarioGeometry(vehicle_path=((-5.0, 0.0), (5.0, 0.0)))
        ped = ConstantVelocityModel(origin=(0.0, 1.0), velocity=(1.0, 0.0), t0=0.0)
        assert intersect_paths(ped, geom) is None

    def test_ray_is_forward_only(self):
        geom = ScenarioGeometry(vehicle_path=((-5.0, 0.0), (5.0, 0.0)))
        ped = ConstantVelocityModel(origin=(0.0, 5.0), velocity=(0.0, 1.0), t0=0.0)
        assert intersect_paths(ped, geom) is None

    def test_second_segment_includes_first_length(self):
        geom = ScenarioGeometry(vehicle_path=((0.0, 0.0), (3.0, 0.0), (3.0, 4.0)))
        ped = ConstantVelocityModel(origin=(0.0, 2.0), velocity=(1.0, 0.0), t0=0.0)
        hit = intersect_paths(ped, geom)
        # Crosses the vertical segment at (3, 2): 3 m of first segment plus 2 m up.
        assert hit.point == pytest.approx((3.0, 2.0), abs=1e-12)
        assert hit.vehicle_distance == pytest.approx(5.0)
        assert hit.pedestrian_distance == pytest.approx(3.0)

    def test_first_intersection_by_ped_distance(self):
        geom = ScenarioGeometry(vehicle_path=((-1.0, 2.0), (1.0, 2.0), (1.0, 8.0), (-1.0, 8.0)))
        ped = ConstantVelocityModel(origin=(0.0, 10.0), velocity=(0.0, -1.0), t0=0.0)
        hit = intersect_paths(ped, geom)
        # The ray crosses y=8 (closer to ped) and y=2; pick ped-closest.
        assert hit.point == pytest.approx((0.0, 8.0), abs=1e-12)

    def test_zero_speed_rejected(self):
        ped = ConstantVelocityModel(origin=(0.0, 5.0), velocity=(0.0, 0.0), t0=0.0)
        with pytest.raises(ValueError):
            intersect_paths(ped, GEOM)


class TestScalars:
    def test_time_to_point(self):
        assert time_to_point(4.0, 0.4) == pytest.approx(10.0)
        assert time_to_point(4.3, 0.2) == pytest.approx(21.5)
        assert time_to_point(0.0, 0.2) == 0.0
        with pytest.raises(ValueError):
            time_to_point(1.0, 0.0)
        with pytest.raises(ValueError):
            time_to_point(-1.0, 0.2)

    def test_is_interesting(self):
        assert is_interesting(10.0, 12.0, 2.0) is False  # equal to the passing time
        assert is_interesting(10.0, 10.0, 2.0) is True
        assert is_interesting(10.0, 11.5, 2.0) is True
        assert is_interesting(10.0, 10.0, 1e-9) is True  # exact collision course

    def test_quantize(self):
        assert quantize_distance(0.99, 0.2) == 4
        assert quantize_distance(4.3, 0.08) == 53
        assert quantize_distance(-0.3, 0.2) == -2
        assert quantize_distance(-5.0, 0.2) == -2
        with pytest.raises(ValueError):
            quantize_distance(1.0, 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_quantize_monotone(self, d1, d2):
        lo, hi = sorted((d1, d2))
        assert quantize_distance(lo, 0.2) <= quantize_distance(hi, 0.2)

    def test_default_pass_clearance(self):
        # (1.6 + 0.5) / min(0.2, 0.4)
        assert GEOM.t_pass == pytest.approx(10.5)
        assert ScenarioGeometry(pass_clearance_time=3.0).t_pass == 3.0


class TestPathHelpers:
    def test_project_and_point_roundtrip(self):
        path = ((0.0, 0.0), (4.0, 0.0), (4.0, 4.0))
        assert project_onto_path(path, (2.0, 1.0)) == pytest.approx(2.0)
        assert project_onto_path(path, (5.0, 3.0)) == pytest.approx(7.0)
        assert point_at_arc(path, 6.0) == pytest.approx((4.0, 2.0))
        assert point_at_arc(path, 99.0) == pytest.approx((4.0, 4.0))


def snapshot_on_course(ped_dist=6.0, car_dist=4.3, speed=0.2):
    """Pedestrian approaching (0,0) from +y, vehicle from -x, both tracked."""
    tr = track(
        (-0.5, (0.0, ped_dist + 0.2)),
        (0.0, (0.0, ped_dist)),
    )
    return ControllerSnapshot(
        t=0.0,
        vehicle_pose=(-car_dist, 0.0),
        commanded_speed=speed,
        ped_tracks=(tr,),
    )


class TestControllerStep:
    params = GameParams(crash_cost=3.0, max_y=128, max_x=64)

    def test_no_pedestrian_passthrough(self):
        snap = ControllerSnapshot(t=0.0, vehicle_pose=(-4.3, 0.0), commanded_speed=0.2)
        cmd = controller_step(snap, GEOM, self.params, np.random.default_rng(0))
        assert cmd.info.interesting is False
        assert cmd.speed_command == 0.2
        assert cmd.info.vehicle_action is None

    def test_interesting_state_quantized(self):
        cmd = controller_step(
            snapshot_on_course(6.1, 4.3), GEOM, self.params, np.random.default_rng(0)
        )
        assert cmd.info.interesting is True
        assert cmd.info.state.y == 53  # 4.3 m in 0.08 m boxes
        assert cmd.info.state.x == 30  # 6.1 m in 0.2 m boxes
        assert cmd.info.equilibrium is not None

    def test_sampled_slow_halves_speed(self):
        # State (4, 4) is mixed (P(SLOW) = 0.4 at C=3); both actions appear
        # across seeds and the multiplier rule applies.
        seen = {}
        for seed in range(200):
            cmd = controller_step(
                snapshot_on_course(0.9, 0.36), GEOM, self.params, np.random.default_rng(seed)
            )
            assert cmd.info.interesting
            assert cmd.info.state == (4, 4)
            seen[cmd.info.vehicle_action] = cmd
            if len(seen) == 2:
                break
        assert set(seen) == {Action.SLOW, Action.FAST}
        assert seen[Action.SLOW].info.speed_multiplier == 0.5
        assert seen[Action.SLOW].speed_command == pytest.approx(0.1)
        assert seen[Action.FAST].info.speed_multiplier == 1.0
        assert seen[Action.FAST].speed_command == pytest.approx(0.2)

    def test_clear_arrival_times_not_interesting(self):
        # Pedestrian 6 m (15 s), vehicle 40 m short of path end would be
        # beyond the polyline; use a slow pedestrian far away instead.
        snap = snapshot_on_course(ped_dist=12.0, car_dist=2.0)
        # t_ped = 30 s, t_vehicle = 10 s -> differ by 20 > 10.5.
        cmd = controller_step(snap, GEOM, self.params, np.random.default_rng(0))
        assert cmd.info.interesting is False
        assert cmd.speed_command == 0.2

    def test_determinism(self):
        snap = snapshot_on_course()
        a = controller_step(snap, GEOM, self.params, np.random.default_rng(33))
        b = controller_step(snap, GEOM, self.params, np.random.default_rng(33))
        assert a == b

    def test_multiplier_always_half_or_one(self):
        for seed in range(50):
            cmd = controller_step(
                snapshot_on_course(5.0, 2.6), GEOM, self.params, np.random.default_rng(seed)
            )
            assert cmd.info.speed_multiplier in (0.5, 1.0)
            assert cmd.speed_command == pytest.approx(0.2 * cmd.info.speed_multiplier)

    def test_stationary_pedestrian_not_interesting(self):
        tr = track((-0.5, (0.0, 6.0)), (0.0, (0.0, 6.0)))
        snap = ControllerSnapshot(0.0, (-4.3, 0.0), 0.2, (tr,))
        cmd = controller_step(snap, GEOM, self.params, np.random.default_rng(0))
        assert cmd.info.interesting is False

    def test_extra_tracks_rejected_with_warning(self, caplog):
        tr1 = track((-0.5, (0.0, 6.3)), (0.0, (0.0, 6.1)))
        tr2 = track((-0.5, (0.0, 9.2)), (0.0, (0.0, 9.0)))
        snap = ControllerSnapshot(0.0, (-4.3, 0.0), 0.2, (tr1, tr2))
        with caplog.at_level("WARNING", logger="seqchicken.controller"):
            cmd = controller_step(snap, GEOM, self.params, np.random.default_rng(0))
        assert any("tracks" in m for m in caplog.messages)
        assert cmd.info.state.x == 30  # first track used

    def test_solver_failure_fails_safe(self, caplog):
        # Board bounds far too small force a solver error at the queried state.
        tiny = GameParams(crash_cost=3.0, max_y=2, max_x=2)
        with caplog.at_level("WARNING", logger="seqchicken.controller"):
            cmd = controller_step(snapshot_on_course(), GEOM, tiny, np.random.default_rng(0))
        assert cmd.info.speed_multiplier == 0.5
        assert cmd.speed_command == pytest.approx(0.1)
        assert any("fail" in m.lower() for m in caplog.messages)

    def test_vehicle_past_intersection_not_interesting(self):
        snap = ControllerSnapshot(
            t=0.0,
            vehicle_pose=(1.0, 0.0),
            commanded_speed=0.2,
            ped_tracks=(track((-0.5, (0.0, 6.2)), (0.0, (0.0, 6.0))),),
        )
        cmd = controller_step(snap, GEOM, self.params, np.random.default_rng(0))
        assert cmd.info.interesting is False
