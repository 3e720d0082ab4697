"""Session service: lifecycle, fairness, persistence, export, HTTP layer."""

import json
import threading

import pytest
from fastapi.testclient import TestClient

from seqchicken.fitting import filter_funnel, fit_ucrash
from seqchicken.records import CrossingRecord
from seqchicken.service import (
    SequencingError,
    SessionService,
    UnknownSessionError,
    create_app,
)
from seqchicken.simulate import Scenario

QUICK = {"seed": 123, "crossings_total": 2, "ped_start_min_m": 6.0, "ped_start_max_m": 6.0}


@pytest.fixture()
def service(tmp_path):
    return SessionService(tmp_path / "data")


def play_to_completion(service, session_id, action="FAST", limit=10_000):
    turns = []
    while True:
        state = service.session_state(session_id)
        if state["status"] == "finished":
            return turns
        turns.append(service.submit_action(session_id, action))
        assert len(turns) < limit


class TestLifecycle:
    def test_create_default_session(self, service):
        state = service.create_session({"seed": 1})
        assert state["crossings_total"] == 20
        assert state["status"] == "active"
        assert state["crossing_index"] == 0
        assert state["turn"] is not None

    def test_single_crossing_session(self, service):
        state = service.create_session({"seed": 1, "crossings_total": 1})
        turns = play_to_completion(service, state["session_id"])
        assert turns[-1]["session_status"] == "finished"
        assert turns[-1]["outcome"] is not None

    def test_invalid_config_rejected(self, service):
        with pytest.raises(ValueError, match="ucrash"):
            service.create_session({"ucrash": -3.0})
        with pytest.raises(ValueError, match="unknown config key"):
            service.create_session({"no_such": 1})

    def test_unknown_session(self, service):
        with pytest.raises(UnknownSessionError):
            service.session_state("nope")

    def test_finished_session_rejects_turns(self, service):
        state = service.create_session(QUICK)
        play_to_completion(service, state["session_id"])
        with pytest.raises(SequencingError):
            service.submit_action(state["session_id"], "FAST")

    def test_feedback_moves_vehicle_start(self, service):
        state = service.create_session(QUICK)
        sid = state["session_id"]
        start0 = state["car_start_m"]
        last = None
        while service.session_state(sid)["crossing_index"] == 0:
            last = service.submit_action(sid, "FAST")
        start1 = service.session_state(sid)["car_start_m"]
        if last["outcome"] == "PEDESTRIAN_FIRST":
            assert start1 == pytest.approx(start0 - 0.25)
        elif last["outcome"] == "VEHICLE_FIRST":
            assert start1 == pytest.approx(start0 + 0.25)
        else:
            assert start1 == start0

    def test_bookkeeping_sums(self, service):
        state = service.create_session({**QUICK, "crossings_total": 4})
        play_to_completion(service, state["session_id"], "FAST")
        final = service.session_state(state["session_id"])
        scores = final["scores"]
        assert (
            scores["pedestrian_wins"] + scores["vehicle_wins"] + scores["crashes"] == 4
        )


class TestCommitBeforeObserve:
    def test_state_view_never_contains_commitment(self, service):
        state = service.create_session(QUICK)
        sid = state["session_id"]
        for _ in range(10):
            view = service.session_state(sid)
            payload = json.dumps(view)
            assert "vehicle_action" not in payload
            assert "car_action" not in payload
            assert "equilibrium" not in payload
            service.submit_action(sid, "SLOW")

    def test_vehicle_action_independent_of_submitted_action(self, tmp_path):
        # Two sessions, same seed and config, identical histories up to a
        # divergence turn: the revealed vehicle action at the divergence
        # turn must match, whatever the pedestrian submits.
        for divergence in (0, 3, 11):
            a = SessionService(tmp_path / f"a{divergence}")
            b = SessionService(tmp_path / f"b{divergence}")
            sa = a.create_session(QUICK)["session_id"]
            sb = b.create_session(QUICK)["session_id"]
            for _ in range(divergence):
                ta = a.submit_action(sa, "FAST")
                tb = b.submit_action(sb, "FAST")
                assert ta["vehicle_action"] == tb["vehicle_action"]
            ta = a.submit_action(sa, "SLOW")
            tb = b.submit_action(sb, "FAST")
            assert ta["vehicle_action"] == tb["vehicle_action"]

    def test_deterministic_given_seed_and_actions(self, tmp_path):
        a = SessionService(tmp_path / "x")
        b = SessionService(tmp_path / "y")
        sa = a.create_session(QUICK)["session_id"]
        sb = b.create_session(QUICK)["session_id"]
        ta = play_to_completion(a, sa, "SLOW")
        tb = play_to_completion(b, sb, "SLOW")
        strip = lambda turns: [
            {k: v for k, v in t.items() if k != "session_id"} for t in turns
        ]
        assert strip(ta) == strip(tb)


class TestPersistence:
    def test_restart_resumes_mid_crossing(self, tmp_path):
        data = tmp_path / "data"
        first = SessionService(data)
        sid = first.create_session(QUICK)["session_id"]
        for _ in range(5):
            first.submit_action(sid, "FAST")
        view_before = first.session_state(sid)
        # Fresh service over the same directory: must resume and keep the
        # committed action stream identical.
        second = SessionService(data)
        view_after = second.session_state(sid)
        assert view_after["turn"]["ped_pos_m"] == pytest.approx(
            view_before["turn"]["ped_pos_m"]
        )
        t1 = first.submit_action(sid, "FAST")
        t2 = second.submit_action(sid, "FAST")
        assert t1["vehicle_action"] == t2["vehicle_action"]

    def test_export_round_trip_byte_identical(self, service):
        state = service.create_session(QUICK)
        play_to_completion(service, state["session_id"])
        text = service.export_records()
        lines = [l for l in text.splitlines() if l]
        parsed = [CrossingRecord.from_json_line(l) for l in lines]
        assert "\n".join(r.to_json_line() for r in parsed) + "\n" == text

    def test_export_feeds_fitting(self, service):
        state = service.create_session({**QUICK, "crossings_total": 3})
        play_to_completion(service, state["session_id"], "SLOW")
        records = [
            CrossingRecord.from_json_line(l)
            for l in service.export_records().splitlines()
            if l
        ]
        funnel = filter_funnel(records, Scenario().geometry)
        result = fit_ucrash(funnel.points, grid=(2.0, 3.0, 10.0))
        assert result.best_c in (2.0, 3.0, 10.0)

    def test_empty_store_exports_empty(self, service):
        assert service.export_records() == ""

    def test_records_grouped_with_monotone_times(self, service):
        state = service.create_session(QUICK)
        play_to_completion(service, state["session_id"])
        records = [
            CrossingRecord.from_json_line(l)
            for l in service.export_records().splitlines()
            if l
        ]
        by_crossing = {}
        for r in records:
            by_crossing.setdefault(r.crossing_id, []).append(r.t)
        assert set(by_crossing) == {0, 1}
        for ts in by_crossing.values():
            assert ts == sorted(ts)
        # Winner only on each crossing's final row.
        for r, nxt in zip(records, records[1:]):
            if r.crossing_id == nxt.crossing_id:
                assert r.winner is None
            else:
                assert r.winner is not None
        assert records[-1].winner is not None

    def test_timeout_autoplays_fast(self, tmp_path, monkeypatch):
        service = SessionService(tmp_path / "t")
        state = service.create_session({**QUICK, "turn_timeout_s": 0.0})
        sid = state["session_id"]
        import time as _time

        later = _time.monotonic() + 10.0
        monkeypatch.setattr("seqchicken.service.time.monotonic", lambda: later)
        service.submit_action(sid, "SLOW")
        records = [
            CrossingRecord.from_json_line(l)
            for l in service.export_records().splitlines()
            if l
        ]
        assert records[0].auto is True
        assert records[0].ped_action is not None
        assert records[0].ped_action.value == "FAST"
        assert records[1].auto is False


class TestConcurrency:
    def test_second_in_flight_submit_rejected(self, service, monkeypatch):
        state = service.create_session(QUICK)
        sid = state["session_id"]
        runtime = service._get(sid)
        assert runtime.lock.acquire(blocking=False)
        try:
            with pytest.raises(SequencingError, match="in flight"):
                service.submit_action(sid, "FAST")
        finally:
            runtime.lock.release()

    def test_parallel_sessions_are_independent(self, service):
        ids = [service.create_session({**QUICK, "seed": s})["session_id"] for s in (1, 2, 3)]
        errors = []

        def worker(sid):
            try:
                play_to_completion(service, sid, "FAST")
            except Exception as err:  # pragma: no cover
                errors.append(err)

        threads = [threading.Thread(target=worker, args=(sid,)) for sid in ids]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for sid in ids:
            assert service.session_state(sid)["status"] == "finished"


class TestHttpApi:
    def test_full_flow(self, tmp_path):
        client = TestClient(create_app(tmp_path / "api"))
        resp = client.post("/api/sessions", json=QUICK)
        assert resp.status_code == 200
        sid = resp.json()["session_id"]

        resp = client.get(f"/api/sessions/{sid}")
        assert resp.status_code == 200
        assert "vehicle_action" not in json.dumps(resp.json())

        n = 0
        while True:
            resp = client.post(f"/api/sessions/{sid}/turns", json={"action": "FAST"})
            assert resp.status_code == 200
            n += 1
            if resp.json()["session_status"] == "finished":
                break
        assert n > 10

        resp = client.get("/api/export")
        assert resp.status_code == 200
        assert len(resp.text.splitlines()) == n

        assert client.post(f"/api/sessions/{sid}/turns", json={"action": "FAST"}).status_code == 409
        assert client.post("/api/sessions", json={"ucrash": -1}).status_code == 400
        assert client.get("/api/sessions/missing").status_code == 404
        assert (
            client.post(f"/api/sessions/{sid}/turns", json={"action": "TROT"}).status_code
            in (400, 409)
        )

    def test_list_sessions(self, tmp_path):
        client = TestClient(create_app(tmp_path / "api2"))
        client.post("/api/sessions", json=QUICK)
        client.post("/api/sessions", json={**QUICK, "seed": 5})
        resp = client.get("/api/sessions")
        assert resp.status_code == 200
        assert len(resp.json()) == 2
