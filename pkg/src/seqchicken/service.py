"""Live crossing-game service.

Persists sessions and exposes a small request/response API so a client can
play crossings against the model vehicle.  Simultaneity over a sequential
wire is implemented by commit-before-observe: the vehicle's action for the
pending turn is drawn from the session's random stream and stored
server-side before the client's action for that turn is accepted, and is
only revealed in the turn result.  State views never contain it.

Storage is an append-only JSON-lines record log per session plus a compact
meta document; no database.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from seqchicken.controller import GameInfo, ScenarioGeometry
from seqchicken.game import Action, GameState
from seqchicken.records import CrossingRecord, Outcome
from seqchicken.simulate import CrossingEngine, Scenario, experimenter_feedback_update

__all__ = [
    "SessionError",
    "UnknownSessionError",
    "SequencingError",
    "SessionService",
    "create_app",
]


class SessionError(Exception):
    pass


class UnknownSessionError(SessionError):
    pass


class SequencingError(SessionError):
    """No pending turn, a second in-flight submit, or a finished session."""


@dataclass
class _SessionRuntime:
    session_id: str
    scenario: Scenario
    seed: int
    rng: np.random.Generator
    status: str = "active"  # active | finished
    crossing_index: int = 0
    car_start: float = 0.0
    ped_wins: int = 0
    vehicle_wins: int = 0
    crashes: int = 0
    engine: Optional[CrossingEngine] = None
    turn_started: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


def _info_view(info: Optional[GameInfo]) -> Optional[dict]:
    if info is None:
        return None
    return {
        "interesting": info.interesting,
        "state": None if info.state is None else {"y": info.state.y, "x": info.state.x},
    }


class SessionService:
    """Session lifecycle, turn sequencing, persistence, export."""

    def __init__(self, data_dir: Union[str, Path]):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._index_path = self.data_dir / "index.json"
        self._sessions: dict[str, _SessionRuntime] = {}
        self._registry_lock = threading.Lock()
        self._load_index()

    # -- persistence -------------------------------------------------------

    def _load_index(self) -> None:
        self._index: list[str] = []
        if self._index_path.exists():
            self._index = json.loads(self._index_path.read_text())

    def _save_index(self) -> None:
        self._index_path.write_text(json.dumps(self._index))

    def _session_dir(self, session_id: str) -> Path:
        return self.data_dir / session_id

    def _persist(self, s: _SessionRuntime) -> None:
        meta = {
            "session_id": s.session_id,
            "seed": s.seed,
            "scenario": _scenario_to_dict(s.scenario),
            "status": s.status,
            "crossing_index": s.crossing_index,
            "car_start": s.car_start,
            "ped_wins": s.ped_wins,
            "vehicle_wins": s.vehicle_wins,
            "crashes": s.crashes,
            "rng_state": _rng_state_to_json(s.rng),
            "engine": _engine_to_dict(s.engine),
        }
        path = self._session_dir(s.session_id) / "meta.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(meta))
        tmp.replace(path)

    def _append_records(self, session_id: str, records: list[CrossingRecord]) -> None:
        path = self._session_dir(session_id) / "records.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            for r in records:
                fh.write(r.to_json_line() + "\n")

    def _restore(self, session_id: str) -> _SessionRuntime:
        path = self._session_dir(session_id) / "meta.json"
        if not path.exists():
            raise UnknownSessionError(f"unknown session {session_id}")
        meta = json.loads(path.read_text())
        scenario = _scenario_from_dict(meta["scenario"])
        rng = np.random.default_rng()
        rng.bit_generator.state = _rng_state_from_json(meta["rng_state"])
        s = _SessionRuntime(
            session_id=session_id,
            scenario=scenario,
            seed=meta["seed"],
            rng=rng,
            status=meta["status"],
            crossing_index=meta["crossing_index"],
            car_start=meta["car_start"],
            ped_wins=meta["ped_wins"],
            vehicle_wins=meta["vehicle_wins"],
            crashes=meta["crashes"],
        )
        if meta["engine"] is not None:
            s.engine = _engine_from_dict(meta["engine"], scenario, session_id, rng)
        return s

    # -- session access ----------------------------------------------------

    def _get(self, session_id: str) -> _SessionRuntime:
        with self._registry_lock:
            if session_id not in self._sessions:
                self._sessions[session_id] = self._restore(session_id)
            return self._sessions[session_id]

    def list_sessions(self) -> list[dict]:
        return [self.session_state(sid) for sid in self._index]

    # -- operations --------------------------------------------------------

    def create_session(self, config: Optional[dict] = None) -> dict:
        """Create and persist a session; returns its initial state view."""
        config = dict(config or {})
        seed = config.pop("seed", None)
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**32))
        seed = int(seed)
        scenario = _scenario_with_overrides(config)
        session_id = uuid.uuid4().hex[:12]
        s = _SessionRuntime(
            session_id=session_id,
            scenario=scenario,
            seed=seed,
            rng=np.random.default_rng(seed),
            car_start=scenario.car_start_m,
        )
        self._session_dir(session_id).mkdir(parents=True)
        self._start_crossing(s)
        with self._registry_lock:
            self._sessions[session_id] = s
            self._index.append(session_id)
            self._save_index()
        self._persist(s)
        return self.session_state(session_id)

    def _start_crossing(self, s: _SessionRuntime) -> None:
        ped_start = s.scenario.draw_ped_start(s.rng)
        s.engine = CrossingEngine(
            s.scenario,
            s.session_id,
            s.crossing_index,
            ped_start,
            s.car_start,
            s.rng,
        )
        s.engine.prepare_turn()  # commit the vehicle action before any observation
        s.turn_started = time.monotonic()

    def _timeout_expired(self, s: _SessionRuntime) -> bool:
        t = s.scenario.turn_timeout_s
        return t is not None and (time.monotonic() - s.turn_started) > t

    def _advance(self, s: _SessionRuntime, action: Optional[Action], auto: bool) -> dict:
        engine = s.engine
        info = engine.prepare_turn()
        record = engine.apply_turn(action, auto=auto)
        self._append_records(s.session_id, [record])
        result = {
            "session_id": s.session_id,
            "crossing_id": engine.crossing_id,
            "t": record.t,
            "interesting": record.interesting,
            "vehicle_action": record.car_action.value if record.car_action else None,
            "ped_action": record.ped_action.value if record.ped_action else None,
            "auto": auto,
            "ped_pos_m": engine.ped_pos,
            "car_pos_m": engine.car_pos,
            "outcome": None,
            "session_status": s.status,
        }
        if engine.done:
            outcome = engine.winner
            result["outcome"] = outcome.value
            if outcome is Outcome.PEDESTRIAN_FIRST:
                s.ped_wins += 1
            elif outcome is Outcome.VEHICLE_FIRST:
                s.vehicle_wins += 1
            else:
                s.crashes += 1
            s.car_start = experimenter_feedback_update(
                s.car_start,
                outcome,
                s.scenario.feedback_delta_m,
                s.scenario.car_start_bounds_m,
            )
            s.crossing_index += 1
            if s.crossing_index >= s.scenario.crossings_total:
                s.status = "finished"
                s.engine = None
            else:
                self._start_crossing(s)
        else:
            s.engine.prepare_turn()
            s.turn_started = time.monotonic()
        result["session_status"] = s.status
        self._persist(s)
        return result

    def submit_action(self, session_id: str, action: Union[str, Action]) -> dict:
        """Play the pedestrian's action for the pending turn.

        Reveals the pre-committed vehicle action, advances one controller
        step, persists the record, and commits the next turn's vehicle
        action.  Turns are strictly serialized; a concurrent submit is
        rejected rather than queued.
        """
        if not isinstance(action, Action):
            try:
                action = Action(str(action).upper())
            except ValueError:
                raise ValueError(f"action must be SLOW or FAST, got {action!r}") from None
        s = self._get(session_id)
        if not s.lock.acquire(blocking=False):
            raise SequencingError("a turn for this session is already in flight")
        try:
            if s.status == "finished":
                raise SequencingError("session is finished; no pending turn")
            if self._timeout_expired(s):
                self._advance(s, Action.FAST, auto=True)
                if s.status == "finished":
                    raise SequencingError("session finished by turn timeout")
            return self._advance(s, action, auto=False)
        finally:
            s.lock.release()

    def session_state(self, session_id: str) -> dict:
        """Client-safe view: never includes the committed vehicle action."""
        s = self._get(session_id)
        engine = s.engine
        view = {
            "session_id": s.session_id,
            "status": s.status,
            "crossing_index": s.crossing_index,
            "crossings_total": s.scenario.crossings_total,
            "scores": {
                "pedestrian_wins": s.ped_wins,
                "vehicle_wins": s.vehicle_wins,
                "crashes": s.crashes,
            },
            "car_start_m": s.car_start,
            "geometry": {
                "ped_box": s.scenario.geometry.ped_box,
                "car_box": s.scenario.geometry.car_box,
                "pedestrian_fast_speed": s.scenario.geometry.pedestrian_fast_speed,
                "vehicle_fast_speed": s.scenario.geometry.vehicle_fast_speed,
                "step_s": s.scenario.step_s,
            },
            "turn": None,
        }
        if engine is not None and engine.winner is None:
            from seqchicken.controller import quantize_distance

            view["turn"] = {
                "t": engine.t,
                "ped_pos_m": engine.ped_pos,
                "car_pos_m": engine.car_pos,
                "ped_box": quantize_distance(engine.ped_pos, s.scenario.geometry.ped_box),
                "car_box": None
                if engine.car_pos is None
                else quantize_distance(engine.car_pos, s.scenario.geometry.car_box),
                "pending": _info_view(engine.prepare_turn()),
            }
        return view

    def export_records(self, session_ids: Optional[list[str]] = None) -> str:
        """Line-delimited records for the selected (default: all) sessions."""
        ids = session_ids if session_ids is not None else list(self._index)
        chunks = []
        for sid in ids:
            path = self._session_dir(sid) / "records.jsonl"
            if not path.exists():
                if sid not in self._index:
                    raise UnknownSessionError(f"unknown session {sid}")
                continue
            chunks.append(path.read_text(encoding="utf-8"))
        return "".join(chunks)


# -- serialization helpers ---------------------------------------------------


def _scenario_to_dict(scenario: Scenario) -> dict:
    d = asdict(scenario)
    d["geometry"]["vehicle_path"] = [list(p) for p in scenario.geometry.vehicle_path]
    d["car_start_bounds_m"] = list(scenario.car_start_bounds_m)
    return d


def _scenario_from_dict(d: dict) -> Scenario:
    g = dict(d["geometry"])
    g["vehicle_path"] = tuple((float(p[0]), float(p[1])) for p in g["vehicle_path"])
    rest = {k: v for k, v in d.items() if k != "geometry"}
    rest["car_start_bounds_m"] = tuple(rest["car_start_bounds_m"])
    return Scenario(geometry=ScenarioGeometry(**g), **rest)


def _scenario_with_overrides(config: dict) -> Scenario:
    base = Scenario()
    geom_fields = set(ScenarioGeometry.__dataclass_fields__)
    geom_kwargs = {}
    scen_kwargs = {}
    for key, value in config.items():
        if key in geom_fields:
            if key == "vehicle_path":
                value = tuple((float(p[0]), float(p[1])) for p in value)
            geom_kwargs[key] = value
        elif key in Scenario.__dataclass_fields__ and key != "geometry":
            if key == "car_start_bounds_m":
                value = (float(value[0]), float(value[1]))
            scen_kwargs[key] = value
        else:
            raise ValueError(f"unknown config key {key!r}")
    geometry = ScenarioGeometry(**geom_kwargs) if geom_kwargs else base.geometry
    return Scenario(geometry=geometry, **scen_kwargs)


def _rng_state_to_json(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=int))


def _rng_state_from_json(state: dict) -> dict:
    out = dict(state)
    inner = dict(out["state"])
    if "state" in inner and isinstance(inner["state"], list):
        inner["state"] = [int(v) for v in inner["state"]]
    out["state"] = inner
    return out


def _engine_to_dict(engine: Optional[CrossingEngine]) -> Optional[dict]:
    if engine is None:
        return None
    info = engine.prepare_turn()
    return {
        "crossing_id": engine.crossing_id,
        "t": engine.t,
        "ped_pos": engine.ped_pos,
        "car_pos": engine.car_pos,
        "ped_start": engine.ped_start,
        "steps": engine._steps,
        "ped_passed_t": engine._ped_passed_t,
        "car_passed_t": engine._car_passed_t,
        "track": [[p.t, list(p.position)] for p in engine._track],
        "pending": {
            "interesting": info.interesting,
            "speed_multiplier": info.speed_multiplier,
            "state": None if info.state is None else [info.state.y, info.state.x],
            "vehicle_action": info.vehicle_action.value if info.vehicle_action else None,
            "note": info.note,
        },
    }


def _engine_from_dict(
    d: dict, scenario: Scenario, session_id: str, rng: np.random.Generator
) -> CrossingEngine:
    from seqchicken.controller import TrackPoint

    engine = CrossingEngine(
        scenario, session_id, d["crossing_id"], d["ped_start"], d["car_pos"], rng
    )
    engine.t = d["t"]
    engine.ped_pos = d["ped_pos"]
    engine.car_pos = d["car_pos"]
    engine._steps = d["steps"]
    engine._ped_passed_t = d["ped_passed_t"]
    engine._car_passed_t = d["car_passed_t"]
    engine._track = [TrackPoint(t, tuple(pos)) for t, pos in d["track"]]
    p = d["pending"]
    engine._pending = GameInfo(
        interesting=p["interesting"],
        speed_multiplier=p["speed_multiplier"],
        state=None if p["state"] is None else GameState(*p["state"]),
        vehicle_action=None if p["vehicle_action"] is None else Action(p["vehicle_action"]),
        note=p["note"],
    )
    return engine


# -- HTTP layer ---------------------------------------------------------------


def create_app(data_dir: Union[str, Path], frontend_dir: Optional[Union[str, Path]] = None):
    """FastAPI app over a SessionService rooted at ``data_dir``.

    When ``frontend_dir`` exists its static files are served at the root,
    which is how the browser client is deployed.
    """
    from fastapi import Body, FastAPI, HTTPException, Query
    from fastapi.responses import PlainTextResponse

    service = SessionService(data_dir)
    app = FastAPI(title="seqchicken crossing service")
    app.state.service = service

    @app.post("/api/sessions")
    def api_create(config: Optional[dict] = Body(default=None)):
        try:
            return service.create_session(config)
        except (ValueError, TypeError) as err:
            raise HTTPException(status_code=400, detail=str(err))

    @app.get("/api/sessions")
    def api_list():
        return service.list_sessions()

    @app.get("/api/sessions/{session_id}")
    def api_state(session_id: str):
        try:
            return service.session_state(session_id)
        except UnknownSessionError as err:
            raise HTTPException(status_code=404, detail=str(err))

    @app.post("/api/sessions/{session_id}/turns")
    def api_submit(session_id: str, body: dict = Body(...)):
        try:
            return service.submit_action(session_id, body.get("action", ""))
        except UnknownSessionError as err:
            raise HTTPException(status_code=404, detail=str(err))
        except SequencingError as err:
            raise HTTPException(status_code=409, detail=str(err))
        except ValueError as err:
            raise HTTPException(status_code=400, detail=str(err))

    @app.get("/api/export", response_class=PlainTextResponse)
    def api_export(session_id: Optional[list[str]] = Query(default=None)):
        try:
            return service.export_records(session_id)
        except UnknownSessionError as err:
            raise HTTPException(status_code=404, detail=str(err))

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app
