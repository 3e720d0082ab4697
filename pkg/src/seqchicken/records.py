"""Crossing-log schema: one JSON record per line, one line per controller step.

Field order is fixed so that export -> parse -> re-export round-trips
byte-identically.  ``winner`` is "pending" on every step except the final
one of a crossing, which carries the crossing's outcome.  The optional
``auto`` flag marks turns where a timeout auto-played the pedestrian; such
records are excluded from fitting by default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO, Union

from seqchicken.game import Action

__all__ = ["Outcome", "CrossingRecord", "FIELDS", "read_records", "write_records"]

FIELDS = (
    "session_id",
    "crossing_id",
    "t",
    "ped_pos_m",
    "car_pos_m",
    "ped_box",
    "car_box",
    "interesting",
    "ped_action",
    "car_action",
    "speed_multiplier",
    "winner",
)


class Outcome(Enum):
    CRASH = "CRASH"
    VEHICLE_FIRST = "VEHICLE_FIRST"
    PEDESTRIAN_FIRST = "PEDESTRIAN_FIRST"


@dataclass(frozen=True)
class CrossingRecord:
    session_id: str
    crossing_id: int
    t: float
    ped_pos_m: Optional[float]
    car_pos_m: Optional[float]
    ped_box: Optional[int]
    car_box: Optional[int]
    interesting: bool
    ped_action: Optional[Action]
    car_action: Optional[Action]
    speed_multiplier: float
    winner: Optional[Outcome] = None  # None serializes as "pending"
    auto: bool = False

    def to_json_line(self) -> str:
        payload = {
            "session_id": self.session_id,
            "crossing_id": self.crossing_id,
            "t": self.t,
            "ped_pos_m": self.ped_pos_m,
            "car_pos_m": self.car_pos_m,
            "ped_box": self.ped_box,
            "car_box": self.car_box,
            "interesting": self.interesting,
            "ped_action": self.ped_action.value if self.ped_action else None,
            "car_action": self.car_action.value if self.car_action else None,
            "speed_multiplier": self.speed_multiplier,
            "winner": self.winner.value if self.winner else "pending",
        }
        if self.auto:
            payload["auto"] = True
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "CrossingRecord":
        raw = json.loads(line)
        missing = [f for f in FIELDS if f not in raw]
        if missing:
            raise ValueError(f"record missing fields: {missing}")
        winner = raw["winner"]
        return cls(
            session_id=str(raw["session_id"]),
            crossing_id=int(raw["crossing_id"]),
            t=float(raw["t"]),
            ped_pos_m=None if raw["ped_pos_m"] is None else float(raw["ped_pos_m"]),
            car_pos_m=None if raw["car_pos_m"] is None else float(raw["car_pos_m"]),
            ped_box=None if raw["ped_box"] is None else int(raw["ped_box"]),
            car_box=None if raw["car_box"] is None else int(raw["car_box"]),
            interesting=bool(raw["interesting"]),
            ped_action=None if raw["ped_action"] is None else Action(raw["ped_action"]),
            car_action=None if raw["car_action"] is None else Action(raw["car_action"]),
            speed_multiplier=float(raw["speed_multiplier"]),
            winner=None if winner in (None, "pending") else Outcome(winner),
            auto=bool(raw.get("auto", False)),
        )


def read_records(source: Union[str, Path, TextIO, Iterable[str]]) -> Iterator[CrossingRecord]:
    """Parse line-delimited crossing records from a path or line iterable."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from read_records(fh)
        return
    for line in source:
        line = line.strip()
        if line:
            yield CrossingRecord.from_json_line(line)


def write_records(path: Union[str, Path], records: Iterable[CrossingRecord]) -> int:
    """Write records as JSON lines; returns the count written."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json_line() + "\n")
            n += 1
    return n
