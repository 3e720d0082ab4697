// Payloads captured verbatim from a live service run.

import type { SessionState, TurnResult } from "../src/types.js";

export const STATE_FIXTURE: SessionState = {
  session_id: "306ed495cd08",
  status: "active",
  crossing_index: 0,
  crossings_total: 1,
  scores: { pedestrian_wins: 0, vehicle_wins: 0, crashes: 0 },
  car_start_m: 4.3,
  geometry: {
    ped_box: 0.2,
    car_box: 0.08,
    pedestrian_fast_speed: 0.4,
    vehicle_fast_speed: 0.2,
    step_s: 0.5,
  },
  turn: {
    t: 0.0,
    ped_pos_m: 6.0,
    car_pos_m: 4.3,
    ped_box: 30,
    car_box: 53,
    pending: { interesting: true, state: { y: 53, x: 29 } },
  },
};

export const TURN_FIXTURE: TurnResult = {
  session_id: "306ed495cd08",
  crossing_id: 0,
  t: 0.0,
  interesting: true,
  vehicle_action: "FAST",
  ped_action: "SLOW",
  auto: false,
  ped_pos_m: 5.9,
  car_pos_m: 4.2,
  outcome: null,
  session_status: "active",
};

export const EXPORT_FIXTURE = [
  '{"session_id":"306ed495cd08","crossing_id":0,"t":0.0,"ped_pos_m":6.0,"car_pos_m":4.3,"ped_box":30,"car_box":53,"interesting":true,"ped_action":"SLOW","car_action":"FAST","speed_multiplier":1.0,"winner":"pending"}',
  '{"session_id":"306ed495cd08","crossing_id":0,"t":10.0,"ped_pos_m":2.099999999999997,"car_pos_m":2.45,"ped_box":10,"car_box":30,"interesting":true,"ped_action":"FAST","car_action":"FAST","speed_multiplier":1.0,"winner":"pending"}',
  '{"session_id":"306ed495cd08","crossing_id":0,"t":22.0,"ped_pos_m":-2.7000000000000033,"car_pos_m":0.04999999999999907,"ped_box":-2,"car_box":0,"interesting":false,"ped_action":"FAST","car_action":null,"speed_multiplier":1.0,"winner":"PEDESTRIAN_FIRST"}',
].join("\n");
