// Wire types mirroring the crossing service API.

export type ActionName = "SLOW" | "FAST";

export type OutcomeName = "CRASH" | "VEHICLE_FIRST" | "PEDESTRIAN_FIRST";

export interface Scores {
  pedestrian_wins: number;
  vehicle_wins: number;
  crashes: number;
}

export interface GeometryView {
  ped_box: number;
  car_box: number;
  pedestrian_fast_speed: number;
  vehicle_fast_speed: number;
  step_s: number;
}

export interface PendingView {
  interesting: boolean;
  state: { y: number; x: number } | null;
}

export interface TurnView {
  t: number;
  ped_pos_m: number;
  car_pos_m: number | null;
  ped_box: number;
  car_box: number | null;
  pending: PendingView | null;
}

export interface SessionState {
  session_id: string;
  status: "active" | "finished";
  crossing_index: number;
  crossings_total: number;
  scores: Scores;
  car_start_m: number;
  geometry: GeometryView;
  turn: TurnView | null;
}

export interface TurnResult {
  session_id: string;
  crossing_id: number;
  t: number;
  interesting: boolean;
  vehicle_action: ActionName | null;
  ped_action: ActionName | null;
  auto: boolean;
  ped_pos_m: number;
  car_pos_m: number | null;
  outcome: OutcomeName | null;
  session_status: "active" | "finished";
}

// One line of the exported crossing log.
export interface CrossingRecord {
  session_id: string;
  crossing_id: number;
  t: number;
  ped_pos_m: number | null;
  car_pos_m: number | null;
  ped_box: number | null;
  car_box: number | null;
  interesting: boolean;
  ped_action: ActionName | null;
  car_action: ActionName | null;
  speed_multiplier: number;
  winner: OutcomeName | "pending";
  auto?: boolean;
}
