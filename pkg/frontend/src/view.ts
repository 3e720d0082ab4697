// Pure render-geometry derivation: positions in meters to strip tiles and
// pixel coordinates.  No DOM access here so it stays unit-testable.

import { boxIndex } from "./quantize.js";
import type { GeometryView, SessionState } from "./types.js";

export interface AgentView {
  posM: number;
  box: number;
  // Pixel offset along the agent's travel axis, measured from the
  // collision point (positive = approaching side).
  px: number;
}

export interface StripTile {
  box: number;
  startPx: number;
  endPx: number;
  inCrashWindow: boolean;
}

export interface ClientView {
  pedestrian: AgentView | null;
  vehicle: AgentView | null;
  pedTiles: StripTile[];
  carTiles: StripTile[];
  interesting: boolean;
  crossingIndex: number;
  crossingsTotal: number;
  carStartM: number;
}

export const PX_PER_M = 60;

export function agentView(posM: number, boxM: number): AgentView {
  return { posM, box: boxIndex(posM, boxM), px: posM * PX_PER_M };
}

export function stripTiles(maxM: number, boxM: number): StripTile[] {
  const tiles: StripTile[] = [];
  const count = Math.ceil(maxM / boxM);
  for (let box = -2; box < count; box++) {
    tiles.push({
      box,
      startPx: box * boxM * PX_PER_M,
      endPx: (box + 1) * boxM * PX_PER_M,
      inCrashWindow: box === 0 || box === 1,
    });
  }
  return tiles;
}

export function deriveView(state: SessionState, maxPedM = 9, maxCarM = 9): ClientView {
  const g: GeometryView = state.geometry;
  const turn = state.turn;
  return {
    pedestrian: turn ? agentView(turn.ped_pos_m, g.ped_box) : null,
    vehicle: turn && turn.car_pos_m !== null ? agentView(turn.car_pos_m, g.car_box) : null,
    pedTiles: stripTiles(maxPedM, g.ped_box),
    carTiles: stripTiles(maxCarM, g.car_box),
    interesting: turn?.pending?.interesting ?? false,
    crossingIndex: state.crossing_index,
    crossingsTotal: state.crossings_total,
    carStartM: state.car_start_m,
  };
}

export function scoreLine(state: SessionState): string {
  const s = state.scores;
  return `you ${s.pedestrian_wins} : ${s.vehicle_wins} car (crashes ${s.crashes})`;
}
