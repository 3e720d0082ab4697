// Browser client for the live crossing game: a tiled strip shows both
// agents approaching the collision point; the player picks SLOW or FAST
// each turn, the service reveals the vehicle's committed action, and
// finished sessions can be exported and replayed step by step.

import { SessionApi, ApiError } from "./api.js";
import { boxIndex } from "./quantize.js";
import { PX_PER_M, deriveView, scoreLine } from "./view.js";
import { ReplayCursor, groupCrossings, parseExport, type Crossing } from "./replay.js";
import type { ActionName, SessionState, TurnResult } from "./types.js";

const api = new SessionApi();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $("strip") as unknown as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const statusEl = $("status");
const bannerEl = $("banner");
const scoresEl = $("scores");
const toastEl = $("toast");
const slowBtn = $("btn-slow") as HTMLButtonElement;
const fastBtn = $("btn-fast") as HTMLButtonElement;
const newBtn = $("btn-new") as HTMLButtonElement;
const exportLink = $("export-link") as HTMLAnchorElement;
const replayPanel = $("replay-panel");
const replaySelect = $("replay-select") as HTMLSelectElement;
const replayStepBtn = $("btn-replay-step") as HTMLButtonElement;
const replayPlayBtn = $("btn-replay-play") as HTMLButtonElement;
const replayInfo = $("replay-info");

let state: SessionState | null = null;
let busy = false;
let pollTimer: number | undefined;
let drawn = { ped: 0, car: null as number | null };
let replayCursor: ReplayCursor | null = null;
let replayTimer: number | undefined;

function toast(message: string): void {
  toastEl.textContent = message;
  toastEl.classList.add("visible");
  window.setTimeout(() => toastEl.classList.remove("visible"), 2500);
}

function banner(message: string, kind: "crash" | "win" | "lose" | "info"): void {
  bannerEl.textContent = message;
  bannerEl.className = `banner visible ${kind}`;
  window.setTimeout(() => bannerEl.classList.remove("visible"), 2200);
}

// -- rendering ---------------------------------------------------------------

const CX = 660; // collision point x (car travels left to right)
const CY = 330; // collision point y (pedestrian walks top to bottom)

function drawScene(pedM: number, carM: number | null, interesting: boolean): void {
  if (!state) return;
  const g = state.geometry;
  ctx.clearRect(0, 0, canvas.width, canvas.height);

  // Road and walkway.
  ctx.fillStyle = "#30343a";
  ctx.fillRect(0, CY - 28, canvas.width, 56);
  ctx.fillStyle = "#3a3f37";
  ctx.fillRect(CX - 22, 0, 44, canvas.height);

  // Box ticks: pedestrian tiles down the walkway, car tiles along the road.
  for (let b = -2; b * g.ped_box < 9; b++) {
    const y = CY - b * g.ped_box * PX_PER_M;
    ctx.strokeStyle = b === 0 || b === 1 ? "#caa94d" : "#555b52";
    ctx.beginPath();
    ctx.moveTo(CX - 22, y);
    ctx.lineTo(CX + 22, y);
    ctx.stroke();
  }
  for (let b = -2; b * g.car_box < 9; b++) {
    const x = CX - b * g.car_box * PX_PER_M;
    ctx.strokeStyle = b === 0 || b === 1 ? "#caa94d" : "#4a4f55";
    ctx.beginPath();
    ctx.moveTo(x, CY - 28);
    ctx.lineTo(x, CY + 28);
    ctx.stroke();
  }

  // Collision box marker.
  ctx.strokeStyle = interesting ? "#e4574a" : "#777";
  ctx.lineWidth = interesting ? 3 : 1;
  ctx.strokeRect(CX - 22, CY - 24, 44, 48);
  ctx.lineWidth = 1;

  // Vehicle: approaches from the left along the road.
  if (carM !== null) {
    const x = CX - carM * PX_PER_M;
    ctx.fillStyle = "#5a8fd6";
    ctx.fillRect(x - 48, CY - 16, 48, 32);
    ctx.fillStyle = "#cfe1f7";
    ctx.fillRect(x - 14, CY - 12, 10, 24);
    ctx.fillStyle = "#9db7d8";
    ctx.font = "12px sans-serif";
    ctx.fillText(`${carM.toFixed(2)} m · box ${boxIndex(carM, g.car_box)}`, x - 48, CY + 46);
  }

  // Pedestrian: approaches from the top of the walkway.
  const y = CY - pedM * PX_PER_M;
  ctx.fillStyle = "#e0b152";
  ctx.beginPath();
  ctx.arc(CX, y, 11, 0, Math.PI * 2);
  ctx.fill();
  ctx.fillStyle = "#d8c9a2";
  ctx.font = "12px sans-serif";
  ctx.fillText(`${pedM.toFixed(2)} m · box ${boxIndex(pedM, g.ped_box)}`, CX + 30, y + 4);

  drawn = { ped: pedM, car: carM };
}

function animateTo(pedM: number, carM: number | null, interesting: boolean): Promise<void> {
  const from = { ...drawn };
  const start = performance.now();
  const dur = 260;
  return new Promise((resolve) => {
    const tick = (now: number) => {
      const f = Math.min((now - start) / dur, 1);
      const ped = from.ped + (pedM - from.ped) * f;
      const car =
        carM === null || from.car === null ? carM : from.car + (carM - from.car) * f;
      drawScene(ped, car, interesting);
      if (f < 1) {
        requestAnimationFrame(tick);
      } else {
        resolve();
      }
    };
    requestAnimationFrame(tick);
  });
}

// -- session flow --------------------------------------------------------------

function renderState(): void {
  if (!state) return;
  const finished = state.status === "finished";
  scoresEl.textContent = scoreLine(state);
  exportLink.href = api.exportUrl(state.session_id);
  exportLink.classList.toggle("hidden", false);
  const view = deriveView(state);
  if (state.turn && view.pedestrian) {
    const pending = state.turn.pending;
    statusEl.textContent =
      `crossing ${state.crossing_index + 1}/${state.crossings_total}` +
      ` · t=${state.turn.t.toFixed(1)}s` +
      ` · vehicle start ${state.car_start_m.toFixed(2)} m` +
      (pending?.interesting ? " · GAME ON — the car is deciding too" : " · ready");
    drawScene(view.pedestrian.posM, view.vehicle ? view.vehicle.posM : null, view.interesting);
  }
  slowBtn.disabled = fastBtn.disabled = busy || finished || !state.turn;
  if (finished) {
    statusEl.textContent = `session finished — ${scoreLine(state)}`;
    void showReplayPanel();
  }
}

async function refresh(): Promise<void> {
  if (!state || busy) return;
  try {
    state = await api.getState(state.session_id);
    renderState();
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      window.clearInterval(pollTimer);
      state = null;
      statusEl.textContent = "session lost; start a new game";
    }
  }
}

async function startSession(): Promise<void> {
  try {
    state = await api.createSession({});
    localStorage.setItem("seqchicken.session", state.session_id);
    bannerEl.classList.remove("visible");
    replayPanel.classList.add("hidden");
    countdown(3);
    renderState();
    window.clearInterval(pollTimer);
    pollTimer = window.setInterval(() => void refresh(), state.geometry.step_s * 1000);
  } catch (err) {
    toast(`could not start: ${(err as Error).message}`);
  }
}

function countdown(n: number): void {
  if (n === 0) {
    banner("GO — cross when ready", "info");
    return;
  }
  banner(String(n), "info");
  window.setTimeout(() => countdown(n - 1), 600);
}

async function submit(action: ActionName): Promise<void> {
  if (!state || busy || state.status === "finished") return;
  busy = true;
  renderState();
  try {
    const turn: TurnResult = await api.submitAction(state.session_id, action);
    await animateTo(turn.ped_pos_m, turn.car_pos_m, turn.interesting);
    const revealed = turn.vehicle_action ?? "cruise";
    statusEl.textContent = `you: ${action} · car revealed: ${revealed}`;
    if (turn.outcome === "CRASH") {
      banner("CRASH — you met in the collision box", "crash");
    } else if (turn.outcome === "PEDESTRIAN_FIRST") {
      banner("You crossed first — car will start closer", "win");
    } else if (turn.outcome === "VEHICLE_FIRST") {
      banner("Car passed first — it will start further away", "lose");
    }
    busy = false;
    state = await api.getState(state.session_id);
    if (turn.outcome && state.status === "active") {
      countdown(3);
    }
    renderState();
  } catch (err) {
    busy = false;
    if (err instanceof ApiError) {
      toast(err.status === 409 ? "hold on — turn already in flight" : err.message);
      await refresh();
    } else {
      toast((err as Error).message);
    }
  }
}

// -- replay -------------------------------------------------------------------

async function showReplayPanel(): Promise<void> {
  if (!state) return;
  try {
    const text = await api.exportText(state.session_id);
    const crossings = groupCrossings(parseExport(text));
    if (crossings.length === 0) {
      replayInfo.textContent = "no recorded crossings";
      return;
    }
    replaySelect.innerHTML = "";
    crossings.forEach((c, i) => {
      const option = document.createElement("option");
      option.value = String(i);
      option.textContent = `crossing ${c.crossingId + 1} — ${c.winner ?? "unfinished"}`;
      replaySelect.appendChild(option);
    });
    replayPanel.classList.remove("hidden");
    loadReplay(crossings, 0);
    replaySelect.onchange = () => loadReplay(crossings, Number(replaySelect.value));
  } catch (err) {
    replayInfo.textContent = `replay unavailable: ${(err as Error).message}`;
    replayPanel.classList.remove("hidden");
  }
}

function loadReplay(crossings: Crossing[], index: number): void {
  window.clearInterval(replayTimer);
  replayCursor = new ReplayCursor(crossings[index]);
  replayCursor.restart();
  drawReplayFrame();
}

function drawReplayFrame(): void {
  if (!replayCursor || !state) return;
  const f = replayCursor.frame;
  drawScene(f.ped_pos_m ?? 0, f.car_pos_m, f.interesting);
  const acts = `you ${f.ped_action ?? "-"} / car ${f.car_action ?? "-"}`;
  replayInfo.textContent =
    `frame ${replayCursor.position + 1}/${replayCursor.length}` +
    ` · t=${f.t.toFixed(1)}s · ${f.interesting ? "interesting · " : ""}${acts}` +
    (replayCursor.outcome ? ` · ${replayCursor.outcome}` : "");
  if (replayCursor.outcome === "CRASH") {
    bannerEl.textContent = "CRASH";
    bannerEl.className = "banner visible crash";
  }
}

replayStepBtn.addEventListener("click", () => {
  replayCursor?.step();
  drawReplayFrame();
});

replayPlayBtn.addEventListener("click", () => {
  window.clearInterval(replayTimer);
  replayCursor?.restart();
  drawReplayFrame();
  replayTimer = window.setInterval(() => {
    if (!replayCursor || replayCursor.atEnd) {
      window.clearInterval(replayTimer);
      return;
    }
    replayCursor.step();
    drawReplayFrame();
  }, (state?.geometry.step_s ?? 0.5) * 500);
});

// -- input --------------------------------------------------------------------

slowBtn.addEventListener("click", () => void submit("SLOW"));
fastBtn.addEventListener("click", () => void submit("FAST"));
newBtn.addEventListener("click", () => void startSession());

// Two distinct keys, documented on screen next to the buttons.
document.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  if (ev.code === "KeyA") void submit("SLOW");
  if (ev.code === "KeyL") void submit("FAST");
});

async function boot(): Promise<void> {
  const saved = localStorage.getItem("seqchicken.session");
  if (saved) {
    try {
      state = await api.getState(saved);
      renderState();
      pollTimer = window.setInterval(() => void refresh(), state.geometry.step_s * 1000);
      return;
    } catch {
      localStorage.removeItem("seqchicken.session");
    }
  }
  statusEl.textContent = "press “new session” to play 20 crossings against the model car";
}

void boot();
