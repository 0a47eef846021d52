// DOM wiring for the field console: pick or create a session, capture or
// choose a branch photo, send it for analysis, and review overlays, counts
// and the session's ripeness timeline.

import { ApiError, HarvestClient } from "./api.js";
import type { AnalyzeResponse, TimelineRow } from "./api.js";
import { svgMarkup, timelineChart } from "./chart.js";
import { countsLegend, legendTotal, percentLabel } from "./format.js";
import { CHOICES, serverMode } from "./modes.js";
import type { AnalysisChoice } from "./modes.js";
import { drawOverlay, strokeColor } from "./overlay.js";
import { canSubmit, initialState } from "./state.js";

const state = initialState();
let client = new HarvestClient(resolveBaseUrl());
let selectedFile: File | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function resolveBaseUrl(): string {
  const saved = localStorage.getItem("coffeevision-base-url");
  if (saved) return saved;
  // when served from the backend's /console mount, same origin just works
  return window.location.origin;
}

// ---------------------------------------------------------------- banner

function showBanner(message: string): void {
  const banner = $("banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `${err.error}: ${err.detail}`;
  return err instanceof Error ? err.message : String(err);
}

// --------------------------------------------------------------- sessions

async function refreshSessions(): Promise<void> {
  const select = $("session-select") as HTMLSelectElement;
  try {
    const sessions = await client.listSessions();
    select.innerHTML = "";
    for (const s of sessions) {
      const option = document.createElement("option");
      option.value = s.session_id;
      option.textContent = `${s.name} (${s.n_samples} samples)`;
      select.appendChild(option);
    }
    if (state.sessionId) select.value = state.sessionId;
    else if (sessions.length > 0) selectSession(sessions[0].session_id,
                                                sessions[0].name);
  } catch (err) {
    showBanner(describeError(err));
  }
}

function selectSession(sessionId: string, name: string): void {
  state.sessionId = sessionId;
  state.sessionName = name;
  state.timeline = null;
  $("session-current").textContent = name;
  updateSubmit();
  void refreshTimeline();
}

async function createSession(): Promise<void> {
  const input = $("session-name") as HTMLInputElement;
  const name = input.value.trim();
  if (!name) {
    showBanner("session name must not be empty");
    return;
  }
  try {
    const sessionId = await client.createSession(name);
    input.value = "";
    selectSession(sessionId, name);
    await refreshSessions();
  } catch (err) {
    showBanner(describeError(err));
  }
}

// ---------------------------------------------------------------- capture

function currentChoice(): AnalysisChoice {
  for (const choice of CHOICES) {
    if (($(`choice-${choice}`) as HTMLInputElement).checked) return choice;
  }
  return "both";
}

function updateSubmit(): void {
  ($("analyze-btn") as HTMLButtonElement).disabled =
    !canSubmit(state, selectedFile !== null);
}

function onFileChosen(): void {
  const input = $("image-input") as HTMLInputElement;
  selectedFile = input.files?.[0] ?? null;
  if (selectedFile) {
    const img = $("photo") as HTMLImageElement;
    img.src = URL.createObjectURL(selectedFile);
    $("viewer").classList.remove("hidden");
    clearOverlay();
  }
  updateSubmit();
}

function clearOverlay(): void {
  const canvas = $("overlay") as HTMLCanvasElement;
  canvas.getContext("2d")?.clearRect(0, 0, canvas.width, canvas.height);
  $("counts-legend").innerHTML = "";
  $("ripeness-readout").textContent = "";
}

async function runAnalyze(): Promise<void> {
  if (!selectedFile || !state.sessionId || state.pending) return;
  state.choice = currentChoice();
  state.pending = true;
  updateSubmit();
  try {
    const response = await client.analyze(state.sessionId, {
      image: selectedFile,
      imageName: selectedFile.name,
      mode: serverMode(state.choice),
      capturedAt: new Date().toISOString(),
    });
    state.lastAnalysis = response;
    renderAnalysis(response);
    await refreshTimeline();
  } catch (err) {
    showBanner(describeError(err));
  } finally {
    state.pending = false;
    updateSubmit();
  }
}

function renderAnalysis(response: AnalyzeResponse): void {
  const img = $("photo") as HTMLImageElement;
  const canvas = $("overlay") as HTMLCanvasElement;
  canvas.width = img.clientWidth;
  canvas.height = img.clientHeight;
  const ctx = canvas.getContext("2d");
  if (ctx) drawOverlay(ctx, response.detections, canvas.width, canvas.height);

  const legend = $("counts-legend");
  legend.innerHTML = "";
  for (const entry of countsLegend(response.counts)) {
    const chip = document.createElement("span");
    chip.className = "stage-chip";
    chip.style.borderColor = strokeColor(entry.stage);
    chip.textContent = entry.label;
    legend.appendChild(chip);
  }

  const readout = $("ripeness-readout");
  if (legendTotal(response.counts) === 0) {
    readout.textContent = `no fruit detected, ripeness ${percentLabel(null)}`;
  } else {
    readout.textContent =
      `ripeness ${percentLabel(response.ripeness_percent)}, ` +
      `unripeness ${percentLabel(response.unripeness_percent)}`;
  }
}

// --------------------------------------------------------------- timeline

async function refreshTimeline(): Promise<void> {
  if (!state.sessionId) return;
  try {
    state.timeline = await client.timeline(state.sessionId, state.timelineMode);
    renderTimeline(state.timeline);
  } catch (err) {
    showBanner(describeError(err));
  }
}

function renderTimeline(rows: TimelineRow[]): void {
  const host = $("timeline-host");
  if (rows.length === 0) {
    host.innerHTML = `<p class="empty-state">no samples yet; analyze a photo
      to start this session's ripeness record</p>`;
    return;
  }
  host.innerHTML = svgMarkup(timelineChart(rows), state.timelineMode);
}

// ----------------------------------------------------------------- wiring

export function boot(): void {
  $("banner").addEventListener("click", () => $("banner").classList.add("hidden"));
  $("session-refresh").addEventListener("click", () => void refreshSessions());
  $("session-create").addEventListener("click", () => void createSession());
  ($("session-select") as HTMLSelectElement).addEventListener("change", (e) => {
    const select = e.target as HTMLSelectElement;
    const label = select.selectedOptions[0]?.textContent ?? select.value;
    selectSession(select.value, label.replace(/ \(\d+ samples\)$/, ""));
  });
  $("image-input").addEventListener("change", onFileChosen);
  $("analyze-btn").addEventListener("click", () => void runAnalyze());
  for (const choice of CHOICES) {
    $(`choice-${choice}`).addEventListener("change", updateSubmit);
  }
  for (const mode of ["binary", "multiclass"] as const) {
    $(`timeline-${mode}`).addEventListener("change", () => {
      state.timelineMode = mode;
      void refreshTimeline();
    });
  }
  $("base-url").addEventListener("change", (e) => {
    const value = (e.target as HTMLInputElement).value.trim();
    localStorage.setItem("coffeevision-base-url", value);
    client = new HarvestClient(value || window.location.origin);
    void refreshSessions();
  });
  ($("base-url") as HTMLInputElement).value = client.baseUrl;
  updateSubmit();
  void refreshSessions();
}

boot();
