// Console state: one active session, one analysis choice, the most recent
// server responses. Overlay geometry always derives from lastAnalysis; the
// console stores responses, never recomputed versions of them.

import type { AnalyzeResponse, TimelineRow } from "./api.js";
import type { AnalysisChoice } from "./modes.js";

export interface ConsoleState {
  sessionId: string | null;
  sessionName: string | null;
  choice: AnalysisChoice;
  pending: boolean;              // at most one in-flight analyze request
  lastAnalysis: AnalyzeResponse | null;
  timeline: TimelineRow[] | null;
  timelineMode: "binary" | "multiclass";
}

export function initialState(): ConsoleState {
  return {
    sessionId: null,
    sessionName: null,
    choice: "both",
    pending: false,
    lastAnalysis: null,
    timeline: null,
    timelineMode: "binary",
  };
}

export function canSubmit(state: ConsoleState, hasImage: boolean): boolean {
  return state.sessionId !== null && hasImage && !state.pending;
}
