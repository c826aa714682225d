/** UI state machine for one session tab.
 *
 * Mirrors the server's session invariant: there is never more than one
 * answerable query at a time, and an answer can only be sent while a query
 * is displayed. Submissions in flight ignore further submit events
 * (double-click protection); failures keep the displayed query so the
 * human can retry without losing work.
 */
import { QueryPayload, ResponseDoc, SessionSummary } from "./types.js";

export type Phase =
  | "idle" // no session yet
  | "creating"
  | "ready" // session exists, nothing displayed
  | "fetching"
  | "answering" // a query is displayed, waiting for the human
  | "submitting"
  | "finished"; // no candidates left

export interface ProgressPoint {
  step: number;
  spread: number;
  datasetSize: number;
}

export interface MachineState {
  phase: Phase;
  sessionId: string | null;
  displayed: QueryPayload | null;
  progress: ProgressPoint[];
  banner: string | null; // non-destructive error notice
  inlineError: string | null; // validation message next to the controls
}

export type MachineEvent =
  | { type: "CREATE" }
  | { type: "CREATED"; sessionId: string; summary: SessionSummary }
  | { type: "FETCH" }
  | { type: "QUERY"; payload: QueryPayload }
  | { type: "SUBMIT"; response: ResponseDoc }
  | { type: "SUBMITTED"; summary: SessionSummary }
  | { type: "VALIDATION_FAILED"; message: string }
  | { type: "NETWORK_FAILED"; message: string }
  | { type: "NO_CANDIDATES" }
  | { type: "SCHEMA_UNSUPPORTED" }
  | { type: "BANNER_DISMISSED" };

export function initialMachine(): MachineState {
  return {
    phase: "idle",
    sessionId: null,
    displayed: null,
    progress: [],
    banner: null,
    inlineError: null,
  };
}

function point(summary: SessionSummary): ProgressPoint {
  return { step: summary.step, spread: summary.spread, datasetSize: summary.dataset_size };
}

/** Pure reducer; illegal events leave the state unchanged. */
export function reduce(state: MachineState, event: MachineEvent): MachineState {
  switch (event.type) {
    case "CREATE":
      if (state.phase !== "idle") return state;
      return { ...state, phase: "creating", banner: null };

    case "CREATED":
      if (state.phase !== "creating") return state;
      return {
        ...state,
        phase: "ready",
        sessionId: event.sessionId,
        progress: [point(event.summary)],
        inlineError: null,
      };

    case "FETCH":
      // a displayed query must be answered first: never two at once
      if (state.phase !== "ready") return state;
      return { ...state, phase: "fetching", banner: null };

    case "QUERY":
      if (state.phase !== "fetching") return state;
      return { ...state, phase: "answering", displayed: event.payload, inlineError: null };

    case "SUBMIT":
      // answers are only possible against the displayed query; a second
      // submit while one is in flight is ignored
      if (state.phase !== "answering" || state.displayed === null) return state;
      return { ...state, phase: "submitting", inlineError: null };

    case "SUBMITTED":
      if (state.phase !== "submitting") return state;
      return {
        ...state,
        phase: "ready",
        displayed: null,
        progress: [...state.progress, point(event.summary)],
      };

    case "VALIDATION_FAILED":
      // server rejected the value: re-enable the displayed query
      if (state.phase !== "submitting") return state;
      return { ...state, phase: "answering", inlineError: event.message };

    case "NETWORK_FAILED":
      if (state.phase === "fetching") {
        return { ...state, phase: "ready", banner: event.message };
      }
      if (state.phase === "submitting") {
        // keep the pending query; the human retries
        return { ...state, phase: "answering", inlineError: event.message };
      }
      if (state.phase === "creating") {
        return { ...state, phase: "idle", banner: event.message };
      }
      return state;

    case "NO_CANDIDATES":
      if (state.phase !== "fetching") return state;
      return { ...state, phase: "finished", banner: null };

    case "SCHEMA_UNSUPPORTED":
      // non-destructive: drop back to ready, keep session and progress
      if (state.phase === "fetching" || state.phase === "submitting") {
        return {
          ...state,
          phase: state.phase === "submitting" ? "answering" : "ready",
          banner: "the server sent an unsupported payload version",
        };
      }
      return state;

    case "BANNER_DISMISSED":
      return { ...state, banner: null };
  }
}

/** True when the machine may send an answer right now. */
export function canSubmit(state: MachineState): boolean {
  return state.phase === "answering" && state.displayed !== null;
}

/** True when the machine may request the next query right now. */
export function canFetch(state: MachineState): boolean {
  return state.phase === "ready";
}
