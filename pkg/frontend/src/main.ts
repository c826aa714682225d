/** Browser wiring: one session per tab, all calls sequential.
 *
 * The reducer in machine.ts owns every phase change; this file only maps
 * DOM events to machine events and machine state to DOM updates.
 */
import { ApiError, SessionApi } from "./api.js";
import {
  MachineEvent,
  MachineState,
  canFetch,
  canSubmit,
  initialMachine,
  reduce,
} from "./machine.js";
import { renderProgress, renderQuery } from "./render.js";
import { ResponseDoc } from "./types.js";

const api = new SessionApi("");

let state: MachineState = initialMachine();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function dispatch(event: MachineEvent) {
  state = reduce(state, event);
  draw();
}

function failureEvent(err: unknown): MachineEvent {
  if (err instanceof ApiError) {
    if (err.code === "validation_error") {
      return { type: "VALIDATION_FAILED", message: err.message };
    }
    if (err.code === "no_candidates") {
      return { type: "NO_CANDIDATES" };
    }
    if (err.code === "unsupported_schema") {
      return { type: "SCHEMA_UNSUPPORTED" };
    }
  }
  return { type: "NETWORK_FAILED", message: String(err) };
}

async function createSession() {
  const configText = el<HTMLTextAreaElement>("config").value;
  let config: unknown;
  try {
    config = JSON.parse(configText);
  } catch (err) {
    el("banner").textContent = `config is not valid JSON: ${err}`;
    return;
  }
  dispatch({ type: "CREATE" });
  try {
    const created = await api.createSession(config);
    dispatch({ type: "CREATED", sessionId: created.id, summary: created.summary });
    await fetchNext();
  } catch (err) {
    dispatch(failureEvent(err));
  }
}

async function fetchNext() {
  if (!canFetch(state) || !state.sessionId) return;
  dispatch({ type: "FETCH" });
  try {
    const payload = await api.nextQuery(state.sessionId);
    dispatch({ type: "QUERY", payload });
  } catch (err) {
    dispatch(failureEvent(err));
  }
}

async function submit(response: ResponseDoc) {
  if (!canSubmit(state) || !state.sessionId) return;
  dispatch({ type: "SUBMIT", response });
  try {
    const result = await api.postResponse(state.sessionId, response);
    dispatch({ type: "SUBMITTED", summary: result.summary });
    await refreshBelief();
    await fetchNext();
  } catch (err) {
    dispatch(failureEvent(err));
  }
}

async function refreshBelief() {
  if (!state.sessionId) return;
  try {
    const belief = await api.getBelief(state.sessionId);
    el("belief").textContent =
      `mean estimate: [${belief.mean_estimate.map((v) => v.toFixed(3)).join(", ")}]  ` +
      `spread: ${belief.spread.toFixed(4)}`;
  } catch {
    // belief display is advisory; never disturb the loop for it
  }
}

function draw() {
  el("phase").textContent = state.phase;
  el("banner").textContent = state.banner ?? "";
  el("inline-error").textContent = state.inlineError ?? "";
  el("progress").innerHTML = renderProgress(state.progress);
  el("step-count").textContent = String(
    state.progress.length ? state.progress[state.progress.length - 1].step : 0,
  );

  const queryBox = el("query");
  const optionsBox = el("options");
  if (state.displayed) {
    try {
      const rendering = renderQuery(state.displayed.query);
      el("prompt").textContent = rendering.prompt;
      queryBox.innerHTML = rendering.svg;
      optionsBox.innerHTML = "";
      for (const option of rendering.options) {
        const button = document.createElement("button");
        button.id = option.id;
        button.textContent = option.label;
        button.disabled = state.phase !== "answering";
        button.addEventListener("click", () => void submit(option.response));
        optionsBox.appendChild(button);
      }
    } catch (err) {
      // unknown variant: error banner, session preserved
      el("prompt").textContent = "";
      queryBox.innerHTML = "";
      optionsBox.innerHTML = "";
      el("banner").textContent = String(err);
    }
  } else {
    el("prompt").textContent = state.phase === "finished" ? "no more queries" : "";
    queryBox.innerHTML = "";
    optionsBox.innerHTML = "";
  }
}

export function bootstrap() {
  el("create").addEventListener("click", () => void createSession());
  draw();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", bootstrap);
}
