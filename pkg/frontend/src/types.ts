/** Wire types for the live-session API, with runtime guards.
 *
 * The server versions every payload with a top-level `v`; anything else is
 * rejected before it can corrupt the UI state.
 */

export const API_VERSION = 1;

export type Cell = [number, number];

export interface GridSpec {
  width: number;
  height: number;
  obstacles: Cell[];
  goal: Cell;
}

export interface TrajectorySpec {
  cells: Cell[];
}

export type ChoiceSchema = { type: "choice"; options: string[] };
export type IndexSchema = { type: "index"; count: number };
export type ResponseSchema = ChoiceSchema | IndexSchema;

export type QueryKind =
  | "label"
  | "comparison"
  | "demonstration"
  | "feature_label"
  | "correction";

export interface QueryView {
  kind: QueryKind;
  grid: GridSpec;
  trajectories: TrajectorySpec[];
  response_schema: ResponseSchema;
  start?: Cell;
  waypoints?: Cell[];
  target?: TrajectorySpec;
  feature_index?: number;
  feature_name?: string;
}

export interface QueryPayload {
  v: number;
  id: string;
  step: number;
  score: number;
  query: QueryView;
}

export interface SessionSummary {
  step: number;
  spread: number;
  dataset_size: number;
  belief_generation: number;
  feature_weights: number[];
}

export interface CreatedPayload {
  v: number;
  id: string;
  summary: SessionSummary;
}

export interface SummaryPayload {
  v: number;
  id: string;
  summary: SessionSummary;
}

export interface BeliefPayload {
  v: number;
  id: string;
  mean_estimate: number[];
  spread: number;
  feature_weights: number[];
  belief_generation: number;
  top_particles: { omega: number[]; weight: number }[];
}

/** The response document POSTed back; `value` is a choice string or an
 * index into the served trajectory list. */
export interface ResponseDoc {
  kind: QueryKind;
  value: string | number;
}

export interface ApiErrorBody {
  v?: number;
  code: string;
  message: string;
  field?: string;
}

const QUERY_KINDS: QueryKind[] = [
  "label",
  "comparison",
  "demonstration",
  "feature_label",
  "correction",
];

export function isSupportedVersion(payload: unknown): boolean {
  return (
    typeof payload === "object" &&
    payload !== null &&
    (payload as { v?: unknown }).v === API_VERSION
  );
}

export function isQueryView(q: unknown): q is QueryView {
  if (typeof q !== "object" || q === null) return false;
  const view = q as QueryView;
  if (!QUERY_KINDS.includes(view.kind)) return false;
  if (!view.grid || !Array.isArray(view.trajectories)) return false;
  const schema = view.response_schema as ResponseSchema | undefined;
  if (!schema) return false;
  if (schema.type === "choice") return Array.isArray(schema.options);
  if (schema.type === "index") return typeof schema.count === "number";
  return false;
}

export function isSummary(s: unknown): s is SessionSummary {
  if (typeof s !== "object" || s === null) return false;
  const sum = s as SessionSummary;
  return (
    typeof sum.step === "number" &&
    typeof sum.spread === "number" &&
    typeof sum.dataset_size === "number"
  );
}
