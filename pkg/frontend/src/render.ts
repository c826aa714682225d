/** Pure SVG/HTML builders for queries and progress.
 *
 * Everything returns markup strings plus a selection map, so rendering is
 * testable without a DOM. Trajectories are drawn as numbered arrows over
 * the grid; every selectable element carries exactly one response value.
 */
import {
  Cell,
  GridSpec,
  QueryView,
  ResponseDoc,
  TrajectorySpec,
} from "./types.js";

export const CELL = 48; // px per grid cell

const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2"];

function cellCenter(grid: GridSpec, [x, y]: Cell): [number, number] {
  // grid y grows upward; svg y grows downward
  return [x * CELL + CELL / 2, (grid.height - 1 - y) * CELL + CELL / 2];
}

export function renderGrid(grid: GridSpec): string {
  const w = grid.width * CELL;
  const h = grid.height * CELL;
  const parts: string[] = [];
  parts.push(`<rect x="0" y="0" width="${w}" height="${h}" class="grid-bg"/>`);
  for (let x = 0; x <= grid.width; x++) {
    parts.push(`<line x1="${x * CELL}" y1="0" x2="${x * CELL}" y2="${h}" class="grid-line"/>`);
  }
  for (let y = 0; y <= grid.height; y++) {
    parts.push(`<line x1="0" y1="${y * CELL}" x2="${w}" y2="${y * CELL}" class="grid-line"/>`);
  }
  for (const ob of grid.obstacles) {
    const [cx, cy] = cellCenter(grid, ob);
    parts.push(
      `<rect x="${cx - CELL / 2}" y="${cy - CELL / 2}" width="${CELL}" height="${CELL}" class="obstacle"/>`,
    );
  }
  const [gx, gy] = cellCenter(grid, grid.goal);
  parts.push(`<circle cx="${gx}" cy="${gy}" r="${CELL * 0.3}" class="goal"/>`);
  return parts.join("");
}

export function renderTrajectory(
  grid: GridSpec,
  traj: TrajectorySpec,
  color: string,
  label: string,
): string {
  const centers = traj.cells.map((c) => cellCenter(grid, c));
  const points = centers.map(([x, y]) => `${x},${y}`).join(" ");
  const parts: string[] = [];
  parts.push(
    `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="3" marker-end="url(#arrow)"/>`,
  );
  centers.forEach(([x, y], i) => {
    parts.push(`<circle cx="${x}" cy="${y}" r="4" fill="${color}"/>`);
    parts.push(
      `<text x="${x + 6}" y="${y - 6}" fill="${color}" font-size="11">${label}${i}</text>`,
    );
  });
  return parts.join("");
}

export interface SelectableOption {
  /** DOM id of the clickable element. */
  id: string;
  /** Visible caption. */
  label: string;
  /** The exact response this option submits. */
  response: ResponseDoc;
}

export interface QueryRendering {
  prompt: string;
  svg: string;
  options: SelectableOption[];
}

const PROMPTS: Record<string, string> = {
  label: "Is this trajectory good or bad?",
  comparison: "Which trajectory is best?",
  demonstration: "Pick the best trajectory from the marked start",
  feature_label: "Does this feature matter for judging trajectories?",
  correction: "Pick a replacement for the highlighted trajectory",
};

/** Build the interactive view for one query.
 *
 * Throws on an unknown variant; callers translate that into an error
 * banner without touching the session.
 */
export function renderQuery(view: QueryView): QueryRendering {
  const prompt = PROMPTS[view.kind];
  if (!prompt) {
    throw new Error(`unknown query variant ${String(view.kind)}`);
  }
  const svgParts: string[] = [
    `<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" ` +
      `markerWidth="6" markerHeight="6" orient="auto-start-reverse">` +
      `<path d="M 0 0 L 10 5 L 0 10 z"/></marker></defs>`,
    renderGrid(view.grid),
  ];
  const options: SelectableOption[] = [];

  if (view.kind === "label" || view.kind === "feature_label") {
    svgParts.push(renderTrajectory(view.grid, view.trajectories[0], PALETTE[0], "t"));
    const schema = view.response_schema;
    if (schema.type !== "choice") throw new Error("expected a choice schema");
    for (const value of schema.options) {
      options.push({
        id: `choice-${value}`,
        label: value.replace("_", " "),
        response: { kind: view.kind, value },
      });
    }
  } else {
    if (view.kind === "correction" && view.target) {
      svgParts.push(renderTrajectory(view.grid, view.target, "#6b7280", "old "));
    }
    if (view.kind === "demonstration" && view.start) {
      const [sx, sy] = cellCenter(view.grid, view.start);
      svgParts.push(`<rect x="${sx - 8}" y="${sy - 8}" width="16" height="16" class="start"/>`);
    }
    view.trajectories.forEach((traj, i) => {
      const color = PALETTE[i % PALETTE.length];
      const letter = String.fromCharCode(65 + (i % 26));
      svgParts.push(renderTrajectory(view.grid, traj, color, letter));
      options.push({
        id: `traj-${i}`,
        label: `trajectory ${letter}`,
        response: { kind: view.kind, value: i },
      });
    });
  }

  const width = view.grid.width * CELL;
  const height = view.grid.height * CELL;
  const svg =
    `<svg viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    svgParts.join("") +
    `</svg>`;
  let prompt_ = prompt;
  if (view.kind === "feature_label" && view.feature_name) {
    prompt_ = `Does "${view.feature_name}" matter for judging trajectories?`;
  }
  return { prompt: prompt_, svg, options };
}

export interface ProgressPointLike {
  step: number;
  spread: number;
  datasetSize: number;
}

/** Uncertainty (spread) and dataset size per step, as a small inline chart. */
export function renderProgress(points: ProgressPointLike[], width = 320, height = 120): string {
  if (points.length === 0) {
    return `<svg width="${width}" height="${height}"></svg>`;
  }
  const maxStep = Math.max(1, ...points.map((p) => p.step));
  const maxSpread = Math.max(1e-9, ...points.map((p) => p.spread));
  const maxData = Math.max(1, ...points.map((p) => p.datasetSize));
  const x = (step: number) => 24 + (step / maxStep) * (width - 32);
  const ySpread = (v: number) => height - 16 - (v / maxSpread) * (height - 32);
  const yData = (v: number) => height - 16 - (v / maxData) * (height - 32);
  const spreadPts = points.map((p) => `${x(p.step)},${ySpread(p.spread)}`).join(" ");
  const dataPts = points.map((p) => `${x(p.step)},${yData(p.datasetSize)}`).join(" ");
  return (
    `<svg width="${width}" height="${height}" class="progress-chart">` +
    `<polyline points="${spreadPts}" fill="none" stroke="#2563eb" stroke-width="2"/>` +
    `<polyline points="${dataPts}" fill="none" stroke="#9ca3af" stroke-width="2" stroke-dasharray="4 3"/>` +
    `<text x="26" y="12" font-size="10" fill="#2563eb">uncertainty</text>` +
    `<text x="110" y="12" font-size="10" fill="#6b7280">dataset size</text>` +
    `</svg>`
  );
}
