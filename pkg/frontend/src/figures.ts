/**
 * Figure rendering from harness outputs. Every figure reads only the
 * documented CSV/JSON files; requested columns are validated against the
 * run manifest's versioned column lists before any drawing happens, and a
 * missing column fails with the column name and manifest schema version.
 */

import { existsSync, readFileSync, writeFileSync } from "fs";
import { dirname, join } from "path";

import { numericColumn, readCsv, Table } from "./csv.js";
import {
  axes, document as svgDocument, el, fmt, heatColor, HEIGHT, legend,
  linearScale, logScale, MARGIN, PALETTE, polyline, Scale, text, WIDTH,
} from "./svg.js";

export type FigureKind =
  | "iteration_curves"
  | "sensitivity_curves"
  | "box_plot"
  | "contour_overlay";

export interface FigureSpec {
  kind: FigureKind;
  inputs: string[];
  output: string;
  manifest?: string;
  columns?: string[];
  log_x?: boolean;
  log_y?: boolean;
  iterations?: number[];
  title?: string;
}

export class SchemaError extends Error {}

interface Manifest {
  schema_version: number;
  trace_columns?: string[];
  aggregate_columns?: string[];
}

export function loadSpec(path: string): FigureSpec {
  const doc = JSON.parse(readFileSync(path, "utf-8"));
  const kinds: FigureKind[] = ["iteration_curves", "sensitivity_curves",
                               "box_plot", "contour_overlay"];
  if (!kinds.includes(doc.kind)) {
    throw new SchemaError(`unknown figure kind: ${doc.kind}`);
  }
  if (!Array.isArray(doc.inputs) || doc.inputs.length === 0) {
    throw new SchemaError("figure spec needs a non-empty inputs list");
  }
  if (typeof doc.output !== "string") {
    throw new SchemaError("figure spec needs an output path");
  }
  return doc as FigureSpec;
}

function findManifest(spec: FigureSpec): Manifest | null {
  const candidates = spec.manifest
    ? [spec.manifest]
    : spec.inputs.flatMap((p) => [
        join(dirname(p), "manifest.json"),
        join(dirname(dirname(p)), "manifest.json"),
      ]);
  for (const path of candidates) {
    if (existsSync(path)) {
      return JSON.parse(readFileSync(path, "utf-8")) as Manifest;
    }
  }
  return null;
}

function requireColumns(table: Table, names: string[],
                        manifest: Manifest | null): void {
  const version = manifest ? `manifest schema version ${manifest.schema_version}`
                           : "no manifest found";
  const known = new Set([
    ...(manifest?.trace_columns ?? []),
    ...(manifest?.aggregate_columns ?? []),
  ]);
  for (const name of names) {
    if (!table.columns.includes(name)) {
      throw new SchemaError(`missing column "${name}" (${version})`);
    }
    if (manifest && known.size > 0 && !known.has(name)
        && !GROUP_COLUMNS.has(name)) {
      throw new SchemaError(
        `column "${name}" absent from the run schema (${version})`);
    }
  }
}

const GROUP_COLUMNS = new Set(["algorithm", "alpha", "tau", "replicate",
                               "sample", "test_mse"]);

const CURVE_CANDIDATES = ["objective", "renyi_bound", "mse_mean", "mse_cov",
                          "f1_zeros", "ess"];

// ---------------------------------------------------------------------------
// iteration_curves
// ---------------------------------------------------------------------------

function pickCurveColumns(table: Table, requested: string[] | undefined):
    string[] {
  if (requested && requested.length > 0) return requested;
  const aggregate = table.columns.includes("mse_mean_median");
  const names = CURVE_CANDIDATES.map((c) => (aggregate ? `${c}_median` : c));
  return names.filter((c) => table.columns.includes(c)
    && numericColumn(table, c).some((v) => Number.isFinite(v)));
}

function renderIterationCurves(spec: FigureSpec, manifest: Manifest | null):
    string {
  const table = readCsv(spec.inputs[0]);
  requireColumns(table, ["k"], manifest);
  const columns = pickCurveColumns(table, spec.columns);
  requireColumns(table, columns, manifest);
  if (columns.length === 0) {
    throw new SchemaError("no plottable metric columns found");
  }
  const ks = numericColumn(table, "k");
  const series = columns.map((c) => numericColumn(table, c));
  const flat = series.flat().filter((v) => Number.isFinite(v)
    && (!spec.log_y || v > 0));
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const xs = linearScale(Math.min(...ks), Math.max(...ks), MARGIN.left,
                         WIDTH - MARGIN.right);
  const ys = spec.log_y
    ? logScale(lo, hi, HEIGHT - MARGIN.bottom, MARGIN.top)
    : linearScale(Math.min(lo, 0), hi, HEIGHT - MARGIN.bottom, MARGIN.top);
  const body = axes(xs, ys, { xLabel: "iteration", yLabel: "value",
                              title: spec.title ?? "metrics by iteration" });
  series.forEach((vals, i) => {
    const pts: Array<[number, number]> = [];
    vals.forEach((v, j) => {
      if (Number.isFinite(v) && (!spec.log_y || v > 0)) {
        pts.push([xs(ks[j]), ys(v)]);
      }
    });
    if (pts.length > 0) body.push(polyline(pts, PALETTE[i % PALETTE.length]));
  });
  body.push(...legend(columns.map((c, i) => [c, PALETTE[i % PALETTE.length]])));
  return svgDocument(body);
}

// ---------------------------------------------------------------------------
// sensitivity_curves
// ---------------------------------------------------------------------------

function renderSensitivityCurves(spec: FigureSpec, manifest: Manifest | null):
    string {
  const table = readCsv(spec.inputs[0]);
  const metric = spec.columns?.[0] ?? "mse_mean_median";
  requireColumns(table, ["algorithm", "tau", "k", metric], manifest);
  const maxK = Math.max(...numericColumn(table, "k"));
  type Point = { tau: number; value: number; init: number };
  const byAlgo = new Map<string, Point[]>();
  for (const row of table.rows) {
    if (Number(row.k) !== maxK) continue;
    const init = table.rows.find((r) => r.algorithm === row.algorithm
      && r.tau === row.tau && Number(r.k) === 0);
    const list = byAlgo.get(row.algorithm) ?? [];
    list.push({ tau: Number(row.tau), value: Number(row[metric]),
                init: Number(init?.[metric] ?? NaN) });
    byAlgo.set(row.algorithm, list);
  }
  const points = [...byAlgo.values()].flat();
  if (points.length === 0) throw new SchemaError("no final-iteration rows");
  const taus = points.map((p) => p.tau);
  const values = points.flatMap((p) =>
    [p.value, p.init].filter((v) => Number.isFinite(v)));
  const positive = values.filter((v) => v > 0);
  const logY = spec.log_y ?? positive.length === values.length;
  const xs = logScale(Math.min(...taus), Math.max(...taus), MARGIN.left,
                      WIDTH - MARGIN.right);
  const ys = logY
    ? logScale(Math.min(...positive), Math.max(...positive),
               HEIGHT - MARGIN.bottom, MARGIN.top)
    : linearScale(Math.min(...values, 0), Math.max(...values),
                  HEIGHT - MARGIN.bottom, MARGIN.top);
  const body = axes(xs, ys, {
    xLabel: "step size", yLabel: metric,
    title: spec.title ?? `final ${metric} by step size`,
  });
  const entries: Array<[string, string]> = [];
  let idx = 0;
  for (const [algo, pts] of [...byAlgo.entries()].sort()) {
    const color = PALETTE[idx % PALETTE.length];
    idx += 1;
    const sorted = [...pts].sort((a, b) => a.tau - b.tau);
    const usable = sorted.filter((p) => Number.isFinite(p.value)
      && (!logY || p.value > 0));
    body.push(polyline(usable.map((p) => [xs(p.tau), ys(p.value)]), color));
    for (const p of usable) {
      body.push(el("circle", { cx: fmt(xs(p.tau)), cy: fmt(ys(p.value)),
                               r: 3, fill: color }));
    }
    entries.push([algo, color]);
    const init = sorted.find((p) => Number.isFinite(p.init))?.init;
    if (init !== undefined && (!logY || init > 0)) {
      body.push(polyline(
        [[MARGIN.left, ys(init)], [WIDTH - MARGIN.right, ys(init)]],
        "#000000", { "stroke-dasharray": "4 3", "stroke-width": 1 }));
    }
  }
  body.push(...legend(entries));
  return svgDocument(body);
}

// ---------------------------------------------------------------------------
// box_plot
// ---------------------------------------------------------------------------

function quantile(sorted: number[], q: number): number {
  const pos = (sorted.length - 1) * q;
  const i = Math.floor(pos);
  const frac = pos - i;
  return i + 1 < sorted.length
    ? sorted[i] + frac * (sorted[i + 1] - sorted[i])
    : sorted[i];
}

function renderBoxPlot(spec: FigureSpec, manifest: Manifest | null): string {
  const table = readCsv(spec.inputs[0]);
  const metric = spec.columns?.[0] ?? "test_mse";
  requireColumns(table, ["algorithm", metric], manifest);
  const groups = new Map<string, number[]>();
  for (const row of table.rows) {
    const key = row.alpha !== undefined
      ? `${row.algorithm} (a=${row.alpha})` : row.algorithm;
    const v = Number(row[metric]);
    if (!Number.isFinite(v)) continue;
    groups.set(key, [...(groups.get(key) ?? []), v]);
  }
  if (groups.size === 0) throw new SchemaError("no box-plot groups found");
  const keys = [...groups.keys()].sort();
  const all = [...groups.values()].flat();
  const logY = spec.log_y ?? false;
  const vals = logY ? all.filter((v) => v > 0) : all;
  const ys = logY
    ? logScale(Math.min(...vals), Math.max(...vals), HEIGHT - MARGIN.bottom,
               MARGIN.top)
    : linearScale(Math.min(...vals, 0), Math.max(...vals),
                  HEIGHT - MARGIN.bottom, MARGIN.top);
  const xs = linearScale(0, keys.length, MARGIN.left, WIDTH - MARGIN.right);
  const body = axes(xs, ys, { yLabel: metric,
                              title: spec.title ?? `${metric} by method` });
  keys.forEach((key, i) => {
    const sorted = [...(groups.get(key) ?? [])].sort((a, b) => a - b);
    const q1 = quantile(sorted, 0.25);
    const med = quantile(sorted, 0.5);
    const q3 = quantile(sorted, 0.75);
    const iqr = q3 - q1;
    const loWhisk = Math.min(...sorted.filter((v) => v >= q1 - 1.5 * iqr));
    const hiWhisk = Math.max(...sorted.filter((v) => v <= q3 + 1.5 * iqr));
    const cx = xs(i + 0.5);
    const half = Math.min(36, (WIDTH - MARGIN.left - MARGIN.right)
      / keys.length / 3);
    const color = PALETTE[i % PALETTE.length];
    body.push(el("line", { x1: fmt(cx), y1: fmt(ys(loWhisk)), x2: fmt(cx),
                           y2: fmt(ys(hiWhisk)), stroke: color }));
    body.push(el("rect", {
      x: fmt(cx - half), y: fmt(ys(q3)), width: fmt(2 * half),
      height: fmt(Math.max(ys(q1) - ys(q3), 0.5)),
      fill: "none", stroke: color, "stroke-width": 1.5,
    }));
    body.push(el("line", { x1: fmt(cx - half), y1: fmt(ys(med)),
                           x2: fmt(cx + half), y2: fmt(ys(med)),
                           stroke: color, "stroke-width": 2 }));
    for (const v of sorted) {
      if (v < loWhisk || v > hiWhisk) {
        body.push(el("circle", { cx: fmt(cx), cy: fmt(ys(v)), r: 2,
                                 fill: "none", stroke: color }));
      }
    }
    body.push(text(cx, HEIGHT - MARGIN.bottom + 18, key,
                   { "text-anchor": "middle" }));
  });
  return svgDocument(body);
}

// ---------------------------------------------------------------------------
// contour_overlay
// ---------------------------------------------------------------------------

interface TargetGrid {
  x: number[];
  y: number[];
  log_density: number[][];
}

interface ParamsDoc {
  iterations: Array<{ k: number; mean: number[]; cov: number[][] }>;
}

/** Half-axes and rotation of the 2-sigma ellipse of a 2x2 covariance. */
function ellipseFromCov(cov: number[][]):
    { rx: number; ry: number; angleDeg: number } {
  const [[a, b], [, c]] = cov;
  const tr = a + c;
  const det = a * c - b * b;
  const disc = Math.sqrt(Math.max(tr * tr / 4 - det, 0));
  const l1 = tr / 2 + disc;
  const l2 = tr / 2 - disc;
  const angle = Math.abs(b) < 1e-300 ? (a >= c ? 0 : Math.PI / 2)
    : Math.atan2(l1 - a, b);
  return {
    rx: 2 * Math.sqrt(Math.max(l1, 0)),
    ry: 2 * Math.sqrt(Math.max(l2, 0)),
    angleDeg: (angle * 180) / Math.PI,
  };
}

function renderContourOverlay(spec: FigureSpec): string {
  if (spec.inputs.length < 2) {
    throw new SchemaError(
      "contour_overlay needs [target_grid.json, params.json] inputs");
  }
  const grid = JSON.parse(readFileSync(spec.inputs[0], "utf-8")) as TargetGrid;
  const params = JSON.parse(readFileSync(spec.inputs[1], "utf-8")) as ParamsDoc;
  if (!grid.x || !grid.y || !grid.log_density) {
    throw new SchemaError("target grid is missing x/y/log_density");
  }
  if (!params.iterations?.length || !params.iterations[0].cov) {
    throw new SchemaError("params file carries no per-iteration covariances");
  }
  const xs = linearScale(grid.x[0], grid.x[grid.x.length - 1], MARGIN.left,
                         WIDTH - MARGIN.right);
  const ys = linearScale(grid.y[0], grid.y[grid.y.length - 1],
                         HEIGHT - MARGIN.bottom, MARGIN.top);
  const body = axes(xs, ys, { xLabel: "x1", yLabel: "x2",
                              title: spec.title ?? "target and proposal" });
  const zmax = Math.max(...grid.log_density.flat());
  const cells: string[] = [];
  for (let j = 0; j + 1 < grid.y.length; j += 1) {
    for (let i = 0; i + 1 < grid.x.length; i += 1) {
      const t = Math.exp(grid.log_density[j][i] - zmax);
      if (t < 1e-4) continue;
      const x0 = xs(grid.x[i]);
      const y1 = ys(grid.y[j + 1]);
      cells.push(el("rect", {
        x: fmt(x0), y: fmt(y1),
        width: fmt(xs(grid.x[i + 1]) - x0),
        height: fmt(ys(grid.y[j]) - y1),
        fill: heatColor(t), "fill-opacity": fmt(0.85 * t),
      }));
    }
  }
  body.push(el("g", {}, cells));
  const lastK = params.iterations[params.iterations.length - 1].k;
  const wanted = spec.iterations?.length ? spec.iterations : [lastK];
  const perUnitX = (xs(1) - xs(0));
  const perUnitY = Math.abs(ys(1) - ys(0));
  wanted.forEach((k, idx) => {
    const it = params.iterations.find((e) => e.k === k);
    if (!it) throw new SchemaError(`iteration ${k} not present in params`);
    const color = PALETTE[idx % PALETTE.length];
    const ell = ellipseFromCov(it.cov);
    body.push(el("ellipse", {
      cx: fmt(xs(it.mean[0])), cy: fmt(ys(it.mean[1])),
      rx: fmt(ell.rx * perUnitX), ry: fmt(ell.ry * perUnitY),
      transform: `rotate(${fmt(-ell.angleDeg)} ${fmt(xs(it.mean[0]))} ${fmt(ys(it.mean[1]))})`,
      fill: "none", stroke: color, "stroke-width": 2,
    }));
    body.push(text(xs(it.mean[0]) + 6, ys(it.mean[1]) - 6, `k=${k}`,
                   { fill: color }));
  });
  const first = params.iterations[0];
  body.push(el("rect", {
    x: fmt(xs(first.mean[0]) - 4), y: fmt(ys(first.mean[1]) - 4),
    width: 8, height: 8, fill: "#2ca02c",
  }));
  return svgDocument(body);
}

// ---------------------------------------------------------------------------

export function renderToString(spec: FigureSpec): string {
  const manifest = findManifest(spec);
  switch (spec.kind) {
    case "iteration_curves":
      return renderIterationCurves(spec, manifest);
    case "sensitivity_curves":
      return renderSensitivityCurves(spec, manifest);
    case "box_plot":
      return renderBoxPlot(spec, manifest);
    case "contour_overlay":
      return renderContourOverlay(spec);
  }
}

export function render(spec: FigureSpec): string {
  const svg = renderToString(spec);
  writeFileSync(spec.output, svg, "utf-8");
  return spec.output;
}
