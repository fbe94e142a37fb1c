/**
 * Render the experiment CSVs as standalone SVG figures: the pooling-sweep
 * curve (with the published full-scale reference overlaid) and the paired
 * multi-stage vs single-stage bars.
 */

import { parseCsv, requireColumns, Table } from "./csv";

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 24, top: 36, bottom: 56 };

/** Infinite pooling exponents are drawn at this abscissa. */
export const INF_X = 100;

type Pt = { x: number; y: number };

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

class Svg {
  parts: string[] = [];

  line(a: Pt, b: Pt, stroke: string, width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${a.x.toFixed(1)}" y1="${a.y.toFixed(1)}" ` +
      `x2="${b.x.toFixed(1)}" y2="${b.y.toFixed(1)}" ` +
      `stroke="${stroke}" stroke-width="${width}"${d}/>`);
  }

  circle(p: Pt, r: number, fill: string, cls: string): void {
    this.parts.push(
      `<circle class="${cls}" cx="${p.x.toFixed(1)}" cy="${p.y.toFixed(1)}" ` +
      `r="${r}" fill="${fill}"/>`);
  }

  polyline(pts: Pt[], stroke: string, cls: string): void {
    const coords = pts.map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`).join(" ");
    this.parts.push(
      `<polyline class="${cls}" points="${coords}" fill="none" ` +
      `stroke="${stroke}" stroke-width="2"/>`);
  }

  rect(x: number, y: number, w: number, h: number, fill: string, cls: string): void {
    this.parts.push(
      `<rect class="${cls}" x="${x.toFixed(1)}" y="${y.toFixed(1)}" ` +
      `width="${w.toFixed(1)}" height="${h.toFixed(1)}" fill="${fill}"/>`);
  }

  text(p: Pt, content: string, anchor = "middle", size = 12): void {
    this.parts.push(
      `<text x="${p.x.toFixed(1)}" y="${p.y.toFixed(1)}" ` +
      `text-anchor="${anchor}" font-size="${size}" ` +
      `font-family="sans-serif">${esc(content)}</text>`);
  }

  render(title: string): string {
    return `<?xml version="1.0" encoding="UTF-8"?>\n` +
      `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
      `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
      `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
      `<text x="${WIDTH / 2}" y="20" text-anchor="middle" font-size="15" ` +
      `font-family="sans-serif">${esc(title)}</text>\n` +
      this.parts.join("\n") + "\n</svg>\n";
  }
}

function scale(vMin: number, vMax: number, outMin: number, outMax: number) {
  const span = vMax - vMin || 1;
  return (v: number) => outMin + ((v - vMin) / span) * (outMax - outMin);
}

function median(values: number[]): number {
  const s = [...values].sort((a, b) => a - b);
  const mid = s.length >> 1;
  return s.length % 2 ? s[mid] : (s[mid - 1] + s[mid]) / 2;
}

function parseP(text: string): number {
  return text === "inf" ? Infinity : parseFloat(text);
}

function axis(svg: Svg, xTicks: { at: number; label: string }[],
              yTicks: { at: number; label: string }[],
              xLabel: string, yLabel: string): void {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  svg.line({ x: x0, y: y0 }, { x: x1, y: y0 }, "black");
  svg.line({ x: x0, y: y0 }, { x: x0, y: y1 }, "black");
  for (const t of xTicks) {
    svg.line({ x: t.at, y: y0 }, { x: t.at, y: y0 + 5 }, "black");
    svg.text({ x: t.at, y: y0 + 20 }, t.label);
  }
  for (const t of yTicks) {
    svg.line({ x: x0 - 5, y: t.at }, { x: x0, y: t.at }, "black");
    svg.text({ x: x0 - 8, y: t.at + 4 }, t.label, "end");
  }
  svg.text({ x: (x0 + x1) / 2, y: HEIGHT - 14 }, xLabel);
  svg.parts.push(
    `<text x="16" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" ` +
    `font-family="sans-serif" transform="rotate(-90 16 ${(y0 + y1) / 2})">` +
    `${esc(yLabel)}</text>`);
}

/** Sweep figure: per-seed points, median curve, reference overlay. */
export function renderSweepSvg(csvText: string): string {
  const table = parseCsv(csvText);
  const cols = requireColumns(table, ["p", "seed", "val_error", "reference_error_pct"]);
  if (table.rows.length === 0) {
    throw new Error("sweep CSV has no data rows");
  }

  const byP = new Map<number, number[]>();
  const refs = new Map<number, number>();
  for (const row of table.rows) {
    const p = parseP(row[cols.get("p")!]);
    const err = parseFloat(row[cols.get("val_error")!]) * 100;
    if (!byP.has(p)) byP.set(p, []);
    byP.get(p)!.push(err);
    const ref = row[cols.get("reference_error_pct")!];
    if (ref !== "") refs.set(p, parseFloat(ref));
  }

  const ps = [...byP.keys()].sort((a, b) => a - b);
  const xOf = (p: number) => (p === Infinity ? INF_X : p);
  const allErr = [...byP.values()].flat().concat([...refs.values()]);
  const yMax = Math.max(...allErr) * 1.15 + 1e-9;

  const sx = scale(0, Math.max(...ps.map(xOf)) * 1.05,
                   MARGIN.left, WIDTH - MARGIN.right);
  const sy = scale(0, yMax, HEIGHT - MARGIN.bottom, MARGIN.top);

  const svg = new Svg();
  axis(svg,
       ps.map((p) => ({ at: sx(xOf(p)), label: p === Infinity ? "inf" : `${p}` })),
       [0, yMax / 2, yMax].map((v) => ({ at: sy(v), label: v.toFixed(1) })),
       "pooling exponent p (inf drawn at 100)", "validation error (%)");

  for (const p of ps) {
    for (const err of byP.get(p)!) {
      svg.circle({ x: sx(xOf(p)), y: sy(err) }, 3, "#7aa6d9", "seed-point");
    }
  }
  svg.polyline(ps.map((p) => ({ x: sx(xOf(p)), y: sy(median(byP.get(p)!)) })),
               "#1f4e96", "median-curve");
  if (refs.size > 0) {
    const refPs = [...refs.keys()].sort((a, b) => a - b);
    svg.polyline(refPs.map((p) => ({ x: sx(xOf(p)), y: sy(refs.get(p)!) })),
                 "#c4471b", "reference-curve");
    for (const p of refPs) {
      svg.circle({ x: sx(xOf(p)), y: sy(refs.get(p)!) }, 4, "#c4471b",
                 "reference-point");
    }
  }
  svg.circle({ x: WIDTH - 200, y: 40 }, 4, "#1f4e96", "legend");
  svg.text({ x: WIDTH - 190, y: 44 }, "this run (median)", "start");
  svg.circle({ x: WIDTH - 200, y: 58 }, 4, "#c4471b", "legend");
  svg.text({ x: WIDTH - 190, y: 62 }, "published full-scale reference", "start");
  return svg.render("Validation error vs pooling exponent");
}

/** Paired multi-stage vs single-stage bars per seed, plus the reference pair. */
export function renderCompareSvg(csvText: string): string {
  const table = parseCsv(csvText);
  const cols = requireColumns(table, ["seed", "variant", "val_error",
                                      "reference_error_pct"]);
  if (table.rows.length === 0) {
    throw new Error("comparison CSV has no data rows");
  }

  const pairs = new Map<string, { ss?: number; ms?: number }>();
  let refSs = NaN;
  let refMs = NaN;
  for (const row of table.rows) {
    const seed = row[cols.get("seed")!];
    const variant = row[cols.get("variant")!];
    const err = parseFloat(row[cols.get("val_error")!]) * 100;
    if (!pairs.has(seed)) pairs.set(seed, {});
    if (variant === "ss") {
      pairs.get(seed)!.ss = err;
      refSs = parseFloat(row[cols.get("reference_error_pct")!]);
    } else if (variant === "ms") {
      pairs.get(seed)!.ms = err;
      refMs = parseFloat(row[cols.get("reference_error_pct")!]);
    }
  }

  const groups = [...pairs.keys()].map((seed) => ({
    label: `seed ${seed}`,
    ss: pairs.get(seed)!.ss ?? NaN,
    ms: pairs.get(seed)!.ms ?? NaN,
  }));
  groups.push({ label: "reference", ss: refSs, ms: refMs });

  const yMax = Math.max(...groups.flatMap((g) => [g.ss, g.ms])) * 1.15 + 1e-9;
  const sy = scale(0, yMax, HEIGHT - MARGIN.bottom, MARGIN.top);
  const x0 = MARGIN.left;
  const groupWidth = (WIDTH - MARGIN.left - MARGIN.right) / groups.length;
  const barWidth = Math.min(36, groupWidth / 3);

  const svg = new Svg();
  axis(svg,
       groups.map((g, i) => ({ at: x0 + (i + 0.5) * groupWidth, label: g.label })),
       [0, yMax / 2, yMax].map((v) => ({ at: sy(v), label: v.toFixed(1) })),
       "", "validation error (%)");
  const base = HEIGHT - MARGIN.bottom;
  groups.forEach((g, i) => {
    const cx = x0 + (i + 0.5) * groupWidth;
    svg.rect(cx - barWidth - 2, sy(g.ss), barWidth, base - sy(g.ss),
             "#8c8c8c", "bar-ss");
    svg.rect(cx + 2, sy(g.ms), barWidth, base - sy(g.ms), "#1f4e96", "bar-ms");
  });
  svg.rect(WIDTH - 220, 34, 12, 12, "#8c8c8c", "legend");
  svg.text({ x: WIDTH - 202, y: 44 }, "single-stage", "start");
  svg.rect(WIDTH - 220, 52, 12, 12, "#1f4e96", "legend");
  svg.text({ x: WIDTH - 202, y: 62 }, "multi-stage", "start");
  return svg.render("Multi-stage vs single-stage features");
}

export function tableForTest(csvText: string): Table {
  return parseCsv(csvText);
}
