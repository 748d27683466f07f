/** Small SVG toolkit: scales, axes, heatmaps. Output is deterministic
 * (fixed sizes, fixed number formatting), so figures diff cleanly.
 */

import { interpolateViridis } from "d3-scale-chromatic";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function num(v: number, digits = 2): string {
  if (!Number.isFinite(v)) return "0";
  const s = v.toFixed(digits);
  return s === "-0.00" ? "0.00" : s;
}

export function tag(
  name: string,
  attrs: Record<string, string | number>,
  inner = "",
): string {
  const parts = Object.entries(attrs)
    .map(([k, v]) => `${k}="${typeof v === "number" ? num(v) : v}"`)
    .join(" ");
  return inner === "" && name !== "text"
    ? `<${name} ${parts}/>`
    : `<${name} ${parts}>${inner}</${name}>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  opts: Record<string, string | number> = {},
): string {
  return tag("text", { x, y, "font-size": 11, fill: "#222", ...opts }, esc(content));
}

export type Scale = (v: number) => number;

export function linScale(lo: number, hi: number, a: number, b: number): Scale {
  const span = hi - lo || 1;
  return (v) => a + ((v - lo) / span) * (b - a);
}

export function logScale(lo: number, hi: number, a: number, b: number): Scale {
  const llo = Math.log10(lo);
  const span = Math.log10(hi) - llo || 1;
  return (v) => a + ((Math.log10(v) - llo) / span) * (b - a);
}

export function ticks(lo: number, hi: number, target = 5): number[] {
  const span = hi - lo;
  if (span <= 0) return [lo];
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target)! ;
  const first = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-9 * span; v += step) out.push(v);
  return out;
}

export function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo)); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    out.push(Math.pow(10, e));
  }
  return out.length >= 2 ? out : [lo, hi];
}

export function fmtTick(v: number): string {
  const a = Math.abs(v);
  if (a === 0) return "0";
  if (a >= 0.01 && a < 10000) {
    return Number(v.toPrecision(3)).toString();
  }
  return v.toExponential(0).replace("+", "");
}

export interface Panel {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Plot frame with tick marks and labels on the left and bottom edges. */
export function frame(
  p: Panel,
  xt: { at: number[]; pos: Scale; fmt?: (v: number) => string },
  yt: { at: number[]; pos: Scale; fmt?: (v: number) => string },
  labels: { title?: string; x?: string; y?: string } = {},
): string {
  const fx = xt.fmt ?? fmtTick;
  const fy = yt.fmt ?? fmtTick;
  const parts: string[] = [
    tag("rect", {
      x: p.x, y: p.y, width: p.w, height: p.h,
      fill: "none", stroke: "#555", "stroke-width": 0.8,
    }),
  ];
  for (const v of xt.at) {
    const px = xt.pos(v);
    parts.push(tag("line", {
      x1: px, y1: p.y + p.h, x2: px, y2: p.y + p.h + 4, stroke: "#555", "stroke-width": 0.8,
    }));
    parts.push(text(px, p.y + p.h + 15, fx(v), { "text-anchor": "middle", "font-size": 10 }));
  }
  for (const v of yt.at) {
    const py = yt.pos(v);
    parts.push(tag("line", {
      x1: p.x - 4, y1: py, x2: p.x, y2: py, stroke: "#555", "stroke-width": 0.8,
    }));
    parts.push(text(p.x - 6, py + 3.5, fy(v), { "text-anchor": "end", "font-size": 10 }));
  }
  if (labels.title) {
    parts.push(text(p.x + p.w / 2, p.y - 8, labels.title, {
      "text-anchor": "middle", "font-size": 12,
    }));
  }
  if (labels.x) {
    parts.push(text(p.x + p.w / 2, p.y + p.h + 30, labels.x, { "text-anchor": "middle" }));
  }
  if (labels.y) {
    parts.push(tag(
      "text",
      {
        x: p.x - 38, y: p.y + p.h / 2, "font-size": 11, fill: "#222",
        "text-anchor": "middle",
        transform: `rotate(-90 ${num(p.x - 38)} ${num(p.y + p.h / 2)})`,
      },
      esc(labels.y),
    ));
  }
  return parts.join("\n");
}

export function polyline(
  pts: Array<[number, number]>,
  attrs: Record<string, string | number>,
): string {
  const d = pts.map(([x, y]) => `${num(x)},${num(y)}`).join(" ");
  return tag("polyline", { points: d, fill: "none", ...attrs });
}

/** Average-pool a (nz, nx) field so neither axis exceeds maxCells. */
export function pool(
  rows: ArrayLike<number>[],
  maxCells = 64,
): { cells: number[][]; lo: number; hi: number } {
  const nz = rows.length;
  const nx = rows[0]!.length;
  const bz = Math.ceil(nz / maxCells);
  const bx = Math.ceil(nx / maxCells);
  const mz = Math.ceil(nz / bz);
  const mx = Math.ceil(nx / bx);
  const cells: number[][] = [];
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < mz; i++) {
    const row: number[] = [];
    for (let j = 0; j < mx; j++) {
      let sum = 0;
      let count = 0;
      for (let a = i * bz; a < Math.min((i + 1) * bz, nz); a++) {
        for (let b = j * bx; b < Math.min((j + 1) * bx, nx); b++) {
          sum += rows[a]![b]!;
          count += 1;
        }
      }
      const v = sum / count;
      row.push(v);
      lo = Math.min(lo, v);
      hi = Math.max(hi, v);
    }
    cells.push(row);
  }
  return { cells, lo, hi };
}

/** Heatmap rects for a pooled field inside a panel, with a fixed or
 * data-driven color range. Returns the markup and the range used. */
export function heatmap(
  p: Panel,
  rows: ArrayLike<number>[],
  range?: [number, number],
): { markup: string; lo: number; hi: number } {
  const pooled = pool(rows);
  const lo = range ? range[0] : pooled.lo;
  const hi = range ? range[1] : pooled.hi;
  const span = hi - lo || 1;
  const mz = pooled.cells.length;
  const mx = pooled.cells[0]!.length;
  const cw = p.w / mx;
  const ch = p.h / mz;
  const parts: string[] = [];
  for (let i = 0; i < mz; i++) {
    for (let j = 0; j < mx; j++) {
      const t = Math.min(1, Math.max(0, (pooled.cells[i]![j]! - lo) / span));
      parts.push(tag("rect", {
        x: p.x + j * cw, y: p.y + i * ch,
        // cells are overdrawn slightly so adjacent rects do not leave seams
        width: cw + 0.5, height: ch + 0.5,
        fill: interpolateViridis(t),
      }));
    }
  }
  return { markup: parts.join("\n"), lo, hi };
}

/** Vertical color legend to the right of a panel. */
export function colorbar(p: Panel, lo: number, hi: number, label = ""): string {
  const x = p.x + p.w + 8;
  const steps = 24;
  const parts: string[] = [];
  for (let i = 0; i < steps; i++) {
    parts.push(tag("rect", {
      x, y: p.y + p.h - ((i + 1) * p.h) / steps,
      width: 10, height: p.h / steps + 0.5,
      fill: interpolateViridis(i / (steps - 1)),
    }));
  }
  parts.push(tag("rect", {
    x, y: p.y, width: 10, height: p.h, fill: "none", stroke: "#555", "stroke-width": 0.6,
  }));
  parts.push(text(x + 14, p.y + 8, fmtTick(hi), { "font-size": 9 }));
  parts.push(text(x + 14, p.y + p.h, fmtTick(lo), { "font-size": 9 }));
  if (label) {
    parts.push(text(x + 14, p.y + p.h / 2, label, { "font-size": 9 }));
  }
  return parts.join("\n");
}

export function document(width: number, height: number, inner: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    tag("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }),
    inner,
    "</svg>",
  ].join("\n");
}
