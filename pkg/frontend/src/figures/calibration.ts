/** Per-coordinate posterior std against actual error, with 1x and 2x guides.
 *
 * Points far above the identity line are coordinates where the sampled
 * posterior claims much more spread than the realized error; the fraction
 * above the 2x guide is annotated.
 */

import { FigureInputError, loadCsv, requireFile } from "../rundir.js";
import * as svg from "../svg.js";

export function render(runDir: string): string {
  const rows = loadCsv(requireFile(runDir, "calibration.csv"));
  if (rows.length === 0) {
    throw new FigureInputError(`${runDir}/calibration.csv is empty`);
  }
  const err = rows.map((r) => r["abs_error"] ?? 0);
  const std = rows.map((r) => r["std"] ?? 0);
  const positive = [...err, ...std].filter((v) => v > 0);
  const lo = Math.min(...positive) / 2;
  const hi = Math.max(...positive) * 2;
  const clamp = (v: number) => Math.max(v, lo);

  const p: svg.Panel = { x: 64, y: 34, w: 360, h: 360 };
  const sx = svg.logScale(lo, hi, p.x, p.x + p.w);
  const sy = svg.logScale(lo, hi, p.y + p.h, p.y);

  const parts: string[] = [];
  for (const [factor, dash, label] of [
    [1, "", "std = error"],
    [2, "5 4", "std = 2 error"],
  ] as Array<[number, string, string]>) {
    const a = Math.max(lo, lo / factor);
    const b = Math.min(hi, hi / factor);
    parts.push(svg.tag("line", {
      x1: sx(a), y1: sy(a * factor), x2: sx(b), y2: sy(b * factor),
      stroke: "#888", "stroke-width": 1,
      ...(dash ? { "stroke-dasharray": dash } : {}),
    }));
    parts.push(svg.text(sx(b) - 2, sy(b * factor) - 4, label, {
      "text-anchor": "end", "font-size": 9, fill: "#666",
    }));
  }
  for (let i = 0; i < err.length; i++) {
    parts.push(svg.tag("circle", {
      cx: sx(clamp(err[i]!)), cy: sy(clamp(std[i]!)), r: 3,
      fill: "#2171b5", "fill-opacity": 0.65, stroke: "none",
    }));
  }
  const overFrac = std.filter((s, i) => s > 2 * (err[i] ?? 0)).length / std.length;
  parts.push(svg.frame(
    p,
    { at: svg.logTicks(lo, hi), pos: sx },
    { at: svg.logTicks(lo, hi), pos: sy },
    {
      title: "posterior spread vs realized error",
      x: "|posterior mean - truth| per coordinate",
      y: "posterior std per coordinate",
    },
  ));
  parts.push(svg.text(p.x + 8, p.y + 16,
    `${(100 * overFrac).toFixed(0)}% of ${std.length} coordinates above the 2x guide`,
    { "font-size": 10, fill: "#555" }));
  return svg.document(470, 450, parts.join("\n"));
}
