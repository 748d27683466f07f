/** Guided-sampling data-misfit trace: per-step mean with a min/max band. */

import { join } from "node:path";
import { existsSync } from "node:fs";
import { readMatrix } from "../mpst.js";
import { FigureInputError, loadCsv, loadJson, requireFile, resolveSourceRun } from "../rundir.js";
import * as svg from "../svg.js";

export function render(runDir: string): string {
  const rows = loadCsv(requireFile(runDir, "misfit_summary.csv"));
  if (rows.length === 0) {
    throw new FigureInputError(`${runDir}/misfit_summary.csv is empty`);
  }
  const steps = rows.map((r) => r["step"] ?? 0);
  const mean = rows.map((r) => r["mean"] ?? 0);
  const lo = rows.map((r) => r["min"] ?? 0);
  const hi = rows.map((r) => r["max"] ?? 0);

  // noise floor gamma * sqrt(n_data) when the generating run is reachable
  let floor: number | undefined;
  try {
    const src = resolveSourceRun(runDir);
    const setup = loadJson<Record<string, unknown>>(join(src, "setup.json"));
    const obsPath = join(src, "observation.mpst");
    if (typeof setup["gamma"] === "number" && existsSync(obsPath)) {
      const nData = readMatrix(obsPath).shape.reduce((a, b) => a * b, 1);
      floor = (setup["gamma"] as number) * Math.sqrt(nData);
    }
  } catch {
    // decoration only; the trace renders without it
  }

  const p: svg.Panel = { x: 64, y: 34, w: 540, h: 300 };
  const yLo = Math.min(...lo.filter((v) => v > 0), floor ?? Infinity);
  const yHi = Math.max(...hi);
  const sx = svg.linScale(0, Math.max(...steps), p.x, p.x + p.w);
  const sy = svg.logScale(yLo / 1.5, yHi * 1.5, p.y + p.h, p.y);

  const band = [
    ...steps.map((s, i) => [sx(s), sy(Math.max(hi[i]!, yLo))] as [number, number]),
    ...steps.map((s, i) => [sx(s), sy(Math.max(lo[steps.length - 1 - i]!, yLo))] as [number, number]).reverse(),
  ];
  const parts: string[] = [
    svg.tag("polygon", {
      points: band.map(([x, y]) => `${svg.num(x)},${svg.num(y)}`).join(" "),
      fill: "#9ecae1", "fill-opacity": 0.45, stroke: "none",
    }),
    svg.polyline(
      steps.map((s, i) => [sx(s), sy(Math.max(mean[i]!, yLo))] as [number, number]),
      { stroke: "#08519c", "stroke-width": 1.6 },
    ),
  ];
  if (floor !== undefined) {
    parts.push(svg.tag("line", {
      x1: p.x, y1: sy(floor), x2: p.x + p.w, y2: sy(floor),
      stroke: "#777", "stroke-width": 1, "stroke-dasharray": "5 4",
    }));
    parts.push(svg.text(p.x + p.w - 4, sy(floor) - 5, "noise floor", {
      "text-anchor": "end", "font-size": 10, fill: "#555",
    }));
  }
  parts.push(svg.frame(
    p,
    { at: svg.ticks(0, Math.max(...steps)), pos: sx },
    { at: svg.logTicks(yLo / 1.5, yHi * 1.5), pos: sy },
    { title: "guided sampling data misfit", x: "step", y: "||y - F(x0)||" },
  ));
  parts.push(svg.text(p.x + 8, p.y + 16,
    `final mean ${svg.fmtTick(mean[mean.length - 1]!)} over ${rows.length} steps`,
    { "font-size": 10, fill: "#555" }));
  return svg.document(680, 390, parts.join("\n"));
}
