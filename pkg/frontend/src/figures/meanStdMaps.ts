/** Posterior mean and standard-deviation fields, side by side. */

import { join } from "node:path";
import { existsSync } from "node:fs";
import { asRows, readMatrix } from "../mpst.js";
import { loadJson, requireFile } from "../rundir.js";
import * as svg from "../svg.js";

export function render(runDir: string): string {
  const mean = asRows(readMatrix(requireFile(runDir, "mean_field.mpst")));
  const std = asRows(readMatrix(requireFile(runDir, "std_field.mpst")));

  let subtitle = "";
  const summaryPath = join(runDir, "summary.json");
  if (existsSync(summaryPath)) {
    const summary = loadJson<Record<string, number>>(summaryPath);
    if (typeof summary["memorization_rate"] === "number") {
      subtitle = `${summary["n_samples"]} samples, memorization rate ${
        summary["memorization_rate"].toFixed(3)}`;
    }
  }

  const size = 280;
  const panels: Array<[string, Float64Array[], svg.Panel]> = [
    ["posterior mean", mean, { x: 56, y: 46, w: size, h: size }],
    ["posterior std", std, { x: 56 + size + 74, y: 46, w: size, h: size }],
  ];
  const parts: string[] = [];
  for (const [title, rows, p] of panels) {
    const hm = svg.heatmap(p, rows);
    parts.push(hm.markup);
    parts.push(svg.colorbar(p, hm.lo, hm.hi));
    parts.push(svg.tag("rect", {
      x: p.x, y: p.y, width: p.w, height: p.h,
      fill: "none", stroke: "#555", "stroke-width": 0.8,
    }));
    parts.push(svg.text(p.x + p.w / 2, p.y - 8, title, {
      "text-anchor": "middle", "font-size": 12,
    }));
    parts.push(svg.text(p.x + p.w / 2, p.y + p.h + 16, "x", { "text-anchor": "middle" }));
    parts.push(svg.text(p.x - 10, p.y + p.h / 2, "z", { "text-anchor": "middle" }));
  }
  if (subtitle) {
    parts.push(svg.text(56, 20, subtitle, { "font-size": 11, fill: "#555" }));
  }
  return svg.document(56 + 2 * size + 74 + 56, size + 80, parts.join("\n"));
}
