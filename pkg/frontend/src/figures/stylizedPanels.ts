/** Posterior density panels across the noise-level sweep of a stylized run.
 *
 * One panel per noise level: 1-d problems show the normalized grid density
 * with training points as rug marks; 2-d problems show a density heatmap
 * with training points as markers.
 */

import { asRows, readMatrix } from "../mpst.js";
import { FigureInputError, loadCsv, loadSetup, requireFile } from "../rundir.js";
import * as svg from "../svg.js";

export function render(runDir: string): string {
  const setup = loadSetup(runDir);
  const sigmas = setup["sigmas"];
  if (!Array.isArray(sigmas) || sigmas.length === 0) {
    throw new FigureInputError(`${runDir}/setup.json has no noise-level sweep`);
  }
  const training = asRows(readMatrix(requireFile(runDir, "training.mpst")));
  const summary = loadCsv(requireFile(runDir, "stylized_summary.csv"));

  const pw = 240;
  const ph = 220;
  const gap = 64;
  const parts: string[] = [];
  for (let i = 0; i < sigmas.length; i++) {
    const axes = asRows(readMatrix(requireFile(runDir, `grid_axes_${i}.mpst`)));
    const density = readMatrix(requireFile(runDir, `grid_density_${i}.mpst`));
    const p: svg.Panel = { x: 56 + i * (pw + gap), y: 40, w: pw, h: ph };
    const tv = summary[i]?.["tv_linearized_grid"];
    const title = tv === undefined
      ? `sigma = ${sigmas[i]}`
      : `sigma = ${sigmas[i]}  (TV ${Number(tv).toFixed(3)})`;

    if (axes.length === 1) {
      const x = axes[0]!;
      const d = density.data;
      const peak = Math.max(...d);
      const sx = svg.linScale(x[0]!, x[x.length - 1]!, p.x, p.x + p.w);
      const sy = svg.linScale(0, 1.05, p.y + p.h, p.y);
      parts.push(svg.polyline(
        Array.from(d, (v, j) => [sx(x[j]!), sy(v / peak)] as [number, number]),
        { stroke: "#08519c", "stroke-width": 1.4 },
      ));
      for (const atom of training) {
        parts.push(svg.tag("line", {
          x1: sx(atom[0]!), y1: p.y + p.h, x2: sx(atom[0]!), y2: p.y + p.h - 12,
          stroke: "#d62728", "stroke-width": 1.6,
        }));
      }
      parts.push(svg.frame(
        p,
        { at: svg.ticks(x[0]!, x[x.length - 1]!), pos: sx },
        { at: [0, 0.5, 1], pos: sy },
        { title, x: "model", y: i === 0 ? "density / peak" : "" },
      ));
    } else if (axes.length === 2) {
      const rows = asRows(density);
      const hm = svg.heatmap(p, rows);
      parts.push(hm.markup);
      const sx = svg.linScale(axes[0]![0]!, axes[0]![axes[0]!.length - 1]!, p.x, p.x + p.w);
      // density rows follow the first axis top to bottom
      const sy = svg.linScale(axes[1]![0]!, axes[1]![axes[1]!.length - 1]!, p.y, p.y + p.h);
      for (const atom of training) {
        const cx = sx(atom[1]!);
        const cy = sy(atom[0]!);
        parts.push(svg.tag("path", {
          d: `M ${svg.num(cx - 4)} ${svg.num(cy - 4)} L ${svg.num(cx + 4)} ${svg.num(cy + 4)} ` +
            `M ${svg.num(cx - 4)} ${svg.num(cy + 4)} L ${svg.num(cx + 4)} ${svg.num(cy - 4)}`,
          stroke: "#ffffff", "stroke-width": 1.6, fill: "none",
        }));
      }
      parts.push(svg.tag("rect", {
        x: p.x, y: p.y, width: p.w, height: p.h,
        fill: "none", stroke: "#555", "stroke-width": 0.8,
      }));
      parts.push(svg.text(p.x + p.w / 2, p.y - 8, title, {
        "text-anchor": "middle", "font-size": 12,
      }));
    } else {
      throw new FigureInputError(`grid with ${axes.length} axes cannot be drawn as a panel`);
    }
  }
  const width = 56 + sigmas.length * (pw + gap);
  return svg.document(width, ph + 110, parts.join("\n"));
}
