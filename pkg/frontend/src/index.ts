import { render as calibration } from "./figures/calibration.js";
import { render as dpsLoss } from "./figures/dpsLoss.js";
import { render as klScatter } from "./figures/klScatter.js";
import { render as meanStdMaps } from "./figures/meanStdMaps.js";
import { render as pairGallery } from "./figures/pairGallery.js";
import { render as stylizedPanels } from "./figures/stylizedPanels.js";
import { FigureInputError } from "./rundir.js";

export { FigureInputError } from "./rundir.js";
export { readMatrix, asRows } from "./mpst.js";

export const KINDS: Record<string, (runDir: string) => string> = {
  "stylized-panels": stylizedPanels,
  "dps-loss": dpsLoss,
  "pair-gallery": pairGallery,
  "mean-std-maps": meanStdMaps,
  "kl-scatter": klScatter,
  calibration,
};

export function renderFigure(kind: string, runDir: string): string {
  const renderer = KINDS[kind];
  if (!renderer) {
    throw new FigureInputError(
      `unknown figure kind ${JSON.stringify(kind)}; expected one of ${Object.keys(KINDS).join(", ")}`,
    );
  }
  return renderer(runDir);
}
