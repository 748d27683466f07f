#!/usr/bin/env node
/** render_figs <kind> --run <dir> --out <file> */

import { existsSync, mkdirSync, statSync, writeFileSync } from "node:fs";
import { dirname } from "node:path";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";
import { KINDS, renderFigure } from "./index.js";
import { FigureInputError } from "./rundir.js";

const USAGE = `usage: render_figs <kind> --run <dir> --out <file>

kinds: ${Object.keys(KINDS).join(", ")}`;

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        run: { type: "string" },
        out: { type: "string" },
        help: { type: "boolean", short: "h" },
      },
    });
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(USAGE);
    return 2;
  }
  if (parsed.values.help) {
    console.log(USAGE);
    return 0;
  }
  const kind = parsed.positionals[0];
  const { run, out } = parsed.values;
  if (!kind || !run || !out || parsed.positionals.length > 1) {
    console.error(USAGE);
    return 2;
  }
  if (!existsSync(run) || !statSync(run).isDirectory()) {
    console.error(`run directory ${run} does not exist`);
    return 1;
  }
  try {
    const markup = renderFigure(kind, run);
    mkdirSync(dirname(out), { recursive: true });
    writeFileSync(out, markup);
    console.log(`wrote ${kind} -> ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof FigureInputError) {
      console.error(`cannot render ${kind}: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
