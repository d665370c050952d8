/**
 * figures <csv> --family bid_bias|var_ratio|quota_bias|all --out DIR
 *               [--dump-points FILE]
 *
 * Writes one SVG per requested figure family. --dump-points writes the
 * plotted points as JSON carrying the raw CSV field strings, so a byte
 * comparison against the CSV is possible.
 */
import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { CsvSchemaError, parseStudyCsv } from "./csv.js";
import {
  FIGURE_SPECS,
  FigureDataError,
  extractPoints,
  renderFigure,
  type Family,
  type PlottedPoint,
} from "./figures.js";

interface CliArgs {
  csvPath: string;
  families: Family[];
  outDir: string;
  dumpPath: string | null;
}

export function parseArgs(argv: string[]): CliArgs {
  let csvPath: string | null = null;
  let family: string | null = null;
  let outDir: string | null = null;
  let dumpPath: string | null = null;
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i]!;
    if (arg === "--family") {
      family = argv[++i] ?? null;
    } else if (arg === "--out") {
      outDir = argv[++i] ?? null;
    } else if (arg === "--dump-points") {
      dumpPath = argv[++i] ?? null;
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown flag ${arg}`);
    } else if (csvPath === null) {
      csvPath = arg;
    } else {
      throw new Error(`unexpected argument ${arg}`);
    }
  }
  if (!csvPath || !family || !outDir) {
    throw new Error(
      "usage: figures <csv> --family bid_bias|var_ratio|quota_bias|all --out DIR " +
        "[--dump-points FILE]",
    );
  }
  const known = Object.keys(FIGURE_SPECS) as Family[];
  const families =
    family === "all" ? known : known.filter((f) => f === family);
  if (families.length === 0) {
    throw new Error(
      `unknown family ${family}; expected one of ${known.join(", ")} or all`,
    );
  }
  return { csvPath, families, outDir, dumpPath };
}

export function runFigures(args: CliArgs): string[] {
  const text = readFileSync(args.csvPath, "utf8");
  const records = parseStudyCsv(text);
  const written: string[] = [];
  const dumped: PlottedPoint[] = [];
  const rendered: { family: Family; svg: string }[] = [];
  for (const family of args.families) {
    const spec = FIGURE_SPECS[family];
    const points = extractPoints(records, spec);
    rendered.push({ family, svg: renderFigure(points, spec) });
    dumped.push(...points);
  }
  mkdirSync(args.outDir, { recursive: true });
  for (const { family, svg } of rendered) {
    const path = join(args.outDir, `${family}.svg`);
    writeFileSync(path, svg);
    written.push(path);
  }
  if (args.dumpPath) {
    writeFileSync(args.dumpPath, JSON.stringify(dumped, null, 2));
  }
  return written;
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const written = runFigures(args);
    for (const path of written) {
      console.log(`wrote ${path}`);
    }
    return 0;
  } catch (err) {
    if (err instanceof CsvSchemaError || err instanceof FigureDataError) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

const isDirectRun =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (isDirectRun) {
  process.exit(main(process.argv.slice(2)));
}
