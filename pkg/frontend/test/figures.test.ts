import { execFileSync } from "node:child_process";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { describe, expect, it } from "vitest";

import { CSV_COLUMNS, CsvSchemaError, parseCsv, parseStudyCsv } from "../src/csv.js";
import {
  FIGURE_SPECS,
  FigureDataError,
  extractPoints,
  renderFigure,
  type Family,
  type PlottedPoint,
} from "../src/figures.js";
import { main, parseArgs, runFigures } from "../src/cli.js";

const FIXTURE = resolve(__dirname, "fixtures", "golden.csv");
const goldenText = readFileSync(FIXTURE, "utf8");
const FAMILIES = Object.keys(FIGURE_SPECS) as Family[];

function tempDir(): string {
  return mkdtempSync(join(tmpdir(), "figures-"));
}

describe("csv parsing", () => {
  it("round-trips the golden file preserving raw field strings", () => {
    const records = parseStudyCsv(goldenText);
    expect(records.length).toBe(72);
    const raw = parseCsv(goldenText);
    expect(raw[0]).toEqual([...CSV_COLUMNS]);
    expect(records[0]!.tau_star).toBe(raw[1]![14]);
  });

  it("parses quoted fields with embedded separators", () => {
    const rows = parseCsv('a,"b,c","d""e"\r\n1,2,3\r\n');
    expect(rows).toEqual([
      ["a", "b,c", 'd"e'],
      ["1", "2", "3"],
    ]);
  });

  it("rejects a header with missing columns by name", () => {
    const broken = goldenText.replace("tau_star_se", "tau_star_sd");
    expect(() => parseStudyCsv(broken)).toThrowError(/missing columns: tau_star_se/);
  });

  it("rejects a header-only file", () => {
    const headerOnly = goldenText.split(/\r?\n/)[0]! + "\r\n";
    expect(() => parseStudyCsv(headerOnly)).toThrowError(CsvSchemaError);
  });
});

describe("point extraction", () => {
  it("keeps CSV field strings bit-identical", () => {
    const records = parseStudyCsv(goldenText);
    for (const family of FAMILIES) {
      const spec = FIGURE_SPECS[family];
      const points = extractPoints(records, spec);
      expect(points.length).toBeGreaterThan(0);
      for (const point of points) {
        const match = records.find(
          (r) =>
            r.treatment_type === spec.treatmentType &&
            r.quota_frac === point.quota_frac &&
            r[spec.facetColumn] === point.facet &&
            r[spec.series] === point.series &&
            r.n_queries === point.n_queries,
        );
        expect(match).toBeDefined();
        expect(point.value).toBe(match![spec.metric]);
        if (spec.seMetric !== "") {
          expect(point.se).toBe(match![spec.seMetric]);
        }
      }
    }
  });

  it("var_ratio points come only from rows carrying a ratio", () => {
    const records = parseStudyCsv(goldenText);
    const points = extractPoints(records, FIGURE_SPECS.var_ratio);
    const withRatio = records.filter(
      (r) => r.treatment_type === "bid" && r.var_ratio !== "",
    );
    expect(points.length).toBe(withRatio.length);
  });

  it("fails loudly when a family has no rows", () => {
    const records = parseStudyCsv(goldenText).filter(
      (r) => r.treatment_type === "bid",
    );
    expect(() => extractPoints(records, FIGURE_SPECS.quota_bias)).toThrowError(
      FigureDataError,
    );
  });
});

describe("rendering", () => {
  it("renders every family deterministically", () => {
    const records = parseStudyCsv(goldenText);
    for (const family of FAMILIES) {
      const spec = FIGURE_SPECS[family];
      const points = extractPoints(records, spec);
      const svg = renderFigure(points, spec);
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.endsWith("</svg>")).toBe(true);
      expect(svg).toContain(spec.title);
      expect(renderFigure(points, spec)).toBe(svg);
    }
  });

  it("draws the unit reference line on variance-ratio charts", () => {
    const records = parseStudyCsv(goldenText);
    const svg = renderFigure(
      extractPoints(records, FIGURE_SPECS.var_ratio),
      FIGURE_SPECS.var_ratio,
    );
    expect(svg).toContain("stroke-dasharray");
  });
});

describe("cli", () => {
  it("writes all three families plus a point dump from the golden CSV", () => {
    const out = tempDir();
    const dump = join(out, "points.json");
    const code = main([FIXTURE, "--family", "all", "--out", out, "--dump-points", dump]);
    expect(code).toBe(0);
    for (const family of FAMILIES) {
      const path = join(out, `${family}.svg`);
      expect(existsSync(path)).toBe(true);
      expect(readFileSync(path, "utf8")).toContain("</svg>");
    }
    const points = JSON.parse(readFileSync(dump, "utf8")) as PlottedPoint[];
    const records = parseStudyCsv(goldenText);
    expect(points.length).toBeGreaterThan(0);
    for (const point of points) {
      const spec = FIGURE_SPECS[point.family];
      const match = records.find(
        (r) =>
          r.treatment_type === spec.treatmentType &&
          r.quota_frac === point.quota_frac &&
          r[spec.facetColumn] === point.facet &&
          r[spec.series] === point.series &&
          r.n_queries === point.n_queries,
      );
      expect(match).toBeDefined();
      expect(point.value).toBe(match![spec.metric]);
    }
  });

  it("errors on a header-only CSV and writes nothing", () => {
    const out = tempDir();
    const headerOnly = join(out, "empty.csv");
    writeFileSync(headerOnly, goldenText.split(/\r?\n/)[0]! + "\r\n");
    const code = main([headerOnly, "--family", "bid_bias", "--out", join(out, "figs")]);
    expect(code).toBe(2);
    expect(existsSync(join(out, "figs", "bid_bias.svg"))).toBe(false);
  });

  it("rejects unknown families and flags", () => {
    expect(() => parseArgs(["x.csv", "--family", "bogus", "--out", "d"])).toThrow();
    expect(() => parseArgs(["x.csv", "--nope"])).toThrow();
  });

  it("runs as a node executable after build", () => {
    const out = tempDir();
    const dist = resolve(__dirname, "..", "dist", "cli.js");
    if (!existsSync(dist)) {
      return; // build output not present; covered by the API tests above
    }
    const stdout = execFileSync(
      process.execPath,
      [dist, FIXTURE, "--family", "quota_bias", "--out", out],
      { encoding: "utf8" },
    );
    expect(stdout).toContain("quota_bias.svg");
    expect(existsSync(join(out, "quota_bias.svg"))).toBe(true);
  });
});
