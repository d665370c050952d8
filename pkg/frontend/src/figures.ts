/**
 * Faceted error-bar figures over study CSV rows.
 *
 * Facet rows are quota fractions, facet columns the treatment knob
 * (mean log bid for bid studies, covariate rate for throttling studies),
 * series the randomization scheme or throttle mode, and the x axis the
 * number of queries. Values are plotted exactly as found in the CSV; the
 * renderer never recomputes statistics.
 */
import type { StudyRecord } from "./csv.js";

export type Family = "bid_bias" | "var_ratio" | "quota_bias";

export interface FigureSpec {
  family: Family;
  title: string;
  treatmentType: "bid" | "quota";
  metric: "rel_bias" | "var_ratio";
  seMetric: "rel_bias_se" | "";
  facetColumn: "mu1" | "p_x";
  series: "scheme" | "throttle_mode";
  referenceLine: number | null;
  yLabel: string;
}

export const FIGURE_SPECS: Record<Family, FigureSpec> = {
  bid_bias: {
    family: "bid_bias",
    title: "Bid treatment: relative bias by randomization scheme",
    treatmentType: "bid",
    metric: "rel_bias",
    seMetric: "rel_bias_se",
    facetColumn: "mu1",
    series: "scheme",
    referenceLine: 0,
    yLabel: "relative bias",
  },
  var_ratio: {
    family: "var_ratio",
    title: "Bid treatment: pair/query variance ratio",
    treatmentType: "bid",
    metric: "var_ratio",
    seMetric: "",
    facetColumn: "mu1",
    series: "scheme",
    referenceLine: 1,
    yLabel: "variance ratio",
  },
  quota_bias: {
    family: "quota_bias",
    title: "Throttling treatment: relative bias by quota sharing",
    treatmentType: "quota",
    metric: "rel_bias",
    seMetric: "rel_bias_se",
    facetColumn: "p_x",
    series: "throttle_mode",
    referenceLine: 0,
    yLabel: "relative bias",
  },
};

/** One mark on a figure; every field carries the raw CSV string. */
export interface PlottedPoint {
  family: Family;
  quota_frac: string;
  facet: string;
  series: string;
  n_queries: string;
  value: string;
  se: string;
}

export class FigureDataError extends Error {}

export function extractPoints(records: StudyRecord[], spec: FigureSpec): PlottedPoint[] {
  const points: PlottedPoint[] = [];
  for (const record of records) {
    if (record.treatment_type !== spec.treatmentType) continue;
    const value = record[spec.metric];
    if (value === "") continue;
    points.push({
      family: spec.family,
      quota_frac: record.quota_frac,
      facet: record[spec.facetColumn],
      series: record[spec.series],
      n_queries: record.n_queries,
      value,
      se: spec.seMetric === "" ? "" : record[spec.seMetric],
    });
  }
  if (points.length === 0) {
    throw new FigureDataError(
      `no ${spec.treatmentType}-treatment rows with a ${spec.metric} value`,
    );
  }
  return points;
}

const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

const FACET_W = 190;
const FACET_H = 150;
const MARGIN = { top: 58, right: 24, bottom: 56, left: 64 };
const GAP = 14;

function fractionValue(text: string): number {
  const slash = text.indexOf("/");
  if (slash < 0) return Number(text);
  return Number(text.slice(0, slash)) / Number(text.slice(slash + 1));
}

function uniqueSorted(values: string[], key: (v: string) => number): string[] {
  return [...new Set(values)].sort((a, b) => key(a) - key(b));
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = (span / n) / step;
  const factor = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const unit = step * factor;
  const start = Math.ceil(lo / unit) * unit;
  const ticks: number[] = [];
  for (let v = start; v <= hi + unit * 1e-9; v += unit) {
    ticks.push(Math.abs(v) < unit * 1e-9 ? 0 : v);
  }
  return ticks;
}

function fmtTick(v: number): string {
  const text = v.toPrecision(3);
  return String(Number(text));
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

/** Render one figure family as a standalone SVG document. */
export function renderFigure(points: PlottedPoint[], spec: FigureSpec): string {
  const rows = uniqueSorted(points.map((p) => p.quota_frac), fractionValue);
  const cols = uniqueSorted(points.map((p) => p.facet), Number);
  const seriesNames = [...new Set(points.map((p) => p.series))].sort();
  const xValues = uniqueSorted(points.map((p) => p.n_queries), Number).map(Number);

  let lo = Infinity;
  let hi = -Infinity;
  for (const p of points) {
    const v = Number(p.value);
    const se = p.se === "" ? 0 : Number(p.se);
    lo = Math.min(lo, v - 2 * se);
    hi = Math.max(hi, v + 2 * se);
  }
  if (spec.referenceLine !== null) {
    lo = Math.min(lo, spec.referenceLine);
    hi = Math.max(hi, spec.referenceLine);
  }
  const pad = (hi - lo || 1) * 0.08;
  lo -= pad;
  hi += pad;

  const xLo = Math.min(...xValues);
  const xHi = Math.max(...xValues);
  const xSpan = xHi - xLo || 1;
  const xPos = (v: number, left: number) =>
    left + ((v - xLo) / xSpan) * (FACET_W - 36) + 18;
  const yPos = (v: number, top: number) =>
    top + FACET_H - ((v - lo) / (hi - lo)) * FACET_H;

  const width = MARGIN.left + cols.length * (FACET_W + GAP) - GAP + MARGIN.right;
  const height = MARGIN.top + rows.length * (FACET_H + GAP) - GAP + MARGIN.bottom;
  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
  );
  out.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  out.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14" ` +
      `font-weight="bold">${esc(spec.title)}</text>`,
  );

  seriesNames.forEach((name, s) => {
    const lx = MARGIN.left + s * 170;
    const color = SERIES_COLORS[s % SERIES_COLORS.length];
    out.push(`<circle cx="${lx}" cy="34" r="4" fill="${color}"/>`);
    out.push(`<text x="${lx + 9}" y="38" font-size="11">${esc(name)}</text>`);
  });

  const yTicks = niceTicks(lo, hi);
  rows.forEach((rowValue, r) => {
    const top = MARGIN.top + r * (FACET_H + GAP);
    out.push(
      `<text x="14" y="${top + FACET_H / 2}" font-size="11" text-anchor="middle" ` +
        `transform="rotate(-90 14 ${top + FACET_H / 2})">quota ${esc(rowValue)}</text>`,
    );
    for (const t of yTicks) {
      const y = yPos(t, top);
      out.push(
        `<text x="${MARGIN.left - 6}" y="${y + 3}" font-size="9" ` +
          `text-anchor="end">${fmtTick(t)}</text>`,
      );
    }
    cols.forEach((colValue, c) => {
      const left = MARGIN.left + c * (FACET_W + GAP);
      out.push(
        `<rect x="${left}" y="${top}" width="${FACET_W}" height="${FACET_H}" ` +
          `fill="none" stroke="#999" stroke-width="0.8"/>`,
      );
      if (r === 0) {
        out.push(
          `<text x="${left + FACET_W / 2}" y="${MARGIN.top - 8}" font-size="11" ` +
            `text-anchor="middle">${esc(spec.facetColumn)} = ${esc(colValue)}</text>`,
        );
      }
      for (const t of yTicks) {
        const y = yPos(t, top);
        out.push(
          `<line x1="${left}" y1="${y}" x2="${left + FACET_W}" y2="${y}" ` +
            `stroke="#eee" stroke-width="0.6"/>`,
        );
      }
      if (spec.referenceLine !== null) {
        const y = yPos(spec.referenceLine, top);
        out.push(
          `<line x1="${left}" y1="${y}" x2="${left + FACET_W}" y2="${y}" ` +
            `stroke="#555" stroke-width="0.8" stroke-dasharray="3,3"/>`,
        );
      }
      if (r === rows.length - 1) {
        for (const xv of xValues) {
          out.push(
            `<text x="${xPos(xv, left)}" y="${top + FACET_H + 14}" font-size="9" ` +
              `text-anchor="middle">${xv}</text>`,
          );
        }
      }
      const facetPoints = points.filter(
        (p) => p.quota_frac === rowValue && p.facet === colValue,
      );
      seriesNames.forEach((name, s) => {
        const color = SERIES_COLORS[s % SERIES_COLORS.length];
        // offset series horizontally so whiskers do not overlap
        const dx = (s - (seriesNames.length - 1) / 2) * 7;
        for (const p of facetPoints) {
          if (p.series !== name) continue;
          const x = xPos(Number(p.n_queries), left) + dx;
          const v = Number(p.value);
          const y = yPos(v, top);
          if (p.se !== "") {
            const se = Number(p.se);
            const yLo = yPos(v - 2 * se, top);
            const yHi = yPos(v + 2 * se, top);
            out.push(
              `<line x1="${x}" y1="${yLo}" x2="${x}" y2="${yHi}" ` +
                `stroke="${color}" stroke-width="1.1"/>`,
            );
            for (const yEnd of [yLo, yHi]) {
              out.push(
                `<line x1="${x - 3}" y1="${yEnd}" x2="${x + 3}" y2="${yEnd}" ` +
                  `stroke="${color}" stroke-width="1.1"/>`,
              );
            }
          }
          out.push(`<circle cx="${x}" cy="${y}" r="3" fill="${color}"/>`);
        }
      });
    });
  });
  out.push(
    `<text x="${width / 2}" y="${height - 12}" font-size="11" ` +
      `text-anchor="middle">number of queries</text>`,
  );
  out.push(
    `<text x="16" y="${height - 12}" font-size="10" fill="#666">` +
      `${esc(spec.yLabel)}; whiskers: value ± 2 se</text>`,
  );
  out.push("</svg>");
  return out.join("\n");
}
