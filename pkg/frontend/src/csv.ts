/**
 * Strict RFC-4180 parsing for auctionlab study CSVs.
 *
 * Field values are kept as the exact strings found in the file; every
 * downstream consumer that reports values back (the point dump) must echo
 * them bit for bit rather than reformatting parsed numbers.
 */

export const CSV_COLUMNS = [
  "scenario_id",
  "n_queries",
  "n_advertisers",
  "quota_frac",
  "mu0",
  "mu1",
  "v",
  "p_x",
  "treatment_type",
  "scheme",
  "throttle_mode",
  "convention",
  "n_outer",
  "n_inner",
  "tau_star",
  "tau_star_se",
  "mean_est",
  "bias",
  "rel_bias",
  "rel_bias_se",
  "variance",
  "var_ratio",
  "seed",
] as const;

export type ColumnName = (typeof CSV_COLUMNS)[number];
export type StudyRecord = Record<ColumnName, string>;

export class CsvSchemaError extends Error {}

/** RFC-4180 tokenizer: quoted fields, escaped quotes, CRLF or LF endings. */
export function parseCsv(text: string): string[][] {
  const rows: string[][] = [];
  let field = "";
  let row: string[] = [];
  let inQuotes = false;
  let i = 0;
  const pushField = () => {
    row.push(field);
    field = "";
  };
  const pushRow = () => {
    pushField();
    rows.push(row);
    row = [];
  };
  while (i < text.length) {
    const ch = text[i]!;
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"' && field.length === 0) {
      inQuotes = true;
      i += 1;
    } else if (ch === ",") {
      pushField();
      i += 1;
    } else if (ch === "\r" && text[i + 1] === "\n") {
      pushRow();
      i += 2;
    } else if (ch === "\n") {
      pushRow();
      i += 1;
    } else {
      field += ch;
      i += 1;
    }
  }
  if (inQuotes) {
    throw new CsvSchemaError("unterminated quoted field");
  }
  if (field.length > 0 || row.length > 0) {
    pushRow();
  }
  return rows;
}

export function parseStudyCsv(text: string): StudyRecord[] {
  const rows = parseCsv(text);
  if (rows.length === 0) {
    throw new CsvSchemaError("empty file: no header row");
  }
  const header = rows[0]!;
  const missing = CSV_COLUMNS.filter((c) => !header.includes(c));
  const extra = header.filter((c) => !(CSV_COLUMNS as readonly string[]).includes(c));
  if (missing.length || extra.length) {
    const parts = [];
    if (missing.length) parts.push(`missing columns: ${missing.join(", ")}`);
    if (extra.length) parts.push(`unexpected columns: ${extra.join(", ")}`);
    throw new CsvSchemaError(`schema mismatch; ${parts.join("; ")}`);
  }
  const index = new Map(header.map((name, pos) => [name, pos] as const));
  const records: StudyRecord[] = [];
  for (const row of rows.slice(1)) {
    if (row.length === 1 && row[0] === "") continue;
    if (row.length !== header.length) {
      throw new CsvSchemaError(
        `row has ${row.length} fields, header has ${header.length}`,
      );
    }
    const record = {} as StudyRecord;
    for (const name of CSV_COLUMNS) {
      record[name] = row[index.get(name)!]!;
    }
    records.push(record);
  }
  if (records.length === 0) {
    throw new CsvSchemaError("no data rows after the header");
  }
  return records;
}
