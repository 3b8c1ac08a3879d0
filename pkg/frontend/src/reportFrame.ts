/**
 * Parsing and validation of benchmark report CSVs.
 *
 * The schema is fixed by the producer:
 *   estimator,replication,me_percent,c_star,failed[,c_test,me_percent_at_c_test]
 * Failed rows carry empty numeric fields and failed=1; they are excluded
 * from plots but counted so captions can mention them.
 */

export interface ReportRow {
  estimator: string;
  replication: number;
  mePercent: number | null;
  cStar: number | null;
  failed: boolean;
}

export interface ReportFrame {
  rows: ReportRow[];
  /** Estimator labels in first-appearance order. */
  estimators: string[];
}

export class SchemaError extends Error {}

const REQUIRED_HEADER = ["estimator", "replication", "me_percent", "c_star", "failed"];

/** The display order used throughout: classical first, then the robust variants. */
export const ESTIMATOR_ORDER = ["GQDA", "W", "MVE", "MCD", "M", "S", "SD"];

/** Known labels ordered by convention; anything else keeps appearance order at the end. */
export function orderEstimators(labels: string[]): string[] {
  const known = ESTIMATOR_ORDER.filter((l) => labels.includes(l));
  const unknown = labels.filter((l) => !ESTIMATOR_ORDER.includes(l));
  return [...known, ...unknown];
}

function splitCsvLine(line: string): string[] {
  // Minimal RFC-4180 field splitting: quoted fields may contain commas
  // and doubled quotes.  The producer never emits quotes, but be lenient.
  const fields: string[] = [];
  let current = "";
  let inQuotes = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (inQuotes) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          current += '"';
          i++;
        } else {
          inQuotes = false;
        }
      } else {
        current += ch;
      }
    } else if (ch === '"') {
      inQuotes = true;
    } else if (ch === ",") {
      fields.push(current);
      current = "";
    } else {
      current += ch;
    }
  }
  fields.push(current);
  return fields;
}

function parseOptionalNumber(text: string, line: number, column: string): number | null {
  if (text === "") return null;
  const value = Number(text);
  if (!Number.isFinite(value)) {
    throw new SchemaError(`line ${line}: ${column} is not a number: ${JSON.stringify(text)}`);
  }
  return value;
}

export function parseReport(text: string): ReportFrame {
  const lines = text.split(/\r?\n/).filter((l) => l.trim() !== "");
  if (lines.length === 0) {
    throw new SchemaError("report CSV is empty");
  }
  const header = splitCsvLine(lines[0]);
  for (let i = 0; i < REQUIRED_HEADER.length; i++) {
    if (header[i] !== REQUIRED_HEADER[i]) {
      throw new SchemaError(
        `unexpected header: expected ${REQUIRED_HEADER.join(",")}..., got ${lines[0]}`,
      );
    }
  }
  const rows: ReportRow[] = [];
  const estimators: string[] = [];
  for (let i = 1; i < lines.length; i++) {
    const fields = splitCsvLine(lines[i]);
    if (fields.length < REQUIRED_HEADER.length) {
      throw new SchemaError(`line ${i + 1}: expected at least 5 fields, got ${fields.length}`);
    }
    const replication = Number(fields[1]);
    if (!Number.isInteger(replication)) {
      throw new SchemaError(`line ${i + 1}: replication is not an integer: ${fields[1]}`);
    }
    const failedField = fields[4];
    if (failedField !== "0" && failedField !== "1") {
      throw new SchemaError(`line ${i + 1}: failed must be 0 or 1, got ${failedField}`);
    }
    const row: ReportRow = {
      estimator: fields[0],
      replication,
      mePercent: parseOptionalNumber(fields[2], i + 1, "me_percent"),
      cStar: parseOptionalNumber(fields[3], i + 1, "c_star"),
      failed: failedField === "1",
    };
    if (!row.failed && row.mePercent === null) {
      throw new SchemaError(`line ${i + 1}: non-failed row without me_percent`);
    }
    rows.push(row);
    if (!estimators.includes(row.estimator)) {
      estimators.push(row.estimator);
    }
  }
  if (rows.length === 0) {
    throw new SchemaError("report CSV has a header but no rows");
  }
  return { rows, estimators };
}

export function valuesFor(frame: ReportFrame, estimator: string): number[] {
  return frame.rows
    .filter((r) => r.estimator === estimator && !r.failed && r.mePercent !== null)
    .map((r) => r.mePercent as number);
}

export function failuresFor(frame: ReportFrame, estimator: string): number {
  return frame.rows.filter((r) => r.estimator === estimator && r.failed).length;
}

export function totalFailures(frame: ReportFrame): number {
  return frame.rows.filter((r) => r.failed).length;
}
