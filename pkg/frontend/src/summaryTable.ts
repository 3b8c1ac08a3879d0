/**
 * "mean (SD)" summary tables from a report frame, three decimals, sample
 * SD with divisor n - 1, estimators in the conventional display order.
 */

import { ReportFrame, failuresFor, orderEstimators, valuesFor } from "./reportFrame";
import { mean, sampleSd } from "./stats";

export interface SummaryRow {
  estimator: string;
  n: number;
  mean: number | null;
  sd: number | null;
  failures: number;
}

export function summarize(frame: ReportFrame): SummaryRow[] {
  return orderEstimators(frame.estimators).map((estimator) => {
    const values = valuesFor(frame, estimator);
    return {
      estimator,
      n: values.length,
      mean: values.length ? mean(values) : null,
      sd: values.length ? sampleSd(values) : null,
      failures: failuresFor(frame, estimator),
    };
  });
}

const cell = (row: SummaryRow) =>
  row.mean === null ? "n/a" : `${row.mean.toFixed(3)} (${(row.sd as number).toFixed(3)})`;

export function renderMarkdownTable(frame: ReportFrame): string {
  const rows = summarize(frame);
  const lines = [
    "| estimator | mean ME% (SD) | replications | failures |",
    "| --- | --- | --- | --- |",
  ];
  for (const row of rows) {
    lines.push(`| ${row.estimator} | ${cell(row)} | ${row.n} | ${row.failures} |`);
  }
  return lines.join("\n") + "\n";
}

export function renderCsvTable(frame: ReportFrame): string {
  const rows = summarize(frame);
  const lines = ["estimator,mean_me_percent,sd_me_percent,replications,failures"];
  for (const row of rows) {
    const m = row.mean === null ? "" : row.mean.toFixed(3);
    const s = row.sd === null ? "" : row.sd.toFixed(3);
    lines.push(`${row.estimator},${m},${s},${row.n},${row.failures}`);
  }
  return lines.join("\n") + "\n";
}
