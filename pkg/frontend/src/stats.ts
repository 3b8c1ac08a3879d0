/**
 * Order statistics for the boxplots and mean/SD for the summary tables.
 *
 * Quartiles use the inclusive-median convention (Tukey hinges): the median
 * element, when n is odd, belongs to both halves.  The convention is named
 * in every sidecar so the numbers are reproducible by hand.
 */

export interface FiveNumber {
  n: number;
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
}

export const QUARTILE_CONVENTION =
  "quartiles: inclusive-median convention (odd-length halves keep the median)";

function medianOfSorted(sorted: number[]): number {
  const n = sorted.length;
  if (n === 0) throw new Error("median of an empty sample");
  const mid = Math.floor(n / 2);
  return n % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}

export function median(values: number[]): number {
  return medianOfSorted([...values].sort((a, b) => a - b));
}

export function fiveNumberSummary(values: number[]): FiveNumber {
  if (values.length === 0) throw new Error("summary of an empty sample");
  const sorted = [...values].sort((a, b) => a - b);
  const n = sorted.length;
  const half = Math.ceil(n / 2);
  const lower = sorted.slice(0, half);
  const upper = sorted.slice(n - half);
  return {
    n,
    min: sorted[0],
    q1: medianOfSorted(lower),
    median: medianOfSorted(sorted),
    q3: medianOfSorted(upper),
    max: sorted[n - 1],
  };
}

export function mean(values: number[]): number {
  if (values.length === 0) throw new Error("mean of an empty sample");
  return values.reduce((a, b) => a + b, 0) / values.length;
}

/** Sample standard deviation, divisor n - 1; zero for a single value. */
export function sampleSd(values: number[]): number {
  const n = values.length;
  if (n === 0) throw new Error("sd of an empty sample");
  if (n === 1) return 0;
  const m = mean(values);
  const ss = values.reduce((acc, v) => acc + (v - m) * (v - m), 0);
  return Math.sqrt(ss / (n - 1));
}
