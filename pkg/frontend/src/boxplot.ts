/**
 * SVG boxplot rendering plus the sidecar stats file.
 *
 * One box per estimator in the conventional order (GQDA, W, MVE, MCD, M,
 * S, SD).  Whiskers reach the most extreme values within 1.5 IQR of the
 * box; points beyond that are drawn individually.  The output is a
 * standalone SVG document (vector image, no rasterizer needed).
 */

import {
  ReportFrame,
  failuresFor,
  orderEstimators,
  totalFailures,
  valuesFor,
} from "./reportFrame";
import { FiveNumber, QUARTILE_CONVENTION, fiveNumberSummary } from "./stats";

export interface BoxplotOptions {
  title?: string;
  width?: number;
  height?: number;
}

interface BoxData {
  estimator: string;
  stats: FiveNumber;
  loWhisker: number;
  hiWhisker: number;
  outliers: number[];
  failures: number;
}

function boxData(frame: ReportFrame): BoxData[] {
  const boxes: BoxData[] = [];
  for (const estimator of orderEstimators(frame.estimators)) {
    const values = valuesFor(frame, estimator);
    if (values.length === 0) continue;
    const stats = fiveNumberSummary(values);
    const iqr = stats.q3 - stats.q1;
    const loFence = stats.q1 - 1.5 * iqr;
    const hiFence = stats.q3 + 1.5 * iqr;
    const inside = values.filter((v) => v >= loFence && v <= hiFence);
    boxes.push({
      estimator,
      stats,
      loWhisker: Math.min(...inside),
      hiWhisker: Math.max(...inside),
      outliers: values.filter((v) => v < loFence || v > hiFence),
      failures: failuresFor(frame, estimator),
    });
  }
  if (boxes.length < 2) {
    throw new Error("need at least two estimators with successful rows to draw a boxplot");
  }
  return boxes;
}

const esc = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");

export function renderBoxplotSvg(frame: ReportFrame, options: BoxplotOptions = {}): string {
  const boxes = boxData(frame);
  const width = options.width ?? 720;
  const height = options.height ?? 480;
  const margin = { top: 48, right: 24, bottom: 64, left: 64 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  let lo = Math.min(...boxes.map((b) => Math.min(b.loWhisker, ...b.outliers)));
  let hi = Math.max(...boxes.map((b) => Math.max(b.hiWhisker, ...b.outliers)));
  if (hi === lo) {
    lo -= 1;
    hi += 1;
  }
  const pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const y = (v: number) => margin.top + plotH - ((v - lo) / (hi - lo)) * plotH;
  const slot = plotW / boxes.length;
  const boxW = Math.min(60, slot * 0.5);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  if (options.title) {
    parts.push(
      `<text x="${width / 2}" y="24" text-anchor="middle" font-size="16">` +
        `${esc(options.title)}</text>`,
    );
  }

  // y axis with ~6 ticks
  const ticks = 6;
  for (let t = 0; t <= ticks; t++) {
    const v = lo + ((hi - lo) * t) / ticks;
    const yy = y(v);
    parts.push(
      `<line x1="${margin.left}" y1="${yy}" x2="${width - margin.right}" y2="${yy}" ` +
        `stroke="#ddd" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${margin.left - 8}" y="${yy + 4}" text-anchor="end">${v.toFixed(1)}</text>`,
    );
  }
  parts.push(
    `<text x="16" y="${margin.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${margin.top + plotH / 2})">ME%</text>`,
  );

  boxes.forEach((box, i) => {
    const cx = margin.left + slot * (i + 0.5);
    const left = cx - boxW / 2;
    const s = box.stats;
    parts.push(`<g stroke="black" fill="none" stroke-width="1.5">`);
    parts.push(`<line x1="${cx}" y1="${y(box.loWhisker)}" x2="${cx}" y2="${y(s.q1)}"/>`);
    parts.push(`<line x1="${cx}" y1="${y(s.q3)}" x2="${cx}" y2="${y(box.hiWhisker)}"/>`);
    parts.push(
      `<line x1="${cx - boxW / 4}" y1="${y(box.loWhisker)}" x2="${cx + boxW / 4}" ` +
        `y2="${y(box.loWhisker)}"/>`,
    );
    parts.push(
      `<line x1="${cx - boxW / 4}" y1="${y(box.hiWhisker)}" x2="${cx + boxW / 4}" ` +
        `y2="${y(box.hiWhisker)}"/>`,
    );
    parts.push(
      `<rect x="${left}" y="${y(s.q3)}" width="${boxW}" ` +
        `height="${Math.max(y(s.q1) - y(s.q3), 0.5)}" fill="#cfe3f5"/>`,
    );
    parts.push(
      `<line x1="${left}" y1="${y(s.median)}" x2="${left + boxW}" y2="${y(s.median)}" ` +
        `stroke-width="2.5"/>`,
    );
    parts.push(`</g>`);
    for (const v of box.outliers) {
      parts.push(`<circle cx="${cx}" cy="${y(v)}" r="2.5" fill="black"/>`);
    }
    parts.push(
      `<text x="${cx}" y="${height - margin.bottom + 20}" text-anchor="middle">` +
        `${esc(box.estimator)}</text>`,
    );
  });

  const failed = totalFailures(frame);
  const caption =
    failed > 0
      ? `${failed} failed replication${failed === 1 ? "" : "s"} excluded`
      : "no failed replications";
  parts.push(
    `<text x="${width / 2}" y="${height - 12}" text-anchor="middle" fill="#555">` +
      `${esc(caption)}</text>`,
  );
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function renderSidecar(frame: ReportFrame): string {
  const boxes = boxData(frame);
  const lines: string[] = [QUARTILE_CONVENTION];
  const failed = totalFailures(frame);
  lines.push(`excluded failed replications: ${failed}`);
  for (const box of boxes) {
    const s = box.stats;
    lines.push(
      `${box.estimator}: n=${s.n} median=${s.median} q1=${s.q1} q3=${s.q3} ` +
        `min=${s.min} max=${s.max} failures=${box.failures}`,
    );
  }
  return lines.join("\n") + "\n";
}
