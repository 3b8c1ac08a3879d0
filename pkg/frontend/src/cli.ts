#!/usr/bin/env node
/**
 * gqda-report: render figures and tables from benchmark report CSVs.
 *
 *   gqda-report boxplot --input report.csv --out figure.svg [--title "..."]
 *   gqda-report summary --input report.csv --out table.md [--format md|csv]
 *
 * The boxplot writes a sidecar stats file (figure.stats.txt) next to the
 * image.  Exit codes: 0 success, 2 usage error, 3 schema/data error.
 */

import * as fs from "fs";
import * as path from "path";

import { renderBoxplotSvg, renderSidecar } from "./boxplot";
import { SchemaError, parseReport } from "./reportFrame";
import { renderCsvTable, renderMarkdownTable } from "./summaryTable";

interface Args {
  command: string;
  input?: string;
  out?: string;
  title?: string;
  format: string;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { command: argv[0] ?? "", format: "md" };
  for (let i = 1; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new UsageError(`missing value for ${flag}`);
      return argv[++i];
    };
    switch (flag) {
      case "--input":
        args.input = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--title":
        args.title = next();
        break;
      case "--format":
        args.format = next();
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  return args;
}

class UsageError extends Error {}

export function sidecarPath(imagePath: string): string {
  const parsed = path.parse(imagePath);
  return path.join(parsed.dir, `${parsed.name}.stats.txt`);
}

export function run(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
    if (!["boxplot", "summary"].includes(args.command)) {
      throw new UsageError("expected a command: boxplot | summary");
    }
    if (!args.input || !args.out) {
      throw new UsageError("--input and --out are required");
    }
    if (!["md", "csv"].includes(args.format)) {
      throw new UsageError("--format must be md or csv");
    }
  } catch (err) {
    if (err instanceof UsageError) {
      process.stderr.write(`error: usage: ${err.message}\n`);
      return 2;
    }
    throw err;
  }

  try {
    const text = fs.readFileSync(args.input, "utf8");
    const frame = parseReport(text);
    if (args.command === "boxplot") {
      const svg = renderBoxplotSvg(frame, { title: args.title });
      fs.writeFileSync(args.out, svg);
      fs.writeFileSync(sidecarPath(args.out), renderSidecar(frame));
      process.stdout.write(`wrote ${args.out} and ${sidecarPath(args.out)}\n`);
    } else {
      const table = args.format === "csv" ? renderCsvTable(frame) : renderMarkdownTable(frame);
      fs.writeFileSync(args.out, table);
      process.stdout.write(table);
    }
    return 0;
  } catch (err) {
    const kind = err instanceof SchemaError ? "schema" : "data";
    process.stderr.write(`error: ${kind}: ${(err as Error).message}\n`);
    return 3;
  }
}

if (require.main === module) {
  process.exit(run(process.argv.slice(2)));
}
