import { describe, expect, it } from "vitest";

import { parseReport } from "../src/reportFrame";
import { renderCsvTable, renderMarkdownTable, summarize } from "../src/summaryTable";

const THREE =
  "estimator,replication,me_percent,c_star,failed\n" +
  "SD,0,6,1,0\nSD,1,7,1,0\nSD,2,8,1,0\n" +
  "GQDA,0,10,1,0\nGQDA,1,10,1,0\n" +
  "MCD,0,4,0.5,0\nMCD,1,,,1\n";

describe("summarize", () => {
  it("computes mean and sample SD with divisor n-1", () => {
    const rows = summarize(parseReport(THREE));
    const sd = rows.find((r) => r.estimator === "SD")!;
    expect(sd.mean).toBe(7);
    expect(sd.sd).toBeCloseTo(1.0, 12);
    const gqda = rows.find((r) => r.estimator === "GQDA")!;
    expect(gqda.sd).toBe(0);
    const mcd = rows.find((r) => r.estimator === "MCD")!;
    expect(mcd.failures).toBe(1);
    expect(mcd.n).toBe(1);
  });

  it("orders rows by the fixed estimator convention", () => {
    const rows = summarize(parseReport(THREE));
    expect(rows.map((r) => r.estimator)).toEqual(["GQDA", "MCD", "SD"]);
  });
});

describe("table rendering", () => {
  it("formats mean (SD) with three decimals", () => {
    const md = renderMarkdownTable(parseReport(THREE));
    expect(md).toContain("| SD | 7.000 (1.000) | 3 | 0 |");
    expect(md).toContain("| GQDA | 10.000 (0.000) | 2 | 0 |");
    expect(md).toContain("| MCD | 4.000 (0.000) | 1 | 1 |");
  });

  it("emits the CSV flavor with the same numbers", () => {
    const csv = renderCsvTable(parseReport(THREE));
    const lines = csv.trim().split("\n");
    expect(lines[0]).toBe("estimator,mean_me_percent,sd_me_percent,replications,failures");
    expect(lines[1]).toBe("GQDA,10.000,0.000,2,0");
    expect(lines[3]).toBe("SD,7.000,1.000,3,0");
  });
});
