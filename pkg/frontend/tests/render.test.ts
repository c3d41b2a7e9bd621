import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { render, renderToString } from "../src/render.js";
import { SchemaError, InputError, parseAggregateCsv, validatePlotSpec } from "../src/schema.js";

const FIXTURES = path.join(__dirname, "fixtures");
let tmp: string;

beforeEach(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "report-plots-"));
});

afterEach(() => {
  fs.rmSync(tmp, { recursive: true, force: true });
});

function spec(figure: string, csv: string, extra: object = {}) {
  return {
    input_csv: path.join(FIXTURES, csv),
    figure,
    output: path.join(tmp, `${figure}.svg`),
    ...extra,
  };
}

describe("real harness CSVs", () => {
  it("renders the three-panel noise sweep", () => {
    const out = render(spec("noise_sweep", "noise_sweep.csv"));
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toContain("mean true-value gain");
    expect(svg).toContain("mistake rate");
    expect(svg).toContain("improvement rate");
    for (const method of ["algo2", "safe_ewm", "hcpi_t", "hcpi_ci"]) {
      expect(svg).toContain(`>${method}</text>`);
    }
    expect(svg).toContain("<polygon"); // standard-error band
  });

  it("renders the three-panel gap sweep", () => {
    const out = render(spec("gap_sweep", "gap_sweep.csv"));
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toContain("baseline-optimal gap");
    expect(svg.match(/<polyline/g)!.length).toBeGreaterThanOrEqual(9); // 3 methods x 3 panels
  });

  it("renders the abstention panels", () => {
    const out = render(spec("abstention_panels", "abstention.csv"));
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toContain("win rate vs EWM");
    expect(svg).toContain("abstention rate");
  });

  it("renders log-log rate slopes with fitted slopes in the legend", () => {
    const out = render(spec("rate_slopes", "rate_check.csv"));
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toMatch(/algo1 \(slope -?\d+\.\d+\)/);
    expect(svg).toMatch(/algo1_coin \(slope -?\d+\.\d+\)/);
  });

  it("renders the robust-gap figure", () => {
    const out = render(spec("robust_gap", "robust_check.csv"));
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toContain("prop3 mean gap");
    expect(svg).toContain("prop3 max gap");
  });

  it("does not mutate the input CSV", () => {
    const src = path.join(FIXTURES, "noise_sweep.csv");
    const before = fs.readFileSync(src, "utf-8");
    render(spec("noise_sweep", "noise_sweep.csv"));
    expect(fs.readFileSync(src, "utf-8")).toBe(before);
  });

  it("is deterministic: identical input and spec give identical bytes", () => {
    const a = renderToString(validatePlotSpec(spec("noise_sweep", "noise_sweep.csv")));
    const b = renderToString(validatePlotSpec(spec("noise_sweep", "noise_sweep.csv")));
    expect(a).toBe(b);
  });
});

describe("minimal and malformed inputs", () => {
  const HEADER =
    "method,n,sweep_value,mean_gain,se_gain,mistake_rate,improvement_rate,mean_abstention,reps";

  it("renders a two-row CSV as one line with two points", () => {
    const csv = `${HEADER}\nalgo2,100,0.1,0.5,0.01,0,1,0.2,5\nalgo2,100,0.2,0.4,0.01,0,1,0.3,5\n`;
    const file = path.join(tmp, "tiny.csv");
    fs.writeFileSync(file, csv);
    const out = render({
      input_csv: file,
      figure: "abstention_panels",
      output: path.join(tmp, "tiny.svg"),
    });
    const svg = fs.readFileSync(out, "utf-8");
    const firstPanel = svg.split("win rate")[0];
    expect(firstPanel.match(/<polyline/g)!.length).toBe(1);
    expect(firstPanel.match(/<circle/g)!.length).toBe(2);
  });

  it("names missing columns on schema mismatch", () => {
    const bad = "method,n,sweep_value,se_gain\nalgo2,10,0.1,0.5\n";
    expect(() => parseAggregateCsv(bad)).toThrowError(
      /missing column\(s\): mean_gain, mistake_rate, improvement_rate, mean_abstention, reps/,
    );
  });

  it("names the missing method when a requested one is absent", () => {
    expect(() =>
      renderToString(
        validatePlotSpec(
          spec("noise_sweep", "noise_sweep.csv", { style: { methods: ["algo2", "mystery"] } }),
        ),
      ),
    ).toThrowError(/not in the CSV: mystery/);
  });

  it("rejects non-numeric cells with the column named", () => {
    const bad = `${HEADER}\nalgo2,10,0.1,abc,0,0,0,0,5\n`;
    expect(() => parseAggregateCsv(bad)).toThrowError(/column mean_gain is not numeric/);
  });

  it("rejects unknown figure kinds", () => {
    expect(() =>
      validatePlotSpec({ input_csv: "x.csv", figure: "sparkline", output: "y.svg" }),
    ).toThrowError(InputError);
  });

  it("rejects nonpositive regrets in the log-log figure", () => {
    const csv = `${HEADER}\nalgo1,100,0.05,0.0,0,0,0,0,5\nalgo1,200,0.05,-0.1,0,0,0,0,5\n`;
    const file = path.join(tmp, "bad_rate.csv");
    fs.writeFileSync(file, csv);
    expect(() =>
      renderToString(
        validatePlotSpec({ input_csv: file, figure: "rate_slopes", output: "o.svg" }),
      ),
    ).toThrowError(SchemaError);
  });
});
