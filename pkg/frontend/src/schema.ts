/**
 * Harness aggregate CSV schema: one row per (method, n, sweep_value) with
 * mean_gain, se_gain, mistake_rate, improvement_rate, mean_abstention, reps.
 * Parsing is strict: a header that does not carry every expected column is a
 * SchemaError naming the missing columns.
 */

import Papa from "papaparse";

export const AGGREGATE_COLUMNS = [
  "method",
  "n",
  "sweep_value",
  "mean_gain",
  "se_gain",
  "mistake_rate",
  "improvement_rate",
  "mean_abstention",
  "reps",
] as const;

export interface AggregateRow {
  method: string;
  n: number;
  sweep_value: number;
  mean_gain: number;
  se_gain: number;
  mistake_rate: number;
  improvement_rate: number;
  mean_abstention: number;
  reps: number;
}

export class SchemaError extends Error {}

export class InputError extends Error {}

export function parseAggregateCsv(text: string): AggregateRow[] {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`cannot parse aggregate CSV: ${first.message}`);
  }
  const header = parsed.meta.fields ?? [];
  const missing = AGGREGATE_COLUMNS.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `aggregate CSV is missing column(s): ${missing.join(", ")}`,
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError("aggregate CSV has no data rows");
  }
  return parsed.data.map((raw, i) => {
    const numeric = (column: string): number => {
      const value = Number(raw[column]);
      if (!Number.isFinite(value)) {
        throw new SchemaError(
          `row ${i + 1}: column ${column} is not numeric (got ${raw[column]!})`,
        );
      }
      return value;
    };
    return {
      method: raw.method ?? "",
      n: numeric("n"),
      sweep_value: numeric("sweep_value"),
      mean_gain: numeric("mean_gain"),
      se_gain: numeric("se_gain"),
      mistake_rate: numeric("mistake_rate"),
      improvement_rate: numeric("improvement_rate"),
      mean_abstention: numeric("mean_abstention"),
      reps: numeric("reps"),
    };
  });
}

export const FIGURES = [
  "noise_sweep",
  "gap_sweep",
  "abstention_panels",
  "rate_slopes",
  "robust_gap",
] as const;

export type FigureKind = (typeof FIGURES)[number];

export interface PlotStyle {
  width?: number;
  height?: number;
  title?: string;
  methods?: string[];
}

export interface PlotSpec {
  input_csv: string;
  figure: FigureKind;
  output: string;
  style?: PlotStyle;
}

export function validatePlotSpec(raw: unknown): PlotSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new InputError("plot spec must be a JSON object");
  }
  const spec = raw as Record<string, unknown>;
  for (const field of ["input_csv", "figure", "output"]) {
    if (typeof spec[field] !== "string" || spec[field] === "") {
      throw new InputError(`plot spec is missing the '${field}' field`);
    }
  }
  const figure = spec.figure as string;
  if (!(FIGURES as readonly string[]).includes(figure)) {
    throw new InputError(
      `unknown figure '${figure}'; expected one of ${FIGURES.join(", ")}`,
    );
  }
  const style = (spec.style ?? {}) as PlotStyle;
  if (style.methods !== undefined && !Array.isArray(style.methods)) {
    throw new InputError("style.methods must be an array of method names");
  }
  return {
    input_csv: spec.input_csv as string,
    figure: figure as FigureKind,
    output: spec.output as string,
    style,
  };
}

/** Rows for one method, sorted by the x key; methods sorted by name. */
export function groupByMethod(
  rows: AggregateRow[],
  xKey: "sweep_value" | "n",
  requested?: string[],
): Map<string, AggregateRow[]> {
  const present = new Map<string, AggregateRow[]>();
  for (const row of rows) {
    const bucket = present.get(row.method) ?? [];
    bucket.push(row);
    present.set(row.method, bucket);
  }
  let names = [...present.keys()].sort();
  if (requested !== undefined && requested.length > 0) {
    const absent = requested.filter((m) => !present.has(m));
    if (absent.length > 0) {
      throw new SchemaError(
        `requested method(s) not in the CSV: ${absent.join(", ")}`,
      );
    }
    names = requested;
  }
  const out = new Map<string, AggregateRow[]>();
  for (const name of names) {
    out.set(
      name,
      [...present.get(name)!].sort((a, b) => a[xKey] - b[xKey]),
    );
  }
  return out;
}
