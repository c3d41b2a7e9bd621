/**
 * Rendering entry point: read the aggregate CSV (read-only), build the
 * requested figure, write one SVG image. Identical input and spec produce
 * byte-identical output.
 */

import * as fs from "node:fs";

import { buildPanels } from "./figures.js";
import { PlotSpec, parseAggregateCsv, validatePlotSpec } from "./schema.js";
import { composeFigure } from "./svg.js";

export function renderToString(spec: PlotSpec): string {
  const text = fs.readFileSync(spec.input_csv, "utf-8");
  const rows = parseAggregateCsv(text);
  const style = spec.style ?? {};
  const { panels, defaultTitle } = buildPanels(spec.figure, rows, style);
  const width = style.width ?? 320 * panels.length;
  const height = style.height ?? 260;
  return composeFigure(panels, width, height, style.title ?? defaultTitle);
}

export function render(rawSpec: unknown): string {
  const spec = validatePlotSpec(rawSpec);
  const svg = renderToString(spec);
  fs.writeFileSync(spec.output, svg, "utf-8");
  return spec.output;
}
