/**
 * Figure definitions: map aggregate rows to panels.
 *
 * - noise_sweep / gap_sweep: three panels (mean true-value gain with a
 *   standard-error band, mistake rate, improvement rate) against the swept
 *   parameter, one line per method.
 * - abstention_panels: mean value difference against EWM (with band) and the
 *   win rate, plus the mean abstention rate.
 * - rate_slopes: log-log median regret against n per method, fitted slope in
 *   the legend label.
 * - robust_gap: mean and max identity gap against the ambiguity radius.
 */

import { AggregateRow, FigureKind, PlotStyle, SchemaError, groupByMethod } from "./schema.js";
import { Panel, Series } from "./svg.js";

function seriesOf(
  groups: Map<string, AggregateRow[]>,
  xKey: "sweep_value" | "n",
  yKey: keyof AggregateRow,
  withBand: boolean,
): Series[] {
  const out: Series[] = [];
  for (const [method, rows] of groups) {
    const x = rows.map((r) => r[xKey] as number);
    const y = rows.map((r) => r[yKey] as number);
    const series: Series = { label: method, x, y };
    if (withBand) {
      series.band = {
        lo: rows.map((r) => (r[yKey] as number) - r.se_gain),
        hi: rows.map((r) => (r[yKey] as number) + r.se_gain),
      };
    }
    out.push(series);
  }
  return out;
}

function fitSlope(x: number[], y: number[]): number {
  const lx = x.map(Math.log);
  const ly = y.map(Math.log);
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let num = 0;
  let den = 0;
  for (let i = 0; i < n; i += 1) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

export function buildPanels(
  figure: FigureKind,
  rows: AggregateRow[],
  style: PlotStyle,
): { panels: Panel[]; defaultTitle: string } {
  const methods = style.methods;
  switch (figure) {
    case "noise_sweep":
    case "gap_sweep": {
      const xLabel =
        figure === "noise_sweep" ? "outcome noise sigma" : "baseline-optimal gap";
      const groups = groupByMethod(rows, "sweep_value", methods);
      const panels: Panel[] = [
        {
          title: "mean true-value gain",
          xLabel,
          yLabel: "V(chosen) - V(baseline)",
          series: seriesOf(groups, "sweep_value", "mean_gain", true),
        },
        {
          title: "mistake rate",
          xLabel,
          yLabel: "P[worse than baseline]",
          series: seriesOf(groups, "sweep_value", "mistake_rate", false),
        },
        {
          title: "improvement rate",
          xLabel,
          yLabel: "P[better than baseline]",
          series: seriesOf(groups, "sweep_value", "improvement_rate", false),
        },
      ];
      return {
        panels,
        defaultTitle:
          figure === "noise_sweep"
            ? "Safe policy improvement across noise levels"
            : "Safe policy improvement across baseline gaps",
      };
    }
    case "abstention_panels": {
      const groups = groupByMethod(rows, "sweep_value", methods);
      return {
        panels: [
          {
            title: "mean value difference vs EWM",
            xLabel: "outcome noise sigma",
            yLabel: "V^(p)(abstaining) - V(EWM)",
            series: seriesOf(groups, "sweep_value", "mean_gain", true),
          },
          {
            title: "win rate vs EWM",
            xLabel: "outcome noise sigma",
            yLabel: "P[abstaining wins]",
            series: seriesOf(groups, "sweep_value", "improvement_rate", false),
          },
          {
            title: "abstention rate",
            xLabel: "outcome noise sigma",
            yLabel: "mean abstention fraction",
            series: seriesOf(groups, "sweep_value", "mean_abstention", false),
          },
        ],
        defaultTitle: "Abstention learner against plain EWM",
      };
    }
    case "rate_slopes": {
      const groups = groupByMethod(rows, "n", methods);
      const series: Series[] = [];
      for (const [method, methodRows] of groups) {
        const x = methodRows.map((r) => r.n);
        const y = methodRows.map((r) => r.mean_gain);
        if (y.some((v) => v <= 0)) {
          throw new SchemaError(
            `rate_slopes needs positive median regrets; method ${method} has a nonpositive value`,
          );
        }
        const slope = x.length >= 2 ? fitSlope(x, y) : NaN;
        series.push({
          label: Number.isNaN(slope) ? method : `${method} (slope ${slope.toFixed(2)})`,
          x,
          y,
        });
      }
      return {
        panels: [
          {
            title: "median regret vs sample size",
            xLabel: "n (log)",
            yLabel: "median regret (log)",
            series,
            xLog: true,
            yLog: true,
          },
        ],
        defaultTitle: "Regret decay rates",
      };
    }
    case "robust_gap": {
      const groups = groupByMethod(rows, "sweep_value", methods);
      const series: Series[] = [];
      for (const [method, methodRows] of groups) {
        const x = methodRows.map((r) => r.sweep_value);
        series.push({ label: `${method} mean gap`, x, y: methodRows.map((r) => r.mean_gain) });
        series.push({ label: `${method} max gap`, x, y: methodRows.map((r) => r.se_gain) });
      }
      return {
        panels: [
          {
            title: "worst-case-value identity gap",
            xLabel: "ambiguity radius",
            yLabel: "|lhs - rhs|",
            series,
          },
        ],
        defaultTitle: "Distribution-shift equivalence check",
      };
    }
  }
}
