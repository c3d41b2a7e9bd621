/**
 * Minimal deterministic SVG line charts: linear/log scales, tick labels,
 * series with optional standard-error bands, per-panel legends. All
 * coordinates are formatted to fixed precision so identical inputs render
 * byte-identical output.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  band?: { lo: number[]; hi: number[] };
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  xLog?: boolean;
  yLog?: boolean;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
];

const fmt = (v: number): string => v.toFixed(2);

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const abs = Math.abs(v);
  if (abs >= 0.01 && abs < 10000) {
    return parseFloat(v.toPrecision(4)).toString();
  }
  return v.toExponential(1);
}

interface Scale {
  (v: number): number;
  ticks: number[];
}

function linearScale(lo: number, hi: number, out0: number, out1: number): Scale {
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = 0.05 * (hi - lo);
  const a = lo - pad;
  const b = hi + pad;
  const scale = ((v: number) => out0 + ((v - a) / (b - a)) * (out1 - out0)) as Scale;
  const step = niceStep((b - a) / 4);
  const ticks: number[] = [];
  for (let t = Math.ceil(a / step) * step; t <= b + 1e-12; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  scale.ticks = ticks;
  return scale;
}

function logScale(lo: number, hi: number, out0: number, out1: number): Scale {
  const la = Math.log10(lo) - 0.05;
  const lb = Math.log10(hi) + 0.05;
  const scale = ((v: number) =>
    out0 + ((Math.log10(v) - la) / (lb - la)) * (out1 - out0)) as Scale;
  const ticks: number[] = [];
  for (let e = Math.ceil(la); e <= Math.floor(lb); e += 1) {
    ticks.push(Math.pow(10, e));
  }
  if (ticks.length < 2) {
    ticks.length = 0;
    ticks.push(lo, hi);
  }
  scale.ticks = ticks;
  return scale;
}

function niceStep(raw: number): number {
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const r = raw / mag;
  if (r <= 1) return mag;
  if (r <= 2) return 2 * mag;
  if (r <= 5) return 5 * mag;
  return 10 * mag;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function renderPanel(
  panel: Panel,
  x0: number,
  y0: number,
  width: number,
  height: number,
): string {
  const margin = { left: 52, right: 8, top: 24, bottom: 36 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;
  const xs = panel.series.flatMap((s) => s.x);
  const ys = panel.series.flatMap((s) =>
    s.band ? [...s.y, ...s.band.lo, ...s.band.hi] : s.y,
  );
  if (panel.yLog && ys.some((v) => v <= 0)) {
    throw new Error(`panel '${panel.title}': log axis requires positive values`);
  }
  const [xlo, xhi] = extent(xs);
  const [ylo, yhi] = extent(ys);
  const sx = (panel.xLog ? logScale : linearScale)(
    xlo, xhi, x0 + margin.left, x0 + margin.left + plotW,
  );
  const sy = (panel.yLog ? logScale : linearScale)(
    ylo, yhi, y0 + margin.top + plotH, y0 + margin.top,
  );

  const parts: string[] = [];
  parts.push(
    `<rect x="${fmt(x0 + margin.left)}" y="${fmt(y0 + margin.top)}" ` +
      `width="${fmt(plotW)}" height="${fmt(plotH)}" fill="#fafafa" stroke="#ccc"/>`,
  );
  parts.push(
    `<text x="${fmt(x0 + margin.left + plotW / 2)}" y="${fmt(y0 + 14)}" ` +
      `text-anchor="middle" font-size="12" font-weight="bold">${escapeXml(panel.title)}</text>`,
  );
  for (const t of sx.ticks) {
    const px = sx(t);
    parts.push(
      `<line x1="${fmt(px)}" y1="${fmt(y0 + margin.top + plotH)}" ` +
        `x2="${fmt(px)}" y2="${fmt(y0 + margin.top + plotH + 4)}" stroke="#333"/>`,
      `<text x="${fmt(px)}" y="${fmt(y0 + margin.top + plotH + 15)}" ` +
        `text-anchor="middle" font-size="9">${fmtTick(t)}</text>`,
    );
  }
  for (const t of sy.ticks) {
    const py = sy(t);
    parts.push(
      `<line x1="${fmt(x0 + margin.left - 4)}" y1="${fmt(py)}" ` +
        `x2="${fmt(x0 + margin.left)}" y2="${fmt(py)}" stroke="#333"/>`,
      `<text x="${fmt(x0 + margin.left - 6)}" y="${fmt(py + 3)}" ` +
        `text-anchor="end" font-size="9">${fmtTick(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${fmt(x0 + margin.left + plotW / 2)}" ` +
      `y="${fmt(y0 + height - 6)}" text-anchor="middle" font-size="10">` +
      `${escapeXml(panel.xLabel)}</text>`,
    `<text x="${fmt(x0 + 12)}" y="${fmt(y0 + margin.top + plotH / 2)}" ` +
      `text-anchor="middle" font-size="10" transform="rotate(-90 ${fmt(x0 + 12)} ` +
      `${fmt(y0 + margin.top + plotH / 2)})">${escapeXml(panel.yLabel)}</text>`,
  );

  panel.series.forEach((series, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (series.band) {
      const upper = series.x.map((v, j) => `${fmt(sx(v))},${fmt(sy(series.band!.hi[j]))}`);
      const lower = series.x
        .map((v, j) => `${fmt(sx(v))},${fmt(sy(series.band!.lo[j]))}`)
        .reverse();
      parts.push(
        `<polygon points="${[...upper, ...lower].join(" ")}" ` +
          `fill="${color}" fill-opacity="0.15" stroke="none"/>`,
      );
    }
    const points = series.x.map((v, j) => `${fmt(sx(v))},${fmt(sy(series.y[j]))}`);
    parts.push(
      `<polyline points="${points.join(" ")}" fill="none" stroke="${color}" ` +
        `stroke-width="1.5"/>`,
    );
    for (const p of points) {
      const [px, py] = p.split(",");
      parts.push(`<circle cx="${px}" cy="${py}" r="2.5" fill="${color}"/>`);
    }
    const ly = y0 + margin.top + 12 + 12 * i;
    const lx = x0 + margin.left + 8;
    parts.push(
      `<line x1="${fmt(lx)}" y1="${fmt(ly - 3)}" x2="${fmt(lx + 16)}" ` +
        `y2="${fmt(ly - 3)}" stroke="${color}" stroke-width="1.5"/>`,
      `<text x="${fmt(lx + 20)}" y="${fmt(ly)}" font-size="9">` +
        `${escapeXml(series.label)}</text>`,
    );
  });
  return parts.join("\n");
}

export function composeFigure(
  panels: Panel[],
  width: number,
  height: number,
  title: string,
): string {
  const panelW = width / panels.length;
  const body = panels
    .map((panel, i) => renderPanel(panel, i * panelW, 20, panelW, height - 20))
    .join("\n");
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `<text x="${fmt(width / 2)}" y="14" text-anchor="middle" font-size="13" ` +
    `font-weight="bold">${escapeXml(title)}</text>\n` +
    `${body}\n</svg>\n`
  );
}

function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
