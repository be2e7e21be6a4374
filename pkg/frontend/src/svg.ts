/**
 * Minimal deterministic SVG chart builder.  No timestamps, no randomness:
 * the same inputs always produce byte-identical output.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  log: boolean;
}

export function makeScale(
  domain: [number, number],
  range: [number, number],
  log = false,
): Scale {
  const [d0, d1] = log ? [Math.log10(domain[0]), Math.log10(domain[1])] : domain;
  const span = d1 - d0 || 1;
  const fn = ((value: number) => {
    const v = log ? Math.log10(value) : value;
    return range[0] + ((v - d0) / span) * (range[1] - range[0]);
  }) as Scale;
  fn.domain = domain;
  fn.range = range;
  fn.log = log;
  return fn;
}

export function fmt(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) return value.toExponential(1);
  return parseFloat(value.toPrecision(4)).toString();
}

export function ticks(scale: Scale, count = 5): number[] {
  const [d0, d1] = scale.domain;
  if (scale.log) {
    const lo = Math.ceil(Math.log10(d0) - 1e-9);
    const hi = Math.floor(Math.log10(d1) + 1e-9);
    const out: number[] = [];
    const stride = Math.max(1, Math.ceil((hi - lo) / count));
    for (let e = lo; e <= hi; e += stride) out.push(Math.pow(10, e));
    return out.length >= 2 ? out : [d0, d1];
  }
  const span = d1 - d0 || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const out: number[] = [];
  for (let v = Math.ceil(d0 / s) * s; v <= d1 + 1e-12 * span; v += s) {
    out.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return out;
}

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  dashed?: boolean;
  markers?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logX?: boolean;
  logY?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { top: 36, right: 20, bottom: 44, left: 64 };

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    lo = lo === 0 ? -1 : lo * 0.9;
    hi = hi === 0 ? 1 : hi * 1.1;
  }
  return [lo, hi];
}

function polyline(s: Series, sx: Scale, sy: Scale): string {
  const pts = s.x
    .map((x, i) => `${sx(x).toFixed(2)},${sy(s.y[i]).toFixed(2)}`)
    .join(" ");
  const dash = s.dashed ? ' stroke-dasharray="6 4"' : "";
  let out = `<polyline fill="none" stroke="${s.color}" stroke-width="1.5"${dash} points="${pts}"/>`;
  if (s.markers) {
    for (let i = 0; i < s.x.length; i++) {
      out += `<circle cx="${sx(s.x[i]).toFixed(2)}" cy="${sy(s.y[i]).toFixed(2)}" r="3" fill="${s.color}"/>`;
    }
  }
  return out;
}

export function renderChart(spec: ChartSpec): string {
  const width = spec.width ?? 640;
  const height = spec.height ?? 420;
  const innerW: [number, number] = [MARGIN.left, width - MARGIN.right];
  const innerH: [number, number] = [height - MARGIN.bottom, MARGIN.top];

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s) => s.y);
  const sx = makeScale(extent(xs), innerW, spec.logX ?? false);
  const sy = makeScale(extent(ys), innerH, spec.logY ?? false);

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${spec.title}</text>`,
  );

  for (const t of ticks(sx)) {
    const px = sx(t).toFixed(2);
    parts.push(
      `<line x1="${px}" y1="${innerH[0]}" x2="${px}" y2="${innerH[1]}" stroke="#ddd"/>`,
      `<text x="${px}" y="${innerH[0] + 18}" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(sy)) {
    const py = sy(t).toFixed(2);
    parts.push(
      `<line x1="${innerW[0]}" y1="${py}" x2="${innerW[1]}" y2="${py}" stroke="#ddd"/>`,
      `<text x="${innerW[0] - 6}" y="${py}" text-anchor="end" dominant-baseline="middle">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<line x1="${innerW[0]}" y1="${innerH[0]}" x2="${innerW[1]}" y2="${innerH[0]}" stroke="black"/>`,
    `<line x1="${innerW[0]}" y1="${innerH[0]}" x2="${innerW[0]}" y2="${innerH[1]}" stroke="black"/>`,
    `<text x="${(innerW[0] + innerW[1]) / 2}" y="${height - 8}" text-anchor="middle">${spec.xLabel}</text>`,
    `<text x="14" y="${(innerH[0] + innerH[1]) / 2}" text-anchor="middle" transform="rotate(-90 14 ${(innerH[0] + innerH[1]) / 2})">${spec.yLabel}</text>`,
  );

  for (const s of spec.series) parts.push(polyline(s, sx, sy));

  let ly = MARGIN.top + 4;
  for (const s of spec.series) {
    if (!s.label) continue;
    parts.push(
      `<line x1="${innerW[1] - 120}" y1="${ly}" x2="${innerW[1] - 96}" y2="${ly}" stroke="${s.color}" stroke-width="1.5"${s.dashed ? ' stroke-dasharray="6 4"' : ""}/>`,
      `<text x="${innerW[1] - 90}" y="${ly + 4}">${s.label}</text>`,
    );
    ly += 16;
  }

  parts.push("</svg>");
  return parts.join("\n");
}
