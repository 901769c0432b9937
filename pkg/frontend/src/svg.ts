/**
 * Hand-rolled SVG primitives: deterministic number formatting, linear and
 * log scales with tick generation, axes, and a tiny element builder. No
 * DOM, no randomness, no timestamps, so identical inputs give identical
 * bytes.
 */

export const WIDTH = 640;
export const HEIGHT = 460;
export const MARGIN = { top: 36, right: 24, bottom: 48, left: 64 };

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#e377c2", "#17becf",
];

export function fmt(x: number): string {
  if (!Number.isFinite(x)) return "0";
  if (x === 0) return "0";
  const s = x.toPrecision(6);
  return s.includes(".") || s.includes("e")
    ? s.replace(/(\.\d*?)0+($|e)/, "$1$2").replace(/\.($|e)/, "$1")
    : s;
}

export function tickLabel(x: number): string {
  const a = Math.abs(x);
  if (a !== 0 && (a < 1e-3 || a >= 1e5)) return x.toExponential(0);
  const s = x.toPrecision(4);
  return s.includes(".") ? s.replace(/0+$/, "").replace(/\.$/, "") : s;
}

export interface Scale {
  (x: number): number;
  ticks(): number[];
  domain: [number, number];
}

export function linearScale(lo: number, hi: number, outLo: number,
                            outHi: number): Scale {
  if (!(hi > lo)) hi = lo + 1;
  const f = ((x: number) => outLo + ((x - lo) / (hi - lo)) * (outHi - outLo)) as Scale;
  f.domain = [lo, hi];
  f.ticks = () => {
    const span = hi - lo;
    const step0 = Math.pow(10, Math.floor(Math.log10(span / 5)));
    const step = [1, 2, 5, 10].map((m) => m * step0)
      .find((s) => span / s <= 7) ?? step0 * 10;
    const ticks: number[] = [];
    for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * span; t += step) {
      ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
    }
    return ticks;
  };
  return f;
}

export function logScale(lo: number, hi: number, outLo: number,
                         outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi > lo ? hi : lo * 10);
  const f = ((x: number) =>
    outLo + ((Math.log10(x) - llo) / (lhi - llo)) * (outHi - outLo)) as Scale;
  f.domain = [lo, hi];
  f.ticks = () => {
    const ticks: number[] = [];
    for (let e = Math.ceil(llo - 1e-9); e <= Math.floor(lhi + 1e-9); e += 1) {
      // Math.pow(10, e) is inexact for negative e; divide instead.
      ticks.push(e < 0 ? 1 / Math.pow(10, -e) : Math.pow(10, e));
    }
    return ticks;
  };
  return f;
}

export function el(tag: string, attrs: Record<string, string | number>,
                   children: string[] = []): string {
  const attrText = Object.entries(attrs)
    .map(([k, v]) => ` ${k}="${v}"`)
    .join("");
  if (children.length === 0) return `<${tag}${attrText}/>`;
  return `<${tag}${attrText}>${children.join("")}</${tag}>`;
}

export function text(x: number, y: number, content: string,
                     attrs: Record<string, string | number> = {}): string {
  return el("text", { x: fmt(x), y: fmt(y), "font-family": "sans-serif",
                      "font-size": 12, ...attrs }, [content]);
}

export function polyline(points: Array<[number, number]>, stroke: string,
                         extra: Record<string, string | number> = {}): string {
  const pts = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return el("polyline", { points: pts, fill: "none", stroke,
                          "stroke-width": 1.5, ...extra });
}

export interface AxisOptions {
  xLabel?: string;
  yLabel?: string;
  title?: string;
}

export function axes(xs: Scale, ys: Scale, opts: AxisOptions): string[] {
  const parts: string[] = [];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  parts.push(el("line", { x1: x0, y1: y0, x2: x1, y2: y0, stroke: "#000" }));
  parts.push(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, stroke: "#000" }));
  for (const t of xs.ticks()) {
    const px = xs(t);
    if (px < x0 - 0.5 || px > x1 + 0.5) continue;
    parts.push(el("line", { x1: fmt(px), y1: y0, x2: fmt(px), y2: y0 + 5,
                            stroke: "#000" }));
    parts.push(text(px, y0 + 18, tickLabel(t), { "text-anchor": "middle" }));
  }
  for (const t of ys.ticks()) {
    const py = ys(t);
    if (py > y0 + 0.5 || py < y1 - 0.5) continue;
    parts.push(el("line", { x1: x0 - 5, y1: fmt(py), x2: x0, y2: fmt(py),
                            stroke: "#000" }));
    parts.push(text(x0 - 8, py + 4, tickLabel(t), { "text-anchor": "end" }));
  }
  if (opts.xLabel) {
    parts.push(text((x0 + x1) / 2, HEIGHT - 10, opts.xLabel,
                    { "text-anchor": "middle" }));
  }
  if (opts.yLabel) {
    parts.push(text(16, (y0 + y1) / 2, opts.yLabel, {
      "text-anchor": "middle",
      transform: `rotate(-90 16 ${fmt((y0 + y1) / 2)})`,
    }));
  }
  if (opts.title) {
    parts.push(text(WIDTH / 2, 20, opts.title,
                    { "text-anchor": "middle", "font-size": 14 }));
  }
  return parts;
}

export function legend(entries: Array<[string, string]>): string[] {
  const parts: string[] = [];
  entries.forEach(([label, color], i) => {
    const y = MARGIN.top + 8 + 16 * i;
    const x = WIDTH - MARGIN.right - 150;
    parts.push(el("line", { x1: x, y1: y, x2: x + 18, y2: y, stroke: color,
                            "stroke-width": 2 }));
    parts.push(text(x + 24, y + 4, label));
  });
  return parts;
}

export function document(body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`,
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }),
    ...body,
    "</svg>",
    "",
  ].join("\n");
}

/** Five-stop sequential colormap from dark blue to yellow; t in [0, 1]. */
export function heatColor(t: number): string {
  const stops: Array<[number, number, number]> = [
    [13, 8, 135], [84, 39, 143], [158, 51, 112], [221, 81, 58], [252, 206, 37],
  ];
  const clamped = Math.min(1, Math.max(0, t));
  const pos = clamped * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(pos));
  const frac = pos - i;
  const mix = stops[i].map((c, j) => Math.round(c + frac * (stops[i + 1][j] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}
