/** Tiny retained scene graph shared by the SVG writer and the rasterizer. */

export type Shape =
  | {
      kind: "line";
      x1: number;
      y1: number;
      x2: number;
      y2: number;
      color: string;
      width: number;
      dash?: boolean;
      cls?: string;
    }
  | {
      kind: "polyline";
      points: Array<[number, number]>;
      color: string;
      width: number;
      cls?: string;
    }
  | { kind: "rect"; x: number; y: number; w: number; h: number; fill: string; cls?: string }
  | {
      kind: "text";
      x: number;
      y: number;
      text: string;
      size: number;
      color: string;
      anchor: "start" | "middle" | "end";
      cls?: string;
    }
  | { kind: "circle"; cx: number; cy: number; r: number; fill: string; cls?: string };

export class Scene {
  readonly shapes: Shape[] = [];

  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  add(shape: Shape): void {
    this.shapes.push(shape);
  }

  line(
    x1: number,
    y1: number,
    x2: number,
    y2: number,
    color: string,
    width = 1,
    cls?: string,
    dash = false,
  ): void {
    this.add({ kind: "line", x1, y1, x2, y2, color, width, cls, dash });
  }

  polyline(points: Array<[number, number]>, color: string, width = 1.5, cls?: string): void {
    this.add({ kind: "polyline", points, color, width, cls });
  }

  rect(x: number, y: number, w: number, h: number, fill: string, cls?: string): void {
    this.add({ kind: "rect", x, y, w, h, fill, cls });
  }

  text(
    x: number,
    y: number,
    text: string,
    size = 11,
    color = "#222222",
    anchor: "start" | "middle" | "end" = "start",
    cls?: string,
  ): void {
    this.add({ kind: "text", x, y, text, size, color, anchor, cls });
  }

  toSvg(): string {
    const parts: string[] = [];
    parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" ` +
        `viewBox="0 0 ${this.width} ${this.height}">`,
    );
    parts.push(`<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="#ffffff"/>`);
    for (const s of this.shapes) {
      const cls = s.cls ? ` class="${s.cls}"` : "";
      switch (s.kind) {
        case "line": {
          const dash = s.dash ? ` stroke-dasharray="5,4"` : "";
          parts.push(
            `<line${cls} x1="${f(s.x1)}" y1="${f(s.y1)}" x2="${f(s.x2)}" y2="${f(s.y2)}" ` +
              `stroke="${s.color}" stroke-width="${s.width}"${dash}/>`,
          );
          break;
        }
        case "polyline": {
          const pts = s.points.map(([x, y]) => `${f(x)},${f(y)}`).join(" ");
          parts.push(
            `<polyline${cls} points="${pts}" fill="none" stroke="${s.color}" stroke-width="${s.width}"/>`,
          );
          break;
        }
        case "rect":
          parts.push(
            `<rect${cls} x="${f(s.x)}" y="${f(s.y)}" width="${f(s.w)}" height="${f(s.h)}" fill="${s.fill}"/>`,
          );
          break;
        case "text":
          parts.push(
            `<text${cls} x="${f(s.x)}" y="${f(s.y)}" font-size="${s.size}" ` +
              `font-family="Helvetica, Arial, sans-serif" fill="${s.color}" ` +
              `text-anchor="${anchorName(s.anchor)}">${escapeXml(s.text)}</text>`,
          );
          break;
        case "circle":
          parts.push(`<circle${cls} cx="${f(s.cx)}" cy="${f(s.cy)}" r="${f(s.r)}" fill="${s.fill}"/>`);
          break;
      }
    }
    parts.push("</svg>");
    return parts.join("\n");
  }
}

function f(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toFixed(2);
}

function anchorName(a: "start" | "middle" | "end"): string {
  return a;
}

function escapeXml(t: string): string {
  return t.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Linear scale mapping [d0, d1] to [r0, r1]. */
export function linScale(d0: number, d1: number, r0: number, r1: number) {
  const span = d1 - d0 || 1;
  return (v: number) => r0 + ((v - d0) / span) * (r1 - r0);
}

/** Nice round tick values covering [lo, hi]. */
export function linTicks(lo: number, hi: number, n = 5): number[] {
  const span = hi - lo || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const err = span / n / step;
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = mult * step;
  const start = Math.ceil(lo / s) * s;
  const out: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += s) {
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

/** Powers of ten between lo and hi (inclusive-ish), for log axes. */
export function logTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    out.push(Math.pow(10, e));
  }
  return out;
}

export function formatTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return Number(v.toPrecision(4)).toString();
  }
  const e = Math.floor(Math.log10(a));
  const m = v / Math.pow(10, e);
  const ms = Number(m.toPrecision(3)).toString();
  return `${ms}e${e}`;
}
