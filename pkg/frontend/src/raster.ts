/** Scanline rasterizer for Scene shapes plus a minimal PNG encoder.
 *
 * Keeps the renderer dependency-free: lines via Bresenham with coverage
 * thickness, text via an embedded 5x7 dot font, PNG via node:zlib.
 */

import { deflateSync } from "node:zlib";

import { Scene, Shape } from "./scene.js";

export class Raster {
  readonly data: Uint8ClampedArray;

  constructor(
    readonly width: number,
    readonly height: number,
  ) {
    this.data = new Uint8ClampedArray(width * height * 4);
    this.clear();
  }

  clear(): void {
    this.data.fill(255);
  }

  set(x: number, y: number, rgb: [number, number, number], alpha = 1): void {
    const xi = Math.round(x);
    const yi = Math.round(y);
    if (xi < 0 || yi < 0 || xi >= this.width || yi >= this.height) return;
    const o = (yi * this.width + xi) * 4;
    for (let c = 0; c < 3; c++) {
      this.data[o + c] = Math.round(rgb[c] * alpha + this.data[o + c] * (1 - alpha));
    }
    this.data[o + 3] = 255;
  }

  fillRect(x: number, y: number, w: number, h: number, rgb: [number, number, number]): void {
    const x0 = Math.max(0, Math.floor(x));
    const y0 = Math.max(0, Math.floor(y));
    const x1 = Math.min(this.width - 1, Math.ceil(x + w) - 1);
    const y1 = Math.min(this.height - 1, Math.ceil(y + h) - 1);
    for (let yy = y0; yy <= y1; yy++) {
      for (let xx = x0; xx <= x1; xx++) {
        this.set(xx, yy, rgb);
      }
    }
  }

  line(
    x1: number,
    y1: number,
    x2: number,
    y2: number,
    rgb: [number, number, number],
    width = 1,
    dash = false,
  ): void {
    const dx = x2 - x1;
    const dy = y2 - y1;
    const steps = Math.max(Math.abs(dx), Math.abs(dy), 1) * 2;
    const r = Math.max(0, (width - 1) / 2);
    for (let i = 0; i <= steps; i++) {
      if (dash && Math.floor(i / 10) % 2 === 1) continue;
      const x = x1 + (dx * i) / steps;
      const y = y1 + (dy * i) / steps;
      if (r < 0.25) {
        this.set(x, y, rgb);
      } else {
        for (let ox = -Math.ceil(r); ox <= Math.ceil(r); ox++) {
          for (let oy = -Math.ceil(r); oy <= Math.ceil(r); oy++) {
            if (ox * ox + oy * oy <= (r + 0.4) * (r + 0.4)) {
              this.set(x + ox, y + oy, rgb);
            }
          }
        }
      }
    }
  }

  text(
    x: number,
    y: number,
    text: string,
    size: number,
    rgb: [number, number, number],
    anchor: "start" | "middle" | "end",
  ): void {
    const scale = Math.max(1, Math.round(size / 8));
    const adv = 6 * scale;
    const total = text.length * adv;
    let x0 = Math.round(x);
    if (anchor === "middle") x0 -= Math.round(total / 2);
    if (anchor === "end") x0 -= total;
    const y0 = Math.round(y) - 7 * scale + scale; // baseline-ish
    for (const ch of text.toLowerCase()) {
      const glyph = FONT[ch];
      if (glyph) {
        for (let r = 0; r < 7; r++) {
          for (let c = 0; c < 5; c++) {
            if (glyph[r].charCodeAt(c) !== 32) {
              this.fillRect(x0 + c * scale, y0 + r * scale, scale, scale, rgb);
            }
          }
        }
      }
      x0 += adv;
    }
  }
}

function parseColor(c: string): [number, number, number] {
  if (c === "none") return [255, 255, 255];
  const m = /^#([0-9a-f]{6})$/i.exec(c);
  if (!m) return [0, 0, 0];
  const v = parseInt(m[1], 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

export function rasterize(scene: Scene): Raster {
  const r = new Raster(scene.width, scene.height);
  for (const s of scene.shapes as Shape[]) {
    switch (s.kind) {
      case "rect":
        if (s.fill !== "none") r.fillRect(s.x, s.y, s.w, s.h, parseColor(s.fill));
        break;
      case "line":
        r.line(s.x1, s.y1, s.x2, s.y2, parseColor(s.color), s.width, s.dash ?? false);
        break;
      case "polyline":
        for (let i = 1; i < s.points.length; i++) {
          r.line(
            s.points[i - 1][0],
            s.points[i - 1][1],
            s.points[i][0],
            s.points[i][1],
            parseColor(s.color),
            s.width,
          );
        }
        break;
      case "text":
        r.text(s.x, s.y, s.text, s.size, parseColor(s.color), s.anchor);
        break;
      case "circle":
        r.fillRect(s.cx - s.r, s.cy - s.r, 2 * s.r, 2 * s.r, parseColor(s.fill));
        break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// PNG encoding (8-bit RGBA, deflate via node:zlib)
// ---------------------------------------------------------------------------

const CRC_TABLE = (() => {
  const t = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    t[n] = c >>> 0;
  }
  return t;
})();

function crc32(buf: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    c = CRC_TABLE[(c ^ buf[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function chunk(type: string, payload: Uint8Array): Buffer {
  const head = Buffer.alloc(8);
  head.writeUInt32BE(payload.length, 0);
  head.write(type, 4, "ascii");
  const body = Buffer.concat([Buffer.from(type, "ascii"), Buffer.from(payload)]);
  const crc = Buffer.alloc(4);
  crc.writeUInt32BE(crc32(body), 0);
  return Buffer.concat([head, Buffer.from(payload), crc]);
}

export function encodePng(raster: Raster): Buffer {
  const { width, height, data } = raster;
  const ihdr = Buffer.alloc(13);
  ihdr.writeUInt32BE(width, 0);
  ihdr.writeUInt32BE(height, 4);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 6; // RGBA
  const raw = Buffer.alloc(height * (1 + width * 4));
  for (let y = 0; y < height; y++) {
    raw[y * (1 + width * 4)] = 0; // filter: none
    const row = data.subarray(y * width * 4, (y + 1) * width * 4);
    Buffer.from(row.buffer, row.byteOffset, row.byteLength).copy(raw, y * (1 + width * 4) + 1);
  }
  const idat = deflateSync(raw, { level: 6 });
  return Buffer.concat([
    Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]),
    chunk("IHDR", ihdr),
    chunk("IDAT", idat),
    chunk("IEND", new Uint8Array(0)),
  ]);
}

// 5x7 dot font for axis labels (lowercase, digits, light punctuation)
const FONT: Record<string, string[]> = {
  " ": ["     ", "     ", "     ", "     ", "     ", "     ", "     "],
  "0": [" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "],
  "1": ["  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
  "2": [" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"],
  "3": [" ### ", "#   #", "    #", "  ## ", "    #", "#   #", " ### "],
  "4": ["   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "],
  "5": ["#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "],
  "6": [" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "],
  "7": ["#####", "    #", "   # ", "  #  ", "  #  ", "  #  ", "  #  "],
  "8": [" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "],
  "9": [" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "],
  ".": ["     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "],
  ",": ["     ", "     ", "     ", "     ", " ##  ", "  #  ", " #   "],
  "-": ["     ", "     ", "     ", "#####", "     ", "     ", "     "],
  "+": ["     ", "  #  ", "  #  ", "#####", "  #  ", "  #  ", "     "],
  "/": ["    #", "    #", "   # ", "  #  ", " #   ", "#    ", "#    "],
  "(": ["   # ", "  #  ", " #   ", " #   ", " #   ", "  #  ", "   # "],
  ")": [" #   ", "  #  ", "   # ", "   # ", "   # ", "  #  ", " #   "],
  a: ["     ", "     ", " ### ", "    #", " ####", "#   #", " ####"],
  b: ["#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#### "],
  c: ["     ", "     ", " ####", "#    ", "#    ", "#    ", " ####"],
  d: ["    #", "    #", " ####", "#   #", "#   #", "#   #", " ####"],
  e: ["     ", "     ", " ### ", "#   #", "#####", "#    ", " ####"],
  f: ["  ## ", " #   ", "###  ", " #   ", " #   ", " #   ", " #   "],
  g: ["     ", " ####", "#   #", "#   #", " ####", "    #", " ### "],
  h: ["#    ", "#    ", "#### ", "#   #", "#   #", "#   #", "#   #"],
  i: ["  #  ", "     ", " ##  ", "  #  ", "  #  ", "  #  ", " ### "],
  j: ["   # ", "     ", "  ## ", "   # ", "   # ", "#  # ", " ##  "],
  k: ["#    ", "#    ", "#  # ", "# #  ", "##   ", "# #  ", "#  # "],
  l: [" ##  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
  m: ["     ", "     ", "## # ", "# # #", "# # #", "# # #", "# # #"],
  n: ["     ", "     ", "#### ", "#   #", "#   #", "#   #", "#   #"],
  o: ["     ", "     ", " ### ", "#   #", "#   #", "#   #", " ### "],
  p: ["     ", "#### ", "#   #", "#   #", "#### ", "#    ", "#    "],
  q: ["     ", " ####", "#   #", "#   #", " ####", "    #", "    #"],
  r: ["     ", "     ", "# ## ", "##   ", "#    ", "#    ", "#    "],
  s: ["     ", "     ", " ####", "#    ", " ### ", "    #", "#### "],
  t: [" #   ", " #   ", "###  ", " #   ", " #   ", " #   ", "  ## "],
  u: ["     ", "     ", "#   #", "#   #", "#   #", "#   #", " ####"],
  v: ["     ", "     ", "#   #", "#   #", "#   #", " # # ", "  #  "],
  w: ["     ", "     ", "#   #", "# # #", "# # #", "# # #", " # # "],
  x: ["     ", "     ", "#   #", " # # ", "  #  ", " # # ", "#   #"],
  y: ["     ", "#   #", "#   #", " ####", "    #", "#   #", " ### "],
  z: ["     ", "     ", "#####", "   # ", "  #  ", " #   ", "#####"],
};
