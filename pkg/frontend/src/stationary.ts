/** Equipartition-state figure: lateral wireframe surface + top-down heatmap. */

import { numericColumns, SchemaError, Table } from "./csv.js";
import { Scene } from "./scene.js";

export interface StationaryInfo {
  size: number;
  panels: number;
  cells: number;
  scene: Scene;
}

const W = 880;
const H = 460;

function colormap(t: number): string {
  // white -> blue -> dark, clamped
  const u = Math.max(0, Math.min(1, t));
  const r = Math.round(255 * (1 - u) * (1 - 0.2 * u));
  const g = Math.round(255 * (1 - 0.75 * u));
  const b = Math.round(255 * (1 - 0.35 * u));
  return `#${hex(r)}${hex(g)}${hex(b)}`;
}

function hex(v: number): string {
  return v.toString(16).padStart(2, "0");
}

export function buildStationary(table: Table): StationaryInfo {
  const cols = numericColumns(table, ["row", "col", "re"]);
  const rows = cols.get("row")!;
  const colsIdx = cols.get("col")!;
  const re = cols.get("re")!;
  const size = Math.max(...rows, ...colsIdx) + 1;
  if (!Number.isFinite(size) || size < 1) {
    throw new SchemaError("matrix indices missing");
  }
  const mat: number[][] = Array.from({ length: size }, () => Array(size).fill(0));
  for (let i = 0; i < rows.length; i++) {
    mat[rows[i]][colsIdx[i]] = re[i];
  }
  const vmax = Math.max(...re.map(Math.abs), 1e-300);

  const scene = new Scene(W, H);
  scene.text(W / 4, 22, "kernel state, lateral view", 13, "#222222", "middle", "panel-title");
  scene.text((3 * W) / 4, 22, "kernel state, from above", 13, "#222222", "middle", "panel-title");

  // left panel: isometric wireframe rows
  const px0 = 60;
  const pw = W / 2 - 110;
  const baseY = H - 80;
  const heightPx = 220;
  const stepX = pw / (size + size * 0.45);
  const skewX = 0.45 * stepX;
  const skewY = 120 / size;
  const proj = (r: number, c: number, v: number): [number, number] => [
    px0 + c * stepX + r * skewX,
    baseY - r * skewY - (v / vmax) * heightPx * 0.82,
  ];
  for (let r = 0; r < size; r++) {
    const pts: Array<[number, number]> = [];
    for (let c = 0; c < size; c++) {
      pts.push(proj(r, c, mat[r][c]));
    }
    scene.polyline(pts, colormap(0.25 + (0.6 * r) / size), 1.0, "surface-row");
  }
  scene.line(px0, baseY + 6, px0 + size * stepX, baseY + 6, "#222222", 1, "axis");
  scene.text(px0 + (size * stepX) / 2, baseY + 22, "col", 11, "#222222", "middle", "axis-label");
  scene.text(px0 - 26, baseY - (size * skewY) / 2, "row", 11, "#222222", "middle", "axis-label");

  // right panel: heatmap
  const hx = W / 2 + 70;
  const hy = 50;
  const hsize = Math.min(W / 2 - 130, H - 130);
  const cell = hsize / size;
  for (let r = 0; r < size; r++) {
    for (let c = 0; c < size; c++) {
      scene.rect(hx + c * cell, hy + r * cell, cell, cell, colormap(Math.abs(mat[r][c]) / vmax), "cell");
    }
  }
  scene.rect(hx, hy, hsize, hsize, "none", "heatmap-frame");
  scene.line(hx, hy + hsize, hx + hsize, hy + hsize, "#222222", 1, "axis");
  scene.line(hx, hy, hx, hy + hsize, "#222222", 1, "axis");
  scene.text(hx + hsize / 2, hy + hsize + 18, "col", 11, "#222222", "middle", "axis-label");
  scene.text(hx - 18, hy + hsize / 2, "row", 11, "#222222", "middle", "axis-label");
  // colorbar
  const cbx = hx + hsize + 18;
  const n = 32;
  for (let i = 0; i < n; i++) {
    scene.rect(cbx, hy + ((n - 1 - i) * hsize) / n, 14, hsize / n + 0.5, colormap(i / (n - 1)), "colorbar");
  }
  scene.text(cbx + 18, hy + 8, "1", 10, "#222222", "start", "tick-label");
  scene.text(cbx + 18, hy + hsize, "0", 10, "#222222", "start", "tick-label");

  return { size, panels: 2, cells: size * size, scene };
}
