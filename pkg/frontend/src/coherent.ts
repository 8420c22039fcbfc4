/** Mean-free-path figure: S_j (green), 1/mu_max (blue), L_eq line (red). */

import { numericColumns, SchemaError, Table } from "./csv.js";
import { formatTick, linScale, linTicks, logTicks, Scene } from "./scene.js";

export interface CoherentInfo {
  nModes: number;
  series: number;
  scene: Scene;
}

const W = 640;
const H = 460;
const M = { left: 78, right: 24, top: 30, bottom: 58 };

export function buildCoherent(table: Table): CoherentInfo {
  const cols = numericColumns(table, ["j", "S_j", "inv_mu_max", "L_eq"]);
  const j = cols.get("j")!;
  const s = cols.get("S_j")!;
  const mu = cols.get("inv_mu_max")!;
  const leq = cols.get("L_eq")![0];
  if (j.length < 2) {
    throw new SchemaError("need at least two modes to draw the curves");
  }

  const vals = [...s, ...mu, leq].filter((v) => v > 0);
  if (vals.length === 0) {
    throw new SchemaError("no positive range values to plot");
  }
  const lo = Math.min(...vals) / 1.5;
  const hi = Math.max(...vals) * 1.5;
  const xs = linScale(Math.min(...j), Math.max(...j), M.left, W - M.right);
  const ys = linScale(Math.log10(lo), Math.log10(hi), H - M.bottom, M.top);
  const y = (v: number) => ys(Math.log10(v));

  const scene = new Scene(W, H);
  // frame and ticks
  scene.line(M.left, M.top, M.left, H - M.bottom, "#222222", 1, "axis");
  scene.line(M.left, H - M.bottom, W - M.right, H - M.bottom, "#222222", 1, "axis");
  for (const t of logTicks(lo, hi)) {
    scene.line(M.left - 4, y(t), M.left, y(t), "#222222", 1, "tick");
    scene.text(M.left - 7, y(t) + 3.5, formatTick(t), 10, "#222222", "end", "tick-label");
    scene.line(M.left, y(t), W - M.right, y(t), "#e6e6e6", 0.6, "grid");
  }
  for (const t of linTicks(Math.min(...j), Math.max(...j), 8)) {
    if (!Number.isInteger(t)) continue;
    scene.line(xs(t), H - M.bottom, xs(t), H - M.bottom + 4, "#222222", 1, "tick");
    scene.text(xs(t), H - M.bottom + 16, formatTick(t), 10, "#222222", "middle", "tick-label");
  }
  scene.text((M.left + W - M.right) / 2, H - 14, "mode index j", 12, "#222222", "middle", "axis-label");
  scene.text(16, M.top - 12, "range (wavelengths, log scale)", 12, "#222222", "start", "axis-label");

  scene.polyline(j.map((ji, i) => [xs(ji), y(s[i])] as [number, number]), "#1a9641", 1.8, "series-mean-free-path");
  scene.polyline(j.map((ji, i) => [xs(ji), y(mu[i])] as [number, number]), "#2b6cb0", 1.8, "series-inverse-max-rate");
  scene.line(M.left, y(leq), W - M.right, y(leq), "#d7191c", 1.8, "refline-equipartition", true);

  // legend
  const lx = W - M.right - 190;
  const ly = M.top + 8;
  const entries: Array<[string, string]> = [
    ["#1a9641", "mean free path"],
    ["#2b6cb0", "1 / fastest decay rate"],
    ["#d7191c", "equipartition distance"],
  ];
  entries.forEach(([color, label], i) => {
    scene.line(lx, ly + 16 * i, lx + 22, ly + 16 * i, color, 2, "legend");
    scene.text(lx + 28, ly + 16 * i + 3.5, label, 10, "#222222", "start", "legend");
  });

  return { nModes: j.length, series: 2, scene };
}
