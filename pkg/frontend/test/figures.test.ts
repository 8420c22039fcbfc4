import { mkdtempSync, readFileSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parseCsv, numericColumns, SchemaError } from "../src/csv.js";
import { buildCoherent } from "../src/coherent.js";
import { buildStationary } from "../src/stationary.js";
import { encodePng, rasterize } from "../src/raster.js";
import { main } from "../src/cli.js";

function coherentCsv(n = 12): string {
  const lines = ["j,j1,j2,S_j,inv_mu_max,L_eq"];
  for (let j = 1; j <= n; j++) {
    const s = 0.05 * Math.exp(-j / 6);
    lines.push(`${j},${j},0,${s},${0.8 * s},0.7`);
  }
  return lines.join("\n") + "\n";
}

function stationaryCsv(size = 6): string {
  const lines = ["row,col,re,im"];
  for (let r = 0; r < size; r++) {
    for (let c = 0; c < size; c++) {
      const v = r === c ? 1 - 0.02 * r : 0.01;
      lines.push(`${r},${c},${v},0`);
    }
  }
  return lines.join("\n") + "\n";
}

describe("csv", () => {
  it("parses tables and extracts numeric columns", () => {
    const t = parseCsv("a,b\n1,2\n3,4\n");
    expect(t.header).toEqual(["a", "b"]);
    const cols = numericColumns(t, ["b"]);
    expect(cols.get("b")).toEqual([2, 4]);
  });

  it("rejects empty input and missing columns", () => {
    expect(() => parseCsv("")).toThrow(SchemaError);
    expect(() => parseCsv("a,b\n")).toThrow(SchemaError);
    const t = parseCsv("a\n1\n");
    expect(() => numericColumns(t, ["nope"])).toThrow(/missing column: nope/);
  });
});

describe("coherent figure", () => {
  it("draws two series and one reference line over all modes", () => {
    const info = buildCoherent(parseCsv(coherentCsv(64)));
    expect(info.nModes).toBe(64);
    const svg = info.scene.toSvg();
    expect(svg.match(/series-mean-free-path/g)?.length).toBe(1);
    expect(svg.match(/series-inverse-max-rate/g)?.length).toBe(1);
    expect(svg.match(/refline-equipartition/g)?.length).toBe(1);
    expect((svg.match(/<polyline class="series-/g) ?? []).length).toBe(2);
    // abscissa count: each series polyline carries one point per mode
    const pts = svg.match(/points="([^"]+)"/g)!;
    expect(pts[0].split(" ").length).toBe(64);
    expect(svg).toContain("mode index j");
    expect(svg).toContain("wavelengths");
  });

  it("rejects schema mismatches", () => {
    expect(() => buildCoherent(parseCsv("x,y\n1,2\n"))).toThrow(/missing column/);
  });
});

describe("stationary figure", () => {
  it("renders two panels with one heatmap cell per matrix entry", () => {
    const info = buildStationary(parseCsv(stationaryCsv(7)));
    expect(info.panels).toBe(2);
    expect(info.size).toBe(7);
    const svg = info.scene.toSvg();
    expect((svg.match(/class="cell"/g) ?? []).length).toBe(49);
    expect((svg.match(/class="surface-row"/g) ?? []).length).toBe(7);
    expect((svg.match(/panel-title/g) ?? []).length).toBe(2);
  });
});

describe("png rasterization", () => {
  it("encodes a valid png with the declared dimensions", () => {
    const info = buildCoherent(parseCsv(coherentCsv()));
    const png = encodePng(rasterize(info.scene));
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);
    expect(png.readUInt32BE(16)).toBe(info.scene.width);
    expect(png.readUInt32BE(20)).toBe(info.scene.height);
    expect(png.length).toBeGreaterThan(1000);
  });
});

describe("cli", () => {
  it("writes svg and png artifacts", () => {
    const dir = mkdtempSync(join(tmpdir(), "wgplot-"));
    const csv = join(dir, "coherent.csv");
    writeFileSync(csv, coherentCsv());
    expect(main(["plot_coherent", csv, join(dir, "out.svg")])).toBe(0);
    expect(main(["plot_coherent", csv, join(dir, "out.png")])).toBe(0);
    const svg = readFileSync(join(dir, "out.svg"), "utf8");
    expect(svg).toContain("<svg");
    const st = join(dir, "stationary.csv");
    writeFileSync(st, stationaryCsv());
    expect(main(["plot_stationary", st, join(dir, "st.png")])).toBe(0);
  });

  it("fails without writing a file on empty csv", () => {
    const dir = mkdtempSync(join(tmpdir(), "wgplot-"));
    const csv = join(dir, "empty.csv");
    writeFileSync(csv, "");
    const out = join(dir, "nope.svg");
    expect(main(["plot_coherent", csv, out])).toBe(1);
    expect(existsSync(out)).toBe(false);
  });

  it("returns usage errors", () => {
    expect(main([])).toBe(2);
    expect(main(["plot_wat", "a.csv", "b.svg"])).toBe(2);
  });

  it("rejects unknown output extensions", () => {
    const dir = mkdtempSync(join(tmpdir(), "wgplot-"));
    const csv = join(dir, "coherent.csv");
    writeFileSync(csv, coherentCsv());
    expect(main(["plot_coherent", csv, join(dir, "out.gif")])).toBe(1);
  });
});
