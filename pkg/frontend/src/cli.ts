/** Command dispatch: plot_coherent / plot_stationary <csv> <out.svg|png>. */

import { writeFileSync } from "node:fs";

import { readCsv, SchemaError } from "./csv.js";
import { buildCoherent } from "./coherent.js";
import { buildStationary } from "./stationary.js";
import { encodePng, rasterize } from "./raster.js";
import { Scene } from "./scene.js";

const USAGE = `usage:
  plot_coherent   <mean-free-path csv> <out.svg|out.png>
  plot_stationary <equipartition csv>  <out.svg|out.png>`;

export function renderToFile(scene: Scene, outPath: string): void {
  if (outPath.endsWith(".svg")) {
    writeFileSync(outPath, scene.toSvg());
  } else if (outPath.endsWith(".png")) {
    writeFileSync(outPath, encodePng(rasterize(scene)));
  } else {
    throw new SchemaError(`unsupported output extension: ${outPath} (use .svg or .png)`);
  }
}

export function main(argv: string[]): number {
  const [command, csvPath, outPath] = argv;
  if (!command || !csvPath || !outPath || !["plot_coherent", "plot_stationary"].includes(command)) {
    process.stderr.write(USAGE + "\n");
    return 2;
  }
  try {
    const table = readCsv(csvPath);
    if (command === "plot_coherent") {
      const info = buildCoherent(table);
      renderToFile(info.scene, outPath);
      process.stdout.write(`coherent figure: ${info.nModes} modes, ${info.series} series -> ${outPath}\n`);
    } else {
      const info = buildStationary(table);
      renderToFile(info.scene, outPath);
      process.stdout.write(
        `stationary figure: ${info.size}x${info.size} matrix, ${info.panels} panels -> ${outPath}\n`,
      );
    }
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`schema error: ${err.message}\n`);
      return 1;
    }
    if (err instanceof Error && "code" in err && err.code === "ENOENT") {
      process.stderr.write(`error: ${err.message}\n`);
      return 1;
    }
    throw err;
  }
  return 0;
}
