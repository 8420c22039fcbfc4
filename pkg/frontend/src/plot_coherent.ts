#!/usr/bin/env node
import { main } from "./cli.js";

process.exit(main(["plot_coherent", ...process.argv.slice(2)]));
