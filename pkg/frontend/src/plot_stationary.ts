#!/usr/bin/env node
import { main } from "./cli.js";

process.exit(main(["plot_stationary", ...process.argv.slice(2)]));
