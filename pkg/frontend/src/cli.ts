#!/usr/bin/env node
/**
 * plot <figure-spec.json>
 *
 * Renders one SVG figure from harness CSV/JSON outputs. Exits 1 on schema
 * mismatches (missing columns, unknown kinds) with the offending name and
 * the manifest schema version on stderr.
 */

import { loadSpec, render, SchemaError } from "./figures.js";

function main(argv: string[]): number {
  if (argv.length !== 1 || argv[0] === "--help") {
    console.error("usage: plot <figure-spec.json>");
    return argv[0] === "--help" ? 0 : 2;
  }
  try {
    const out = render(loadSpec(argv[0]));
    console.log(`wrote ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

process.exit(main(process.argv.slice(2)));
