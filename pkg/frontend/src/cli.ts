#!/usr/bin/env node
/**
 * Command-line figure generator for solver outputs.
 *
 *   svpfp-viz --kind hypo_rates --input out/sample_energy.csv \
 *             --input out/sample_hypo.json --output rates.svg
 *
 * Prints every re-derived quantity so results can be cross-checked against
 * the numbers the solver reported.
 */
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { plot, type FigureKind } from "./figures.js";
import { SchemaError } from "./schema.js";

export function main(argv: string[]): number {
  const args = yargs(argv)
    .option("kind", {
      choices: ["norms", "picard", "hypo_rates", "ensemble"] as const,
      demandOption: true,
      describe: "figure kind",
    })
    .option("input", {
      type: "string",
      array: true,
      demandOption: true,
      describe: "input file(s); order matters per figure kind",
    })
    .option("output", {
      type: "string",
      demandOption: true,
      describe: "output SVG path",
    })
    .strict()
    .exitProcess(false)
    .parseSync();

  try {
    const result = plot({
      kind: args.kind as FigureKind,
      inputs: args.input,
      output: args.output,
    });
    for (const [name, value] of Object.entries(result.fitted)) {
      console.log(`${name} = ${value}`);
    }
    console.log(`wrote ${args.output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(hideBin(process.argv)));
}
