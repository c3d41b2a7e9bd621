/**
 * CLI: `render --spec spec.json`. Exit codes: 0 success, 2 input/schema
 * error, 3 I/O error.
 */

import * as fs from "node:fs";

import { render } from "./render.js";
import { InputError, SchemaError } from "./schema.js";

export function main(argv: string[]): number {
  if (argv[0] !== "render") {
    process.stderr.write("usage: render --spec <spec.json>\n");
    return 2;
  }
  const flag = argv.indexOf("--spec");
  if (flag === -1 || argv[flag + 1] === undefined) {
    process.stderr.write("input error: --spec <spec.json> is required\n");
    return 2;
  }
  const specPath = argv[flag + 1];
  try {
    const raw = JSON.parse(fs.readFileSync(specPath, "utf-8"));
    const output = render(raw);
    process.stdout.write(`wrote ${output}\n`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof InputError || err instanceof SyntaxError) {
      process.stderr.write(`input error: ${(err as Error).message}\n`);
      return 2;
    }
    if ((err as NodeJS.ErrnoException).code !== undefined) {
      process.stderr.write(`i/o error: ${(err as Error).message}\n`);
      return 3;
    }
    throw err;
  }
}

if (process.argv[1] !== undefined && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
