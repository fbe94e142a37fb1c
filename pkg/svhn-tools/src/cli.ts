#!/usr/bin/env node
/**
 * svhn-tools: dataset conversion and report rendering.
 *
 *   svhn-tools convert <digits.mat> <out.cnd>
 *   svhn-tools plot-sweep <sweep.csv> <out.svg>
 *   svhn-tools plot-compare <compare.csv> <out.svg>
 *   svhn-tools montage <energy_y.cnd> <out.png>
 */

import * as fs from "fs";

import { convertMat } from "./convert";
import { renderMontage } from "./montage";
import { renderCompareSvg, renderSweepSvg } from "./plots";

const USAGE = `usage:
  svhn-tools convert <digits.mat> <out.cnd>
  svhn-tools plot-sweep <sweep.csv> <out.svg>
  svhn-tools plot-compare <compare.csv> <out.svg>
  svhn-tools montage <energy_y.cnd> <out.png>`;

export function run(argv: string[]): number {
  const [command, input, output] = argv;
  if (!command || !input || !output) {
    process.stderr.write(USAGE + "\n");
    return 2;
  }
  switch (command) {
    case "convert": {
      const { n } = convertMat(input, output);
      process.stdout.write(`converted ${n} samples -> ${output}\n`);
      return 0;
    }
    case "plot-sweep": {
      fs.writeFileSync(output, renderSweepSvg(fs.readFileSync(input, "utf8")));
      process.stdout.write(`wrote ${output}\n`);
      return 0;
    }
    case "plot-compare": {
      fs.writeFileSync(output, renderCompareSvg(fs.readFileSync(input, "utf8")));
      process.stdout.write(`wrote ${output}\n`);
      return 0;
    }
    case "montage": {
      const montage = renderMontage(fs.readFileSync(input));
      fs.writeFileSync(output, montage.png);
      process.stdout.write(
        `wrote ${montage.tiles} tiles (${montage.cols}x${montage.rows}) -> ${output}\n`);
      return 0;
    }
    default:
      process.stderr.write(`unknown command "${command}"\n${USAGE}\n`);
      return 2;
  }
}

if (require.main === module) {
  try {
    process.exit(run(process.argv.slice(2)));
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(1);
  }
}
