/**
 * Command line entry point.
 *
 *   feature-bridge <image-dir> --out PREFIX [options]
 *
 * Writes PREFIX.ticf and PREFIX.jsonl next to each other, mirroring the
 * prefix convention of the consuming toolkit. Progress and skip reasons
 * go to standard error. Exit codes: 0 on success, 1 when the run fails
 * (including zero usable images), 2 on usage errors.
 */
import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { backboneNames, DEFAULT_BACKBONE } from "./backbone.js";
import { BridgeManifest, extract, ExtractError } from "./extract.js";
import { SIDECAR_NAME } from "./sidecar.js";

const USAGE = `usage: feature-bridge <image-dir> --out PREFIX [options]

Encode every image in <image-dir> and write PREFIX.ticf (features) plus
PREFIX.jsonl (metadata), pairing each row with the capture time from the
directory's JSON sidecar.

options:
  --out PREFIX       output path prefix (required)
  --sidecar NAME     sidecar filename inside <image-dir> (default ${SIDECAR_NAME})
  --backbone NAME    encoder to run (default ${DEFAULT_BACKBONE})
  --manifest PATH    also write the run manifest as JSON
  -h, --help         show this help
`;

interface CliArgs {
  imageDir: string;
  out: string;
  sidecar: string;
  backbone: string;
  manifest: string | null;
}

class UsageError extends Error {}

function parseArgs(argv: string[]): CliArgs | "help" {
  let imageDir: string | null = null;
  let out: string | null = null;
  let sidecar = SIDECAR_NAME;
  let backbone = DEFAULT_BACKBONE;
  let manifest: string | null = null;

  const takeValue = (flag: string, i: number): string => {
    if (i + 1 >= argv.length) throw new UsageError(`${flag} needs a value`);
    return argv[i + 1];
  };

  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "-h" || arg === "--help") return "help";
    else if (arg === "--out") out = takeValue(arg, i++);
    else if (arg === "--sidecar") sidecar = takeValue(arg, i++);
    else if (arg === "--backbone") backbone = takeValue(arg, i++);
    else if (arg === "--manifest") manifest = takeValue(arg, i++);
    else if (arg.startsWith("-")) throw new UsageError(`unknown option ${arg}`);
    else if (imageDir === null) imageDir = arg;
    else throw new UsageError(`unexpected argument ${arg}`);
  }
  if (imageDir === null) throw new UsageError("missing <image-dir>");
  if (out === null) throw new UsageError("missing --out PREFIX");
  if (!backboneNames().includes(backbone)) {
    throw new UsageError(
      `unknown backbone ${backbone}, available: ${backboneNames().join(", ")}`,
    );
  }
  return { imageDir, out, sidecar, backbone, manifest };
}

function report(manifest: BridgeManifest, features: string, meta: string): void {
  const n = manifest.images.length;
  const skipped = manifest.skipped.length;
  console.error(
    `wrote ${n} row${n === 1 ? "" : "s"} (dim ${manifest.backbone.dim}) ` +
      `-> ${features} + ${meta}` +
      (skipped ? `; skipped ${skipped}` : ""),
  );
}

export function main(argv: string[]): number {
  let args: CliArgs | "help";
  try {
    args = parseArgs(argv);
  } catch (e) {
    console.error(`error: ${(e as Error).message}`);
    console.error(USAGE);
    return 2;
  }
  if (args === "help") {
    console.log(USAGE);
    return 0;
  }

  const features = `${args.out}.ticf`;
  const meta = `${args.out}.jsonl`;
  let manifest: BridgeManifest;
  try {
    manifest = extract(args.imageDir, features, meta, {
      backbone: args.backbone,
      sidecar: args.sidecar,
    });
  } catch (e) {
    if (e instanceof ExtractError) {
      console.error(`error: ${e.message}`);
      return 1;
    }
    console.error(`error: ${(e as Error).message}`);
    return 1;
  }

  if (args.manifest !== null) {
    writeFileSync(args.manifest, JSON.stringify(manifest, null, 2) + "\n");
  }
  report(manifest, features, meta);
  return 0;
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
