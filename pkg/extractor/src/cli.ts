#!/usr/bin/env node
/**
 * fmim-extract: turn .y4m interview video into fmim-lmk/1 landmark files.
 *
 * Usage:
 *   fmim-extract extract <video.y4m> --out file.lmk [options]
 *   fmim-extract batch <video-dir> --out-dir DIR [options]
 *   fmim-extract render-fixture <out.y4m> [--frames N] [--fps N] [...]
 *
 * Options:
 *   --fps N              target frame rate (default 30)
 *   --width N            target frame width in px (default 640)
 *   --min-confidence X   face-detection acceptance threshold (default 0.25)
 *   --max-gap-seconds X  longest tolerated detection dropout (default 1.0)
 *   --backend NAME       template | mediapipe (default template)
 *   --template PATH      468-point rig for the template backend
 *   --model PATH         model asset for the mediapipe backend
 *
 * Exit codes: 0 ok, 2 usage, 3 extraction/data failure.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { batchExtract } from "./batch.js";
import { EstimatorError, LandmarkEstimator, TemplateFitEstimator, createMediapipeEstimator } from "./estimator.js";
import { DEFAULT_CONFIG, ExtractionConfig, ExtractionError, extractFile } from "./extract.js";
import { renderFaceVideo } from "./fixtures.js";
import { encodeY4M } from "./y4m.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const BUNDLED_TEMPLATE = join(HERE, "..", "fixtures", "neutral_face_468.lmk");

interface Flags {
  [key: string]: string;
}

function parseArgs(argv: string[]): { positional: string[]; flags: Flags } {
  const positional: string[] = [];
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const key = arg.slice(2);
      const value = argv[i + 1];
      if (value === undefined || value.startsWith("--")) {
        flags[key] = "true";
      } else {
        flags[key] = value;
        i++;
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, flags };
}

function numberFlag(flags: Flags, name: string, fallback: number): number {
  if (!(name in flags)) {
    return fallback;
  }
  const v = Number(flags[name]);
  if (!Number.isFinite(v)) {
    throw new UsageError(`--${name} expects a number, got ${flags[name]}`);
  }
  return v;
}

class UsageError extends Error {}

function buildConfig(flags: Flags): ExtractionConfig {
  const cfg: ExtractionConfig = {
    targetFps: numberFlag(flags, "fps", DEFAULT_CONFIG.targetFps),
    targetWidth: numberFlag(flags, "width", DEFAULT_CONFIG.targetWidth),
    grayscale: flags["color"] === undefined,
    minConfidence: numberFlag(flags, "min-confidence", DEFAULT_CONFIG.minConfidence),
    maxGapSeconds: numberFlag(flags, "max-gap-seconds", DEFAULT_CONFIG.maxGapSeconds),
  };
  if (!(cfg.targetFps > 0) || cfg.targetWidth < 64) {
    throw new UsageError("--fps must be positive and --width at least 64");
  }
  return cfg;
}

async function buildEstimator(flags: Flags, cfg: ExtractionConfig): Promise<LandmarkEstimator> {
  const backend = flags["backend"] ?? "template";
  if (backend === "template") {
    return new TemplateFitEstimator({
      templatePath: flags["template"] ?? BUNDLED_TEMPLATE,
      minConfidence: cfg.minConfidence,
    });
  }
  if (backend === "mediapipe") {
    if (!flags["model"]) {
      throw new UsageError("--backend mediapipe needs --model <face_landmarker asset>");
    }
    return createMediapipeEstimator(flags["model"]);
  }
  throw new UsageError(`unknown backend ${backend}; use template or mediapipe`);
}

const USAGE = `usage: fmim-extract <extract|batch|render-fixture> ... (see --help)`;

export async function main(argv: string[]): Promise<number> {
  const { positional, flags } = parseArgs(argv);
  if (flags["help"] !== undefined || positional[0] === "help") {
    console.log(USAGE);
    return 0;
  }
  try {
    const command = positional[0];
    if (command === "extract") {
      if (positional.length !== 2 || !flags["out"]) {
        throw new UsageError("extract needs a video path and --out <file.lmk>");
      }
      const cfg = buildConfig(flags);
      const estimator = await buildEstimator(flags, cfg);
      mkdirSync(dirname(flags["out"]), { recursive: true });
      const report = extractFile(positional[1], flags["out"], estimator, cfg, flags["participant"]);
      console.log(`[extract] ${report.source}: ${report.outputFrames} frames at ` +
        `${report.outputFps} fps -> ${flags["out"]} (${report.gapFrames.length} gap frames)`);
      return 0;
    }
    if (command === "batch") {
      if (positional.length !== 2 || !flags["out-dir"]) {
        throw new UsageError("batch needs a video directory and --out-dir <dir>");
      }
      const cfg = buildConfig(flags);
      const estimator = await buildEstimator(flags, cfg);
      mkdirSync(flags["out-dir"], { recursive: true });
      const result = batchExtract(positional[1], flags["out-dir"], estimator, cfg);
      console.log(`[batch] wrote ${result.written.length} landmark files; stub: ${result.manifestStub}`);
      for (const failure of result.failures) {
        console.error(`[batch] FAILED ${failure.video}: ${failure.error}`);
      }
      return result.failures.length ? 3 : 0;
    }
    if (command === "render-fixture") {
      if (positional.length !== 2) {
        throw new UsageError("render-fixture needs an output path");
      }
      const video = renderFaceVideo({
        width: numberFlag(flags, "render-width", 320),
        height: numberFlag(flags, "render-height", 240),
        fps: numberFlag(flags, "fps", 30),
        frames: numberFlag(flags, "frames", 60),
        noise: numberFlag(flags, "noise", 2),
        seed: numberFlag(flags, "seed", 1),
      });
      mkdirSync(dirname(positional[1]), { recursive: true });
      writeFileSync(positional[1], encodeY4M(video));
      console.log(`[render-fixture] wrote ${positional[1]} (${video.frames.length} frames)`);
      return 0;
    }
    throw new UsageError(USAGE);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    if (err instanceof ExtractionError || err instanceof EstimatorError) {
      console.error(`error: ${err.message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 3;
  }
}

const invokedDirectly = process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1];
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
