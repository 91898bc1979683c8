/**
 * Directory-level extraction: every .y4m becomes a landmark file, and
 * a manifest stub is emitted with the label columns left blank for a
 * later join against the self-report table.
 */

import { readdirSync, writeFileSync } from "node:fs";
import { basename, join } from "node:path";

import { LandmarkEstimator } from "./estimator.js";
import { DEFAULT_CONFIG, ExtractionConfig, ExtractionError, extractFile } from "./extract.js";

export interface BatchResult {
  written: string[];
  failures: { video: string; error: string }[];
  manifestStub: string;
}

const STUB_HEADER = "participant_id,landmark_file,honest_self_promotion,honest_defensiveness," +
  "deceptive_image_creation,deceptive_image_protection,split";

export function batchExtract(
  videoDir: string,
  outDir: string,
  estimator: LandmarkEstimator,
  cfg: ExtractionConfig = DEFAULT_CONFIG,
): BatchResult {
  const videos = readdirSync(videoDir).filter((f) => f.toLowerCase().endsWith(".y4m")).sort();
  if (videos.length === 0) {
    throw new ExtractionError(`${videoDir} contains no .y4m videos`);
  }
  const written: string[] = [];
  const failures: { video: string; error: string }[] = [];
  const rows: string[] = [STUB_HEADER];
  for (const video of videos) {
    const pid = basename(video).replace(/\.y4m$/i, "");
    const outPath = join(outDir, `${pid}.lmk`);
    try {
      extractFile(join(videoDir, video), outPath, estimator, cfg, pid);
      written.push(outPath);
      rows.push(`${pid},${pid}.lmk,,,,,`);
    } catch (err) {
      failures.push({ video, error: (err as Error).message });
    }
  }
  const manifestStub = join(outDir, "manifest.stub.csv");
  writeFileSync(manifestStub, rows.join("\n") + "\n");
  return { written, failures, manifestStub };
}
