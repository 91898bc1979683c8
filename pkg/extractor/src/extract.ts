/**
 * Video-to-landmark extraction pipeline.
 *
 * Decode -> resample to the target rate -> resize to the target width
 * -> estimate 468 landmarks per frame -> emit an fmim-lmk/1 file plus
 * a sidecar report.
 *
 * Detection dropouts are never interpolated: a frame with no face
 * repeats the last detected landmarks and is recorded as a gap marker
 * in the sidecar; a gap run longer than the configured limit aborts
 * the extraction. Frames before the first detection are trimmed (and
 * counted as leading gaps).
 */

import { writeFileSync } from "node:fs";
import { basename } from "node:path";

import { FaceEstimate, LandmarkEstimator } from "./estimator.js";
import { GrayFrame, resizeToWidth } from "./image.js";
import { LandmarkFrame, LandmarkSequence, writeLandmarkFile } from "./landmarkFile.js";
import { Y4MVideo, fps as videoFps, readY4M } from "./y4m.js";

export interface ExtractionConfig {
  targetFps: number;
  targetWidth: number;
  grayscale: boolean;
  minConfidence: number;
  /** a gap run longer than this aborts the extraction */
  maxGapSeconds: number;
}

export const DEFAULT_CONFIG: ExtractionConfig = {
  targetFps: 30,
  targetWidth: 640,
  grayscale: true,
  minConfidence: 0.25,
  maxGapSeconds: 1.0,
};

export interface ExtractionReport {
  participantId: string;
  source: string;
  sourceFrames: number;
  sourceFps: number;
  outputFrames: number;
  outputFps: number;
  widthPx: number;
  heightPx: number;
  leadingGapFrames: number;
  /** output frame indices whose landmarks repeat the previous detection */
  gapFrames: number[];
}

export class ExtractionError extends Error {}
export class NoFaceFound extends ExtractionError {}
export class ExcessiveGaps extends ExtractionError {}

export function resampleIndices(sourceFrames: number, sourceFps: number, targetFps: number): number[] {
  const indices: number[] = [];
  for (let k = 0; ; k++) {
    const src = Math.round((k * sourceFps) / targetFps);
    if (src >= sourceFrames) {
      break;
    }
    indices.push(src);
  }
  return indices;
}

export function extractVideo(
  video: Y4MVideo,
  participantId: string,
  estimator: LandmarkEstimator,
  cfg: ExtractionConfig = DEFAULT_CONFIG,
  source = "<memory>",
): { sequence: LandmarkSequence; report: ExtractionReport } {
  const srcFps = videoFps(video);
  const picks = resampleIndices(video.frames.length, srcFps, cfg.targetFps);
  const maxGapFrames = Math.floor(cfg.maxGapSeconds * cfg.targetFps);

  let width = 0;
  let height = 0;
  const estimates: (FaceEstimate | null)[] = [];
  for (const srcIndex of picks) {
    let frame: GrayFrame = {
      width: video.width,
      height: video.height,
      pixels: video.frames[srcIndex],
    };
    frame = resizeToWidth(frame, cfg.targetWidth);
    width = frame.width;
    height = frame.height;
    estimates.push(estimator.estimate(frame));
  }

  const firstHit = estimates.findIndex((e) => e !== null);
  if (firstHit < 0) {
    throw new NoFaceFound(`${source}: no frame contained a detectable face`);
  }
  if (firstHit > maxGapFrames) {
    throw new ExcessiveGaps(
      `${source}: ${firstHit} leading frames (${(firstHit / cfg.targetFps).toFixed(2)} s) ` +
      `have no detected face (limit ${cfg.maxGapSeconds} s)`);
  }

  const frames: LandmarkFrame[] = [];
  const gapFrames: number[] = [];
  let lastCoords: Float64Array | null = null;
  let gapRun = 0;
  for (let j = firstHit; j < estimates.length; j++) {
    const outIndex = j - firstHit;
    const estimate = estimates[j];
    if (estimate === null) {
      gapRun++;
      if (gapRun > maxGapFrames) {
        throw new ExcessiveGaps(
          `${source}: gap of ${gapRun} frames (> ${cfg.maxGapSeconds} s) at output frame ${outIndex}`);
      }
      gapFrames.push(outIndex);
    } else {
      gapRun = 0;
      lastCoords = estimate.coords;
    }
    frames.push({
      frameIndex: outIndex,
      timestampMs: Math.round((outIndex * 1000) / cfg.targetFps),
      coords: Float64Array.from(lastCoords as Float64Array),
    });
  }

  const sequence: LandmarkSequence = {
    participantId,
    fps: cfg.targetFps,
    widthPx: width,
    heightPx: height,
    frames,
  };
  const report: ExtractionReport = {
    participantId,
    source,
    sourceFrames: video.frames.length,
    sourceFps: srcFps,
    outputFrames: frames.length,
    outputFps: cfg.targetFps,
    widthPx: width,
    heightPx: height,
    leadingGapFrames: firstHit,
    gapFrames,
  };
  return { sequence, report };
}

export function extractFile(
  videoPath: string,
  outPath: string,
  estimator: LandmarkEstimator,
  cfg: ExtractionConfig = DEFAULT_CONFIG,
  participantId?: string,
): ExtractionReport {
  const video = readY4M(videoPath);
  const pid = participantId ?? basename(videoPath).replace(/\.y4m$/i, "");
  const { sequence, report } = extractVideo(video, pid, estimator, cfg, videoPath);
  writeLandmarkFile(sequence, outPath);
  writeFileSync(`${outPath}.report.json`, JSON.stringify(report, null, 2) + "\n");
  return report;
}
