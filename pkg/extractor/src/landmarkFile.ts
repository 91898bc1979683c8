/**
 * Writer/reader for the "fmim-lmk/1" landmark interchange format.
 *
 * One header line (format tag, participant, fps, frame size), then one
 * line per frame: frame index, timestamp in ms, and 468 x/y/z triplets
 * at a fixed 6 decimal places. x and y are fractions of frame width
 * and height; z shares the x scale.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const FORMAT_VERSION = "fmim-lmk/1";
export const LANDMARK_COUNT = 468;

export interface LandmarkFrame {
  frameIndex: number;
  timestampMs: number;
  /** flat [x0, y0, z0, x1, ...] of length 468*3 */
  coords: Float64Array;
}

export interface LandmarkSequence {
  participantId: string;
  fps: number;
  widthPx: number;
  heightPx: number;
  frames: LandmarkFrame[];
}

export class LandmarkFormatError extends Error {}

export function serializeLandmarks(seq: LandmarkSequence): string {
  if (!seq.participantId || /\s/.test(seq.participantId)) {
    throw new LandmarkFormatError(`invalid participant id ${JSON.stringify(seq.participantId)}`);
  }
  if (seq.frames.length === 0) {
    throw new LandmarkFormatError("sequence has no frames");
  }
  const lines = [
    `${FORMAT_VERSION} participant=${seq.participantId} fps=${seq.fps.toFixed(6)} ` +
    `width=${seq.widthPx} height=${seq.heightPx}`,
  ];
  for (const frame of seq.frames) {
    if (frame.coords.length !== LANDMARK_COUNT * 3) {
      throw new LandmarkFormatError(
        `frame ${frame.frameIndex} has ${frame.coords.length / 3} landmarks, expected ${LANDMARK_COUNT}`);
    }
    const parts = new Array<string>(2 + frame.coords.length);
    parts[0] = String(frame.frameIndex);
    parts[1] = String(frame.timestampMs);
    for (let i = 0; i < frame.coords.length; i++) {
      parts[i + 2] = frame.coords[i].toFixed(6);
    }
    lines.push(parts.join(" "));
  }
  return lines.join("\n") + "\n";
}

export function writeLandmarkFile(seq: LandmarkSequence, path: string): void {
  writeFileSync(path, serializeLandmarks(seq), { encoding: "utf-8" });
}

export function parseLandmarks(text: string): LandmarkSequence {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") {
    lines.pop();
  }
  if (lines.length === 0) {
    throw new LandmarkFormatError("empty landmark file");
  }
  const header = lines[0].split(" ");
  if (header[0] !== FORMAT_VERSION) {
    throw new LandmarkFormatError(`unknown format tag ${header[0]}`);
  }
  const fields = new Map<string, string>();
  for (const token of header.slice(1)) {
    const eq = token.indexOf("=");
    if (eq < 0) {
      throw new LandmarkFormatError(`malformed header token ${token}`);
    }
    fields.set(token.slice(0, eq), token.slice(eq + 1));
  }
  const participantId = fields.get("participant");
  const fps = Number(fields.get("fps"));
  const widthPx = Number(fields.get("width"));
  const heightPx = Number(fields.get("height"));
  if (!participantId || !(fps > 0) || !(widthPx > 0) || !(heightPx > 0)) {
    throw new LandmarkFormatError("incomplete or invalid header");
  }
  const frames: LandmarkFrame[] = [];
  for (let lineNo = 1; lineNo < lines.length; lineNo++) {
    const parts = lines[lineNo].split(" ");
    if (parts.length !== 2 + LANDMARK_COUNT * 3) {
      throw new LandmarkFormatError(
        `line ${lineNo + 1}: expected ${2 + LANDMARK_COUNT * 3} fields, got ${parts.length}`);
    }
    const coords = new Float64Array(LANDMARK_COUNT * 3);
    for (let i = 0; i < coords.length; i++) {
      const v = Number(parts[i + 2]);
      if (!Number.isFinite(v)) {
        throw new LandmarkFormatError(`line ${lineNo + 1}: bad coordinate ${parts[i + 2]}`);
      }
      coords[i] = v;
    }
    frames.push({
      frameIndex: Number(parts[0]),
      timestampMs: Number(parts[1]),
      coords,
    });
  }
  return { participantId, fps, widthPx, heightPx, frames };
}

export function readLandmarkFile(path: string): LandmarkSequence {
  return parseLandmarks(readFileSync(path, "utf-8"));
}
