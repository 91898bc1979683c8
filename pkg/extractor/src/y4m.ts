/**
 * Minimal YUV4MPEG2 (.y4m) reader/writer.
 *
 * Only what the extraction pipeline needs: the stream header (size,
 * frame rate, colorspace), and per-frame access to the luma plane.
 * Supported colorspaces: C420 family (chroma subsampled 2x2), C444,
 * and Cmono. Chroma planes are skipped; the pipeline is grayscale.
 */

import { readFileSync } from "node:fs";

export interface Y4MVideo {
  width: number;
  height: number;
  fpsNum: number;
  fpsDen: number;
  /** luma planes, one Uint8Array of width*height per frame */
  frames: Uint8Array[];
}

export function fps(video: Y4MVideo): number {
  return video.fpsNum / video.fpsDen;
}

export function durationSeconds(video: Y4MVideo): number {
  return video.frames.length / fps(video);
}

export class Y4MError extends Error {}

const MAGIC = "YUV4MPEG2";

function chromaBytes(colorspace: string, width: number, height: number): number {
  if (colorspace.startsWith("C420")) {
    return 2 * Math.ceil(width / 2) * Math.ceil(height / 2);
  }
  if (colorspace === "C444") {
    return 2 * width * height;
  }
  if (colorspace === "Cmono") {
    return 0;
  }
  throw new Y4MError(`unsupported colorspace ${colorspace}`);
}

export function parseY4M(data: Buffer): Y4MVideo {
  const headerEnd = data.indexOf(0x0a);
  if (headerEnd < 0) {
    throw new Y4MError("missing stream-header terminator");
  }
  const header = data.subarray(0, headerEnd).toString("ascii");
  const parts = header.split(" ");
  if (parts[0] !== MAGIC) {
    throw new Y4MError(`not a YUV4MPEG2 stream (got ${parts[0] ?? "empty"})`);
  }
  let width = 0;
  let height = 0;
  let fpsNum = 0;
  let fpsDen = 1;
  let colorspace = "C420";
  for (const token of parts.slice(1)) {
    if (token.startsWith("W")) width = Number(token.slice(1));
    else if (token.startsWith("H")) height = Number(token.slice(1));
    else if (token.startsWith("F")) {
      const [num, den] = token.slice(1).split(":").map(Number);
      fpsNum = num;
      fpsDen = den || 1;
    } else if (token.startsWith("C")) colorspace = token;
    // interlacing and aspect tokens are irrelevant to this pipeline
  }
  if (!Number.isInteger(width) || width <= 0 || !Number.isInteger(height) || height <= 0) {
    throw new Y4MError(`invalid frame size ${width}x${height}`);
  }
  if (!(fpsNum > 0) || !(fpsDen > 0)) {
    throw new Y4MError("missing or invalid frame rate");
  }
  const lumaBytes = width * height;
  const skip = chromaBytes(colorspace, width, height);
  const frames: Uint8Array[] = [];
  let pos = headerEnd + 1;
  while (pos < data.length) {
    const frameHeaderEnd = data.indexOf(0x0a, pos);
    if (frameHeaderEnd < 0) {
      throw new Y4MError(`truncated frame header at byte ${pos}`);
    }
    const marker = data.subarray(pos, frameHeaderEnd).toString("ascii");
    if (!marker.startsWith("FRAME")) {
      throw new Y4MError(`expected FRAME marker at byte ${pos}, got ${marker}`);
    }
    const start = frameHeaderEnd + 1;
    const end = start + lumaBytes + skip;
    if (end > data.length) {
      throw new Y4MError(`truncated frame data at byte ${start}`);
    }
    frames.push(new Uint8Array(data.subarray(start, start + lumaBytes)));
    pos = end;
  }
  if (frames.length === 0) {
    throw new Y4MError("stream contains no frames");
  }
  return { width, height, fpsNum, fpsDen, frames };
}

export function readY4M(path: string): Y4MVideo {
  let data: Buffer;
  try {
    data = readFileSync(path);
  } catch (err) {
    throw new Y4MError(`cannot read ${path}: ${(err as Error).message}`);
  }
  return parseY4M(data);
}

/** Serialize luma-only frames as Cmono; used by fixtures and tests. */
export function encodeY4M(video: Y4MVideo): Buffer {
  const head = `${MAGIC} W${video.width} H${video.height} F${video.fpsNum}:${video.fpsDen} Ip A1:1 Cmono\n`;
  const chunks: Buffer[] = [Buffer.from(head, "ascii")];
  for (const frame of video.frames) {
    if (frame.length !== video.width * video.height) {
      throw new Y4MError("frame size does not match the stream header");
    }
    chunks.push(Buffer.from("FRAME\n", "ascii"), Buffer.from(frame));
  }
  return Buffer.concat(chunks);
}
