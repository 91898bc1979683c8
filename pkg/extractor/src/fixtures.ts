/**
 * Synthetic face-video rendering for tests and smoke runs.
 *
 * Draws a bright filled face ellipse (plus darker feature blotches so
 * frames are not flat) against a dark background, optionally jittered
 * per frame with a deterministic LCG so repeated renders are
 * byte-identical.
 */

import { Y4MVideo } from "./y4m.js";

export interface FaceVideoParams {
  width: number;
  height: number;
  fps: number;
  frames: number;
  /** face center as a fraction of the frame */
  centerX?: number;
  centerY?: number;
  /** face half-extents as fractions of width/height */
  radiusX?: number;
  radiusY?: number;
  /** peak per-pixel uniform noise, 0 disables */
  noise?: number;
  /** frame indices rendered without any face (dropout simulation) */
  blankFrames?: number[];
  seed?: number;
}

function lcg(seed: number): () => number {
  let state = (seed >>> 0) || 1;
  return () => {
    state = (1664525 * state + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

export function renderFaceVideo(params: FaceVideoParams): Y4MVideo {
  const {
    width, height, fps, frames,
    centerX = 0.5, centerY = 0.48,
    radiusX = 0.22, radiusY = 0.3,
    noise = 0, blankFrames = [], seed = 1,
  } = params;
  const rand = lcg(seed);
  const blanks = new Set(blankFrames);
  const out: Uint8Array[] = [];
  const cx = centerX * width;
  const cy = centerY * height;
  const rx = radiusX * width;
  const ry = radiusY * height;
  for (let f = 0; f < frames; f++) {
    const pixels = new Uint8Array(width * height);
    const blank = blanks.has(f);
    for (let y = 0; y < height; y++) {
      for (let x = 0; x < width; x++) {
        let v = 16; // dark background
        if (!blank) {
          const dx = (x - cx) / rx;
          const dy = (y - cy) / ry;
          const inside = dx * dx + dy * dy <= 1.0;
          if (inside) {
            v = 200;
            // darker eye and mouth regions for texture
            const ex1 = (x - (cx - 0.45 * rx)) ** 2 + (y - (cy - 0.25 * ry)) ** 2;
            const ex2 = (x - (cx + 0.45 * rx)) ** 2 + (y - (cy - 0.25 * ry)) ** 2;
            const mo = ((x - cx) / (0.4 * rx)) ** 2 + ((y - (cy + 0.45 * ry)) / (0.2 * ry)) ** 2;
            const eyeR = (0.12 * rx) ** 2;
            if (ex1 <= eyeR || ex2 <= eyeR || mo <= 1.0) {
              v = 140;
            }
          }
        }
        if (noise > 0) {
          v += Math.round((rand() - 0.5) * 2 * noise);
        }
        pixels[y * width + x] = Math.max(0, Math.min(255, v));
      }
    }
    out.push(pixels);
  }
  return { width, height, fpsNum: Math.round(fps), fpsDen: 1, frames: out };
}
