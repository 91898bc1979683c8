import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { EstimatorError, TemplateFitEstimator, createMediapipeEstimator } from "../src/estimator.js";
import { LANDMARK_COUNT } from "../src/landmarkFile.js";
import { renderFaceVideo } from "../src/fixtures.js";
import { resizeToWidth } from "../src/image.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const TEMPLATE = join(HERE, "..", "fixtures", "neutral_face_468.lmk");

function faceFrame() {
  const video = renderFaceVideo({ width: 320, height: 240, fps: 30, frames: 1 });
  return { width: 320, height: 240, pixels: video.frames[0] };
}

describe("template-fit estimator", () => {
  it("places all 468 landmarks inside the frame", () => {
    const est = new TemplateFitEstimator({ templatePath: TEMPLATE });
    const result = est.estimate(faceFrame());
    expect(result).not.toBeNull();
    expect(result!.coords.length).toBe(LANDMARK_COUNT * 3);
    for (let i = 0; i < LANDMARK_COUNT; i++) {
      expect(result!.coords[3 * i]).toBeGreaterThanOrEqual(0);
      expect(result!.coords[3 * i]).toBeLessThanOrEqual(1);
      expect(result!.coords[3 * i + 1]).toBeGreaterThanOrEqual(0);
      expect(result!.coords[3 * i + 1]).toBeLessThanOrEqual(1);
    }
  });

  it("keeps the eye corners ordered and level", () => {
    const est = new TemplateFitEstimator({ templatePath: TEMPLATE });
    const c = est.estimate(faceFrame())!.coords;
    expect(c[3 * 33]).toBeLessThan(c[3 * 263]);
    expect(Math.abs(c[3 * 33 + 1] - c[3 * 263 + 1])).toBeLessThan(1e-9);
  });

  it("returns null on a dark frame", () => {
    const est = new TemplateFitEstimator({ templatePath: TEMPLATE });
    const pixels = new Uint8Array(320 * 240).fill(10);
    expect(est.estimate({ width: 320, height: 240, pixels })).toBeNull();
  });

  it("rejects sparse speckle below the confidence floor", () => {
    const est = new TemplateFitEstimator({ templatePath: TEMPLATE, minConfidence: 0.25 });
    const pixels = new Uint8Array(320 * 240).fill(10);
    // two distant bright dots span a large, nearly-empty box
    pixels[20 * 320 + 20] = 255;
    pixels[200 * 320 + 300] = 255;
    expect(est.estimate({ width: 320, height: 240, pixels })).toBeNull();
  });

  it("tracks the face under resize", () => {
    const est = new TemplateFitEstimator({ templatePath: TEMPLATE });
    const big = faceFrame();
    const small = resizeToWidth(big, 160);
    const a = est.estimate(big)!.coords;
    const b = est.estimate(small)!.coords;
    for (const lm of [0, 33, 263, 400]) {
      expect(Math.abs(a[3 * lm] - b[3 * lm])).toBeLessThan(0.02);
      expect(Math.abs(a[3 * lm + 1] - b[3 * lm + 1])).toBeLessThan(0.02);
    }
  });
});

describe("mediapipe adapter", () => {
  it("fails with an actionable error when the backend is not installed", async () => {
    await expect(createMediapipeEstimator("/nonexistent/model.task"))
      .rejects.toThrow(EstimatorError);
    await expect(createMediapipeEstimator("/nonexistent/model.task"))
      .rejects.toThrow(/tasks-vision/);
  });
});
