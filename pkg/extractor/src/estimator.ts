/**
 * Pluggable 468-point face-mesh estimation.
 *
 * Two backends:
 *  - "template": hermetic fallback for fixtures and tests. Detects the
 *    bright face region by luma threshold, fits the bundled neutral
 *    468-point rig into the detected bounding box. Deterministic, no
 *    native dependencies.
 *  - "mediapipe": thin adapter over @mediapipe/tasks-vision when that
 *    optional dependency (plus its model asset) is installed.
 */

import { GrayFrame } from "./image.js";
import { LANDMARK_COUNT, readLandmarkFile } from "./landmarkFile.js";

export interface FaceEstimate {
  /** flat [x, y, z] * 468, normalized to the frame */
  coords: Float64Array;
  confidence: number;
}

export interface LandmarkEstimator {
  /** null when no face is detected with sufficient confidence */
  estimate(frame: GrayFrame): FaceEstimate | null;
}

export class EstimatorError extends Error {}

interface TemplateRig {
  coords: Float64Array; // normalized template, flat
  x0: number;
  x1: number;
  y0: number;
  y1: number;
}

function loadRig(templatePath: string): TemplateRig {
  const seq = readLandmarkFile(templatePath);
  if (seq.frames.length < 1 || seq.frames[0].coords.length !== LANDMARK_COUNT * 3) {
    throw new EstimatorError(`template rig ${templatePath} is not a 468-point frame`);
  }
  const coords = seq.frames[0].coords;
  let x0 = 1, x1 = 0, y0 = 1, y1 = 0;
  for (let i = 0; i < LANDMARK_COUNT; i++) {
    x0 = Math.min(x0, coords[3 * i]);
    x1 = Math.max(x1, coords[3 * i]);
    y0 = Math.min(y0, coords[3 * i + 1]);
    y1 = Math.max(y1, coords[3 * i + 1]);
  }
  if (x1 - x0 < 0.05 || y1 - y0 < 0.05) {
    throw new EstimatorError("template rig is degenerate");
  }
  return { coords, x0, x1, y0, y1 };
}

export interface TemplateEstimatorOptions {
  templatePath: string;
  /** luma cut between background and face (0..255) */
  threshold?: number;
  /** minimum fraction of the frame the face box must cover */
  minConfidence?: number;
}

/**
 * Threshold/bounding-box detector carrying the template rig.
 *
 * Confidence is the fraction of bounding-box pixels above threshold: a
 * filled face region scores near its fill factor, random speckle
 * scores near zero.
 */
export class TemplateFitEstimator implements LandmarkEstimator {
  private rig: TemplateRig;
  private threshold: number;
  private minConfidence: number;

  constructor(options: TemplateEstimatorOptions) {
    this.rig = loadRig(options.templatePath);
    this.threshold = options.threshold ?? 96;
    this.minConfidence = options.minConfidence ?? 0.25;
  }

  estimate(frame: GrayFrame): FaceEstimate | null {
    const { width, height, pixels } = frame;
    let minX = width, maxX = -1, minY = height, maxY = -1, bright = 0;
    for (let y = 0; y < height; y++) {
      const row = y * width;
      for (let x = 0; x < width; x++) {
        if (pixels[row + x] >= this.threshold) {
          bright++;
          if (x < minX) minX = x;
          if (x > maxX) maxX = x;
          if (y < minY) minY = y;
          if (y > maxY) maxY = y;
        }
      }
    }
    if (maxX < 0 || maxX - minX < 4 || maxY - minY < 4) {
      return null;
    }
    const boxArea = (maxX - minX + 1) * (maxY - minY + 1);
    const confidence = bright / boxArea;
    if (confidence < this.minConfidence) {
      return null;
    }
    // map the rig bounding box onto the detected box
    const bx0 = minX / width;
    const bx1 = (maxX + 1) / width;
    const by0 = minY / height;
    const by1 = (maxY + 1) / height;
    const sx = (bx1 - bx0) / (this.rig.x1 - this.rig.x0);
    const sy = (by1 - by0) / (this.rig.y1 - this.rig.y0);
    const out = new Float64Array(LANDMARK_COUNT * 3);
    for (let i = 0; i < LANDMARK_COUNT; i++) {
      const tx = this.rig.coords[3 * i];
      const ty = this.rig.coords[3 * i + 1];
      const tz = this.rig.coords[3 * i + 2];
      out[3 * i] = bx0 + (tx - this.rig.x0) * sx;
      out[3 * i + 1] = by0 + (ty - this.rig.y0) * sy;
      out[3 * i + 2] = tz * sx; // depth shares the x scale
    }
    return { coords: out, confidence };
  }
}

/**
 * Adapter stub for the production face-mesh backend. Loading is
 * deferred so the package stays hermetic; a clear error explains what
 * to install when the backend is requested but unavailable.
 */
export async function createMediapipeEstimator(modelAssetPath: string): Promise<LandmarkEstimator> {
  let tasksVision: any;
  try {
    tasksVision = await import("@mediapipe/tasks-vision" as string);
  } catch {
    throw new EstimatorError(
      "the mediapipe backend needs the optional '@mediapipe/tasks-vision' package " +
      "and a face_landmarker model asset; install them or use --backend template");
  }
  const { FilesetResolver, FaceLandmarker } = tasksVision;
  const fileset = await FilesetResolver.forVisionTasks("node_modules/@mediapipe/tasks-vision/wasm");
  const landmarker = await FaceLandmarker.createFromOptions(fileset, {
    baseOptions: { modelAssetPath },
    runningMode: "VIDEO",
    numFaces: 1,
  });
  let timestamp = 0;
  return {
    estimate(frame: GrayFrame): FaceEstimate | null {
      // tasks-vision expects RGBA image data
      const rgba = new Uint8ClampedArray(frame.width * frame.height * 4);
      for (let i = 0; i < frame.pixels.length; i++) {
        const v = frame.pixels[i];
        rgba[4 * i] = v;
        rgba[4 * i + 1] = v;
        rgba[4 * i + 2] = v;
        rgba[4 * i + 3] = 255;
      }
      const result = landmarker.detectForVideo(
        { data: rgba, width: frame.width, height: frame.height }, timestamp++);
      const face = result?.faceLandmarks?.[0];
      if (!face || face.length !== LANDMARK_COUNT) {
        return null;
      }
      const coords = new Float64Array(LANDMARK_COUNT * 3);
      for (let i = 0; i < LANDMARK_COUNT; i++) {
        coords[3 * i] = face[i].x;
        coords[3 * i + 1] = face[i].y;
        coords[3 * i + 2] = face[i].z;
      }
      return { coords, confidence: 1.0 };
    },
  };
}
