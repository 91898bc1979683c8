export { Y4MError, Y4MVideo, durationSeconds, encodeY4M, fps, parseY4M, readY4M } from "./y4m.js";
export { GrayFrame, resizeToWidth } from "./image.js";
export {
  FORMAT_VERSION,
  LANDMARK_COUNT,
  LandmarkFormatError,
  LandmarkFrame,
  LandmarkSequence,
  parseLandmarks,
  readLandmarkFile,
  serializeLandmarks,
  writeLandmarkFile,
} from "./landmarkFile.js";
export {
  EstimatorError,
  FaceEstimate,
  LandmarkEstimator,
  TemplateFitEstimator,
  createMediapipeEstimator,
} from "./estimator.js";
export {
  DEFAULT_CONFIG,
  ExcessiveGaps,
  ExtractionConfig,
  ExtractionError,
  ExtractionReport,
  NoFaceFound,
  extractFile,
  extractVideo,
  resampleIndices,
} from "./extract.js";
export { BatchResult, batchExtract } from "./batch.js";
export { FaceVideoParams, renderFaceVideo } from "./fixtures.js";
