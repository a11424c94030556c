export { createBackend, registerBackend, PixelStatsBackend } from "./backends.js";
export type { BackendConfig, CropView, PersonDetection, SpecialistBackend } from "./backends.js";
export { extractRecords, detectionNodes, rleDecode, slotOrder } from "./extract.js";
export {
  DIMENSIONS,
  SCHEMA,
  detectionsDoc,
  featuresDoc,
  manifestDoc,
  validateFeaturesDoc,
} from "./schema.js";
export type { Dimension, FeatureRecordNode } from "./schema.js";
export { samplePhoto } from "./sample.js";
export { decodePpm, encodePpm, readImage, writeImage } from "./ppm.js";
export { runCli } from "./cli.js";
