export { Backbone, backboneNames, DEFAULT_BACKBONE, getBackbone, PooledRgbBackbone } from "./backbone.js";
export {
  BridgeManifest,
  extract,
  ExtractError,
  ExtractOptions,
  ManifestImage,
  SkippedImage,
} from "./extract.js";
export {
  FEATURE_MAGIC,
  FEATURE_VERSION,
  HEADER_BYTES,
  MetaRecord,
  readFeatureFile,
  readMetaFile,
  writeFeatureFile,
  writeMetaFile,
} from "./formats.js";
export {
  decodeJpeg,
  decodePgm,
  decodePng,
  decodePpm,
  decodeRaster,
  Raster,
  rasterExtensions,
  resizeBilinear,
} from "./raster.js";
export { parseSidecar, readSidecar, SIDECAR_NAME, SidecarEntry } from "./sidecar.js";
