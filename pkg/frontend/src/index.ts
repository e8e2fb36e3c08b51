export { FEAT_MAGIC, FEAT_VERSION, FeatParseError, encodeFeat, decodeFeat } from './feat'
export type { FeatTensor } from './feat'
export { ENCODERS, DEFAULT_ENCODER, EncodeError, getEncoder } from './encoders'
export type { Encoder, FeatureMap, RgbImage } from './encoders'
export { exportImageFeatures, decodePng, atomicWrite } from './export'
export type { ExportJob, ExportResult } from './export'
export { verifyRoundtrip, maskPooledEmbedding, downsampleMask, cosineAt } from './verify'
export type { BoolMask } from './verify'
