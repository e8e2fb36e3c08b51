/**
 * Deterministic image encoders producing (C, fh, fw) feature maps.
 *
 * The default "boxmean" encoder mirrors the toolkit's toy encoder: RGB
 * channels box-averaged to the target resolution plus two normalized
 * coordinate channels (C = 5). A pretrained network can be dropped in by
 * registering another Encoder; the file contract stays the same.
 */

export interface RgbImage {
  width: number
  height: number
  /** RGBA byte rows as decoded from PNG */
  data: Buffer
}

export interface FeatureMap {
  channels: number
  fh: number
  fw: number
  /** row-major (C, fh, fw), double precision while in memory */
  values: Float64Array
}

export type Encoder = (image: RgbImage, resolution: number) => FeatureMap

export class EncodeError extends Error {}

function boxmean(image: RgbImage, resolution: number): FeatureMap {
  const { width, height, data } = image
  if (width % resolution !== 0 || height % resolution !== 0) {
    throw new EncodeError(
      `image ${width}x${height} not divisible by resolution ${resolution}`,
    )
  }
  const sx = width / resolution
  const sy = height / resolution
  const channels = 5
  const plane = resolution * resolution
  const values = new Float64Array(channels * plane)

  for (let row = 0; row < resolution; row++) {
    for (let col = 0; col < resolution; col++) {
      let r = 0
      let g = 0
      let b = 0
      for (let y = row * sy; y < (row + 1) * sy; y++) {
        for (let x = col * sx; x < (col + 1) * sx; x++) {
          const at = 4 * (y * width + x)
          r += data[at]
          g += data[at + 1]
          b += data[at + 2]
        }
      }
      const n = sx * sy * 255
      const cell = row * resolution + col
      values[cell] = r / n
      values[plane + cell] = g / n
      values[2 * plane + cell] = b / n
      values[3 * plane + cell] = (col + 0.5) / resolution
      values[4 * plane + cell] = (row + 0.5) / resolution
    }
  }
  return { channels, fh: resolution, fw: resolution, values }
}

function luminance(image: RgbImage, resolution: number): FeatureMap {
  const rgb = boxmean(image, resolution)
  const plane = resolution * resolution
  const values = new Float64Array(3 * plane)
  for (let cell = 0; cell < plane; cell++) {
    values[cell] =
      0.2126 * rgb.values[cell] +
      0.7152 * rgb.values[plane + cell] +
      0.0722 * rgb.values[2 * plane + cell]
    values[plane + cell] = rgb.values[3 * plane + cell]
    values[2 * plane + cell] = rgb.values[4 * plane + cell]
  }
  return { channels: 3, fh: resolution, fw: resolution, values }
}

export const ENCODERS: Record<string, Encoder> = {
  boxmean,
  luminance,
}

export const DEFAULT_ENCODER = 'boxmean'

export function getEncoder(name: string): Encoder {
  const encoder = ENCODERS[name]
  if (!encoder) {
    throw new EncodeError(
      `unknown encoder ${JSON.stringify(name)}; available: ${Object.keys(ENCODERS).join(', ')}`,
    )
  }
  return encoder
}
