import * as fs from 'fs'

import { decodeFeat, encodeFeat, FeatTensor } from './feat'

/** Parse, re-serialize, and compare bytes; also sanity-check the header. */
export function verifyRoundtrip(file: string): boolean {
  const data = fs.readFileSync(file)
  const tensor = decodeFeat(data, file)
  const again = encodeFeat(tensor)
  return again.equals(data)
}

export interface BoolMask {
  width: number
  height: number
  /** row-major foreground flags */
  values: Uint8Array
}

/** Nearest-neighbour downsample sampling source pixel centers. */
export function downsampleMask(mask: BoolMask, fh: number, fw: number): Uint8Array {
  const out = new Uint8Array(fh * fw)
  for (let row = 0; row < fh; row++) {
    const y = Math.min(Math.floor(((row + 0.5) * mask.height) / fh), mask.height - 1)
    for (let col = 0; col < fw; col++) {
      const x = Math.min(Math.floor(((col + 0.5) * mask.width) / fw), mask.width - 1)
      out[row * fw + col] = mask.values[y * mask.width + x]
    }
  }
  return out
}

/**
 * Average feature vector over the mask's foreground cells; if downsampling
 * empties the mask, fall back to the cell nearest the mask centroid.
 */
export function maskPooledEmbedding(tensor: FeatTensor, mask: BoolMask): Float64Array {
  const [channels, fh, fw] = tensor.dims
  const plane = fh * fw
  const ds = downsampleMask(mask, fh, fw)
  const embedding = new Float64Array(channels)
  let count = 0
  for (let cell = 0; cell < plane; cell++) {
    if (!ds[cell]) continue
    count += 1
    for (let c = 0; c < channels; c++) {
      embedding[c] += tensor.values[c * plane + cell]
    }
  }
  if (count > 0) {
    for (let c = 0; c < channels; c++) embedding[c] /= count
    return embedding
  }
  let ySum = 0
  let xSum = 0
  let n = 0
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (mask.values[y * mask.width + x]) {
        ySum += y
        xSum += x
        n += 1
      }
    }
  }
  const row = Math.min(Math.floor(((ySum / n) * fh) / mask.height), fh - 1)
  const col = Math.min(Math.floor(((xSum / n) * fw) / mask.width), fw - 1)
  for (let c = 0; c < channels; c++) {
    embedding[c] = tensor.values[c * plane + row * fw + col]
  }
  return embedding
}

/** Cosine similarity between one feature cell and an embedding vector. */
export function cosineAt(
  tensor: FeatTensor,
  row: number,
  col: number,
  embedding: Float64Array,
): number {
  const [channels, fh, fw] = tensor.dims
  if (row < 0 || row >= fh || col < 0 || col >= fw) {
    throw new RangeError(`cell (${row}, ${col}) outside ${fh}x${fw} map`)
  }
  const plane = fh * fw
  let dot = 0
  let cellNorm = 0
  let embNorm = 0
  for (let c = 0; c < channels; c++) {
    const v = tensor.values[c * plane + row * fw + col]
    dot += v * embedding[c]
    cellNorm += v * v
    embNorm += embedding[c] * embedding[c]
  }
  const norm = Math.sqrt(cellNorm) * Math.sqrt(embNorm)
  if (norm === 0 || !Number.isFinite(dot / norm)) return 0
  return Math.max(-1, Math.min(1, dot / norm))
}
