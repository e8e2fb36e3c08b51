/**
 * Portable tensor files (".feat"):
 *
 *   magic "FEAT" | u32 version=1 | u32 rank | rank x u32 dims | payload
 *
 * All integers little-endian, payload row-major 32-bit little-endian floats.
 */

export const FEAT_MAGIC = 'FEAT'
export const FEAT_VERSION = 1

export interface FeatTensor {
  dims: number[]
  /** row-major float32 values */
  values: Float32Array
}

export class FeatParseError extends Error {}

export function encodeFeat(tensor: FeatTensor): Buffer {
  const count = tensor.dims.reduce((a, b) => a * b, 1)
  if (count !== tensor.values.length) {
    throw new FeatParseError(
      `dims [${tensor.dims}] imply ${count} values, got ${tensor.values.length}`,
    )
  }
  const header = Buffer.alloc(12 + 4 * tensor.dims.length)
  header.write(FEAT_MAGIC, 0, 'ascii')
  header.writeUInt32LE(FEAT_VERSION, 4)
  header.writeUInt32LE(tensor.dims.length, 8)
  tensor.dims.forEach((dim, i) => header.writeUInt32LE(dim, 12 + 4 * i))
  const payload = Buffer.alloc(4 * count)
  for (let i = 0; i < count; i++) {
    payload.writeFloatLE(tensor.values[i], 4 * i)
  }
  return Buffer.concat([header, payload])
}

export function decodeFeat(data: Buffer, name = '<buffer>'): FeatTensor {
  if (data.length < 12) {
    throw new FeatParseError(`${name}: truncated header, need 12 bytes`)
  }
  const magic = data.toString('ascii', 0, 4)
  if (magic !== FEAT_MAGIC) {
    throw new FeatParseError(`${name}: bad magic ${JSON.stringify(magic)}`)
  }
  const version = data.readUInt32LE(4)
  if (version !== FEAT_VERSION) {
    throw new FeatParseError(`${name}: unsupported version ${version}`)
  }
  const rank = data.readUInt32LE(8)
  if (data.length < 12 + 4 * rank) {
    throw new FeatParseError(`${name}: truncated dimension list (rank ${rank})`)
  }
  const dims: number[] = []
  for (let i = 0; i < rank; i++) {
    dims.push(data.readUInt32LE(12 + 4 * i))
  }
  const offset = 12 + 4 * rank
  const count = dims.reduce((a, b) => a * b, 1)
  if (data.length < offset + 4 * count) {
    const missing = offset + 4 * count - data.length
    throw new FeatParseError(`${name}: truncated payload, ${missing} bytes missing`)
  }
  if (data.length > offset + 4 * count) {
    const trailing = data.length - offset - 4 * count
    throw new FeatParseError(`${name}: ${trailing} trailing bytes after payload`)
  }
  const values = new Float32Array(count)
  for (let i = 0; i < count; i++) {
    values[i] = data.readFloatLE(offset + 4 * i)
  }
  return { dims, values }
}
