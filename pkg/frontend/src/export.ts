import * as fs from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

import { encodeFeat } from './feat'
import { getEncoder, RgbImage } from './encoders'

export interface ExportJob {
  imagesDir: string
  encoder: string
  outDir: string
  resolution: number
}

export interface ExportResult {
  written: string[]
  failures: { file: string; reason: string }[]
}

export function decodePng(file: string): RgbImage {
  const png = PNG.sync.read(fs.readFileSync(file))
  return { width: png.width, height: png.height, data: png.data }
}

/** Write via a temp file and rename so readers never see partial files. */
export function atomicWrite(file: string, data: Buffer): void {
  const tmp = path.join(
    path.dirname(file),
    `.tmp-${process.pid}-${path.basename(file)}`,
  )
  fs.writeFileSync(tmp, data)
  fs.renameSync(tmp, file)
}

export function exportImageFeatures(job: ExportJob): ExportResult {
  const encoder = getEncoder(job.encoder)
  const entries = fs
    .readdirSync(job.imagesDir)
    .filter(name => name.toLowerCase().endsWith('.png'))
    .sort()
  fs.mkdirSync(job.outDir, { recursive: true })

  const written: string[] = []
  const failures: { file: string; reason: string }[] = []
  for (const entry of entries) {
    const file = path.join(job.imagesDir, entry)
    try {
      const image = decodePng(file)
      const features = encoder(image, job.resolution)
      const tensor = {
        dims: [features.channels, features.fh, features.fw],
        values: Float32Array.from(features.values),
      }
      const imageId = path.basename(entry, path.extname(entry))
      const out = path.join(job.outDir, `${imageId}.feat`)
      atomicWrite(out, encodeFeat(tensor))
      written.push(out)
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err)
      console.warn(`warning: skipping ${file}: ${reason}`)
      failures.push({ file, reason })
    }
  }
  return { written, failures }
}
