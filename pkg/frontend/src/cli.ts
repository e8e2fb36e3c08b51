#!/usr/bin/env node
import * as fs from 'fs'

import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { DEFAULT_ENCODER, ENCODERS } from './encoders'
import { exportImageFeatures } from './export'
import { verifyRoundtrip } from './verify'

yargs(hideBin(process.argv))
  .command(
    'export',
    'Encode every PNG in a directory into <image_id>.feat files',
    y =>
      y
        .option('images', { type: 'string', demandOption: true, describe: 'input image directory' })
        .option('encoder', {
          type: 'string',
          default: DEFAULT_ENCODER,
          choices: Object.keys(ENCODERS),
        })
        .option('out', { type: 'string', demandOption: true, describe: 'output directory' })
        .option('resolution', { type: 'number', default: 16, describe: 'target feature resolution' }),
    argv => {
      const result = exportImageFeatures({
        imagesDir: argv.images,
        encoder: argv.encoder,
        outDir: argv.out,
        resolution: argv.resolution,
      })
      console.log(`exported ${result.written.length} feature maps to ${argv.out}`)
      if (result.failures.length > 0) {
        console.error(`${result.failures.length} images failed:`)
        for (const failure of result.failures) {
          console.error(`  ${failure.file}: ${failure.reason}`)
        }
        process.exit(1)
      }
    },
  )
  .command(
    'verify <files..>',
    'Round-trip .feat files and report byte equality',
    y => y.positional('files', { type: 'string', array: true, demandOption: true }),
    argv => {
      let failed = false
      for (const file of argv.files as string[]) {
        if (!fs.existsSync(file)) {
          console.error(`${file}: does not exist`)
          failed = true
          continue
        }
        try {
          const ok = verifyRoundtrip(file)
          console.log(`${file}: ${ok ? 'ok' : 'MISMATCH'}`)
          failed = failed || !ok
        } catch (err) {
          console.error(`${file}: ${err instanceof Error ? err.message : err}`)
          failed = true
        }
      }
      if (failed) process.exit(1)
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parse()
