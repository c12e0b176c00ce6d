/**
 * embedding-exporter export --dataset <dir> --out <dir> [--split train|test|both]
 *                           [--backbone stub|resnet18|<model-id>] [--name <base>]
 *
 * Exit codes: 0 success, 1 runtime failure, 2 usage error.
 */

import { pathToFileURL } from 'node:url'

import { loadBackbone } from './backbone.js'
import { exportDataset } from './export.js'

function usage(message?: string): never {
  if (message) {
    console.error(`embedding-exporter: error: ${message}`)
  }
  console.error(
    'usage: embedding-exporter export --dataset <dir> --out <dir> ' +
      '[--split train|test|both] [--backbone stub|resnet18|<model-id>] [--name <base>]',
  )
  process.exit(2)
}

interface Flags {
  dataset?: string
  out?: string
  split: string
  backbone: string
  name?: string
}

function parseArgs(argv: string[]): Flags {
  if (argv[0] !== 'export') {
    usage(argv.length ? `unknown command ${argv[0]}` : 'missing command')
  }
  const flags: Flags = { split: 'both', backbone: 'stub' }
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i]
    const value = argv[i + 1]
    if (value === undefined) {
      usage(`flag ${key} needs a value`)
    }
    switch (key) {
      case '--dataset':
        flags.dataset = value
        break
      case '--out':
        flags.out = value
        break
      case '--split':
        flags.split = value
        break
      case '--backbone':
        flags.backbone = value
        break
      case '--name':
        flags.name = value
        break
      default:
        usage(`unknown flag ${key}`)
    }
  }
  if (!flags.dataset) usage('--dataset is required')
  if (!flags.out) usage('--out is required')
  if (!['train', 'test', 'both'].includes(flags.split)) {
    usage(`--split must be train, test, or both, got ${flags.split}`)
  }
  return flags
}

export async function main(argv: string[]): Promise<number> {
  const flags = parseArgs(argv)
  const splits: Array<'train' | 'test'> =
    flags.split === 'both' ? ['train', 'test'] : [flags.split as 'train' | 'test']
  try {
    const backbone = await loadBackbone(flags.backbone)
    const result = await exportDataset({
      datasetRoot: flags.dataset!,
      outDir: flags.out!,
      splits,
      backbone,
      name: flags.name,
    })
    for (const skip of result.skipped) {
      console.error(`skipped ${skip.path}: ${skip.reason}`)
    }
    if (result.skipped.length > 0) {
      console.error(`skipped ${result.skipped.length} unreadable image(s)`)
    }
    console.log(result.manifestPath)
    return 0
  } catch (err) {
    console.error(`embedding-exporter: error: ${(err as Error).message}`)
    return 1
  }
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url === pathToFileURL(process.argv[1]).href

if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code
  })
}
