/**
 * Export pipeline: scan a folder-per-class dataset, push every image through
 * a frozen backbone, and write one binary embedding file plus its manifest.
 *
 * Corrupt images (anything the backbone rejects) are skipped and counted, not
 * fatal. Records land in scan order: split by split, classes sorted, files
 * sorted, so two exports of the same tree are identical.
 */

import { promises as fs } from 'node:fs'
import * as path from 'node:path'

import { Backbone } from './backbone.js'
import { EmbeddingRecord, Manifest, writeEmbeddingFile, writeManifest } from './format.js'
import { scanDataset } from './dataset.js'

export interface ExportJob {
  datasetRoot: string
  outDir: string
  splits: Array<'train' | 'test'>
  backbone: Backbone
  name?: string
}

export interface ExportResult {
  manifestPath: string
  embeddingPath: string
  manifest: Manifest
  exported: number
  skipped: Array<{ path: string; reason: string }>
}

export async function exportDataset(job: ExportJob): Promise<ExportResult> {
  const { classNames, images } = await scanDataset(job.datasetRoot, job.splits)
  await fs.mkdir(job.outDir, { recursive: true })

  const records: EmbeddingRecord[] = []
  const split: string[] = []
  const skipped: Array<{ path: string; reason: string }> = []
  let dim: number | null = null
  for (const image of images) {
    let vector: Float32Array
    try {
      vector = await job.backbone.embed(await fs.readFile(image.path))
    } catch (err) {
      skipped.push({ path: image.path, reason: (err as Error).message })
      continue
    }
    if (dim === null) {
      dim = vector.length
    } else if (vector.length !== dim) {
      throw new Error(
        `backbone returned dim ${vector.length} for ${image.path}, expected ${dim}`,
      )
    }
    records.push({ vector, label: image.classId })
    split.push(image.split)
  }
  if (records.length === 0) {
    throw new Error('no images could be embedded')
  }

  const name = job.name ?? path.basename(path.resolve(job.datasetRoot))
  const embeddingFile = `${name}.emb`
  const embeddingPath = path.join(job.outDir, embeddingFile)
  await writeEmbeddingFile(records, embeddingPath)
  const manifest: Manifest = {
    file: embeddingFile,
    dim: dim!,
    num_classes: classNames.length,
    num_records: records.length,
    split,
    class_names: classNames,
    backbone: job.backbone.name,
  }
  const manifestPath = path.join(job.outDir, `${name}.manifest.json`)
  await writeManifest(manifest, manifestPath)
  return { manifestPath, embeddingPath, manifest, exported: records.length, skipped }
}
