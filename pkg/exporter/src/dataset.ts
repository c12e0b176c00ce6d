/**
 * Folder-per-class dataset scanning.
 *
 * Two layouts are accepted:
 *   root/train/<class>/<image>, root/test/<class>/<image>   (split subdirs)
 *   root/<class>/<image>                                    (flat; one split)
 *
 * Class names are the sorted union of the per-split folder names, mapped to
 * dense ids 0..K-1. Files are sorted within each folder so scans are stable.
 */

import { promises as fs } from 'node:fs'
import * as path from 'node:path'

const IMAGE_EXTENSIONS = new Set(['.png', '.jpg', '.jpeg', '.bmp', '.gif', '.webp'])

export interface DatasetImage {
  path: string
  classId: number
  split: 'train' | 'test'
}

export interface ScannedDataset {
  classNames: string[]
  images: DatasetImage[]
}

async function listDirs(root: string): Promise<string[]> {
  const entries = await fs.readdir(root, { withFileTypes: true })
  return entries.filter((e) => e.isDirectory()).map((e) => e.name).sort()
}

async function listImages(dir: string): Promise<string[]> {
  const entries = await fs.readdir(dir, { withFileTypes: true })
  return entries
    .filter((e) => e.isFile() && IMAGE_EXTENSIONS.has(path.extname(e.name).toLowerCase()))
    .map((e) => e.name)
    .sort()
}

export async function scanDataset(
  root: string,
  splits: Array<'train' | 'test'>,
): Promise<ScannedDataset> {
  const top = await listDirs(root)
  const hasSplitDirs = top.includes('train') || top.includes('test')
  const splitRoots: Array<['train' | 'test', string]> = []
  if (hasSplitDirs) {
    for (const split of splits) {
      const dir = path.join(root, split)
      try {
        await fs.access(dir)
        splitRoots.push([split, dir])
      } catch {
        throw new Error(`dataset has no ${split}/ directory under ${root}`)
      }
    }
  } else {
    if (splits.length !== 1) {
      throw new Error(
        `flat folder-per-class layout holds a single split; pass --split train or --split test`,
      )
    }
    splitRoots.push([splits[0], root])
  }

  const nameSet = new Set<string>()
  for (const [, dir] of splitRoots) {
    for (const name of await listDirs(dir)) {
      nameSet.add(name)
    }
  }
  const classNames = [...nameSet].sort()
  if (classNames.length === 0) {
    throw new Error(`no class directories found under ${root}`)
  }
  const classId = new Map(classNames.map((name, i) => [name, i]))

  const images: DatasetImage[] = []
  for (const [split, dir] of splitRoots) {
    for (const name of await listDirs(dir)) {
      const id = classId.get(name)!
      for (const file of await listImages(path.join(dir, name))) {
        images.push({ path: path.join(dir, name, file), classId: id, split })
      }
    }
  }
  if (images.length === 0) {
    throw new Error(`no images found under ${root}`)
  }
  return { classNames, images }
}
