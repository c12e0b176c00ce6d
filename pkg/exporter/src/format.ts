/**
 * Binary embedding file writer/reader.
 *
 * Layout (little-endian): magic "OCLE" | version u32 = 1 | dimension u32 |
 * record count u64 | per record: label i32, dimension x f32.
 *
 * The reader exists for validation and round-trip tests; the training engine
 * that consumes these files has its own.
 */

import { promises as fs } from 'node:fs'

export const MAGIC = 'OCLE'
export const FORMAT_VERSION = 1
export const HEADER_SIZE = 4 + 4 + 4 + 8

export interface EmbeddingRecord {
  vector: Float32Array
  label: number
}

export interface Manifest {
  file: string
  dim: number
  num_classes: number
  num_records: number
  split: string[]
  class_names?: string[]
  backbone?: string
}

export function encodeRecords(records: EmbeddingRecord[]): Buffer {
  if (records.length === 0) {
    throw new Error('empty dataset')
  }
  const dim = records[0].vector.length
  if (dim < 1) {
    throw new Error('embedding dimension must be >= 1')
  }
  const recordSize = 4 + 4 * dim
  const out = Buffer.alloc(HEADER_SIZE + recordSize * records.length)
  out.write(MAGIC, 0, 'ascii')
  out.writeUInt32LE(FORMAT_VERSION, 4)
  out.writeUInt32LE(dim, 8)
  out.writeBigUInt64LE(BigInt(records.length), 12)
  let offset = HEADER_SIZE
  records.forEach((record, i) => {
    if (record.vector.length !== dim) {
      throw new Error(`dimension mismatch: record ${i} has dim ${record.vector.length}, expected ${dim}`)
    }
    if (!Number.isInteger(record.label) || record.label < 0 || record.label > 0x7fffffff) {
      throw new Error(`label ${record.label} of record ${i} does not fit in int32`)
    }
    for (const x of record.vector) {
      if (!Number.isFinite(x)) {
        throw new Error(`non-finite value in record ${i}`)
      }
    }
    out.writeInt32LE(record.label, offset)
    for (let f = 0; f < dim; f++) {
      out.writeFloatLE(record.vector[f], offset + 4 + 4 * f)
    }
    offset += recordSize
  })
  return out
}

export async function writeEmbeddingFile(records: EmbeddingRecord[], path: string): Promise<void> {
  await fs.writeFile(path, encodeRecords(records))
}

export function decodeRecords(raw: Buffer): { dim: number; records: EmbeddingRecord[] } {
  if (raw.length < HEADER_SIZE) {
    throw new Error('file too short for header')
  }
  if (raw.toString('ascii', 0, 4) !== MAGIC) {
    throw new Error(`bad magic ${JSON.stringify(raw.toString('ascii', 0, 4))}`)
  }
  const version = raw.readUInt32LE(4)
  if (version !== FORMAT_VERSION) {
    throw new Error(`unsupported format version ${version}`)
  }
  const dim = raw.readUInt32LE(8)
  const count = Number(raw.readBigUInt64LE(12))
  const recordSize = 4 + 4 * dim
  const body = raw.length - HEADER_SIZE
  if (body < count * recordSize) {
    const whole = Math.floor(body / recordSize)
    if (body % recordSize !== 0) {
      throw new Error(`truncated record at byte offset ${HEADER_SIZE + whole * recordSize}`)
    }
    throw new Error(`truncated: expected ${count} got ${whole}`)
  }
  if (body > count * recordSize) {
    throw new Error(`${body - count * recordSize} trailing bytes after ${count} records`)
  }
  const records: EmbeddingRecord[] = []
  for (let i = 0; i < count; i++) {
    const offset = HEADER_SIZE + i * recordSize
    const label = raw.readInt32LE(offset)
    const vector = new Float32Array(dim)
    for (let f = 0; f < dim; f++) {
      vector[f] = raw.readFloatLE(offset + 4 + 4 * f)
      if (!Number.isFinite(vector[f])) {
        throw new Error(`non-finite value in record ${i}`)
      }
    }
    records.push({ vector, label })
  }
  return { dim, records }
}

export async function readEmbeddingFile(path: string): Promise<{ dim: number; records: EmbeddingRecord[] }> {
  return decodeRecords(await fs.readFile(path))
}

export async function writeManifest(manifest: Manifest, path: string): Promise<void> {
  await fs.writeFile(path, JSON.stringify(manifest, Object.keys(manifest).sort(), 1) + '\n')
}
