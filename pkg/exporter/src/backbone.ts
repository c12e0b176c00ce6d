/**
 * Frozen feature extractors. Every backbone maps raw image bytes to a fixed
 * 512-dim float vector and must be deterministic in evaluation mode.
 *
 * "stub" derives its vector from a SHA-256 expansion of the image bytes: no
 * decoding, no weights, fully offline. It exercises the whole export pipeline
 * and the file format, but its features carry no visual meaning, so use it
 * for format/pipeline verification only.
 *
 * "resnet18" (or any other image-feature model id) loads through
 * @xenova/transformers when that package and its weights are available,
 * taking the pooled penultimate-layer output.
 */

import { createHash } from 'node:crypto'

export interface Backbone {
  name: string
  dim: number
  embed(image: Buffer): Promise<Float32Array>
}

export class StubBackbone implements Backbone {
  name = 'stub-sha256'
  dim = 512

  async embed(image: Buffer): Promise<Float32Array> {
    if (image.length === 0) {
      throw new Error('empty image')
    }
    const seed = createHash('sha256').update(image).digest()
    const out = new Float32Array(this.dim)
    let block = Buffer.alloc(0)
    let counter = 0
    for (let i = 0; i < this.dim; i++) {
      const at = (i * 4) % 32
      if (at === 0) {
        block = createHash('sha256').update(seed).update(String(counter++)).digest()
      }
      // map 4 hash bytes to [-1, 1)
      out[i] = (block.readUInt32LE(at) / 2 ** 31) - 1.0
    }
    return out
  }
}

class TransformersBackbone implements Backbone {
  name: string
  dim = 512
  private extractor: any

  constructor(model: string, extractor: any) {
    this.name = model
    this.extractor = extractor
  }

  async embed(image: Buffer): Promise<Float32Array> {
    const output = await this.extractor(image, { pooling: 'mean' })
    const data = Float32Array.from(output.data as Iterable<number>)
    this.dim = data.length
    return data
  }
}

export async function loadBackbone(spec: string): Promise<Backbone> {
  if (spec === 'stub') {
    return new StubBackbone()
  }
  const model = spec === 'resnet18' ? 'Xenova/resnet-18' : spec
  // optional dependency: resolve at runtime only
  const optionalModule = '@xenova/transformers'
  let transformers: any
  try {
    transformers = await import(optionalModule)
  } catch {
    throw new Error(
      `backbone ${spec} needs the optional @xenova/transformers package; ` +
        'install it or use --backbone stub',
    )
  }
  const extractor = await transformers.pipeline('image-feature-extraction', model)
  return new TransformersBackbone(model, extractor)
}
