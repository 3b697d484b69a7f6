/**
 * Backend implementations behind the protocol ops.
 *
 * `ModelBackend` is the seam where real pretrained models plug in
 * (detector, segmenter, monocular depth, pairwise orderer, diffusion
 * inpainter, matting, captioner). `StubBackend` answers every op with
 * fixed schema-valid outputs so the protocol surface can be exercised
 * without any model weights.
 */

import { DecodedImage, encodeGray8, encodeGray16, encodeRgb8, fromBase64, toBase64 } from './png.js'

export interface Detection {
  bbox: [number, number, number, number]
  category: string
  score: number
}

export interface DepthResult {
  /** 16-bit quantized map; real depth is raw * scale + offset. */
  depth: string
  scale: number
  offset: number
}

export interface PairwiseResult {
  depth_edges: [number, number][]
  occlusion_edges: [number, number][]
}

export interface ModelBackend {
  detect(image: DecodedImage, categories: string[]): Detection[]
  segment(image: DecodedImage, box: [number, number, number, number]): string
  depth(image: DecodedImage): DepthResult
  pairwiseOrder(image: DecodedImage, masks: DecodedImage[]): PairwiseResult
  inpaint(image: DecodedImage, mask: DecodedImage, prompt: string): string
  matte(image: DecodedImage, trimap: DecodedImage): string
  caption(image: DecodedImage, mode: string, context: string, candidates: string[]): string[] | number[]
}

/** Pixel count of the stub detection box along each image dimension. */
const STUB_BOX = 8

export class StubBackend implements ModelBackend {
  detect(image: DecodedImage, categories: string[]): Detection[] {
    const w = Math.min(STUB_BOX, image.width)
    const h = Math.min(STUB_BOX, image.height)
    return categories.map((category, i) => ({
      bbox: [Math.min(i * w, image.width - w), 0, w, h],
      category,
      score: 0.5,
    }))
  }

  segment(image: DecodedImage, box: [number, number, number, number]): string {
    const [x, y, w, h] = box
    const mask = new Uint8Array(image.width * image.height)
    for (let row = y; row < Math.min(y + h, image.height); row++) {
      for (let col = x; col < Math.min(x + w, image.width); col++) {
        mask[row * image.width + col] = 255
      }
    }
    return toBase64(encodeGray8(mask, image.width, image.height))
  }

  depth(image: DecodedImage): DepthResult {
    // larger-is-farther: brightness as a deterministic stand-in signal
    const raw = new Uint16Array(image.width * image.height)
    for (let i = 0; i < raw.length; i++) {
      const o = i * 4
      raw[i] = (image.data[o] + image.data[o + 1] + image.data[o + 2]) * 85
    }
    return { depth: toBase64(encodeGray16(raw, image.width, image.height)), scale: 1.0 / 85.0, offset: 0.0 }
  }

  pairwiseOrder(image: DecodedImage, masks: DecodedImage[]): PairwiseResult {
    const edges: [number, number][] = []
    for (let i = 0; i + 1 < masks.length; i++) edges.push([i, i + 1])
    return { depth_edges: edges, occlusion_edges: [] }
  }

  inpaint(image: DecodedImage, mask: DecodedImage, prompt: string): string {
    // identity fill: the masked region keeps its current content
    const rgb = new Uint8Array(image.width * image.height * 3)
    for (let i = 0; i < image.width * image.height; i++) {
      rgb[i * 3] = image.data[i * 4]
      rgb[i * 3 + 1] = image.data[i * 4 + 1]
      rgb[i * 3 + 2] = image.data[i * 4 + 2]
    }
    return toBase64(encodeRgb8(rgb, image.width, image.height))
  }

  matte(image: DecodedImage, trimap: DecodedImage): string {
    // foreground and unknown trimap bands become opaque
    const alpha = new Uint8Array(trimap.width * trimap.height)
    for (let i = 0; i < alpha.length; i++) {
      alpha[i] = trimap.data[i * 4] > 0 ? 255 : 0
    }
    return toBase64(encodeGray8(alpha, trimap.width, trimap.height))
  }

  caption(image: DecodedImage, mode: string, context: string, candidates: string[]): string[] | number[] {
    if (mode === 'score') return candidates.map(() => 0.0)
    return ['an object']
  }
}

export function decodeImageField(payload: Record<string, unknown>, field: string): DecodedImage {
  const value = payload[field]
  if (typeof value !== 'string') throw new Error(`payload field ${field} missing`)
  return fromBase64(value)
}
