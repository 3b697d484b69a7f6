import { describe, expect, it } from 'vitest'
import { dumps, loads, makeError, makeResponse, ProtocolError } from '../src/protocol.js'

describe('canonical serialization', () => {
  it('sorts keys and uses compact separators', () => {
    const raw = dumps({ id: 'x', op: 'detect', payload: { b: 1, a: 2 } })
    expect(raw.toString('ascii')).toBe('{"id":"x","op":"detect","payload":{"a":2,"b":1}}\n')
  })

  it('escapes non-ascii as \\u sequences', () => {
    const raw = dumps({ id: 'x', ok: false, error: 'caf\u00e9 \u2603' })
    expect(raw.toString('ascii')).toBe('{"error":"caf\\u00e9 \\u2603","id":"x","ok":false}\n')
  })

  it('escapes control characters', () => {
    const raw = dumps({ id: 'a\nb', op: 'detect', payload: {} })
    expect(raw.toString('ascii')).toBe('{"id":"a\\nb","op":"detect","payload":{}}\n')
    expect(raw.toString('ascii').split('\n').length).toBe(2)
  })

  it('round-trips through loads', () => {
    const message = { id: 'r1', op: 'segment', payload: { box: [1, 2, 3, 4] } }
    expect(loads(dumps(message))).toEqual(message)
  })

  it('rejects non-finite numbers', () => {
    expect(() => dumps({ id: 'x', op: 'depth', payload: { scale: Infinity } })).toThrow(ProtocolError)
  })
})

describe('envelope helpers', () => {
  it('loads rejects messages without id', () => {
    expect(() => loads('{"op":"detect"}')).toThrow('missing id')
    expect(() => loads('not json')).toThrow('malformed')
  })

  it('response envelopes carry the request id', () => {
    const request = { id: 'r7', op: 'detect', payload: {} }
    expect(makeResponse(request, { detections: [] })).toEqual({ id: 'r7', ok: true, payload: { detections: [] } })
    expect(makeError(request, 'boom')).toEqual({ id: 'r7', ok: false, error: 'boom' })
  })
})
