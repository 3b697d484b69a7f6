/**
 * Wire protocol envelope shared with the decomposition engine.
 *
 * A request is `{"id": str, "op": str, "payload": {...}}` and the matching
 * response is `{"id": str, "ok": true, "payload": {...}}` or
 * `{"id": str, "ok": false, "error": str}`. Messages are canonical JSON
 * (sorted keys, compact separators, ASCII) so transcripts are byte-stable;
 * one message per line over stream transports. Images travel as base64
 * lossless PNG.
 */

export const OPS = [
  'detect',
  'segment',
  'depth',
  'pairwise_order',
  'inpaint',
  'matte',
  'caption',
] as const

export type Op = (typeof OPS)[number]

export interface Request {
  id: string
  op: string
  payload: Record<string, unknown>
}

export interface OkResponse {
  id: string
  ok: true
  payload: Record<string, unknown>
}

export interface ErrorResponse {
  id: string
  ok: false
  error: string
}

export type Response = OkResponse | ErrorResponse

export class ProtocolError extends Error {}

// JSON string escaping matching the engine's serializer: ASCII-only output,
// non-ASCII code units become \uXXXX (astral chars as surrogate pairs).
function escapeString(s: string): string {
  let out = '"'
  for (let i = 0; i < s.length; i++) {
    const code = s.charCodeAt(i)
    const ch = s[i]
    if (ch === '"') out += '\\"'
    else if (ch === '\\') out += '\\\\'
    else if (ch === '\b') out += '\\b'
    else if (ch === '\f') out += '\\f'
    else if (ch === '\n') out += '\\n'
    else if (ch === '\r') out += '\\r'
    else if (ch === '\t') out += '\\t'
    else if (code < 0x20 || code > 0x7e) out += '\\u' + code.toString(16).padStart(4, '0')
    else out += ch
  }
  return out + '"'
}

function serialize(value: unknown): string {
  if (value === null) return 'null'
  if (typeof value === 'boolean') return value ? 'true' : 'false'
  if (typeof value === 'number') {
    if (!Number.isFinite(value)) throw new ProtocolError('non-finite number in message')
    return String(value)
  }
  if (typeof value === 'string') return escapeString(value)
  if (Array.isArray(value)) return '[' + value.map(serialize).join(',') + ']'
  if (typeof value === 'object') {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => escapeString(k) + ':' + serialize(v))
    return '{' + entries.join(',') + '}'
  }
  throw new ProtocolError(`cannot serialize value of type ${typeof value}`)
}

/** Canonical single-line serialization of one message. */
export function dumps(message: Request | Response): Buffer {
  return Buffer.from(serialize(message) + '\n', 'ascii')
}

export function loads(line: Buffer | string): Request {
  let message: unknown
  try {
    message = JSON.parse(typeof line === 'string' ? line : line.toString('utf-8'))
  } catch (err) {
    throw new ProtocolError(`malformed protocol message: ${err}`)
  }
  if (typeof message !== 'object' || message === null || !('id' in message)) {
    throw new ProtocolError('protocol message missing id')
  }
  return message as Request
}

export function makeResponse(request: Request, payload: Record<string, unknown>): OkResponse {
  return { id: request.id, ok: true, payload }
}

export function makeError(request: { id: string }, error: string): ErrorResponse {
  return { id: request.id, ok: false, error }
}
