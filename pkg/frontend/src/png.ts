/**
 * Lossless PNG helpers for protocol payloads.
 *
 * Reading goes through pngjs (any 8-bit input decodes to RGBA). Writing
 * uses a minimal encoder (filter 0, single IDAT) because stub outputs
 * include 16-bit grayscale depth maps, which pngjs cannot pack.
 */

import * as zlib from 'node:zlib'
import { PNG } from 'pngjs'

const SIGNATURE = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])

const CRC_TABLE = new Uint32Array(256)
for (let n = 0; n < 256; n++) {
  let c = n
  for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
  CRC_TABLE[n] = c >>> 0
}

function crc32(buf: Buffer): number {
  let c = 0xffffffff
  for (const byte of buf) c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8)
  return (c ^ 0xffffffff) >>> 0
}

function chunk(type: string, data: Buffer): Buffer {
  const body = Buffer.concat([Buffer.from(type, 'ascii'), data])
  const out = Buffer.alloc(body.length + 8)
  out.writeUInt32BE(data.length, 0)
  body.copy(out, 4)
  out.writeUInt32BE(crc32(body), body.length + 4)
  return out
}

function encode(raw: Buffer, width: number, height: number, bitDepth: number, colorType: number): Buffer {
  const ihdr = Buffer.alloc(13)
  ihdr.writeUInt32BE(width, 0)
  ihdr.writeUInt32BE(height, 4)
  ihdr.writeUInt8(bitDepth, 8)
  ihdr.writeUInt8(colorType, 9)
  return Buffer.concat([
    SIGNATURE,
    chunk('IHDR', ihdr),
    chunk('IDAT', zlib.deflateSync(raw, { level: 9 })),
    chunk('IEND', Buffer.alloc(0)),
  ])
}

/** Prefix every scanline with filter byte 0. */
function withFilters(pixels: Buffer, width: number, height: number, bytesPerPixel: number): Buffer {
  const stride = width * bytesPerPixel
  const raw = Buffer.alloc(height * (stride + 1))
  for (let y = 0; y < height; y++) {
    pixels.copy(raw, y * (stride + 1) + 1, y * stride, (y + 1) * stride)
  }
  return raw
}

export function encodeGray8(pixels: Uint8Array, width: number, height: number): Buffer {
  return encode(withFilters(Buffer.from(pixels), width, height, 1), width, height, 8, 0)
}

export function encodeGray16(pixels: Uint16Array, width: number, height: number): Buffer {
  const big = Buffer.alloc(pixels.length * 2)
  for (let i = 0; i < pixels.length; i++) big.writeUInt16BE(pixels[i], i * 2)
  return encode(withFilters(big, width, height, 2), width, height, 16, 0)
}

export function encodeRgb8(pixels: Uint8Array, width: number, height: number): Buffer {
  return encode(withFilters(Buffer.from(pixels), width, height, 3), width, height, 8, 2)
}

export interface DecodedImage {
  width: number
  height: number
  /** RGBA, 8 bits per channel. */
  data: Buffer
}

export function decodePng(data: Buffer): DecodedImage {
  const png = PNG.sync.read(data)
  return { width: png.width, height: png.height, data: png.data }
}

export function fromBase64(data: string): DecodedImage {
  return decodePng(Buffer.from(data, 'base64'))
}

export function toBase64(png: Buffer): string {
  return png.toString('base64')
}
