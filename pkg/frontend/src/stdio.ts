#!/usr/bin/env node
/**
 * Adapter entry point.
 *
 *   layerstack-adapter [--stub TRANSCRIPT.ndjson] [--http PORT]
 *
 * Default transport is NDJSON over stdio: one request line on stdin,
 * one response line on stdout, exit 0 at EOF. With --http the same
 * dispatcher answers POST requests instead. --stub preloads a golden
 * transcript whose recorded exchanges are replayed byte-exact.
 */

import * as http from 'node:http'
import * as readline from 'node:readline'
import { StubBackend } from './adapter.js'
import { Dispatcher } from './dispatcher.js'

interface Args {
  stub?: string
  httpPort?: number
}

function parseArgs(argv: string[]): Args {
  const args: Args = {}
  for (let i = 0; i < argv.length; i++) {
    if (argv[i] === '--stub') args.stub = argv[++i]
    else if (argv[i] === '--http') args.httpPort = Number(argv[++i])
    else {
      process.stderr.write(`unknown argument ${argv[i]}\n`)
      process.exit(2)
    }
  }
  return args
}

function serveStdio(dispatcher: Dispatcher): void {
  const rl = readline.createInterface({ input: process.stdin, terminal: false })
  rl.on('line', (line) => {
    if (line.length === 0) return
    process.stdout.write(dispatcher.handleLine(line))
  })
  rl.on('close', () => process.exit(0))
}

function serveHttp(dispatcher: Dispatcher, port: number): void {
  const server = http.createServer((req, res) => {
    if (req.method !== 'POST') {
      res.writeHead(405).end()
      return
    }
    const chunks: Buffer[] = []
    req.on('data', (c) => chunks.push(c))
    req.on('end', () => {
      const reply = dispatcher.handleLine(Buffer.concat(chunks))
      res.writeHead(200, { 'content-type': 'application/json' }).end(reply)
    })
  })
  server.listen(port, '127.0.0.1', () => {
    const address = server.address()
    const bound = typeof address === 'object' && address !== null ? address.port : port
    process.stderr.write(`listening on 127.0.0.1:${bound}\n`)
  })
}

const args = parseArgs(process.argv.slice(2))
const dispatcher = new Dispatcher(new StubBackend())
if (args.stub !== undefined) dispatcher.loadTranscript(args.stub)
if (args.httpPort !== undefined) serveHttp(dispatcher, args.httpPort)
else serveStdio(dispatcher)
