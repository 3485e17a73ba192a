import { readFileSync } from 'node:fs'
import { vi } from 'vitest'

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(new URL(`./fixtures/${name}`, import.meta.url), 'utf-8')) as T
}

export interface RecordedRequest {
  url: string
  method: string
  body?: unknown
}

/**
 * Install a fetch stub that routes requests through ``handler``.
 * Returns the list of recorded requests for assertions.
 */
export function stubFetch(
  handler: (url: string, init?: RequestInit) => { status: number; body?: unknown },
): RecordedRequest[] {
  const requests: RecordedRequest[] = []
  vi.stubGlobal(
    'fetch',
    vi.fn(async (url: string, init?: RequestInit) => {
      const method = init?.method ?? 'GET'
      const body = init?.body ? JSON.parse(String(init.body)) : undefined
      requests.push({ url, method, body })
      const result = handler(url, init)
      return new Response(result.body === undefined ? null : JSON.stringify(result.body), {
        status: result.status,
        headers: { 'content-type': 'application/json' },
      })
    }),
  )
  return requests
}
