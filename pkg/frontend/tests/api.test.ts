import { afterEach, describe, expect, it, vi } from 'vitest'

import { ApiClient, ApiError } from '../src/api'
import type { ClusterSummary, FeatureCollection, LabelMapDoc } from '../src/types'
import { fixture, stubFetch } from './helpers'

const clusters = fixture<ClusterSummary[]>('clusters.json')
const labelmap = fixture<LabelMapDoc>('labelmap.json')
const geojson = fixture<FeatureCollection>('map.geojson')

afterEach(() => vi.unstubAllGlobals())

describe('ApiClient', () => {
  it('fetches clusters from the documented path', async () => {
    const requests = stubFetch(() => ({ status: 200, body: clusters }))
    const got = await new ApiClient().getClusters()
    expect(requests[0].url).toBe('/api/clusters')
    expect(got).toEqual(clusters)
  })

  it('passes cluster id and n to the representatives endpoint', async () => {
    const requests = stubFetch(() => ({ status: 200, body: [] }))
    await new ApiClient('http://x').getRepresentatives(3, 7)
    expect(requests[0].url).toBe('http://x/api/representatives/3?n=7')
  })

  it('POSTs the label map as JSON and accepts 204', async () => {
    const requests = stubFetch(() => ({ status: 204 }))
    await new ApiClient().postLabelMap(labelmap)
    expect(requests[0].method).toBe('POST')
    expect(requests[0].url).toBe('/api/labelmap')
    expect(requests[0].body).toEqual(labelmap)
  })

  it('raises ApiError with the server detail on failure', async () => {
    stubFetch(() => ({ status: 400, body: { detail: 'label map misses cluster ids [9]' } }))
    const err = await new ApiClient().postLabelMap(labelmap).catch((e) => e)
    expect(err).toBeInstanceOf(ApiError)
    expect(err.status).toBe(400)
    expect(err.detail).toContain('misses cluster ids')
  })

  it('returns the map document unchanged', async () => {
    stubFetch(() => ({ status: 200, body: geojson }))
    const got = await new ApiClient().getMapGeoJson()
    expect(JSON.stringify(got)).toBe(JSON.stringify(geojson))
  })
})
