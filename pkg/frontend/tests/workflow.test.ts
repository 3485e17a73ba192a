// End-to-end review workflow against a mock server that speaks the same
// wire protocol as the Python service (fixtures captured from it).

import { afterEach, describe, expect, it, vi } from 'vitest'

import { ApiClient } from '../src/api'
import { buildClusterCards } from '../src/cards'
import { AssignmentDraft } from '../src/draft'
import { cellsFromGeoJson, renderMapSvg, renderedCategories } from '../src/map'
import type {
  ClusterSummary,
  FeatureCollection,
  LabelMapDoc,
  Representative,
} from '../src/types'
import { fixture, stubFetch } from './helpers'

const clusters = fixture<ClusterSummary[]>('clusters.json')
const reps = fixture<Record<string, Representative[]>>('representatives.json')
const labelmap = fixture<LabelMapDoc>('labelmap.json')
const geojson = fixture<FeatureCollection>('map.geojson')

afterEach(() => vi.unstubAllGlobals())

function mockService() {
  let submitted: LabelMapDoc | null = null
  let version = 0
  const requests = stubFetch((url, init) => {
    if (url === '/api/clusters') return { status: 200, body: clusters }
    const rep = /^\/api\/representatives\/(\d+)\?n=\d+$/.exec(url)
    if (rep) return { status: 200, body: reps[rep[1]] ?? [] }
    if (url === '/api/labelmap' && init?.method === 'POST') {
      const doc = JSON.parse(String(init.body)) as LabelMapDoc
      const missing = clusters
        .map((c) => c.cluster_id)
        .filter((id) => !(String(id) in doc.assignments))
      if (missing.length > 0) {
        return { status: 400, body: { detail: `label map misses cluster ids ${missing}` } }
      }
      submitted = doc
      version += 1
      return { status: 204 }
    }
    if (url === '/api/map.geojson') {
      if (!submitted) return { status: 404, body: { detail: 'no label map submitted yet' } }
      return { status: 200, body: geojson }
    }
    if (url === '/api/status') {
      return { status: 200, body: { checkpoint: 'ckpt', m: clusters.length, labelmap_version: version } }
    }
    return { status: 404, body: { detail: `no route ${url}` } }
  })
  return { requests, getSubmitted: () => submitted }
}

describe('review workflow', () => {
  it('lists 10 cards, submits a total assignment, renders the returned map', async () => {
    const service = mockService()
    const api = new ApiClient()

    // Step 1: inspect the over-clustered checkpoint.
    const clusterList = await api.getClusters()
    const repMap = new Map<number, Representative[]>()
    for (const c of clusterList) {
      repMap.set(c.cluster_id, await api.getRepresentatives(c.cluster_id, 4))
    }
    const cards = buildClusterCards(clusterList, repMap)
    expect(cards).toHaveLength(10)

    // Step 2: the reviewer groups clusters into categories (from fixture).
    const draft = new AssignmentDraft()
    for (const [name, color] of Object.entries(labelmap.palette)) draft.addCategory(name, color)
    for (const card of cards) draft.assign(card.clusterId, labelmap.assignments[String(card.clusterId)])
    expect(draft.isTotal(cards.length)).toBe(true)

    // Step 3: submit and render the regenerated map.
    await api.postLabelMap(draft.toLabelMapDoc(cards.length))
    expect(service.getSubmitted()).toEqual(labelmap)

    const doc = await api.getMapGeoJson()
    const svg = renderMapSvg(cellsFromGeoJson(doc), draft.palette())
    expect(JSON.stringify(renderedCategories(svg))).toBe(
      JSON.stringify(doc.features.map((f) => f.properties.category)),
    )
    expect((await api.getStatus()).labelmap_version).toBe(1)
  })

  it('keeps the draft intact when the service rejects a partial map', async () => {
    mockService()
    const api = new ApiClient()
    const draft = new AssignmentDraft()
    draft.addCategory('residential')
    draft.assign(0, 'residential') // 9 clusters left unassigned

    expect(draft.isTotal(clusters.length)).toBe(false)
    // Simulate a client that bypasses the local gate; the server refuses.
    const doc = { assignments: { '0': 'residential' }, palette: draft.palette() }
    const err = await api.postLabelMap(doc).catch((e) => e)
    expect(err.status).toBe(400)
    expect(draft.assignments.get(0)).toBe('residential')
    // Map stays unavailable: nothing was accepted.
    const mapErr = await api.getMapGeoJson().catch((e) => e)
    expect(mapErr.status).toBe(404)
  })

  it('resubmission updates the map without losing state', async () => {
    mockService()
    const api = new ApiClient()
    const draft = new AssignmentDraft()
    for (const [name, color] of Object.entries(labelmap.palette)) draft.addCategory(name, color)
    for (const c of clusters) draft.assign(c.cluster_id, labelmap.assignments[String(c.cluster_id)])
    await api.postLabelMap(draft.toLabelMapDoc(clusters.length))
    expect((await api.getStatus()).labelmap_version).toBe(1)

    // merge everything into one category and resubmit
    draft.addCategory('all', '#123456')
    for (const c of clusters) draft.assign(c.cluster_id, 'all')
    await api.postLabelMap(draft.toLabelMapDoc(clusters.length))
    expect((await api.getStatus()).labelmap_version).toBe(2)
  })
})
