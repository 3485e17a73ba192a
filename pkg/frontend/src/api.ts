import type {
  ClusterSummary,
  FeatureCollection,
  LabelMapDoc,
  Representative,
  StatusInfo,
} from './types'

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`)
  }
}

async function errorDetail(resp: Response): Promise<string> {
  try {
    const body = await resp.json()
    if (body && typeof body.detail === 'string') return body.detail
  } catch {
    /* non-JSON error body */
  }
  return resp.statusText || 'request failed'
}

/** Thin typed client over the review service; no state, no recomputation. */
export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path)
    if (!resp.ok) throw new ApiError(resp.status, await errorDetail(resp))
    return resp.json() as Promise<T>
  }

  getStatus(): Promise<StatusInfo> {
    return this.getJson('/api/status')
  }

  getClusters(): Promise<ClusterSummary[]> {
    return this.getJson('/api/clusters')
  }

  getRepresentatives(clusterId: number, n: number): Promise<Representative[]> {
    return this.getJson(`/api/representatives/${clusterId}?n=${n}`)
  }

  getMapGeoJson(): Promise<FeatureCollection> {
    return this.getJson('/api/map.geojson')
  }

  async postLabelMap(doc: LabelMapDoc): Promise<void> {
    const resp = await fetch(this.baseUrl + '/api/labelmap', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(doc),
    })
    if (resp.status !== 204) throw new ApiError(resp.status, await errorDetail(resp))
  }
}
