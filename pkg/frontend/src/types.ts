// Wire types for the review service API.

export interface ClusterSummary {
  cluster_id: number
  size: number
  top_confidence: number
}

export interface Representative {
  record_id: string
  confidence: number
  image_url: string
}

export interface StatusInfo {
  checkpoint: string
  m: number
  labelmap_version: number
}

export interface LabelMapDoc {
  assignments: Record<string, string>
  palette: Record<string, string>
}

export interface PolygonGeometry {
  type: 'Polygon'
  coordinates: number[][][]
}

export interface CellProperties {
  category: string
  confidence: number
  n_images: number
}

export interface CellFeature {
  type: 'Feature'
  geometry: PolygonGeometry
  properties: CellProperties
}

export interface FeatureCollection {
  type: 'FeatureCollection'
  features: CellFeature[]
}
