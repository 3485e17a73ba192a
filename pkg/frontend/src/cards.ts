import type { ClusterSummary, Representative } from './types'

export interface ClusterCard {
  clusterId: number
  size: number
  /** Thumbnails ordered by confidence descending, exactly as reported. */
  reps: Representative[]
  /** True when the service returned no representatives for the cluster. */
  empty: boolean
}

/** One card per cluster, ordered by cluster id; thumbnails sorted by confidence. */
export function buildClusterCards(
  clusters: ClusterSummary[],
  repsByCluster: Map<number, Representative[]>,
): ClusterCard[] {
  return [...clusters]
    .sort((a, b) => a.cluster_id - b.cluster_id)
    .map((cluster) => {
      const reps = [...(repsByCluster.get(cluster.cluster_id) ?? [])].sort(
        (a, b) => b.confidence - a.confidence,
      )
      return {
        clusterId: cluster.cluster_id,
        size: cluster.size,
        reps,
        empty: reps.length === 0,
      }
    })
}
