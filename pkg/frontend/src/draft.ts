import type { LabelMapDoc } from './types'

export interface Category {
  name: string
  color: string
}

const DEFAULT_COLORS = [
  '#e6194b',
  '#3cb44b',
  '#ffe119',
  '#4363d8',
  '#f58231',
  '#911eb4',
  '#46f0f0',
  '#f032e6',
  '#bcf60c',
  '#fabebe',
]

/**
 * Client-side draft of the cluster-to-category assignment.
 *
 * Purely local until submitted: closing the page loses only this draft,
 * never the server-side label map.
 */
export class AssignmentDraft {
  categories: Category[] = []
  assignments = new Map<number, string>()

  addCategory(name: string, color?: string): Category {
    const trimmed = name.trim()
    if (!trimmed) throw new Error('category name must not be empty')
    if (this.categories.some((c) => c.name === trimmed)) {
      throw new Error(`category ${trimmed} already exists`)
    }
    const category = {
      name: trimmed,
      color: color ?? DEFAULT_COLORS[this.categories.length % DEFAULT_COLORS.length],
    }
    this.categories.push(category)
    return category
  }

  removeCategory(name: string): void {
    this.categories = this.categories.filter((c) => c.name !== name)
    for (const [cluster, assigned] of [...this.assignments]) {
      if (assigned === name) this.assignments.delete(cluster)
    }
  }

  setColor(name: string, color: string): void {
    const category = this.categories.find((c) => c.name === name)
    if (category) category.color = color
  }

  assign(clusterId: number, categoryName: string): void {
    if (!this.categories.some((c) => c.name === categoryName)) {
      throw new Error(`unknown category ${categoryName}`)
    }
    this.assignments.set(clusterId, categoryName)
  }

  unassign(clusterId: number): void {
    this.assignments.delete(clusterId)
  }

  /** Submission is blocked until every cluster id in 0..m-1 is assigned. */
  isTotal(m: number): boolean {
    for (let cluster = 0; cluster < m; cluster++) {
      if (!this.assignments.has(cluster)) return false
    }
    return true
  }

  missingClusters(m: number): number[] {
    const missing: number[] = []
    for (let cluster = 0; cluster < m; cluster++) {
      if (!this.assignments.has(cluster)) missing.push(cluster)
    }
    return missing
  }

  palette(): Record<string, string> {
    return Object.fromEntries(this.categories.map((c) => [c.name, c.color]))
  }

  toLabelMapDoc(m: number): LabelMapDoc {
    if (!this.isTotal(m)) {
      throw new Error(`assignment incomplete: clusters ${this.missingClusters(m).join(', ')} unassigned`)
    }
    const assignments: Record<string, string> = {}
    for (let cluster = 0; cluster < m; cluster++) {
      assignments[String(cluster)] = this.assignments.get(cluster)!
    }
    return { assignments, palette: this.palette() }
  }
}
