import { describe, expect, it } from 'vitest'

import { AssignmentDraft } from '../src/draft'
import type { LabelMapDoc } from '../src/types'
import { fixture } from './helpers'

const labelmap = fixture<LabelMapDoc>('labelmap.json')

function draftFromFixture(): AssignmentDraft {
  const draft = new AssignmentDraft()
  for (const [name, color] of Object.entries(labelmap.palette)) {
    draft.addCategory(name, color)
  }
  for (const [cluster, category] of Object.entries(labelmap.assignments)) {
    draft.assign(Number(cluster), category)
  }
  return draft
}

describe('AssignmentDraft', () => {
  it('blocks submission until every cluster is assigned', () => {
    const draft = new AssignmentDraft()
    draft.addCategory('residential')
    expect(draft.isTotal(3)).toBe(false)
    draft.assign(0, 'residential')
    draft.assign(2, 'residential')
    expect(draft.isTotal(3)).toBe(false)
    expect(draft.missingClusters(3)).toEqual([1])
    expect(() => draft.toLabelMapDoc(3)).toThrow(/incomplete/)
    draft.assign(1, 'residential')
    expect(draft.isTotal(3)).toBe(true)
  })

  it('builds exactly the wire document the service accepts', () => {
    const draft = draftFromFixture()
    expect(draft.isTotal(10)).toBe(true)
    expect(draft.toLabelMapDoc(10)).toEqual(labelmap)
  })

  it('supports many-to-one merges', () => {
    const draft = new AssignmentDraft()
    draft.addCategory('only')
    for (let c = 0; c < 5; c++) draft.assign(c, 'only')
    const doc = draft.toLabelMapDoc(5)
    expect(new Set(Object.values(doc.assignments))).toEqual(new Set(['only']))
  })

  it('rejects assignment to unknown categories', () => {
    const draft = new AssignmentDraft()
    expect(() => draft.assign(0, 'ghost')).toThrow(/unknown category/)
  })

  it('removing a category clears its assignments', () => {
    const draft = new AssignmentDraft()
    draft.addCategory('a')
    draft.addCategory('b')
    draft.assign(0, 'a')
    draft.assign(1, 'b')
    draft.removeCategory('a')
    expect(draft.assignments.has(0)).toBe(false)
    expect(draft.assignments.get(1)).toBe('b')
    expect(draft.isTotal(2)).toBe(false)
  })

  it('rejects duplicate or empty category names', () => {
    const draft = new AssignmentDraft()
    draft.addCategory('x')
    expect(() => draft.addCategory('x')).toThrow(/already exists/)
    expect(() => draft.addCategory('  ')).toThrow(/empty/)
  })
})
