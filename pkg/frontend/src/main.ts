import { ApiClient, ApiError } from './api'
import { buildClusterCards, type ClusterCard } from './cards'
import { AssignmentDraft } from './draft'
import { cellsFromGeoJson, renderMapSvg } from './map'
import type { Representative } from './types'

const api = new ApiClient('')
const draft = new AssignmentDraft()
let clusterCount = 0

const el = {
  banner: document.getElementById('banner') as HTMLDivElement,
  toast: document.getElementById('toast') as HTMLDivElement,
  status: document.getElementById('status') as HTMLSpanElement,
  cards: document.getElementById('cards') as HTMLDivElement,
  categories: document.getElementById('categories') as HTMLDivElement,
  newCategory: document.getElementById('new-category') as HTMLInputElement,
  addCategory: document.getElementById('add-category') as HTMLButtonElement,
  submit: document.getElementById('submit') as HTMLButtonElement,
  map: document.getElementById('map') as HTMLDivElement,
  legend: document.getElementById('legend') as HTMLDivElement,
}

function toast(message: string, kind: 'ok' | 'err' = 'err'): void {
  el.toast.textContent = message
  el.toast.className = `toast show ${kind}`
  setTimeout(() => (el.toast.className = 'toast'), 4000)
}

function renderCategories(): void {
  el.categories.innerHTML = ''
  for (const category of draft.categories) {
    const row = document.createElement('div')
    row.className = 'category-row'

    const swatch = document.createElement('input')
    swatch.type = 'color'
    swatch.value = category.color
    swatch.addEventListener('input', () => draft.setColor(category.name, swatch.value))

    const label = document.createElement('span')
    label.textContent = category.name

    const remove = document.createElement('button')
    remove.textContent = 'x'
    remove.title = 'remove category'
    remove.addEventListener('click', () => {
      draft.removeCategory(category.name)
      renderCategories()
      renderCardAssignments()
    })

    row.append(swatch, label, remove)
    el.categories.appendChild(row)
  }
  renderCardAssignments()
}

function renderCardAssignments(): void {
  for (const select of el.cards.querySelectorAll<HTMLSelectElement>('select[data-cluster]')) {
    const cluster = Number(select.dataset.cluster)
    const current = draft.assignments.get(cluster) ?? ''
    select.innerHTML =
      '<option value="">unassigned</option>' +
      draft.categories
        .map((c) => `<option value="${c.name}" ${c.name === current ? 'selected' : ''}>${c.name}</option>`)
        .join('')
  }
  updateSubmit()
}

function updateSubmit(): void {
  const total = clusterCount > 0 && draft.isTotal(clusterCount)
  el.submit.disabled = !total
  el.submit.textContent = total
    ? 'Submit assignment'
    : `Submit assignment (${draft.missingClusters(clusterCount).length} unassigned)`
}

function cardElement(card: ClusterCard): HTMLDivElement {
  const div = document.createElement('div')
  div.className = 'card'
  const title = document.createElement('h3')
  title.textContent = `Cluster ${card.clusterId} (${card.size} images)`
  if (card.empty) {
    const badge = document.createElement('span')
    badge.className = 'badge warn'
    badge.textContent = 'no representatives'
    title.appendChild(badge)
  }
  div.appendChild(title)

  const strip = document.createElement('div')
  strip.className = 'thumbs'
  for (const rep of card.reps) {
    const figure = document.createElement('figure')
    const img = document.createElement('img')
    img.src = rep.image_url
    img.alt = rep.record_id
    const cap = document.createElement('figcaption')
    cap.textContent = rep.confidence.toFixed(3) // value exactly as served
    figure.append(img, cap)
    strip.appendChild(figure)
  }
  div.appendChild(strip)

  const select = document.createElement('select')
  select.dataset.cluster = String(card.clusterId)
  select.addEventListener('change', () => {
    if (select.value) draft.assign(card.clusterId, select.value)
    else draft.unassign(card.clusterId)
    updateSubmit()
  })
  div.appendChild(select)
  return div
}

async function refreshMap(): Promise<void> {
  const doc = await api.getMapGeoJson()
  const svg = renderMapSvg(cellsFromGeoJson(doc), draft.palette())
  el.map.innerHTML = svg
  el.legend.innerHTML = draft.categories
    .map((c) => `<span class="legend-item"><i style="background:${c.color}"></i>${c.name}</span>`)
    .join('')
}

async function loadClusters(): Promise<void> {
  el.banner.classList.remove('show')
  try {
    const status = await api.getStatus()
    el.status.textContent = `checkpoint ${status.checkpoint} | ${status.m} clusters | label map v${status.labelmap_version}`
    const clusters = await api.getClusters()
    clusterCount = clusters.length
    const reps = new Map<number, Representative[]>()
    for (const cluster of clusters) {
      reps.set(cluster.cluster_id, await api.getRepresentatives(cluster.cluster_id, 8))
    }
    el.cards.innerHTML = ''
    for (const card of buildClusterCards(clusters, reps)) {
      el.cards.appendChild(cardElement(card))
    }
    renderCategories()
    try {
      await refreshMap() // show an existing map when the server already has one
    } catch {
      /* no label map submitted yet */
    }
  } catch (err) {
    el.banner.classList.add('show')
    console.error(err)
  }
}

async function submit(): Promise<void> {
  try {
    await api.postLabelMap(draft.toLabelMapDoc(clusterCount))
    await refreshMap()
    const status = await api.getStatus()
    el.status.textContent = `checkpoint ${status.checkpoint} | ${status.m} clusters | label map v${status.labelmap_version}`
    toast('label map saved, map regenerated', 'ok')
  } catch (err) {
    // Draft state is untouched on failure; the reviewer can retry.
    toast(err instanceof ApiError ? err.message : 'submission failed', 'err')
  }
}

el.addCategory.addEventListener('click', () => {
  try {
    draft.addCategory(el.newCategory.value)
    el.newCategory.value = ''
    renderCategories()
  } catch (err) {
    toast((err as Error).message)
  }
})
el.newCategory.addEventListener('keydown', (event) => {
  if (event.key === 'Enter') el.addCategory.click()
})
el.submit.addEventListener('click', () => void submit())
document.getElementById('retry')!.addEventListener('click', () => void loadClusters())

void loadClusters()
