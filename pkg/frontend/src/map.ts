import type { FeatureCollection } from './types'

export interface MapCell {
  x: number
  y: number
  size: number
  category: string
  confidence: number
  nImages: number
}

/** Axis-aligned cells from the service's grid GeoJSON, in feature order. */
export function cellsFromGeoJson(doc: FeatureCollection): MapCell[] {
  return doc.features.map((feature) => {
    const ring = feature.geometry.coordinates[0]
    const xs = ring.map((p) => p[0])
    const ys = ring.map((p) => p[1])
    const x = Math.min(...xs)
    const y = Math.min(...ys)
    return {
      x,
      y,
      size: Math.max(...xs) - x,
      category: feature.properties.category,
      confidence: feature.properties.confidence,
      nImages: feature.properties.n_images,
    }
  })
}

function escapeAttr(value: string): string {
  return value.replace(/&/g, '&amp;').replace(/"/g, '&quot;').replace(/</g, '&lt;')
}

/**
 * Render cells as an SVG string: a simple planar view of the projected
 * plane with north up (y flipped), filled by category color with opacity
 * scaled by the service-reported confidence.
 */
export function renderMapSvg(
  cells: MapCell[],
  palette: Record<string, string>,
  widthPx = 640,
): string {
  if (cells.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${widthPx}" height="${widthPx}" data-empty="true"></svg>`
  }
  const minX = Math.min(...cells.map((c) => c.x))
  const minY = Math.min(...cells.map((c) => c.y))
  const maxX = Math.max(...cells.map((c) => c.x + c.size))
  const maxY = Math.max(...cells.map((c) => c.y + c.size))
  const spanX = maxX - minX
  const spanY = maxY - minY
  const scale = widthPx / Math.max(spanX, spanY)
  const heightPx = Math.ceil(spanY * scale)

  const rects = cells
    .map((cell) => {
      const px = (cell.x - minX) * scale
      const py = (maxY - cell.y - cell.size) * scale // flip: north up
      const side = cell.size * scale
      const fill = palette[cell.category] ?? '#808080'
      const opacity = (0.25 + 0.75 * cell.confidence).toFixed(4)
      return (
        `<rect x="${px.toFixed(2)}" y="${py.toFixed(2)}" width="${side.toFixed(2)}" height="${side.toFixed(2)}"` +
        ` fill="${escapeAttr(fill)}" fill-opacity="${opacity}"` +
        ` data-category="${escapeAttr(cell.category)}" data-n="${cell.nImages}"/>`
      )
    })
    .join('')
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${widthPx}" height="${heightPx}"` +
    ` viewBox="0 0 ${widthPx} ${heightPx}">${rects}</svg>`
  )
}

/** Category of every rendered cell, in render order (for verification). */
export function renderedCategories(svg: string): string[] {
  const out: string[] = []
  const re = /data-category="([^"]*)"/g
  let match: RegExpExecArray | null
  while ((match = re.exec(svg)) !== null) out.push(match[1])
  return out
}
