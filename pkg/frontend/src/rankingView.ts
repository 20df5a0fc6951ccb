import { buildCards } from './cards'
import type { RankingCandidate } from './types'
import { UNKNOWN_INDIVIDUAL } from './types'

export interface RankingViewEvents {
  onConfirm: (individualId: string) => void
}

const PLACEHOLDER_SVG =
  'data:image/svg+xml;utf8,' +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="96" height="72">' +
    '<rect width="96" height="72" fill="#d8d8d8"/>' +
    '<text x="48" y="40" text-anchor="middle" font-size="11" fill="#666">no image</text></svg>',
  )

function thumbnailUrl(imageId: string | null): string {
  // Representative ids refer to gallery training images; the service serves
  // uploaded media only, so unknown ids fall back to the placeholder.
  return imageId === null ? PLACEHOLDER_SVG : `/media/${encodeURIComponent(imageId)}.png`
}

export function renderRanking(
  container: HTMLElement,
  ranking: RankingCandidate[],
  confirmed: string | null,
  events: RankingViewEvents,
): void {
  container.innerHTML = ''
  const cards = buildCards(ranking)
  for (const card of cards) {
    const el = document.createElement('div')
    el.className = 'candidate-card'
    const bar = `<div class="confidence-bar"><div style="width:${card.barPercent}%"></div></div>`
    const thumbs = card.thumbnails
      .map(t =>
        `<img class="thumb" src="${thumbnailUrl(t)}" alt="" ` +
        `onerror="this.onerror=null;this.src='${PLACEHOLDER_SVG}'">`)
      .join('')
    el.innerHTML = `
      <div class="card-head">
        <span class="rank">#${card.rank}</span>
        <span class="name">${card.name}</span>
        <span class="confidence">${(card.confidence * 100).toFixed(1)}%</span>
      </div>
      ${bar}
      <div class="thumbs">${thumbs}</div>
    `
    const button = document.createElement('button')
    button.textContent = confirmed === card.individualId ? 'confirmed' : 'confirm'
    button.disabled = confirmed !== null
    button.addEventListener('click', () => events.onConfirm(card.individualId))
    el.appendChild(button)
    container.appendChild(el)
  }

  const unknown = document.createElement('button')
  unknown.className = 'unknown-button'
  unknown.textContent =
    confirmed === UNKNOWN_INDIVIDUAL ? 'marked as unknown' : 'none of these (unknown)'
  unknown.disabled = confirmed !== null
  unknown.addEventListener('click', () => events.onConfirm(UNKNOWN_INDIVIDUAL))
  container.appendChild(unknown)
}
