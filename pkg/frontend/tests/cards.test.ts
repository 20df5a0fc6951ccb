import { describe, expect, it } from 'vitest'
import { buildCards, MAX_CARDS } from '../src/cards'
import type { RankingCandidate } from '../src/types'

function candidates(n: number): RankingCandidate[] {
  const weights = Array.from({ length: n }, (_, i) => n - i)
  const total = weights.reduce((a, b) => a + b, 0)
  return weights.map((w, i) => ({
    individual_id: `e${String(i).padStart(3, '0')}`,
    name: `Elephant ${i}`,
    confidence: w / total,
    representative_image_ids: Array.from({ length: i % 7 }, (_, j) => `e${i}_${j}`),
  }))
}

describe('buildCards', () => {
  it('shows exactly min(10, K) cards', () => {
    expect(buildCards(candidates(25))).toHaveLength(MAX_CARDS)
    expect(buildCards(candidates(4))).toHaveLength(4)
    expect(buildCards(candidates(10))).toHaveLength(10)
  })

  it('keeps descending confidence order with ranks 1..n', () => {
    const cards = buildCards(candidates(12))
    for (let i = 1; i < cards.length; i++) {
      expect(cards[i].confidence).toBeLessThanOrEqual(cards[i - 1].confidence)
      expect(cards[i].rank).toBe(i + 1)
    }
  })

  it('reorders a shuffled response defensively', () => {
    const shuffled = [...candidates(6)].reverse()
    const cards = buildCards(shuffled)
    expect(cards[0].individualId).toBe('e000')
  })

  it('caps thumbnails at five', () => {
    const many = candidates(8)
    many[0].representative_image_ids = ['a', 'b', 'c', 'd', 'e', 'f', 'g']
    const cards = buildCards(many)
    expect(cards[0].thumbnails).toHaveLength(5)
  })

  it('uses a placeholder when a candidate has no representatives', () => {
    const bare = candidates(3)
    bare[0].representative_image_ids = []
    const cards = buildCards(bare)
    expect(cards[0].thumbnails).toEqual([null])
  })

  it('confidence bar percent stays in 0..100', () => {
    for (const card of buildCards(candidates(15))) {
      expect(card.barPercent).toBeGreaterThanOrEqual(0)
      expect(card.barPercent).toBeLessThanOrEqual(100)
    }
  })
})
