import type { RankingCandidate } from './types'

export interface CandidateCard {
  individualId: string
  name: string
  confidence: number
  /** Percentage width for the confidence bar, 0..100. */
  barPercent: number
  /** Up to five thumbnails; a single null means "show placeholder". */
  thumbnails: (string | null)[]
  rank: number
}

export const MAX_CARDS = 10
export const MAX_THUMBNAILS = 5

/**
 * Build the review cards from an identify response: at most ten, ordered by
 * descending confidence (re-sorted defensively), thumbnails capped at five
 * with a placeholder when a candidate has no representative images.
 */
export function buildCards(ranking: RankingCandidate[], limit = MAX_CARDS): CandidateCard[] {
  const ordered = [...ranking].sort((a, b) => b.confidence - a.confidence)
  return ordered.slice(0, limit).map((candidate, i) => {
    const reps = candidate.representative_image_ids.slice(0, MAX_THUMBNAILS)
    return {
      individualId: candidate.individual_id,
      name: candidate.name || candidate.individual_id,
      confidence: candidate.confidence,
      barPercent: Math.round(1000 * Math.min(1, Math.max(0, candidate.confidence))) / 10,
      thumbnails: reps.length > 0 ? reps : [null],
      rank: i + 1,
    }
  })
}
