/** Shared payload shapes for the /api/v1 service. Box fields are fractions of image size. */

export interface Box {
  x: number
  y: number
  w: number
  h: number
}

export interface Detection {
  box: Box
  score: number
}

export interface RankingCandidate {
  individual_id: string
  name: string
  confidence: number
  representative_image_ids: string[]
}

export interface IdentifyResponse {
  session_id: string
  model_version: string
  query_image_count: number
  ranking: RankingCandidate[]
}

export interface UploadResponse {
  image_id: string
  media_url: string
}

export interface ConfirmationRecord {
  session_id: string
  individual_id: string
  image_ids: string[]
  confirmed_at: string
}

/** Sentinel the reviewer picks when no candidate matches. */
export const UNKNOWN_INDIVIDUAL = 'unknown'
