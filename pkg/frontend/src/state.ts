import type { Box, Detection, RankingCandidate } from './types'

/**
 * Session state machine for one review loop.
 *
 * Per image, exactly one of {selected proposal, user-drawn box} may be
 * active; an image with either is "ready". Identification needs at least
 * one ready image; confirmation is unreachable until a ranking exists
 * (mirroring the service's 409 guard). All transitions return fresh state.
 */

export interface ImageSlot {
  imageId: string
  mediaUrl: string
  proposals: Detection[]
  selectedProposal: number | null
  userBox: Box | null
}

export interface SessionState {
  images: ImageSlot[]
  sessionId: string | null
  ranking: RankingCandidate[] | null
  modelVersion: string | null
  confirmed: string | null
}

export function emptySession(): SessionState {
  return { images: [], sessionId: null, ranking: null, modelVersion: null, confirmed: null }
}

export function addImage(state: SessionState, imageId: string, mediaUrl: string): SessionState {
  if (state.images.some(s => s.imageId === imageId)) return state
  const slot: ImageSlot = {
    imageId, mediaUrl, proposals: [], selectedProposal: null, userBox: null,
  }
  return { ...state, images: [...state.images, slot] }
}

export function setProposals(state: SessionState, imageId: string, proposals: Detection[]): SessionState {
  return updateSlot(state, imageId, slot => ({ ...slot, proposals }))
}

/** Clicking a proposal selects it and clears any drawn box. */
export function selectProposal(state: SessionState, imageId: string, index: number): SessionState {
  return updateSlot(state, imageId, slot => {
    if (index < 0 || index >= slot.proposals.length) return slot
    return { ...slot, selectedProposal: index, userBox: null }
  })
}

/** Drawing a box clears any selected proposal. */
export function drawUserBox(state: SessionState, imageId: string, box: Box): SessionState {
  return updateSlot(state, imageId, slot => ({ ...slot, userBox: box, selectedProposal: null }))
}

export function clearChoice(state: SessionState, imageId: string): SessionState {
  return updateSlot(state, imageId, slot => ({ ...slot, userBox: null, selectedProposal: null }))
}

export function chosenBox(slot: ImageSlot): Box | null {
  if (slot.userBox !== null) return slot.userBox
  if (slot.selectedProposal !== null) return slot.proposals[slot.selectedProposal]?.box ?? null
  return null
}

export function isReady(slot: ImageSlot): boolean {
  return chosenBox(slot) !== null
}

export function readySlots(state: SessionState): ImageSlot[] {
  return state.images.filter(isReady)
}

export function canIdentify(state: SessionState): boolean {
  return readySlots(state).length >= 1
}

export function rankingReceived(
  state: SessionState, sessionId: string, modelVersion: string,
  ranking: RankingCandidate[],
): SessionState {
  return { ...state, sessionId, modelVersion, ranking, confirmed: null }
}

export function canConfirm(state: SessionState): boolean {
  return state.ranking !== null && state.sessionId !== null && state.confirmed === null
}

/** Throws when confirmation is not reachable yet; callers gate on canConfirm. */
export function markConfirmed(state: SessionState, individualId: string): SessionState {
  if (!canConfirm(state)) {
    throw new Error('confirmation requires a ranking')
  }
  return { ...state, confirmed: individualId }
}

function updateSlot(
  state: SessionState, imageId: string,
  update: (slot: ImageSlot) => ImageSlot,
): SessionState {
  const images = state.images.map(s => (s.imageId === imageId ? update(s) : s))
  return { ...state, images }
}
