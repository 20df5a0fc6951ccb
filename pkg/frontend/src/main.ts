import * as api from './api'
import { mountBoxEditor } from './boxEditor'
import { renderRanking } from './rankingView'
import {
  SessionState,
  addImage,
  canConfirm,
  canIdentify,
  chosenBox,
  drawUserBox,
  emptySession,
  isReady,
  markConfirmed,
  rankingReceived,
  readySlots,
  selectProposal,
  setProposals,
} from './state'

let state: SessionState = emptySession()
const editors = new Map<string, { redraw: () => void }>()

const fileInput = document.getElementById('file-input') as HTMLInputElement
const imageList = document.getElementById('image-list') as HTMLElement
const identifyButton = document.getElementById('identify-button') as HTMLButtonElement
const rankingContainer = document.getElementById('ranking') as HTMLElement
const statusLine = document.getElementById('status') as HTMLElement

function setState(next: SessionState) {
  state = next
  identifyButton.disabled = !canIdentify(state)
  for (const editor of editors.values()) editor.redraw()
  if (state.ranking) {
    renderRanking(rankingContainer, state.ranking, state.confirmed, {
      onConfirm: individualId => {
        if (!canConfirm(state)) return
        void confirmCandidate(individualId)
      },
    })
  }
}

function say(message: string) {
  statusLine.textContent = message
}

async function handleFiles(files: FileList | null) {
  if (!files) return
  for (const file of Array.from(files)) {
    try {
      const uploaded = await api.uploadImage(file)
      if (state.images.some(s => s.imageId === uploaded.image_id)) continue
      setState(addImage(state, uploaded.image_id, uploaded.media_url))
      attachImageCard(uploaded.image_id, uploaded.media_url)
      try {
        const proposals = await api.detectBoxes(uploaded.image_id)
        setState(setProposals(state, uploaded.image_id, proposals))
      } catch (error) {
        say(`detector unavailable: ${(error as Error).message}; draw a box by hand`)
      }
    } catch (error) {
      say(`upload failed: ${(error as Error).message}`)
    }
  }
}

function attachImageCard(imageId: string, mediaUrl: string) {
  const card = document.createElement('div')
  card.className = 'image-card'
  const image = new Image()
  image.src = mediaUrl
  const canvas = document.createElement('canvas')
  canvas.className = 'editor-canvas'
  const caption = document.createElement('div')
  caption.className = 'caption'
  caption.textContent = `${imageId}: click a proposal or drag a box`
  card.append(canvas, caption)
  imageList.appendChild(card)

  const slot = () => state.images.find(s => s.imageId === imageId)!
  const editor = mountBoxEditor(canvas, image, slot, {
    onSelectProposal: index => {
      setState(selectProposal(state, imageId, index))
      caption.textContent = `${imageId}: proposal ${index + 1} selected`
    },
    onDrawBox: box => {
      setState(drawUserBox(state, imageId, box))
      caption.textContent = `${imageId}: using drawn box`
    },
    onRejectDraw: reason => say(reason),
  })
  editors.set(imageId, editor)
  image.addEventListener('load', editor.redraw)
}

async function runIdentify() {
  const ready = readySlots(state)
  if (ready.length === 0) return
  const items = ready.map(slot => ({ image_id: slot.imageId, box: chosenBox(slot)! }))
  identifyButton.disabled = true
  say(`identifying from ${items.length} image(s)...`)
  try {
    const response = await api.identify(items, state.sessionId)
    setState(rankingReceived(state, response.session_id, response.model_version, response.ranking))
    say(`model ${response.model_version}: top candidate ${response.ranking[0]?.name ?? 'n/a'}`)
  } catch (error) {
    // State is untouched on failure, so the same request can be retried.
    say(`identify failed: ${(error as Error).message} (retry when ready)`)
  } finally {
    identifyButton.disabled = !canIdentify(state)
  }
}

async function confirmCandidate(individualId: string) {
  try {
    await api.confirm(state.sessionId!, individualId)
    setState(markConfirmed(state, individualId))
    say(`confirmed ${individualId}`)
  } catch (error) {
    say(`confirmation failed: ${(error as Error).message}`)
  }
}

fileInput.addEventListener('change', () => void handleFiles(fileInput.files))
identifyButton.addEventListener('click', () => void runIdentify())
identifyButton.disabled = true
say('upload one or more photos of the same animal to begin')

// Exposed for debugging in the browser console.
;(window as unknown as { herdid: unknown }).herdid = {
  get state() {
    return state
  },
  isReady,
}
