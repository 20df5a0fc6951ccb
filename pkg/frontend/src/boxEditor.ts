import { dragToBox, fractionToPixels, hitTest } from './geometry'
import type { ImageSlot } from './state'
import type { Box } from './types'

export interface BoxEditorEvents {
  onSelectProposal: (index: number) => void
  onDrawBox: (box: Box) => void
  onRejectDraw: (reason: string) => void
}

/**
 * Canvas overlay for one image: proposals are drawn in blue (selected in
 * green), a drag paints a new orange box. Click chooses the proposal under
 * the pointer; a drag below the size floor is rejected with a message.
 */
export function mountBoxEditor(
  canvas: HTMLCanvasElement,
  image: HTMLImageElement,
  slot: () => ImageSlot,
  events: BoxEditorEvents,
): { redraw: () => void } {
  const ctx = canvas.getContext('2d')
  if (!ctx) throw new Error('canvas 2d context unavailable')

  let dragStart: { x: number; y: number } | null = null
  let dragCurrent: { x: number; y: number } | null = null

  function pointer(event: MouseEvent) {
    const rect = canvas.getBoundingClientRect()
    return { x: event.clientX - rect.left, y: event.clientY - rect.top }
  }

  function strokeBox(box: Box, color: string, width: number) {
    const r = fractionToPixels(box, canvas.width, canvas.height)
    ctx!.strokeStyle = color
    ctx!.lineWidth = width
    ctx!.strokeRect(r.left, r.top, r.width, r.height)
  }

  function redraw() {
    const current = slot()
    canvas.width = image.naturalWidth > 0 ? image.width : canvas.width
    canvas.height = image.naturalHeight > 0 ? image.height : canvas.height
    ctx!.clearRect(0, 0, canvas.width, canvas.height)
    ctx!.drawImage(image, 0, 0, canvas.width, canvas.height)
    current.proposals.forEach((proposal, i) => {
      const selected = current.selectedProposal === i
      strokeBox(proposal.box, selected ? '#2e9e44' : '#3478c9', selected ? 3 : 2)
    })
    if (current.userBox) strokeBox(current.userBox, '#e8842c', 3)
    if (dragStart && dragCurrent) {
      ctx!.setLineDash([5, 4])
      ctx!.strokeStyle = '#e8842c'
      ctx!.strokeRect(
        Math.min(dragStart.x, dragCurrent.x),
        Math.min(dragStart.y, dragCurrent.y),
        Math.abs(dragCurrent.x - dragStart.x),
        Math.abs(dragCurrent.y - dragStart.y),
      )
      ctx!.setLineDash([])
    }
  }

  canvas.addEventListener('mousedown', event => {
    dragStart = pointer(event)
    dragCurrent = null
  })

  canvas.addEventListener('mousemove', event => {
    if (!dragStart) return
    dragCurrent = pointer(event)
    redraw()
  })

  canvas.addEventListener('mouseup', event => {
    const up = pointer(event)
    const start = dragStart
    dragStart = null
    dragCurrent = null
    if (!start) return
    const moved = Math.abs(up.x - start.x) >= 3 || Math.abs(up.y - start.y) >= 3
    if (!moved) {
      const index = slot().proposals.findIndex(p =>
        hitTest(p.box, up.x, up.y, canvas.width, canvas.height),
      )
      if (index >= 0) events.onSelectProposal(index)
      redraw()
      return
    }
    const box = dragToBox(start.x, start.y, up.x, up.y, canvas.width, canvas.height)
    if (box === null) {
      events.onRejectDraw('drawn box has zero area; drag a larger rectangle')
    } else {
      events.onDrawBox(box)
    }
    redraw()
  })

  return { redraw }
}
