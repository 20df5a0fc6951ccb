import type { Box } from './types'

export interface PixelRect {
  left: number
  top: number
  width: number
  height: number
}

const clamp01 = (v: number) => Math.min(1, Math.max(0, v))

/** Project a fractional box onto a rendered image of the given pixel size. */
export function fractionToPixels(box: Box, viewWidth: number, viewHeight: number): PixelRect {
  return {
    left: box.x * viewWidth,
    top: box.y * viewHeight,
    width: box.w * viewWidth,
    height: box.h * viewHeight,
  }
}

/** Normalize a pixel rect back to fractions, clamped into the unit square. */
export function pixelsToFraction(rect: PixelRect, viewWidth: number, viewHeight: number): Box {
  const x = clamp01(rect.left / viewWidth)
  const y = clamp01(rect.top / viewHeight)
  return {
    x,
    y,
    w: clamp01(rect.left / viewWidth + rect.width / viewWidth) - x,
    h: clamp01(rect.top / viewHeight + rect.height / viewHeight) - y,
  }
}

/**
 * Turn a drag gesture (any corner order) into a fractional box.
 * Returns null for degenerate drags below `minPixels` in either direction.
 */
export function dragToBox(
  startX: number, startY: number, endX: number, endY: number,
  viewWidth: number, viewHeight: number, minPixels = 2,
): Box | null {
  const left = Math.min(startX, endX)
  const top = Math.min(startY, endY)
  const width = Math.abs(endX - startX)
  const height = Math.abs(endY - startY)
  if (width < minPixels || height < minPixels) return null
  const box = pixelsToFraction({ left, top, width, height }, viewWidth, viewHeight)
  if (box.w <= 0 || box.h <= 0) return null
  return box
}

/** True when the pixel point sits inside the projected fractional box. */
export function hitTest(box: Box, px: number, py: number, viewWidth: number, viewHeight: number): boolean {
  const r = fractionToPixels(box, viewWidth, viewHeight)
  return px >= r.left && px <= r.left + r.width && py >= r.top && py <= r.top + r.height
}
