import type {
  Box,
  ConfirmationRecord,
  Detection,
  IdentifyResponse,
  UploadResponse,
} from './types'

const API = '/api/v1'

async function expectOk<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText
    try {
      const body = await response.json()
      if (body && typeof body.detail === 'string') detail = body.detail
    } catch {
      // keep the status text
    }
    throw new Error(`${response.status}: ${detail}`)
  }
  return response.json() as Promise<T>
}

export async function uploadImage(data: Blob): Promise<UploadResponse> {
  const response = await fetch(`${API}/images`, { method: 'POST', body: data })
  return expectOk<UploadResponse>(response)
}

export async function detectBoxes(imageId: string): Promise<Detection[]> {
  const response = await fetch(`${API}/images/${encodeURIComponent(imageId)}/detect`, {
    method: 'POST',
  })
  const body = await expectOk<{ detections: Detection[] }>(response)
  return body.detections
}

export async function identify(
  items: { image_id: string; box: Box }[],
  sessionId: string | null,
): Promise<IdentifyResponse> {
  const payload: Record<string, unknown> = { items }
  if (sessionId) payload.session_id = sessionId
  const response = await fetch(`${API}/identify`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(payload),
  })
  return expectOk<IdentifyResponse>(response)
}

export async function confirm(sessionId: string, individualId: string): Promise<ConfirmationRecord> {
  const response = await fetch(`${API}/confirmations`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ session_id: sessionId, individual_id: individualId }),
  })
  return expectOk<ConfirmationRecord>(response)
}
