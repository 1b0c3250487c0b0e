import type { ModelInfo, PredictRequest, PredictResponse } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly error: string,
    readonly detail: string
  ) {
    super(`${error}: ${detail}`);
  }
}

async function raiseForError(response: Response): Promise<void> {
  if (response.ok) return;
  let error = 'http_error';
  let detail = `status ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body === 'object') {
      error = body.error ?? error;
      detail = body.detail ?? detail;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, error, String(detail));
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async listModels(): Promise<ModelInfo[]> {
    const response = await fetch(`${this.baseUrl}/models`);
    await raiseForError(response);
    return response.json();
  }

  async predict(request: PredictRequest): Promise<PredictResponse> {
    const response = await fetch(`${this.baseUrl}/predict`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(request),
    });
    await raiseForError(response);
    return response.json();
  }
}
