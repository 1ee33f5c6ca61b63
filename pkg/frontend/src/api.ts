import { FormPayload, MarkingVerdict, ProgressPayload, SubmitAck } from './types.js';

/**
 * Error raised for any failed request.  `status` is the HTTP status
 * code, or 0 when the request never reached the server (connection
 * refused, DNS, aborted).  `detail` is the server's explanation when
 * it sent one.
 */
export class ApiError extends Error {
  constructor(readonly status: number, readonly detail: string) {
    super(status === 0 ? detail : `${status}: ${detail}`);
    this.name = 'ApiError';
  }
}

/** What the session needs from a marking service. */
export interface MarkingApi {
  nextForm(): Promise<FormPayload>;
  form(formId: string): Promise<FormPayload>;
  submitMarking(formId: string, verdicts: MarkingVerdict[]): Promise<SubmitAck>;
  progress(): Promise<ProgressPayload>;
}

/** Thin typed client for the marking service. */
export class FeedbackApi implements MarkingApi {
  constructor(readonly baseUrl: string = '') {}

  nextForm(): Promise<FormPayload> {
    return this.request<FormPayload>('/api/forms/next');
  }

  form(formId: string): Promise<FormPayload> {
    return this.request<FormPayload>(`/api/forms/${encodeURIComponent(formId)}`);
  }

  submitMarking(formId: string, verdicts: MarkingVerdict[]): Promise<SubmitAck> {
    return this.request<SubmitAck>(`/api/forms/${encodeURIComponent(formId)}/marking`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ verdicts }),
    });
  }

  progress(): Promise<ProgressPayload> {
    return this.request<ProgressPayload>('/api/progress');
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `network failure: ${String(err)}`);
    }
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      // non-JSON body; fall through with the status text
    }
    if (!response.ok) {
      const detail =
        body !== null && typeof body === 'object' && typeof (body as { detail?: unknown }).detail === 'string'
          ? (body as { detail: string }).detail
          : response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }
}
