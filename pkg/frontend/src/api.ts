import {
  AnnotationDto,
  CodingRow,
  GenerateResponse,
  MessageType,
  RatingDto,
  SessionManifest,
  SupportMessage,
  TaskPhase,
  Utterance,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail?: string,
  ) {
    super(message);
  }
}

export interface GenerateParams {
  t: number;
  msg_type: MessageType;
  phase_override?: TaskPhase;
  system_prompt_override?: string;
}

type FetchFn = typeof fetch;

/**
 * Thin typed client for the replay API. All console state round-trips
 * through these calls; nothing is persisted client-side.
 */
export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ApiError(
        res.status,
        body.code ?? 'HTTP_ERROR',
        body.message ?? `HTTP ${res.status}`,
        body.detail,
      );
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  async listSessions(): Promise<{ sessions: SessionManifest[]; warnings: string[] }> {
    return this.request('/api/sessions');
  }

  async transcript(sessionId: string): Promise<Utterance[]> {
    const body = await this.request<{ utterances: Utterance[] }>(
      `/api/sessions/${sessionId}/transcript`,
    );
    return body.utterances;
  }

  async brief(sessionId: string): Promise<string | null> {
    const body = await this.request<{ brief: string | null }>(
      `/api/sessions/${sessionId}/brief`,
    );
    return body.brief;
  }

  generate(sessionId: string, params: GenerateParams): Promise<GenerateResponse> {
    return this.post(`/api/sessions/${sessionId}/generate`, params);
  }

  decide(messageId: string, state: 'approved' | 'denied', reason?: string): Promise<SupportMessage> {
    return this.post(`/api/messages/${messageId}/decision`, { state, reason });
  }

  rate(messageId: string, score: number, rater: string, comment?: string): Promise<RatingDto> {
    return this.post(`/api/messages/${messageId}/rating`, { score, rater, comment });
  }

  annotate(messageId: string, label: string, note?: string): Promise<AnnotationDto> {
    return this.post(`/api/messages/${messageId}/annotation`, { label, note });
  }

  async messages(sessionId: string): Promise<SupportMessage[]> {
    const body = await this.request<{ messages: SupportMessage[] }>(
      `/api/sessions/${sessionId}/messages`,
    );
    return body.messages;
  }

  async codingRows(sessionId: string): Promise<CodingRow[]> {
    const body = await this.request<{ rows: CodingRow[] }>(
      `/api/sessions/${sessionId}/coding-view`,
    );
    return body.rows;
  }

  videoUrl(sessionId: string): string {
    return `${this.baseUrl}/media/${sessionId}/video`;
  }

  frameUrl(sessionId: string, name: string): string {
    return `${this.baseUrl}/media/${sessionId}/frames/${name}`;
  }

  exportUrl(sessionId: string): string {
    return `${this.baseUrl}/api/sessions/${sessionId}/export.csv`;
  }
}
